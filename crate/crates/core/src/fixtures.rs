//! The two reference instances used throughout the tests, the CLI golden files
//! and the benchmarks, together with their reference certificate chains.

use nalgebra::{DMatrix, DVector};

use crate::model::{ConeBlock, ConicProgram, YElement};

fn orthant(v: &[f64]) -> YElement {
    YElement::from_vector(DVector::from_column_slice(v))
}

fn sym3(v: [f64; 9]) -> YElement {
    YElement::from_matrix(DMatrix::from_row_slice(3, 3, &v))
}

/// Linear system in five inequalities whose feasible slacks all have
/// support `{1}`. The objective `x_1` is bounded with value 0.
pub fn lp_example() -> ConicProgram {
    ConicProgram::new(
        "lp-example",
        vec![ConeBlock::Orthant(5)],
        vec![
            orthant(&[1.0, 0.0, 0.0, 0.0, 0.0]),
            orthant(&[0.0, -1.0, 1.0, 0.0, 0.0]),
            orthant(&[0.0, 1.0, 0.0, -1.0, 1.0]),
        ],
        orthant(&[0.0; 5]),
        DVector::from_vec(vec![1.0, 0.0, 0.0]),
    )
    .expect("valid fixture")
}

/// Two-step reducing chain `y_1, y_2` for [`lp_example`].
pub fn lp_example_chain() -> Vec<YElement> {
    vec![
        orthant(&[0.0, 0.0, 0.0, 1.0, 1.0]),
        orthant(&[0.0, 1.0, 1.0, 0.0, -1.0]),
    ]
}

/// One-step reducing certificate for [`lp_example`].
pub fn lp_example_one_step() -> Vec<YElement> {
    vec![orthant(&[0.0, 1.0, 1.0, 2.0, 1.0])]
}

/// `sup x_1` over a 3x3 linear matrix inequality whose only feasible slack is
/// `diag(1,0,0)`. The primal value 0 is attained; the standard dual has
/// infimum 0 which is not attained.
pub fn sdp_example() -> ConicProgram {
    ConicProgram::new(
        "sdp-example",
        vec![ConeBlock::Psd(3)],
        vec![
            sym3([0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            sym3([0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]),
        ],
        sym3([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        DVector::from_vec(vec![1.0, 0.0]),
    )
    .expect("valid fixture")
}

/// Two-step reducing chain `y_1, y_2` for [`sdp_example`].
pub fn sdp_example_chain() -> Vec<YElement> {
    vec![
        sym3([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
        sym3([0.0, 0.0, -1.0, 0.0, 2.0, 0.0, -1.0, 0.0, 0.0]),
    ]
}

/// Splitting of [`sdp_example_chain`] into `(u_i, v_i)`, `i = 1, 2`.
pub fn sdp_example_decomposition() -> Vec<(YElement, YElement)> {
    vec![
        (
            sym3([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
            sym3([0.0; 9]),
        ),
        (
            sym3([0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0]),
            sym3([0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0]),
        ),
    ]
}

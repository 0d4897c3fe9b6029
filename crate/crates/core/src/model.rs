//! Conic linear programs over products of nonnegative orthants and PSD cones.
//!
//! A [`ConicProgram`] describes the primal
//!
//! ```text
//!     sup  <c, x>   s.t.   b - sum_i x_i a_i  in  K
//! ```
//!
//! and, implicitly, its dual `inf <b, y> s.t. A*y = c, y in K*`. Both cones
//! used here are self-dual, so `K* = K` block by block.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::ModelError;
use crate::linalg::{min_eigenvalue, symmetrize};

/// One factor of the product cone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConeBlock {
    /// Nonnegative orthant of the given dimension.
    Orthant(usize),
    /// Cone of positive semidefinite matrices of the given order.
    Psd(usize),
}

impl ConeBlock {
    /// Dimension of the ambient space of the block (symmetric matrices for PSD).
    pub fn ambient_dim(&self) -> usize {
        match *self {
            ConeBlock::Orthant(d) => d,
            ConeBlock::Psd(n) => n * (n + 1) / 2,
        }
    }

    /// Vector length or matrix order.
    pub fn size(&self) -> usize {
        match *self {
            ConeBlock::Orthant(d) | ConeBlock::Psd(d) => d,
        }
    }

    /// Length of the longest chain of faces of the block cone.
    pub fn face_chain_length(&self) -> usize {
        self.size() + 1
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.size() == 0 {
            return Err(ModelError::InvalidBlock(format!("{self} has zero size")));
        }
        Ok(())
    }
}

impl fmt::Display for ConeBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConeBlock::Orthant(d) => write!(f, "orthant:{d}"),
            ConeBlock::Psd(n) => write!(f, "psd:{n}"),
        }
    }
}

/// Total ambient dimension of a block structure.
pub fn ambient_dim(blocks: &[ConeBlock]) -> usize {
    blocks.iter().map(ConeBlock::ambient_dim).sum()
}

/// Payload of one block of a [`YElement`].
#[derive(Clone, Debug, PartialEq)]
pub enum BlockValue {
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
}

impl BlockValue {
    pub fn zeros(block: ConeBlock) -> Self {
        match block {
            ConeBlock::Orthant(d) => BlockValue::Vector(DVector::zeros(d)),
            ConeBlock::Psd(n) => BlockValue::Matrix(DMatrix::zeros(n, n)),
        }
    }

    pub fn kind(&self) -> ConeBlock {
        match self {
            BlockValue::Vector(v) => ConeBlock::Orthant(v.len()),
            BlockValue::Matrix(m) => ConeBlock::Psd(m.nrows()),
        }
    }

    pub fn as_vector(&self) -> Option<&DVector<f64>> {
        match self {
            BlockValue::Vector(v) => Some(v),
            BlockValue::Matrix(_) => None,
        }
    }

    pub fn as_matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            BlockValue::Matrix(m) => Some(m),
            BlockValue::Vector(_) => None,
        }
    }

    fn dot(&self, other: &BlockValue) -> f64 {
        match (self, other) {
            (BlockValue::Vector(a), BlockValue::Vector(b)) => a.dot(b),
            (BlockValue::Matrix(a), BlockValue::Matrix(b)) => a.dot(b),
            _ => unreachable!("structure checked by caller"),
        }
    }

    fn axpy(&mut self, alpha: f64, other: &BlockValue) {
        match (self, other) {
            (BlockValue::Vector(a), BlockValue::Vector(b)) => a.axpy(alpha, b, 1.0),
            (BlockValue::Matrix(a), BlockValue::Matrix(b)) => *a += b * alpha,
            _ => panic!("block kind mismatch in axpy"),
        }
    }

    fn scale_mut(&mut self, alpha: f64) {
        match self {
            BlockValue::Vector(a) => *a *= alpha,
            BlockValue::Matrix(a) => *a *= alpha,
        }
    }

    /// Distance below the cone: `max(0, -min entry)` or `max(0, -λ_min)`.
    pub fn cone_violation(&self) -> f64 {
        let low = match self {
            BlockValue::Vector(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
            BlockValue::Matrix(m) => min_eigenvalue(m),
        };
        if low.is_finite() {
            (-low).max(0.0)
        } else {
            0.0
        }
    }
}

/// An element of the product space `Y` housing `b`, the `a_i`, slacks and dual points.
#[derive(Clone, Debug, PartialEq)]
pub struct YElement {
    pub blocks: Vec<BlockValue>,
}

impl YElement {
    pub fn zeros(structure: &[ConeBlock]) -> Self {
        Self {
            blocks: structure.iter().map(|&b| BlockValue::zeros(b)).collect(),
        }
    }

    /// Builds an element, symmetrizing matrix blocks.
    pub fn new(blocks: Vec<BlockValue>) -> Result<Self, ModelError> {
        let mut out = Vec::with_capacity(blocks.len());
        for b in blocks {
            match b {
                BlockValue::Matrix(m) => {
                    if m.nrows() != m.ncols() {
                        return Err(ModelError::InvalidBlock(format!(
                            "matrix block is {}x{}",
                            m.nrows(),
                            m.ncols()
                        )));
                    }
                    out.push(BlockValue::Matrix(symmetrize(&m)));
                }
                v => out.push(v),
            }
        }
        Ok(Self { blocks: out })
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        Self {
            blocks: vec![BlockValue::Matrix(symmetrize(&m))],
        }
    }

    pub fn from_vector(v: DVector<f64>) -> Self {
        Self {
            blocks: vec![BlockValue::Vector(v)],
        }
    }

    /// The identity of the cone: all-ones vectors and identity matrices.
    pub fn identity(structure: &[ConeBlock]) -> Self {
        Self {
            blocks: structure
                .iter()
                .map(|&b| match b {
                    ConeBlock::Orthant(d) => BlockValue::Vector(DVector::from_element(d, 1.0)),
                    ConeBlock::Psd(n) => BlockValue::Matrix(DMatrix::identity(n, n)),
                })
                .collect(),
        }
    }

    pub fn structure(&self) -> Vec<ConeBlock> {
        self.blocks.iter().map(BlockValue::kind).collect()
    }

    pub fn matches(&self, structure: &[ConeBlock]) -> bool {
        self.blocks.len() == structure.len()
            && self
                .blocks
                .iter()
                .zip(structure)
                .all(|(b, s)| b.kind() == *s)
    }

    pub fn check_structure(&self, structure: &[ConeBlock]) -> Result<(), ModelError> {
        if self.matches(structure) {
            Ok(())
        } else {
            Err(ModelError::StructureMismatch(format!(
                "element has {}, expected {}",
                describe(&self.structure()),
                describe(structure)
            )))
        }
    }

    pub fn block(&self, k: usize) -> &BlockValue {
        &self.blocks[k]
    }

    pub fn matrix(&self, k: usize) -> &DMatrix<f64> {
        self.blocks[k].as_matrix().expect("PSD block")
    }

    pub fn vector(&self, k: usize) -> &DVector<f64> {
        self.blocks[k].as_vector().expect("orthant block")
    }

    /// Trace/Euclidean inner product; panics on structure mismatch.
    pub fn dot(&self, other: &YElement) -> f64 {
        assert_eq!(
            self.blocks.len(),
            other.blocks.len(),
            "block count mismatch"
        );
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| {
                assert_eq!(a.kind(), b.kind(), "block kind mismatch");
                a.dot(b)
            })
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| match b {
                BlockValue::Vector(v) => v.amax(),
                BlockValue::Matrix(m) => m.amax(),
            })
            .fold(0.0, f64::max)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &YElement) {
        assert_eq!(
            self.blocks.len(),
            other.blocks.len(),
            "block count mismatch"
        );
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            a.axpy(alpha, b);
        }
    }

    pub fn scaled(&self, alpha: f64) -> YElement {
        let mut out = self.clone();
        out.blocks.iter_mut().for_each(|b| b.scale_mut(alpha));
        out
    }

    pub fn add(&self, other: &YElement) -> YElement {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &YElement) -> YElement {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Largest per-block distance below the (self-dual) cone.
    pub fn cone_violation(&self) -> f64 {
        self.blocks
            .iter()
            .map(BlockValue::cone_violation)
            .fold(0.0, f64::max)
    }

    /// Isometric vectorization: orthant entries, then PSD upper triangles with
    /// off-diagonal entries scaled by sqrt(2).
    pub fn to_svec(&self) -> DVector<f64> {
        let mut out = Vec::with_capacity(ambient_dim(&self.structure()));
        for b in &self.blocks {
            match b {
                BlockValue::Vector(v) => out.extend(v.iter()),
                BlockValue::Matrix(m) => {
                    let n = m.nrows();
                    for j in 0..n {
                        for i in 0..=j {
                            let w = if i == j {
                                1.0
                            } else {
                                std::f64::consts::SQRT_2
                            };
                            out.push(w * m[(i, j)]);
                        }
                    }
                }
            }
        }
        DVector::from_vec(out)
    }

    /// Inverse of [`YElement::to_svec`].
    pub fn from_svec(structure: &[ConeBlock], v: &[f64]) -> Result<Self, ModelError> {
        let need = ambient_dim(structure);
        if v.len() != need {
            return Err(ModelError::LengthMismatch {
                expected: need,
                got: v.len(),
            });
        }
        let mut pos = 0;
        let mut blocks = Vec::with_capacity(structure.len());
        for &blk in structure {
            match blk {
                ConeBlock::Orthant(d) => {
                    blocks.push(BlockValue::Vector(DVector::from_column_slice(
                        &v[pos..pos + d],
                    )));
                    pos += d;
                }
                ConeBlock::Psd(n) => {
                    let mut m = DMatrix::zeros(n, n);
                    for j in 0..n {
                        for i in 0..=j {
                            let w = if i == j {
                                1.0
                            } else {
                                std::f64::consts::FRAC_1_SQRT_2
                            };
                            m[(i, j)] = w * v[pos];
                            m[(j, i)] = m[(i, j)];
                            pos += 1;
                        }
                    }
                    blocks.push(BlockValue::Matrix(m));
                }
            }
        }
        Ok(Self { blocks })
    }
}

pub fn describe(structure: &[ConeBlock]) -> String {
    structure
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

/// `⟨y1, y2⟩`, summed over blocks.
pub fn inner_product(y1: &YElement, y2: &YElement) -> Result<f64, ModelError> {
    y2.check_structure(&y1.structure())?;
    Ok(y1.dot(y2))
}

/// A conic linear program `sup ⟨c,x⟩ s.t. b − Ax ∈ K`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConicProgram {
    pub name: String,
    pub blocks: Vec<ConeBlock>,
    pub a: Vec<YElement>,
    pub b: YElement,
    pub c: DVector<f64>,
}

impl ConicProgram {
    pub fn new(
        name: impl Into<String>,
        blocks: Vec<ConeBlock>,
        a: Vec<YElement>,
        b: YElement,
        c: DVector<f64>,
    ) -> Result<Self, ModelError> {
        if blocks.is_empty() {
            return Err(ModelError::InvalidBlock("no cone blocks".into()));
        }
        for blk in &blocks {
            blk.validate()?;
        }
        if a.len() != c.len() {
            return Err(ModelError::LengthMismatch {
                expected: a.len(),
                got: c.len(),
            });
        }
        let sym = |y: YElement| -> Result<YElement, ModelError> {
            y.check_structure(&blocks)?;
            YElement::new(y.blocks)
        };
        let a = a.into_iter().map(sym).collect::<Result<Vec<_>, _>>()?;
        let b = sym(b)?;
        Ok(Self {
            name: name.into(),
            blocks,
            a,
            b,
            c,
        })
    }

    /// Number of primal variables.
    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn ambient_dim(&self) -> usize {
        ambient_dim(&self.blocks)
    }

    /// `Ax = Σ x_i a_i`.
    pub fn apply(&self, x: &[f64]) -> Result<YElement, ModelError> {
        if x.len() != self.m() {
            return Err(ModelError::LengthMismatch {
                expected: self.m(),
                got: x.len(),
            });
        }
        let mut out = YElement::zeros(&self.blocks);
        for (xi, ai) in x.iter().zip(&self.a) {
            if *xi != 0.0 {
                out.axpy(*xi, ai);
            }
        }
        Ok(out)
    }

    /// `A*y = (⟨a_1,y⟩, …, ⟨a_m,y⟩)`.
    pub fn adjoint(&self, y: &YElement) -> Result<DVector<f64>, ModelError> {
        y.check_structure(&self.blocks)?;
        Ok(DVector::from_iterator(
            self.m(),
            self.a.iter().map(|ai| ai.dot(y)),
        ))
    }

    /// `b − Ax`.
    pub fn slack(&self, x: &[f64]) -> Result<YElement, ModelError> {
        Ok(self.b.sub(&self.apply(x)?))
    }

    /// Rows `(a_1, …, a_m, b)` whose common orthogonal complement is `L = N((A,b)*)`.
    pub fn homogenized_rows(&self) -> Vec<YElement> {
        let mut rows = self.a.clone();
        rows.push(self.b.clone());
        rows
    }

    /// The same data with every orthant block replaced by a diagonal PSD block.
    pub fn lift_orthants(&self) -> ConicProgram {
        let blocks: Vec<ConeBlock> = self
            .blocks
            .iter()
            .map(|b| ConeBlock::Psd(b.size()))
            .collect();
        let lift = |y: &YElement| YElement {
            blocks: y
                .blocks
                .iter()
                .map(|b| match b {
                    BlockValue::Vector(v) => BlockValue::Matrix(DMatrix::from_diagonal(v)),
                    m => m.clone(),
                })
                .collect(),
        };
        ConicProgram {
            name: self.name.clone(),
            blocks,
            a: self.a.iter().map(lift).collect(),
            b: lift(&self.b),
            c: self.c.clone(),
        }
    }
}

/// See [`ConicProgram::adjoint`].
pub fn adjoint_apply(p: &ConicProgram, y: &YElement) -> Result<DVector<f64>, ModelError> {
    p.adjoint(y)
}

/// See [`ConicProgram::slack`].
pub fn primal_slack(p: &ConicProgram, x: &[f64]) -> Result<YElement, ModelError> {
    p.slack(x)
}

/// Outcome of [`weak_duality_gap`]. The gap is reported even when an input
/// is flagged infeasible.
#[derive(Clone, Debug, PartialEq)]
pub struct GapReport {
    pub gap: f64,
    pub primal_violation: f64,
    pub dual_cone_violation: f64,
    pub dual_residual: f64,
    pub primal_feasible: bool,
    pub dual_feasible: bool,
}

/// `⟨b,y⟩ − ⟨c,x⟩` with feasibility flags at tolerance `tol`.
pub fn weak_duality_gap(
    p: &ConicProgram,
    x: &[f64],
    y: &YElement,
    tol: f64,
) -> Result<GapReport, ModelError> {
    let slack = p.slack(x)?;
    let aty = p.adjoint(y)?;
    let primal_violation = slack.cone_violation();
    let dual_cone_violation = y.cone_violation();
    let dual_residual = (aty - &p.c).norm();
    let cx: f64 = p.c.iter().zip(x).map(|(a, b)| a * b).sum();
    Ok(GapReport {
        gap: p.b.dot(y) - cx,
        primal_violation,
        dual_cone_violation,
        dual_residual,
        primal_feasible: primal_violation <= tol,
        dual_feasible: dual_cone_violation <= tol && dual_residual <= tol,
    })
}

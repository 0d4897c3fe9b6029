//! Faces of products of orthants and PSD cones.
//!
//! An orthant face is given by its support `S` (the coordinates allowed to be
//! positive). A PSD face is `{Q Z Qᵀ : Z ⪰ 0}` for an `n×r` matrix `Q` with
//! orthonormal columns; `r = 0` is `{0}` and `r = n` the whole cone.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{FaceError, ModelError};
use crate::linalg::{orthogonal_complement, subspace_distance, sym_eig, sym_pinv, symmetrize};
use crate::model::{BlockValue, ConeBlock, YElement};

/// Face of a single block.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockFace {
    Orthant { dim: usize, support: Vec<usize> },
    Psd { n: usize, basis: DMatrix<f64> },
}

impl BlockFace {
    pub fn full(block: ConeBlock) -> Self {
        match block {
            ConeBlock::Orthant(d) => BlockFace::Orthant {
                dim: d,
                support: (0..d).collect(),
            },
            ConeBlock::Psd(n) => BlockFace::Psd {
                n,
                basis: DMatrix::identity(n, n),
            },
        }
    }

    pub fn zero(block: ConeBlock) -> Self {
        match block {
            ConeBlock::Orthant(d) => BlockFace::Orthant {
                dim: d,
                support: Vec::new(),
            },
            ConeBlock::Psd(n) => BlockFace::Psd {
                n,
                basis: DMatrix::zeros(n, 0),
            },
        }
    }

    pub fn block(&self) -> ConeBlock {
        match self {
            BlockFace::Orthant { dim, .. } => ConeBlock::Orthant(*dim),
            BlockFace::Psd { n, .. } => ConeBlock::Psd(*n),
        }
    }

    /// Support size or PSD rank.
    pub fn rank(&self) -> usize {
        match self {
            BlockFace::Orthant { support, .. } => support.len(),
            BlockFace::Psd { basis, .. } => basis.ncols(),
        }
    }

    pub fn is_full(&self) -> bool {
        self.rank() == self.block().size()
    }

    /// The cone of the compressed coordinates, `None` when the face is `{0}`.
    pub fn compressed_block(&self) -> Option<ConeBlock> {
        match self.rank() {
            0 => None,
            r => Some(match self {
                BlockFace::Orthant { .. } => ConeBlock::Orthant(r),
                BlockFace::Psd { .. } => ConeBlock::Psd(r),
            }),
        }
    }

    fn compress(&self, v: &BlockValue) -> BlockValue {
        match (self, v) {
            (BlockFace::Orthant { support, .. }, BlockValue::Vector(x)) => {
                BlockValue::Vector(x.select_rows(support.iter()))
            }
            (BlockFace::Psd { basis, .. }, BlockValue::Matrix(x)) => {
                BlockValue::Matrix(symmetrize(&(basis.transpose() * x * basis)))
            }
            _ => panic!("block kind mismatch in compress"),
        }
    }

    fn expand(&self, v: Option<&BlockValue>) -> BlockValue {
        match self {
            BlockFace::Orthant { dim, support } => {
                let mut out = nalgebra::DVector::zeros(*dim);
                if let Some(BlockValue::Vector(z)) = v {
                    for (k, &i) in support.iter().enumerate() {
                        out[i] = z[k];
                    }
                }
                BlockValue::Vector(out)
            }
            BlockFace::Psd { n, basis } => match v {
                Some(BlockValue::Matrix(z)) => {
                    BlockValue::Matrix(symmetrize(&(basis * z * basis.transpose())))
                }
                _ => BlockValue::Matrix(DMatrix::zeros(*n, *n)),
            },
        }
    }
}

/// A face of a product cone, one [`BlockFace`] per block.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceRep {
    pub blocks: Vec<BlockFace>,
}

impl FaceRep {
    pub fn full(structure: &[ConeBlock]) -> Self {
        Self {
            blocks: structure.iter().map(|&b| BlockFace::full(b)).collect(),
        }
    }

    pub fn zero(structure: &[ConeBlock]) -> Self {
        Self {
            blocks: structure.iter().map(|&b| BlockFace::zero(b)).collect(),
        }
    }

    pub fn structure(&self) -> Vec<ConeBlock> {
        self.blocks.iter().map(BlockFace::block).collect()
    }

    pub fn is_full(&self) -> bool {
        self.blocks.iter().all(BlockFace::is_full)
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().all(|b| b.rank() == 0)
    }

    /// Per-block support sizes / ranks.
    pub fn ranks(&self) -> Vec<usize> {
        self.blocks.iter().map(BlockFace::rank).collect()
    }

    /// Dimension of the linear span of the face.
    pub fn dim(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match b {
                BlockFace::Orthant { support, .. } => support.len(),
                BlockFace::Psd { basis, .. } => {
                    let r = basis.ncols();
                    r * (r + 1) / 2
                }
            })
            .sum()
    }

    /// Cone structure in compressed coordinates; blocks where the face is `{0}` are dropped.
    pub fn compressed_structure(&self) -> Vec<ConeBlock> {
        self.blocks
            .iter()
            .filter_map(BlockFace::compressed_block)
            .collect()
    }

    /// Compressed coordinates `C(y)`: `y_S` or `QᵀyQ`, skipping `{0}` blocks.
    pub fn compress(&self, y: &YElement) -> YElement {
        YElement {
            blocks: self
                .blocks
                .iter()
                .zip(&y.blocks)
                .filter(|(f, _)| f.rank() > 0)
                .map(|(f, v)| f.compress(v))
                .collect(),
        }
    }

    /// Adjoint of [`FaceRep::compress`]: scatter `z_S` or form `QzQᵀ`.
    pub fn expand(&self, z: &YElement) -> YElement {
        let mut it = z.blocks.iter();
        YElement {
            blocks: self
                .blocks
                .iter()
                .map(|f| {
                    if f.rank() > 0 {
                        f.expand(it.next())
                    } else {
                        f.expand(None)
                    }
                })
                .collect(),
        }
    }

    /// Orthogonal projection onto the linear span of the face.
    pub fn project(&self, y: &YElement) -> YElement {
        self.expand(&self.compress(y))
    }

    /// Component of `y` in the orthogonal complement `F^⊥` of the span.
    pub fn project_complement(&self, y: &YElement) -> YElement {
        y.sub(&self.project(y))
    }

    /// `x ∈ F` within `tol`: `x` lies in the span and its compression is in the cone.
    pub fn contains(&self, x: &YElement, tol: f64) -> bool {
        self.project_complement(x).max_abs() <= tol && self.compress(x).cone_violation() <= tol
    }

    /// Smallest eigenvalue/entry of the compression of `s`; positive iff `s ∈ ri F`
    /// (provided `s` lies in the span). `+inf` for the face `{0}`.
    pub fn interior_margin(&self, s: &YElement) -> f64 {
        let z = self.compress(s);
        z.blocks
            .iter()
            .map(|b| match b {
                BlockValue::Vector(v) => v.min(),
                BlockValue::Matrix(m) => crate::linalg::min_eigenvalue(m),
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// `self ⊆ other` within `tol`.
    pub fn is_subface_of(&self, other: &FaceRep, tol: f64) -> bool {
        self.blocks.len() == other.blocks.len()
            && self
                .blocks
                .iter()
                .zip(&other.blocks)
                .all(|(a, b)| match (a, b) {
                    (
                        BlockFace::Orthant { support: s, .. },
                        BlockFace::Orthant { support: t, .. },
                    ) => s.iter().all(|i| t.contains(i)),
                    (BlockFace::Psd { basis: q, .. }, BlockFace::Psd { basis: p, .. }) => {
                        q.ncols() == 0 || (q - p * (p.transpose() * q)).amax() <= tol
                    }
                    _ => false,
                })
    }

    /// Equality of faces: same supports, PSD ranges within subspace distance `tol`.
    pub fn approx_eq(&self, other: &FaceRep, tol: f64) -> bool {
        self.blocks.len() == other.blocks.len()
            && self
                .blocks
                .iter()
                .zip(&other.blocks)
                .all(|(a, b)| match (a, b) {
                    (
                        BlockFace::Orthant { support: s, .. },
                        BlockFace::Orthant { support: t, .. },
                    ) => s == t,
                    (BlockFace::Psd { basis: q, .. }, BlockFace::Psd { basis: p, .. }) => {
                        subspace_distance(q, p) <= tol
                    }
                    _ => false,
                })
    }
}

impl fmt::Display for FaceRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .blocks
            .iter()
            .map(|b| match b {
                BlockFace::Orthant { support, .. } => {
                    let idx: Vec<String> = support.iter().map(|i| (i + 1).to_string()).collect();
                    format!("orthant support {{{}}}", idx.join(","))
                }
                BlockFace::Psd { basis, .. } => format!("PSD block rank {}", basis.ncols()),
            })
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Longest chain of faces of the product cone: per-block lengths summed,
/// minus one for each additional block (the chains share their endpoints).
pub fn chain_length(structure: &[ConeBlock]) -> usize {
    let sum: usize = structure.iter().map(ConeBlock::face_chain_length).sum();
    sum + 1 - structure.len()
}

/// Dimension of the tangent space at a rank-`r` point of the `n×n` PSD cone.
pub fn psd_tangent_dim(n: usize, r: usize) -> usize {
    n * (n + 1) / 2 - (n - r) * (n - r + 1) / 2
}

fn psd_positive_eigvecs(x: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let eig = sym_eig(&symmetrize(x)).expect("symmetrized input");
    let thr = tol * eig.max_value().max(1.0);
    eig.select_columns(|l| l > thr)
}

/// The smallest face of `K` containing `x`.
pub fn minimal_face(x: &YElement, tol: f64) -> Result<FaceRep, FaceError> {
    let violation = x.cone_violation();
    if violation > tol {
        return Err(FaceError::NotInCone { violation });
    }
    Ok(FaceRep {
        blocks: x
            .blocks
            .iter()
            .map(|b| match b {
                BlockValue::Vector(v) => BlockFace::Orthant {
                    dim: v.len(),
                    support: (0..v.len()).filter(|&i| v[i] > tol).collect(),
                },
                BlockValue::Matrix(m) => BlockFace::Psd {
                    n: m.nrows(),
                    basis: psd_positive_eigvecs(m, tol),
                },
            })
            .collect(),
    })
}

/// `F^△ = K* ∩ F^⊥`, again a face of the (self-dual) cone.
pub fn conjugate_face(face: &FaceRep) -> FaceRep {
    FaceRep {
        blocks: face
            .blocks
            .iter()
            .map(|b| match b {
                BlockFace::Orthant { dim, support } => BlockFace::Orthant {
                    dim: *dim,
                    support: (0..*dim).filter(|i| !support.contains(i)).collect(),
                },
                BlockFace::Psd { n, basis } => BlockFace::Psd {
                    n: *n,
                    basis: orthogonal_complement(basis, *n),
                },
            })
            .collect(),
    }
}

/// How far `y` is from `F* = K* + F^⊥`: the largest negative part of the compression.
pub fn dual_face_violation(face: &FaceRep, y: &YElement) -> Result<f64, FaceError> {
    y.check_structure(&face.structure())?;
    Ok(face.compress(y).cone_violation())
}

/// `y ∈ F* = K* + F^⊥` within `tol`.
pub fn face_dual_membership(face: &FaceRep, y: &YElement, tol: f64) -> Result<bool, FaceError> {
    Ok(dual_face_violation(face, y)? <= tol)
}

/// `F ∩ y^⊥` for `y ∈ F*`.
pub fn intersect_with_hyperplane(
    face: &FaceRep,
    y: &YElement,
    tol: f64,
) -> Result<FaceRep, FaceError> {
    let violation = dual_face_violation(face, y)?;
    if violation > tol {
        return Err(FaceError::NotInDualFace { violation });
    }
    let blocks = face
        .blocks
        .iter()
        .zip(&y.blocks)
        .map(|(f, v)| match (f, v) {
            (BlockFace::Orthant { dim, support }, BlockValue::Vector(yv)) => {
                let scale = support.iter().fold(1.0_f64, |a, &i| a.max(yv[i]));
                BlockFace::Orthant {
                    dim: *dim,
                    support: support
                        .iter()
                        .copied()
                        .filter(|&i| yv[i] <= tol * scale)
                        .collect(),
                }
            }
            (BlockFace::Psd { n, basis }, BlockValue::Matrix(ym)) => {
                if basis.ncols() == 0 {
                    return f.clone();
                }
                let z = symmetrize(&(basis.transpose() * ym * basis));
                let eig = sym_eig(&z).expect("symmetrized");
                let thr = tol * eig.max_value().max(1.0);
                let keep = eig.select_columns(|l| l <= thr);
                BlockFace::Psd {
                    n: *n,
                    basis: basis * keep,
                }
            }
            _ => unreachable!("structure checked"),
        })
        .collect();
    Ok(FaceRep { blocks })
}

/// Orthonormal basis of `tan(u, K*) = face(u, K*)^{△⊥}`.
pub fn tangent_space_basis(u: &YElement, tol: f64) -> Result<Vec<YElement>, FaceError> {
    let face = minimal_face(u, tol)?;
    let structure = u.structure();
    let mut out = Vec::new();
    for (k, f) in face.blocks.iter().enumerate() {
        match f {
            BlockFace::Orthant { support, .. } => {
                for &i in support {
                    let mut e = YElement::zeros(&structure);
                    if let BlockValue::Vector(v) = &mut e.blocks[k] {
                        v[i] = 1.0;
                    }
                    out.push(e);
                }
            }
            BlockFace::Psd { n, basis } => {
                let r = basis.ncols();
                let comp = orthogonal_complement(basis, *n);
                let v = DMatrix::from_columns(
                    &basis
                        .column_iter()
                        .chain(comp.column_iter())
                        .map(|c| c.into_owned())
                        .collect::<Vec<_>>(),
                );
                for i in 0..r {
                    for j in i..*n {
                        let (vi, vj) = (v.column(i), v.column(j));
                        let m = if i == j {
                            vi * vi.transpose()
                        } else {
                            (vi * vj.transpose() + vj * vi.transpose())
                                * std::f64::consts::FRAC_1_SQRT_2
                        };
                        let mut e = YElement::zeros(&structure);
                        e.blocks[k] = BlockValue::Matrix(m);
                        out.push(e);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Membership of `v` in `tan(u, K*)` by projecting onto [`tangent_space_basis`].
pub fn tangent_pattern_membership(u: &YElement, v: &YElement, tol: f64) -> Result<bool, FaceError> {
    v.check_structure(&u.structure())?;
    let basis = tangent_space_basis(u, tol)?;
    let mut resid = v.clone();
    for e in &basis {
        resid.axpy(-e.dot(v), e);
    }
    Ok(resid.max_abs() <= tol * v.max_abs().max(1.0))
}

/// Witness that `v = w + wᵀ` with `[[x, w], [wᵀ, βI]] ⪰ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SchurWitness {
    pub w: DMatrix<f64>,
    pub beta: f64,
}

/// `[[x, w], [wᵀ, βI]]`.
pub fn schur_block(x: &DMatrix<f64>, w: &DMatrix<f64>, beta: f64) -> DMatrix<f64> {
    let n = x.nrows();
    let mut z = DMatrix::zeros(2 * n, 2 * n);
    z.view_mut((0, 0), (n, n)).copy_from(x);
    z.view_mut((0, n), (n, n)).copy_from(w);
    z.view_mut((n, 0), (n, n)).copy_from(&w.transpose());
    for i in 0..n {
        z[(n + i, n + i)] = beta;
    }
    z
}

/// Decides `v ∈ tan(x, S^n_+)` in the block-matrix form and returns a witness.
///
/// `v` is tangent iff `(I−Π)v(I−Π) = 0` for `Π` the projector onto `range(x)`.
/// The witness is `w = Πv − ½ΠvΠ` and `β = λ_max(wᵀx⁺w) + 1`; the block matrix
/// is rechecked before the witness is returned.
pub fn tangent_membership_schur(
    x: &DMatrix<f64>,
    v: &DMatrix<f64>,
    tol: f64,
) -> Option<SchurWitness> {
    let n = x.nrows();
    let x = symmetrize(x);
    let v = symmetrize(v);
    let q = psd_positive_eigvecs(&x, tol);
    let pi = &q * q.transpose();
    let pc = DMatrix::<f64>::identity(n, n) - &pi;
    let off = &pc * &v * &pc;
    let scale = v.amax().max(1.0);
    if off.amax() > tol * scale {
        return None;
    }
    let pv = &pi * &v;
    let w = &pv - (&pv * &pi) * 0.5;
    let xp = sym_pinv(&x, tol);
    let s = symmetrize(&(w.transpose() * xp * &w));
    let beta = sym_eig(&s).expect("symmetric").max_value().max(0.0) + 1.0;
    let block = schur_block(&x, &w, beta);
    let lmin = crate::linalg::min_eigenvalue(&block);
    let xscale = x.amax().max(1.0) * beta.max(1.0);
    let recon = (&w + w.transpose() - &v).amax();
    if lmin >= -tol.sqrt() * xscale && recon <= tol * scale {
        Some(SchurWitness { w, beta })
    } else {
        None
    }
}

/// A point in the relative interior: indicator of the support or `QQᵀ`.
pub fn relative_interior_point(face: &FaceRep) -> YElement {
    let ones = YElement::identity(&face.compressed_structure());
    face.expand(&ones)
}

/// Errors if a face does not match the block structure.
pub fn check_face_structure(face: &FaceRep, structure: &[ConeBlock]) -> Result<(), ModelError> {
    if face.structure() == structure {
        Ok(())
    } else {
        Err(ModelError::StructureMismatch(format!(
            "face has {}, expected {}",
            crate::model::describe(&face.structure()),
            crate::model::describe(structure)
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{lp_example_chain, sdp_example_chain};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    fn psd_face(q: DMatrix<f64>) -> FaceRep {
        FaceRep {
            blocks: vec![BlockFace::Psd {
                n: q.nrows(),
                basis: q,
            }],
        }
    }

    fn e(n: usize, i: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, 1);
        m[(i, 0)] = 1.0;
        m
    }

    fn random_orthonormal(n: usize, r: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let g = DMatrix::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0));
        crate::linalg::range_basis(&g, 1e-10)
    }

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        symmetrize(&DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn minimal_face_of_lp_slack() {
        let x = YElement::from_vector(DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 0.0]));
        let f = minimal_face(&x, 1e-9).unwrap();
        assert_eq!(
            f.blocks[0],
            BlockFace::Orthant {
                dim: 5,
                support: vec![0]
            }
        );
        assert_eq!(f.to_string(), "orthant support {1}");
    }

    #[test]
    fn minimal_face_of_sdp_slack() {
        let x = YElement::from_matrix(diag(&[1.0, 0.0, 0.0]));
        let f = minimal_face(&x, 1e-9).unwrap();
        assert!(f.approx_eq(&psd_face(e(3, 0)), 1e-12));
        assert_eq!(f.to_string(), "PSD block rank 1");
    }

    #[test]
    fn minimal_face_interior_and_outside() {
        let x = YElement::from_matrix(diag(&[1.0, 2.0, 3.0]));
        assert!(minimal_face(&x, 1e-9).unwrap().is_full());
        let bad = YElement::from_matrix(diag(&[1.0, -1.0, 0.0]));
        assert!(matches!(
            minimal_face(&bad, 1e-9),
            Err(FaceError::NotInCone { .. })
        ));
    }

    #[test]
    fn conjugate_of_sdp_minimal_face() {
        let f = psd_face(e(3, 0));
        let g = conjugate_face(&f);
        let expect = DMatrix::from_columns(&[e(3, 1).column(0), e(3, 2).column(0)]);
        assert!(g.approx_eq(&psd_face(expect), 1e-12));
        let full = FaceRep::full(&[ConeBlock::Psd(3), ConeBlock::Orthant(2)]);
        assert!(conjugate_face(&full).is_zero());
    }

    #[test]
    fn double_conjugation_and_antitone() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(1..=6);
            let r = rng.random_range(0..=n);
            let q = random_orthonormal(n, r, &mut rng);
            let f = psd_face(q.clone());
            let ff = conjugate_face(&conjugate_face(&f));
            assert!(ff.approx_eq(&f, 1e-9));
            // a subface: drop a column
            if r > 0 {
                let g = psd_face(q.columns(0, r - 1).into_owned());
                assert!(g.is_subface_of(&f, 1e-9));
                assert!(conjugate_face(&f).is_subface_of(&conjugate_face(&g), 1e-9));
            }
        }
    }

    #[test]
    fn dual_membership_of_second_certificate() {
        let f1 = psd_face(DMatrix::from_columns(&[
            e(3, 0).column(0),
            e(3, 1).column(0),
        ]));
        let y2 = &sdp_example_chain()[1];
        assert!(face_dual_membership(&f1, y2, 1e-12).unwrap());
        let full = FaceRep::full(&[ConeBlock::Psd(3)]);
        assert!(!face_dual_membership(&full, y2, 1e-9).unwrap());
        let minus_i = YElement::identity(&[ConeBlock::Psd(3)]).scaled(-1.0);
        assert!(!face_dual_membership(&full, &minus_i, 1e-9).unwrap());
        let wrong = YElement::zeros(&[ConeBlock::Orthant(3)]);
        assert!(face_dual_membership(&full, &wrong, 1e-9).is_err());
    }

    #[test]
    fn dual_membership_of_sampled_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let n = rng.random_range(1..=6);
            let r = rng.random_range(0..=n);
            let q = random_orthonormal(n, r, &mut rng);
            let f = psd_face(q.clone());
            let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let u = &g * g.transpose();
            let z = random_sym(n, &mut rng);
            let p = &q * q.transpose();
            let v = &z - &p * &z * &p; // in F^⊥
            let y = YElement::from_matrix(u + v);
            assert!(face_dual_membership(&f, &y, 1e-9).unwrap());
        }
    }

    #[test]
    fn intersection_steps_of_examples() {
        let lp = FaceRep::full(&[ConeBlock::Orthant(5)]);
        let [y1, y2]: [YElement; 2] = lp_example_chain().try_into().unwrap();
        let f1 = intersect_with_hyperplane(&lp, &y1, 1e-9).unwrap();
        assert_eq!(f1.to_string(), "orthant support {1,2,3}");
        let f2 = intersect_with_hyperplane(&f1, &y2, 1e-9).unwrap();
        assert_eq!(f2.to_string(), "orthant support {1}");
        // y2 is not in (R^5_+)*
        assert!(matches!(
            intersect_with_hyperplane(&lp, &y2, 1e-9),
            Err(FaceError::NotInDualFace { .. })
        ));

        let sdp = FaceRep::full(&[ConeBlock::Psd(3)]);
        let chain = sdp_example_chain();
        let f1 = intersect_with_hyperplane(&sdp, &chain[0], 1e-9).unwrap();
        let span12 = DMatrix::from_columns(&[e(3, 0).column(0), e(3, 1).column(0)]);
        assert!(f1.approx_eq(&psd_face(span12), 1e-12));
        let f2 = intersect_with_hyperplane(&f1, &chain[1], 1e-9).unwrap();
        assert!(f2.approx_eq(&psd_face(e(3, 0)), 1e-12));

        let zero = YElement::zeros(&[ConeBlock::Psd(3)]);
        assert!(intersect_with_hyperplane(&f1, &zero, 1e-9)
            .unwrap()
            .approx_eq(&f1, 1e-12));
    }

    #[test]
    fn intersection_is_subface() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let n = rng.random_range(1..=6);
            let r = rng.random_range(1..=n);
            let q = random_orthonormal(n, r, &mut rng);
            let f = psd_face(q.clone());
            // y = PSD matrix of random rank plus an F^⊥ part
            let k = rng.random_range(0..=n);
            let g = DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
            let z = random_sym(n, &mut rng);
            let p = &q * q.transpose();
            let y = YElement::from_matrix(&g * g.transpose() + &z - &p * &z * &p);
            let h = intersect_with_hyperplane(&f, &y, 1e-9).unwrap();
            assert!(h.is_subface_of(&f, 1e-9));
            // generators of h are in F and orthogonal to y
            if let BlockFace::Psd { basis, .. } = &h.blocks[0] {
                for c in basis.column_iter() {
                    let x = YElement::from_matrix(c * c.transpose());
                    assert!(f.contains(&x, 1e-9));
                    assert!(x.dot(&y).abs() <= 1e-8);
                }
            }
        }
    }

    #[test]
    fn tangent_dimension_formula() {
        for n in 1..=6 {
            for r in 0..=n {
                let mut d = vec![0.0; n];
                d[..r].iter_mut().for_each(|x| *x = 1.0);
                let u = YElement::from_matrix(diag(&d));
                let basis = tangent_space_basis(&u, 1e-9).unwrap();
                assert_eq!(basis.len(), psd_tangent_dim(n, r), "n={n} r={r}");
                // orthonormal, lower-right block zero
                for (i, a) in basis.iter().enumerate() {
                    for (j, b) in basis.iter().enumerate() {
                        let expect = if i == j { 1.0 } else { 0.0 };
                        assert!((a.dot(b) - expect).abs() < 1e-10);
                    }
                    let m = a.matrix(0);
                    assert!(m.view((r, r), (n - r, n - r)).amax() < 1e-12);
                }
            }
        }
        let zero = YElement::zeros(&[ConeBlock::Psd(3)]);
        assert!(tangent_space_basis(&zero, 1e-9).unwrap().is_empty());
    }

    #[test]
    fn tangent_at_sum_of_sdp_u() {
        let u = YElement::from_matrix(diag(&[0.0, 2.0, 1.0]));
        let basis = tangent_space_basis(&u, 1e-9).unwrap();
        assert_eq!(basis.len(), 5);
        let e11 = YElement::from_matrix(diag(&[1.0, 0.0, 0.0]));
        for b in &basis {
            assert!(b.dot(&e11).abs() < 1e-12);
        }
        let v2 = YElement::from_matrix(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0],
        ));
        assert!(tangent_pattern_membership(&u, &v2, 1e-9).unwrap());
        assert!(!tangent_pattern_membership(&u, &e11, 1e-9).unwrap());
    }

    #[test]
    fn schur_route_examples() {
        let x = diag(&[0.0, 2.0, 1.0]);
        let v2 = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0]);
        let wit = tangent_membership_schur(&x, &v2, 1e-9).unwrap();
        assert!((&wit.w + wit.w.transpose() - &v2).amax() < 1e-12);
        assert!(crate::linalg::min_eigenvalue(&schur_block(&x, &wit.w, wit.beta)) >= -1e-12);

        let v3 = DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let wit = tangent_membership_schur(&x, &v3, 1e-9).unwrap();
        assert!((&wit.w + wit.w.transpose() - &v3).amax() < 1e-12);
        // hand witness: w with entry (2,1) = 1/2, β = 1/8 is the Schur bound
        let mut w = DMatrix::zeros(3, 3);
        w[(1, 0)] = 0.5;
        assert!(crate::linalg::min_eigenvalue(&schur_block(&x, &w, 0.125)) >= -1e-12);
        assert!(crate::linalg::min_eigenvalue(&schur_block(&x, &w, 0.12)) < 0.0);

        let zero = DMatrix::zeros(3, 3);
        assert!(tangent_membership_schur(&zero, &v3, 1e-9).is_none());
        assert!(tangent_membership_schur(&zero, &zero, 1e-9).is_some());
    }

    #[test]
    fn schur_agrees_with_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut seen = [0usize; 2];
        for _ in 0..200 {
            let n = rng.random_range(2..=6);
            let r = rng.random_range(0..=n);
            let q = random_orthonormal(n, r, &mut rng);
            let lam = DVector::from_fn(r, |_, _| rng.random_range(0.5..3.0));
            let x = &q * DMatrix::from_diagonal(&lam) * q.transpose();
            let v = if rng.random_bool(0.5) {
                let z = DMatrix::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0));
                &q * z.transpose() + z * q.transpose()
            } else {
                random_sym(n, &mut rng)
            };
            let a = tangent_membership_schur(&x, &v, 1e-8).is_some();
            let b = tangent_pattern_membership(
                &YElement::from_matrix(x.clone()),
                &YElement::from_matrix(v.clone()),
                1e-8,
            )
            .unwrap();
            assert_eq!(a, b);
            seen[a as usize] += 1;
        }
        assert!(seen[0] > 20 && seen[1] > 20);
    }

    #[test]
    fn interior_points() {
        let full = FaceRep::full(&[ConeBlock::Psd(3)]);
        assert_eq!(
            relative_interior_point(&full),
            YElement::identity(&[ConeBlock::Psd(3)])
        );
        let f1 = FaceRep {
            blocks: vec![BlockFace::Orthant {
                dim: 5,
                support: vec![0, 1, 2],
            }],
        };
        assert_eq!(
            relative_interior_point(&f1).vector(0).as_slice(),
            &[1.0, 1.0, 1.0, 0.0, 0.0]
        );
        let f1 = psd_face(DMatrix::from_columns(&[
            e(3, 0).column(0),
            e(3, 1).column(0),
        ]));
        assert_eq!(
            relative_interior_point(&f1).matrix(0),
            &diag(&[1.0, 1.0, 0.0])
        );
        assert!(f1.interior_margin(&relative_interior_point(&f1)) > 0.99);
    }

    #[test]
    fn chain_lengths() {
        assert_eq!(chain_length(&[ConeBlock::Psd(3)]), 4);
        assert_eq!(chain_length(&[ConeBlock::Orthant(5)]), 6);
        // R^2_+ x R^3_+ has the same face lattice as R^5_+
        assert_eq!(
            chain_length(&[ConeBlock::Orthant(2), ConeBlock::Orthant(3)]),
            chain_length(&[ConeBlock::Orthant(5)])
        );
    }

    #[test]
    fn compression_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let q = random_orthonormal(4, 2, &mut rng);
        let f = FaceRep {
            blocks: vec![
                BlockFace::Psd { n: 4, basis: q },
                BlockFace::Orthant {
                    dim: 3,
                    support: vec![2],
                },
                BlockFace::zero(ConeBlock::Psd(2)),
            ],
        };
        assert_eq!(
            f.compressed_structure(),
            vec![ConeBlock::Psd(2), ConeBlock::Orthant(1)]
        );
        let y = YElement::new(vec![
            BlockValue::Matrix(random_sym(4, &mut rng)),
            BlockValue::Vector(DVector::from_vec(vec![1.0, 2.0, 3.0])),
            BlockValue::Matrix(random_sym(2, &mut rng)),
        ])
        .unwrap();
        let z = YElement::new(vec![
            BlockValue::Matrix(random_sym(2, &mut rng)),
            BlockValue::Vector(DVector::from_vec(vec![4.0])),
        ])
        .unwrap();
        // adjointness: <C y, z> = <y, C* z>
        assert!((f.compress(&y).dot(&z) - y.dot(&f.expand(&z))).abs() < 1e-12);
        // projection is idempotent and complement is orthogonal
        let p = f.project(&y);
        assert!(f.project(&p).sub(&p).max_abs() < 1e-12);
        assert!(f.project_complement(&y).dot(&p).abs() < 1e-12);
    }
}

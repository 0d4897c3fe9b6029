//! Dense symmetric linear algebra used throughout the crate.
//!
//! The eigensolver is a cyclic Jacobi method: slow for large matrices but
//! accurate to working precision for the small blocks (n <= 50) this crate
//! deals with, including tiny eigenvalues that decide face ranks.

use nalgebra::{DMatrix, DVector};

use crate::error::LinalgError;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenvalues in descending order with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Columns whose eigenvalue satisfies `keep`.
    pub fn select_columns(&self, keep: impl Fn(f64) -> bool) -> DMatrix<f64> {
        let idx: Vec<usize> = (0..self.dim()).filter(|&k| keep(self.values[k])).collect();
        let n = self.vectors.nrows();
        DMatrix::from_fn(n, idx.len(), |i, j| self.vectors[(i, idx[j])])
    }

    /// Rebuilds `Q diag(f(λ)) Qᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.vectors.nrows();
        let mut out = DMatrix::zeros(n, n);
        for k in 0..self.dim() {
            let lam = f(self.values[k]);
            if lam == 0.0 {
                continue;
            }
            let q = self.vectors.column(k);
            out += lam * q * q.transpose();
        }
        symmetrize(&out)
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.reconstruct_with(|l| l)
    }
}

pub fn symmetrize(x: &DMatrix<f64>) -> DMatrix<f64> {
    (x + x.transpose()) * 0.5
}

pub fn asymmetry(x: &DMatrix<f64>) -> f64 {
    (x - x.transpose()).norm()
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig(x: &DMatrix<f64>) -> Result<EigenDecomposition, LinalgError> {
    let n = x.nrows();
    if x.ncols() != n {
        return Err(LinalgError::NotSquare {
            rows: n,
            cols: x.ncols(),
        });
    }
    let scale = x.norm();
    let asym = asymmetry(x);
    if asym > SYMMETRY_TOL * scale.max(1.0) {
        return Err(LinalgError::NotSymmetric { asymmetry: asym });
    }
    let mut a = symmetrize(x);
    let mut v = DMatrix::<f64>::identity(n, n);
    let target = JACOBI_REL_TOL * scale;

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off = off_diagonal_norm(&a);
        if off <= target || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| a[(k, k)]));
    let mut vectors = DMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    fix_signs(&mut vectors);
    Ok(EigenDecomposition { values, vectors })
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)] * a[(i, j)];
            }
        }
    }
    acc.sqrt()
}

// Applies the rotation J(p, q) as A <- Jᵀ A J and accumulates V <- V J.
fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

// First component of magnitude above noise level is made positive.
fn fix_signs(vectors: &mut DMatrix<f64>) {
    for j in 0..vectors.ncols() {
        let lead = vectors
            .column(j)
            .iter()
            .copied()
            .find(|x| x.abs() > 1e-12)
            .unwrap_or(0.0);
        if lead < 0.0 {
            let mut col = vectors.column_mut(j);
            col.neg_mut();
        }
    }
}

/// Number of eigenvalues above `tol * max(1, λ_max)`; expects descending order.
pub fn numeric_rank(values: &[f64], tol: f64) -> usize {
    let lmax = values.iter().copied().fold(0.0_f64, f64::max);
    let thr = tol * lmax.max(1.0);
    values.iter().filter(|&&l| l > thr).count()
}

/// Orthonormal basis (as columns) of `{v : M v = 0}`.
///
/// Computed from the eigendecomposition of `MᵀM`; a direction counts as null
/// when its singular value is at most `tol * max(1, σ_max)`.
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let d = m.ncols();
    if d == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(d, d);
    }
    let gram = symmetrize(&(m.transpose() * m));
    let eig = sym_eig(&gram).expect("Gram matrix is symmetric");
    select_by_singular_value(m, &eig, tol, false)
}

/// Keeps the Gram eigenvectors whose singular value, re-measured as `‖M v‖`
/// (accurate far below `sqrt(eps)`), is above (`keep_large`) or at most the cutoff.
fn select_by_singular_value(
    m: &DMatrix<f64>,
    eig: &EigenDecomposition,
    tol: f64,
    keep_large: bool,
) -> DMatrix<f64> {
    let sigma: Vec<f64> = eig.vectors.column_iter().map(|v| (m * v).norm()).collect();
    let smax = sigma.iter().copied().fold(0.0_f64, f64::max);
    let thr = tol * smax.max(1.0);
    let cols: Vec<_> = (0..sigma.len())
        .filter(|&j| (sigma[j] > thr) == keep_large)
        .map(|j| eig.vectors.column(j).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(eig.vectors.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Orthonormal basis of the span of the columns of `m`, up to `tol`.
///
/// Works from the Gram matrix, so cutoffs far below `1e-8` need a direct SVD.
pub fn range_basis(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let r = m.nrows();
    if m.ncols() == 0 || r == 0 {
        return DMatrix::zeros(r, 0);
    }
    let gram = symmetrize(&(m * m.transpose()));
    let eig = sym_eig(&gram).expect("Gram matrix is symmetric");
    select_by_singular_value(&m.transpose(), &eig, tol, true)
}

/// Orthonormal basis of the orthogonal complement of the columns of `q`
/// (assumed orthonormal) in `R^n`.
pub fn orthogonal_complement(q: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    if q.ncols() == 0 {
        return DMatrix::identity(n, n);
    }
    let proj = DMatrix::<f64>::identity(n, n) - q * q.transpose();
    range_basis(&proj, 1e-8)
}

/// Moore–Penrose pseudoinverse of a symmetric matrix with relative cutoff `tol`.
pub fn sym_pinv(x: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let eig = sym_eig(&symmetrize(x)).expect("symmetrized input");
    let lmax = eig.values.iter().fold(0.0_f64, |a, &l| a.max(l.abs()));
    let thr = tol * lmax.max(1.0);
    eig.reconstruct_with(|l| if l.abs() > thr { 1.0 / l } else { 0.0 })
}

/// Smallest eigenvalue of a symmetric matrix (`+inf` for an empty matrix).
pub fn min_eigenvalue(x: &DMatrix<f64>) -> f64 {
    if x.nrows() == 0 {
        return f64::INFINITY;
    }
    sym_eig(&symmetrize(x))
        .map(|e| e.min_value())
        .unwrap_or(f64::NEG_INFINITY)
}

/// Largest principal angle sine between the column spans of two orthonormal bases.
///
/// Returns 1.0 when the dimensions differ.
pub fn subspace_distance(q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> f64 {
    if q1.ncols() != q2.ncols() || q1.nrows() != q2.nrows() {
        return 1.0;
    }
    if q1.ncols() == 0 {
        return 0.0;
    }
    let p1 = q1 * q1.transpose();
    let p2 = q2 * q2.transpose();
    let diff = symmetrize(&(p1 - p2));
    let eig = sym_eig(&diff).expect("symmetric");
    eig.values.iter().fold(0.0_f64, |a, &l| a.max(l.abs()))
}

/// Orthonormal basis of `L`, the orthogonal complement of the span of `rows`
/// (typically `a_1, …, a_m, b`), as elements of the given block structure.
pub fn nullspace_basis(
    rows: &[crate::model::YElement],
    structure: &[crate::model::ConeBlock],
    tol: f64,
) -> Vec<crate::model::YElement> {
    let d = crate::model::ambient_dim(structure);
    let mut m = DMatrix::zeros(rows.len(), d);
    for (i, r) in rows.iter().enumerate() {
        m.set_row(i, &r.to_svec().transpose());
    }
    let basis = null_space(&m, tol);
    basis
        .column_iter()
        .map(|c| {
            crate::model::YElement::from_svec(structure, c.as_slice()).expect("length matches")
        })
        .collect()
}

/// Running sum of products kept as an unevaluated pair `hi + lo`, giving
/// results as if computed in about twice the working precision.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Compensated {
    hi: f64,
    lo: f64,
}

impl Compensated {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let s = self.hi + x;
        let bb = s - self.hi;
        self.lo += (self.hi - (s - bb)) + (x - bb);
        self.hi = s;
    }

    /// Adds `a·b` exactly before rounding the sum.
    pub fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        self.add(p);
        self.lo += a.mul_add(b, -p);
    }

    /// Adds `a·b·c`, with `b·c` split exactly.
    pub fn add_triple(&mut self, a: f64, b: f64, c: f64) {
        let p = b * c;
        let e = b.mul_add(c, -p);
        self.add_product(a, p);
        self.lo += a * e;
    }

    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

/// Levenberg-Marquardt for `min ‖r(θ)‖`, starting from `theta` and updating
/// it in place. Steps use the SVD of the Jacobian with singular values below
/// `1e-15 σ_max` dropped, so rank-deficient (gauge) directions get the
/// minimum-norm step. Stops when no damping gives a decrease; returns the
/// final residual.
pub fn levenberg_marquardt(
    theta: &mut DVector<f64>,
    mut residual: impl FnMut(&DVector<f64>) -> DVector<f64>,
    mut jacobian: impl FnMut(&DVector<f64>) -> DMatrix<f64>,
    max_evals: usize,
) -> DVector<f64> {
    let mut res = residual(theta);
    let mut mu = 0.0;
    let mut evals = 1;
    while evals < max_evals && res.amax() > 0.0 {
        let svd = jacobian(theta).svd(true, true);
        let smax = svd.singular_values.max().max(f64::MIN_POSITIVE);
        let (Some(u), Some(vt)) = (svd.u.as_ref(), svd.v_t.as_ref()) else {
            break;
        };
        let proj = u.transpose() * &res;
        let mut improved = false;
        // undamped first: in directions where the residual is quadratic the
        // Gauss-Newton step halves the error, damping would stall it
        let mut damping = 0.0;
        while evals < max_evals && damping <= 1e6 * smax * smax {
            let coef = DVector::from_fn(proj.len(), |k, _| {
                let sk = svd.singular_values[k];
                if sk <= 1e-15 * smax {
                    0.0
                } else {
                    proj[k] * sk / (sk * sk + damping)
                }
            });
            let trial = &*theta - vt.transpose() * coef;
            let r = residual(&trial);
            evals += 1;
            if r.norm() < res.norm() {
                *theta = trial;
                res = r;
                improved = true;
                mu = damping / 4.0;
                break;
            }
            damping = if damping == 0.0 {
                mu.max(1e-12 * smax * smax)
            } else {
                damping * 4.0
            };
        }
        if !improved {
            break;
        }
    }
    res
}

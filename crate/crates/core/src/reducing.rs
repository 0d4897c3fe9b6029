//! One facial reduction step: find `y ∈ L ∩ F*` with `⟨f, y⟩ = 1` for
//! `f ∈ ri F`, or show that `F` is already the minimal cone.
//!
//! Both auxiliary problems are solved in the compressed coordinates of `F`
//! (`y_S` on orthant blocks, `QᵀyQ` on PSD blocks), so the cone constraint
//! is a standard product cone. The equations `⟨a_j, y⟩ = 0` split into a part
//! inside `span F` and a part in `F^⊥`; the `F^⊥` part only involves the free
//! component `V` of `y = C*(U) + V` and is eliminated through the null space
//! of the map `λ ↦ Σ_j λ_j P⊥(a_j)` over `j ∈ {a_1, …, a_m, b}`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Tolerances;
use crate::error::SolverError;
use crate::faces::{check_face_structure, dual_face_violation, FaceRep};
use crate::linalg::{
    levenberg_marquardt, null_space, range_basis, sym_eig, sym_pinv, symmetrize, Compensated,
};
use crate::model::{BlockValue, ConeBlock, ConicProgram, YElement};
use crate::solver::{solve_conic_lp, SolveStatus, SolverOptions};

#[derive(Clone, Debug, PartialEq)]
pub enum ReducingOutcome {
    /// `y ∈ L ∩ F*`, normalized so `⟨f, y⟩ = 1`.
    Reduced(YElement),
    /// `b − A x ∈ ri F`.
    MinimalReached(DVector<f64>),
}

/// Knobs for [`solve_reducing_pair_with`].
#[derive(Clone, Debug, PartialEq)]
pub struct ReducingOptions {
    pub tol: Tolerances,
    pub max_iter: usize,
    /// When set, `f = C*(D)` for a random positive diagonal `D` drawn from this seed
    /// instead of the identity of the face.
    pub perturb_seed: Option<u64>,
    /// Relative tolerance for a slack to count as lying in `span F`; `None`
    /// uses `tol.accept`.
    pub span_tol: Option<f64>,
}

impl Default for ReducingOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            max_iter: 200,
            perturb_seed: None,
            span_tol: None,
        }
    }
}

struct Split {
    rows: Vec<YElement>,
    /// `P⊥(row_j)` as svec columns.
    perp: DMatrix<f64>,
    /// Null-space combinations `λ^(k)` as columns, length `m + 1`.
    lambda: DMatrix<f64>,
}

/// `null_tol` decides which combinations count as lying inside `span F`.
fn split_rows(p: &ConicProgram, face: &FaceRep, null_tol: f64) -> Split {
    let rows = p.homogenized_rows();
    let d = p.ambient_dim();
    let mut perp = DMatrix::zeros(d, rows.len());
    for (j, r) in rows.iter().enumerate() {
        perp.set_column(j, &face.project_complement(r).to_svec());
    }
    let lambda = null_space(&perp, null_tol);
    Split { rows, perp, lambda }
}

fn combine(rows: &[YElement], coeffs: &[f64]) -> YElement {
    let mut out = YElement::zeros(&rows[0].structure());
    for (c, r) in coeffs.iter().zip(rows) {
        if *c != 0.0 {
            out.axpy(*c, r);
        }
    }
    out
}

fn face_weight(face: &FaceRep, seed: Option<u64>) -> YElement {
    let cs = face.compressed_structure();
    match seed {
        None => YElement::identity(&cs),
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            YElement {
                blocks: cs
                    .iter()
                    .map(|b| {
                        let w = DVector::from_fn(b.size(), |_, _| rng.random_range(0.5..1.5));
                        match b {
                            ConeBlock::Orthant(_) => BlockValue::Vector(w),
                            ConeBlock::Psd(_) => BlockValue::Matrix(DMatrix::from_diagonal(&w)),
                        }
                    })
                    .collect(),
            }
        }
    }
}

/// Solves the reducing pair for `F` with `f` the identity of the face.
pub fn solve_reducing_pair(
    p: &ConicProgram,
    face: &FaceRep,
    tol: &Tolerances,
) -> Result<ReducingOutcome, SolverError> {
    solve_reducing_pair_with(
        p,
        face,
        &ReducingOptions {
            tol: *tol,
            ..ReducingOptions::default()
        },
    )
}

pub fn solve_reducing_pair_with(
    p: &ConicProgram,
    face: &FaceRep,
    opts: &ReducingOptions,
) -> Result<ReducingOutcome, SolverError> {
    check_face_structure(face, &p.blocks)?;
    let tol = &opts.tol;
    let span_tol = opts.span_tol.unwrap_or(tol.accept);
    if face.is_zero() {
        return strict_point(p, face, opts).map(ReducingOutcome::MinimalReached);
    }
    // a face known only to span_tol must not turn its own error into rows
    let split = split_rows(p, face, span_tol.max(tol.rank));
    let weight = face_weight(face, opts.perturb_seed);
    let f = face.expand(&weight);
    let aux = reducing_program(face, &split, weight)?;
    let k = aux.m() - 1;
    let sopts = SolverOptions {
        max_iter: opts.max_iter,
        tol: tol.solve,
        ..SolverOptions::default()
    };
    let res = solve_conic_lp(&aux, &sopts);
    match res.status {
        SolveStatus::Optimal => {
            if let Some(y) = polished_certificate(face, &split, &aux, &res.y, &f, tol) {
                return Ok(ReducingOutcome::Reduced(y));
            }
            match lift_certificate(face, &split, &res.y, &f, tol) {
                Some(y) => Ok(ReducingOutcome::Reduced(y)),
                None => Err(SolverError::AmbiguousOutcome {
                    value: res.primal_obj,
                }),
            }
        }
        SolveStatus::DualInfeasible | SolveStatus::Unbounded => {
            let ray = res.ray.expect("ray reported with unbounded status");
            let mu = &split.lambda * ray.rows(0, k);
            let m = p.m();
            let alpha = -mu[m];
            // the ray's point can be huge when α is small; prefer the
            // bounded margin point and keep the ray's as a fallback
            strict_point(p, face, opts)
                .or_else(|e| {
                    let x = (alpha > 0.0)
                        .then(|| without_kernel(p, &(mu.rows(0, m) / alpha), tol.rank))
                        .filter(|x| strict_margin_within(p, face, x, tol, span_tol).is_some());
                    x.ok_or(e)
                })
                .map(ReducingOutcome::MinimalReached)
        }
        SolveStatus::PrimalInfeasible => Err(SolverError::NumericalFailure(
            "reducing problem reported infeasible although it is strictly feasible".into(),
        )),
        SolveStatus::NumericalFailure => {
            if let Some(y) = polished_certificate(face, &split, &aux, &res.y, &f, tol)
                .or_else(|| lift_certificate(face, &split, &res.y, &f, tol))
            {
                return Ok(ReducingOutcome::Reduced(y));
            }
            match strict_point(p, face, opts) {
                Ok(x) => Ok(ReducingOutcome::MinimalReached(x)),
                Err(SolverError::AmbiguousOutcome { value }) => {
                    Err(SolverError::AmbiguousOutcome { value })
                }
                Err(_) => Err(SolverError::NumericalFailure(
                    "reducing problem did not converge".into(),
                )),
            }
        }
    }
}

/// (R-D) in compressed coordinates: `U ∈ K_F`, `⟨ã_k, U⟩ = 0`, `⟨f_c, U⟩ = 1`.
fn reducing_program(
    face: &FaceRep,
    split: &Split,
    weight: YElement,
) -> Result<ConicProgram, SolverError> {
    let cs = face.compressed_structure();
    let mut a: Vec<YElement> = split
        .lambda
        .column_iter()
        .map(|l| face.compress(&combine(&split.rows, l.as_slice())))
        .collect();
    let k = a.len();
    a.push(weight);
    let mut c = DVector::zeros(k + 1);
    c[k] = 1.0;
    Ok(ConicProgram::new(
        "reducing",
        cs.clone(),
        a,
        YElement::zeros(&cs),
        c,
    )?)
}

/// Interior-point solutions of the reducing problem are only accurate to
/// about the square root of the duality gap in directions where strict
/// complementarity fails, and the equations `⟨ã_k, U⟩ = 0` pin `U` down only
/// quadratically along the range of the feasible slacks. `U` is rounded to a
/// low-rank `ZZᵀ` and the equations are restored by Levenberg-Marquardt with
/// compensated residuals, which keeps converging in those directions well
/// past the point where a plain residual is all roundoff.
///
/// The rank suggested by the clearly positive eigenvalues is tried first,
/// then smaller ranks, then larger ones.
fn polished_certificate(
    face: &FaceRep,
    split: &Split,
    aux: &ConicProgram,
    u: &YElement,
    f: &YElement,
    tol: &Tolerances,
) -> Option<YElement> {
    let dirs = eigen_directions(u)?;
    let top = dirs.first()?.0;
    if top <= 0.0 {
        return None;
    }
    let usable = dirs.iter().filter(|d| d.0 > tol.rank * top).count();
    let clear = dirs
        .iter()
        .filter(|d| d.0 > tol.solve.sqrt() * 10.0 * top)
        .count()
        .clamp(1, usable);
    let mut target = DVector::zeros(aux.m());
    target[aux.m() - 1] = 1.0;
    (1..=clear).rev().chain(clear + 1..=usable).find_map(|r| {
        let mut factor = LowRank::new(u);
        for (l, k, v) in &dirs[..r] {
            factor.push(*k, v, l.sqrt());
        }
        let z = factor.gauss_newton(&aux.a, &target)?;
        lift_certificate(face, split, &z, f, tol)
    })
}

/// Eigenpairs of every block of `u` (unit vectors for orthant entries), largest first.
fn eigen_directions(u: &YElement) -> Option<Vec<(f64, usize, DVector<f64>)>> {
    let mut dirs = Vec::new();
    for (k, b) in u.blocks.iter().enumerate() {
        match b {
            BlockValue::Vector(v) => {
                for (i, &x) in v.iter().enumerate() {
                    let mut e = DVector::zeros(v.len());
                    e[i] = 1.0;
                    dirs.push((x, k, e));
                }
            }
            BlockValue::Matrix(m) => {
                let eig = sym_eig(&symmetrize(m)).ok()?;
                for (i, &l) in eig.values.iter().enumerate() {
                    dirs.push((l, k, eig.vectors.column(i).into_owned()));
                }
            }
        }
    }
    dirs.sort_by(|a, b| b.0.total_cmp(&a.0));
    Some(dirs)
}

#[derive(Clone)]
enum Factor {
    /// `u = Σ z_i² e_i` over the chosen coordinates.
    Orthant {
        n: usize,
        idx: Vec<usize>,
        z: Vec<f64>,
    },
    /// `U = Σ c cᵀ`.
    Psd { n: usize, cols: Vec<DVector<f64>> },
}

#[derive(Clone)]
struct LowRank {
    blocks: Vec<Factor>,
}

impl LowRank {
    fn new(u: &YElement) -> Self {
        let blocks = u
            .blocks
            .iter()
            .map(|b| match b {
                BlockValue::Vector(v) => Factor::Orthant {
                    n: v.len(),
                    idx: Vec::new(),
                    z: Vec::new(),
                },
                BlockValue::Matrix(m) => Factor::Psd {
                    n: m.nrows(),
                    cols: Vec::new(),
                },
            })
            .collect();
        Self { blocks }
    }

    fn push(&mut self, k: usize, dir: &DVector<f64>, scale: f64) {
        match &mut self.blocks[k] {
            Factor::Orthant { idx, z, .. } => {
                idx.push(dir.imax());
                z.push(scale);
            }
            Factor::Psd { cols, .. } => cols.push(dir * scale),
        }
    }

    fn params(&self) -> DVector<f64> {
        let mut out = Vec::new();
        for b in &self.blocks {
            match b {
                Factor::Orthant { z, .. } => out.extend(z),
                Factor::Psd { cols, .. } => cols.iter().for_each(|c| out.extend(c.iter())),
            }
        }
        DVector::from_vec(out)
    }

    fn set_params(&mut self, theta: &DVector<f64>) {
        let mut pos = 0;
        for b in &mut self.blocks {
            match b {
                Factor::Orthant { z, .. } => {
                    for v in z.iter_mut() {
                        *v = theta[pos];
                        pos += 1;
                    }
                }
                Factor::Psd { n, cols, .. } => {
                    for c in cols.iter_mut() {
                        c.copy_from(&theta.rows(pos, *n));
                        pos += *n;
                    }
                }
            }
        }
    }

    fn value(&self) -> YElement {
        YElement {
            blocks: self
                .blocks
                .iter()
                .map(|b| match b {
                    Factor::Orthant { n, idx, z } => {
                        let mut v = DVector::zeros(*n);
                        for (&i, &x) in idx.iter().zip(z) {
                            v[i] += x * x;
                        }
                        BlockValue::Vector(v)
                    }
                    Factor::Psd { n, cols, .. } => {
                        let mut m = DMatrix::zeros(*n, *n);
                        for c in cols {
                            m += c * c.transpose();
                        }
                        BlockValue::Matrix(m)
                    }
                })
                .collect(),
        }
    }

    /// Equation residuals, evaluated with compensated sums.
    fn residual(&self, rows: &[YElement], target: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(rows.len(), |j, _| {
            let mut acc = Compensated::new();
            acc.add(-target[j]);
            for (b, r) in self.blocks.iter().zip(&rows[j].blocks) {
                match (b, r) {
                    (Factor::Orthant { idx, z, .. }, BlockValue::Vector(a)) => {
                        for (&i, &x) in idx.iter().zip(z) {
                            acc.add_triple(a[i], x, x);
                        }
                    }
                    (Factor::Psd { n, cols }, BlockValue::Matrix(a)) => {
                        for c in cols {
                            for q in 0..*n {
                                for p in 0..*n {
                                    acc.add_triple(a[(p, q)], c[p], c[q]);
                                }
                            }
                        }
                    }
                    _ => unreachable!("factor built from the same structure"),
                }
            }
            acc.value()
        })
    }

    fn jacobian(&self, rows: &[YElement]) -> DMatrix<f64> {
        let np = self.params().len();
        let mut jac = DMatrix::zeros(rows.len(), np);
        for (j, row) in rows.iter().enumerate() {
            let mut pos = 0;
            for (b, r) in self.blocks.iter().zip(&row.blocks) {
                match (b, r) {
                    (Factor::Orthant { idx, z, .. }, BlockValue::Vector(a)) => {
                        for (&i, &x) in idx.iter().zip(z) {
                            jac[(j, pos)] = 2.0 * a[i] * x;
                            pos += 1;
                        }
                    }
                    (Factor::Psd { cols, .. }, BlockValue::Matrix(a)) => {
                        for c in cols {
                            let g = a * c * 2.0;
                            jac.view_mut((j, pos), (1, g.len()))
                                .copy_from(&g.transpose());
                            pos += g.len();
                        }
                    }
                    _ => unreachable!("factor built from the same structure"),
                }
            }
        }
        jac
    }

    /// Levenberg-Marquardt on the equations; returns `U` when they hold to
    /// roundoff.
    fn gauss_newton(&mut self, rows: &[YElement], target: &DVector<f64>) -> Option<YElement> {
        let scale = rows.iter().map(YElement::norm).fold(1.0, f64::max);
        let mut theta = self.params();
        let mut probe = self.clone();
        let mut jprobe = self.clone();
        let res = levenberg_marquardt(
            &mut theta,
            |t| {
                probe.set_params(t);
                probe.residual(rows, target)
            },
            |t| {
                jprobe.set_params(t);
                jprobe.jacobian(rows)
            },
            2000,
        );
        self.set_params(&theta);
        (res.amax() <= 1e-12 * scale).then(|| self.value())
    }
}

/// `y = C*(U) + V` with `V ∈ F^⊥` of least norm making `y ∈ L`; `None` if the
/// result fails the acceptance checks.
fn lift_certificate(
    face: &FaceRep,
    split: &Split,
    u: &YElement,
    f: &YElement,
    tol: &Tolerances,
) -> Option<YElement> {
    let yf = face.expand(u);
    let structure = face.structure();
    let n = split.rows.len();
    let rhs = DVector::from_fn(n, |j, _| -split.rows[j].dot(&yf));
    let gram = split.perp.transpose() * &split.perp;
    let xi = sym_pinv(&gram, 1e-12) * rhs;
    let v = YElement::from_svec(&structure, (&split.perp * xi).as_slice()).ok()?;
    let mut y = yf.add(&v);
    let scale = f.dot(&y);
    if scale.is_nan() || scale <= 0.0 {
        return None;
    }
    y = y.scaled(1.0 / scale);
    certificate_ok(face, &split.rows, &y, tol.accept).then_some(y)
}

/// `y ∈ L ∩ F*` within `tol`, relative to the norms involved.
pub fn certificate_ok(face: &FaceRep, rows: &[YElement], y: &YElement, tol: f64) -> bool {
    let ynorm = y.norm().max(1.0);
    let in_l = rows
        .iter()
        .all(|r| r.dot(y).abs() <= tol * r.norm().max(1.0) * ynorm);
    in_l && dual_face_violation(face, y)
        .map(|v| v <= tol * ynorm)
        .unwrap_or(false)
}

/// Interior margin of `b − Ax` in `F` if the slack lies in `span F` and is
/// strictly inside.
pub fn strict_margin(
    p: &ConicProgram,
    face: &FaceRep,
    x: &DVector<f64>,
    tol: &Tolerances,
) -> Option<f64> {
    strict_margin_within(p, face, x, tol, tol.accept)
}

fn strict_margin_within(
    p: &ConicProgram,
    face: &FaceRep,
    x: &DVector<f64>,
    tol: &Tolerances,
    span_tol: f64,
) -> Option<f64> {
    let s = p.slack(x.as_slice()).ok()?;
    let scale = s.norm().max(1.0);
    let off = face.project_complement(&s).max_abs();
    let margin = face.interior_margin(&s);
    (off <= span_tol * scale && margin > tol.accept * scale).then_some(margin)
}

/// `x` minus its component in `N(A)`, which does not change the slack.
fn without_kernel(p: &ConicProgram, x: &DVector<f64>, tol: f64) -> DVector<f64> {
    let mut a = DMatrix::zeros(p.ambient_dim(), p.m());
    for (j, aj) in p.a.iter().enumerate() {
        a.set_column(j, &aj.to_svec());
    }
    let kernel = null_space(&a, tol);
    x - &kernel * (kernel.transpose() * x)
}

/// Finds `x` with `b − Ax ∈ ri F` by maximizing the interior margin
/// `t ≤ 1` over the affine set `P⊥(b − Ax) = 0`.
pub fn strict_point(
    p: &ConicProgram,
    face: &FaceRep,
    opts: &ReducingOptions,
) -> Result<DVector<f64>, SolverError> {
    let tol = &opts.tol;
    let m = p.m();
    let d = p.ambient_dim();
    let mut pa = DMatrix::zeros(d, m);
    for (i, a) in p.a.iter().enumerate() {
        pa.set_column(i, &face.project_complement(a).to_svec());
    }
    let pb = face.project_complement(&p.b).to_svec();
    // least-squares particular solution and null directions of P⊥A
    let gram = pa.transpose() * &pa;
    let x_p = sym_pinv(&gram, 1e-12) * (pa.transpose() * &pb);
    let span_tol = opts.span_tol.unwrap_or(tol.accept);
    let resid = (&pa * &x_p - &pb).norm();
    if resid > span_tol * pb.norm().max(1.0) {
        return Err(SolverError::Infeasible(format!(
            "no slack lies in the span of the face (residual {resid:e})"
        )));
    }
    if face.is_zero() {
        return Ok(x_p);
    }
    // directions of P⊥A's null space that A also kills do not move the slack
    let free = null_space(&pa, tol.rank);
    let mut moved = DMatrix::zeros(d, free.ncols());
    for (j, n) in free.column_iter().enumerate() {
        moved.set_column(j, &p.apply(n.as_slice())?.to_svec());
    }
    let basis = &free * range_basis(&moved.transpose(), tol.rank);
    let b0 = p.slack(x_p.as_slice())?;
    // the set of maximizers can be unbounded, so first cap tr C(slack)
    let cap = 100.0 * (1.0 + face.compress(&b0).norm()) * (face.dim() as f64).sqrt();
    margin_point(p, face, opts, &x_p, &basis, &b0, Some(cap))
        .or_else(|_| margin_point(p, face, opts, &x_p, &basis, &b0, None))
}

/// `max t ≤ 1` s.t. `C(b0 − A N d) − t I ∈ K_F`, optionally with
/// `tr C(b0 − A N d) ≤ cap`.
fn margin_point(
    p: &ConicProgram,
    face: &FaceRep,
    opts: &ReducingOptions,
    x_p: &DVector<f64>,
    basis: &DMatrix<f64>,
    b0: &YElement,
    cap: Option<f64>,
) -> Result<DVector<f64>, SolverError> {
    let tol = &opts.tol;
    let span_tol = opts.span_tol.unwrap_or(tol.accept);
    let cs = face.compressed_structure();
    let weight = face_weight(face, None);
    let mut blocks = cs.clone();
    blocks.push(ConeBlock::Orthant(if cap.is_some() { 2 } else { 1 }));
    let with_tail = |core: YElement, tail: f64, trace: f64| {
        let mut e = core;
        let v = match cap {
            Some(_) => DVector::from_vec(vec![tail, trace]),
            None => DVector::from_element(1, tail),
        };
        e.blocks.push(BlockValue::Vector(v));
        e
    };
    let mut a: Vec<YElement> = basis
        .column_iter()
        .map(|n| {
            let z = face.compress(&p.apply(n.as_slice()).expect("length m"));
            let tr = -weight.dot(&z);
            with_tail(z, 0.0, tr)
        })
        .collect();
    let k = a.len();
    a.push(with_tail(weight.clone(), 1.0, 0.0));
    let mut c = DVector::zeros(k + 1);
    c[k] = 1.0;
    let z0 = face.compress(b0);
    let rhs_trace = cap.unwrap_or(0.0) - weight.dot(&z0);
    let aux = ConicProgram::new("margin", blocks, a, with_tail(z0, 1.0, rhs_trace), c)?;
    let res = solve_conic_lp(
        &aux,
        &SolverOptions {
            max_iter: opts.max_iter,
            tol: tol.solve,
            ..SolverOptions::default()
        },
    );
    match res.status {
        SolveStatus::Optimal | SolveStatus::NumericalFailure => {
            let x = x_p + basis * res.x.rows(0, k);
            if strict_margin_within(p, face, &x, tol, span_tol).is_some() {
                Ok(x)
            } else if res.status == SolveStatus::Optimal {
                Err(SolverError::AmbiguousOutcome {
                    value: res.primal_obj,
                })
            } else {
                Err(SolverError::NumericalFailure(
                    "margin problem did not converge".into(),
                ))
            }
        }
        SolveStatus::PrimalInfeasible => {
            Err(SolverError::Infeasible("no slack lies in the face".into()))
        }
        other => Err(SolverError::NumericalFailure(format!(
            "margin problem ended with status {other:?}"
        ))),
    }
}

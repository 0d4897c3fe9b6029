//! Dense primal-dual interior-point solver for conic LPs over orthant and PSD
//! blocks.
//!
//! The program `sup ⟨c,x⟩ s.t. b − Ax ∈ K` is solved in the form
//! `min −cᵀx s.t. Ax + s = b, s ∈ K` through a homogeneous self-dual
//! embedding with Nesterov–Todd scaling and Mehrotra predictor-corrector
//! steps. The embedding certifies infeasibility in either direction.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, LU, SVD};

use crate::model::{BlockValue, ConeBlock, ConicProgram, YElement};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub verbose: bool,
    /// Keep a copy of every iterate in [`SolveResult::iterates`].
    pub record_iterates: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-8,
            verbose: false,
            record_iterates: false,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// `y ∈ K`, `A*y = 0`, `⟨b,y⟩ = −1` is returned in `y`.
    PrimalInfeasible,
    /// `−A·ray ∈ K`, `⟨c,ray⟩ = 1`; no feasible point was found.
    DualInfeasible,
    /// A feasible `x` together with an improving ray.
    Unbounded,
    NumericalFailure,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Residuals {
    /// `‖b − Ax − s‖ / max(1, ‖b‖)`.
    pub primal: f64,
    /// `‖A*y − c‖ / max(1, ‖c‖)`.
    pub dual: f64,
    /// `⟨s, y⟩`.
    pub gap: f64,
    pub rel_gap: f64,
}

/// One interior iterate, rescaled by the embedding variable `τ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Iterate {
    pub x: DVector<f64>,
    pub y: YElement,
    pub tau: f64,
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: DVector<f64>,
    pub y: YElement,
    pub slack: YElement,
    pub ray: Option<DVector<f64>>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub iterates: Vec<Iterate>,
}

// ---------------------------------------------------------------------------
// Cone arithmetic

fn degree(structure: &[ConeBlock]) -> usize {
    structure.iter().map(ConeBlock::size).sum()
}

fn jordan(u: &YElement, v: &YElement) -> YElement {
    YElement {
        blocks: u
            .blocks
            .iter()
            .zip(&v.blocks)
            .map(|(a, b)| match (a, b) {
                (BlockValue::Vector(a), BlockValue::Vector(b)) => {
                    BlockValue::Vector(a.component_mul(b))
                }
                (BlockValue::Matrix(a), BlockValue::Matrix(b)) => {
                    BlockValue::Matrix((a * b + b * a) * 0.5)
                }
                _ => unreachable!(),
            })
            .collect(),
    }
}

enum BlockScaling {
    Orthant { d: DVector<f64> },
    Psd { r: DMatrix<f64>, rinv: DMatrix<f64> },
}

/// Nesterov–Todd scaling `W` with `W z = W⁻ᵀ s = λ`.
struct Scaling {
    blocks: Vec<BlockScaling>,
    /// Eigenvalues of the scaled point, per block.
    lambda: Vec<DVector<f64>>,
}

impl Scaling {
    fn new(s: &YElement, z: &YElement) -> Option<Self> {
        let mut blocks = Vec::with_capacity(s.blocks.len());
        let mut lambda = Vec::with_capacity(s.blocks.len());
        for (sb, zb) in s.blocks.iter().zip(&z.blocks) {
            match (sb, zb) {
                (BlockValue::Vector(s), BlockValue::Vector(z)) => {
                    if s.iter()
                        .chain(z.iter())
                        .any(|&v| v <= 0.0 || !v.is_finite())
                    {
                        return None;
                    }
                    blocks.push(BlockScaling::Orthant {
                        d: s.zip_map(z, |a, b| (a / b).sqrt()),
                    });
                    lambda.push(s.zip_map(z, |a, b| (a * b).sqrt()));
                }
                (BlockValue::Matrix(s), BlockValue::Matrix(z)) => {
                    let l1 = Cholesky::new(s.clone())?.l();
                    let l2 = Cholesky::new(z.clone())?.l();
                    let svd = SVD::new(l2.transpose() * &l1, true, true);
                    let u = svd.u?;
                    let v_t = svd.v_t?;
                    let sig = svd.singular_values;
                    if sig.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
                        return None;
                    }
                    let isq = DMatrix::from_diagonal(&sig.map(|x| 1.0 / x.sqrt()));
                    let r = &l1 * v_t.transpose() * &isq;
                    let rinv = &isq * u.transpose() * l2.transpose();
                    blocks.push(BlockScaling::Psd { r, rinv });
                    lambda.push(sig);
                }
                _ => unreachable!(),
            }
        }
        Some(Self { blocks, lambda })
    }

    fn map(&self, u: &YElement, which: Op) -> YElement {
        YElement {
            blocks: self
                .blocks
                .iter()
                .zip(&u.blocks)
                .map(|(w, b)| match (w, b) {
                    (BlockScaling::Orthant { d }, BlockValue::Vector(v)) => {
                        BlockValue::Vector(match which {
                            Op::W | Op::Wt => d.component_mul(v),
                            Op::Winv | Op::Wit => v.component_div(d),
                        })
                    }
                    (BlockScaling::Psd { r, rinv }, BlockValue::Matrix(m)) => {
                        BlockValue::Matrix(match which {
                            Op::W => r.transpose() * m * r,
                            Op::Wt => r * m * r.transpose(),
                            Op::Winv => rinv.transpose() * m * rinv,
                            Op::Wit => rinv * m * rinv.transpose(),
                        })
                    }
                    _ => unreachable!(),
                })
                .collect(),
        }
    }

    fn lambda_elem(&self) -> YElement {
        YElement {
            blocks: self
                .blocks
                .iter()
                .zip(&self.lambda)
                .map(|(w, l)| match w {
                    BlockScaling::Orthant { .. } => BlockValue::Vector(l.clone()),
                    BlockScaling::Psd { .. } => BlockValue::Matrix(DMatrix::from_diagonal(l)),
                })
                .collect(),
        }
    }

    /// Solves `λ ∘ v = r` for `v`.
    fn lambda_div(&self, r: &YElement) -> YElement {
        YElement {
            blocks: self
                .lambda
                .iter()
                .zip(&r.blocks)
                .map(|(l, b)| match b {
                    BlockValue::Vector(v) => BlockValue::Vector(v.component_div(l)),
                    BlockValue::Matrix(m) => {
                        let n = m.nrows();
                        BlockValue::Matrix(DMatrix::from_fn(n, n, |i, j| {
                            2.0 * m[(i, j)] / (l[i] + l[j])
                        }))
                    }
                })
                .collect(),
        }
    }

    /// Largest `α` with `λ + α·d ∈ K` (`+inf` if unrestricted).
    fn max_step(&self, d: &YElement) -> f64 {
        let mut alpha = f64::INFINITY;
        for (l, b) in self.lambda.iter().zip(&d.blocks) {
            match b {
                BlockValue::Vector(v) => {
                    for (li, vi) in l.iter().zip(v.iter()) {
                        if *vi < 0.0 {
                            alpha = alpha.min(-li / vi);
                        }
                    }
                }
                BlockValue::Matrix(m) => {
                    let n = m.nrows();
                    let ms = DMatrix::from_fn(n, n, |i, j| m[(i, j)] / (l[i] * l[j]).sqrt());
                    let ms = (&ms + ms.transpose()) * 0.5;
                    let lmin = SymmetricEigen::new(ms).eigenvalues.min();
                    if lmin < 0.0 {
                        alpha = alpha.min(-1.0 / lmin);
                    }
                }
            }
        }
        alpha
    }
}

#[derive(Clone, Copy)]
enum Op {
    W,
    Wt,
    Winv,
    Wit,
}

/// Moves `v` into the interior: `v + (1 − λ_min)e` when `λ_min` is not clearly positive.
fn push_interior(v: &YElement) -> YElement {
    let lmin = v
        .blocks
        .iter()
        .map(|b| match b {
            BlockValue::Vector(x) => x.min(),
            BlockValue::Matrix(m) => SymmetricEigen::new(m.clone()).eigenvalues.min(),
        })
        .fold(f64::INFINITY, f64::min);
    if lmin <= 1e-8 * v.norm().max(1.0) {
        let mut out = v.clone();
        out.axpy(1.0 - lmin, &YElement::identity(&v.structure()));
        out
    } else {
        v.clone()
    }
}

// ---------------------------------------------------------------------------
// Linear algebra on the column set

struct Columns<'a> {
    g: Vec<&'a YElement>,
}

impl Columns<'_> {
    fn apply(&self, x: &DVector<f64>, structure: &[ConeBlock]) -> YElement {
        let mut out = YElement::zeros(structure);
        for (xi, g) in x.iter().zip(&self.g) {
            out.axpy(*xi, g);
        }
        out
    }

    fn adjoint(&self, z: &YElement) -> DVector<f64> {
        DVector::from_iterator(self.g.len(), self.g.iter().map(|g| g.dot(z)))
    }
}

enum Factor {
    Chol(Cholesky<f64, nalgebra::Dyn>),
    Lu(LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn new(h: DMatrix<f64>) -> Option<Self> {
        if h.nrows() == 0 {
            return Cholesky::new(h).map(Factor::Chol);
        }
        if let Some(c) = Cholesky::new(h.clone()) {
            return Some(Factor::Chol(c));
        }
        let tr = h.trace().abs().max(1e-300);
        let n = h.nrows();
        let reg = &h + DMatrix::identity(n, n) * (1e-13 * tr / n as f64);
        if let Some(c) = Cholesky::new(reg) {
            return Some(Factor::Chol(c));
        }
        let lu = LU::new(h);
        lu.is_invertible().then_some(Factor::Lu(lu))
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            Factor::Chol(c) => c.solve(b),
            Factor::Lu(l) => l.solve(b).unwrap_or_else(|| DVector::zeros(b.len())),
        }
    }
}

/// Reduced KKT solver `[[0, Gᵀ], [G, −WᵀW]] [x; z] = [p; q]` for fixed scaling.
struct Kkt<'a> {
    scaling: &'a Scaling,
    ghat: Vec<YElement>,
    factor: Factor,
    structure: &'a [ConeBlock],
}

impl<'a> Kkt<'a> {
    fn new(cols: &Columns<'_>, scaling: &'a Scaling, structure: &'a [ConeBlock]) -> Option<Self> {
        let ghat: Vec<YElement> = cols.g.iter().map(|g| scaling.map(g, Op::Wit)).collect();
        let m = ghat.len();
        let mut h = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let v = ghat[i].dot(&ghat[j]);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let factor = Factor::new(h)?;
        Some(Self {
            scaling,
            ghat,
            factor,
            structure,
        })
    }

    /// Solve with two rounds of iterative refinement against the unscaled system.
    fn solve(
        &self,
        cols: &Columns<'_>,
        p: &DVector<f64>,
        q: &YElement,
    ) -> (DVector<f64>, YElement) {
        let (mut x, mut z) = self.solve_once(p, q);
        for _ in 0..2 {
            let rp = p - cols.adjoint(&z);
            let mut rq = q.sub(&cols.apply(&x, self.structure));
            rq.axpy(1.0, &self.scaling.map(&self.scaling.map(&z, Op::W), Op::Wt));
            if rp.amax() == 0.0 && rq.max_abs() == 0.0 {
                break;
            }
            let (dx, dz) = self.solve_once(&rp, &rq);
            x += dx;
            z.axpy(1.0, &dz);
        }
        (x, z)
    }

    fn solve_once(&self, p: &DVector<f64>, q: &YElement) -> (DVector<f64>, YElement) {
        let qhat = self.scaling.map(q, Op::Wit);
        let rhs =
            p + DVector::from_iterator(self.ghat.len(), self.ghat.iter().map(|g| g.dot(&qhat)));
        let x = self.factor.solve(&rhs);
        let mut gx = YElement::zeros(self.structure);
        for (xi, g) in x.iter().zip(&self.ghat) {
            gx.axpy(*xi, g);
        }
        let z = self.scaling.map(&gx.sub(&qhat), Op::Winv);
        (x, z)
    }
}

// ---------------------------------------------------------------------------
// Driver

struct Embedding<'a> {
    structure: &'a [ConeBlock],
    cols: Columns<'a>,
    c: DVector<f64>,
    h: &'a YElement,
}

struct State {
    x: DVector<f64>,
    s: YElement,
    z: YElement,
    tau: f64,
    kappa: f64,
}

struct Direction {
    dx: DVector<f64>,
    dz: YElement,
    ds: YElement,
    dtau: f64,
    dkappa: f64,
}

enum Outcome {
    Optimal(State),
    PrimalInfeasible(YElement),
    DualInfeasible(DVector<f64>),
    Failure(State, String),
}

impl Embedding<'_> {
    fn initial_point(&self) -> Option<State> {
        let ones = Scaling::new(
            &YElement::identity(self.structure),
            &YElement::identity(self.structure),
        )?;
        let kkt = Kkt::new(&self.cols, &ones, self.structure)?;
        let m = self.c.len();
        // least-squares primal start and minimum-norm dual start
        let (x, neg_s) = kkt.solve(&self.cols, &DVector::zeros(m), self.h);
        let (_, z) = kkt.solve(&self.cols, &(-&self.c), &YElement::zeros(self.structure));
        Some(State {
            x,
            s: push_interior(&neg_s.scaled(-1.0)),
            z: push_interior(&z),
            tau: 1.0,
            kappa: 1.0,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        kkt: &Kkt<'_>,
        x1: &DVector<f64>,
        z1: &YElement,
        st: &State,
        r1: &DVector<f64>,
        r2: &YElement,
        r3: f64,
        r4: &YElement,
        r5: f64,
    ) -> Direction {
        let sc = kkt.scaling;
        let l_r4 = sc.lambda_div(r4);
        let q = r2.sub(&sc.map(&l_r4, Op::Wt));
        let (x2, z2) = kkt.solve(&self.cols, r1, &q);
        let denom = -self.c.dot(x1) - self.h.dot(z1) + st.kappa / st.tau;
        let dtau = (r3 + r5 / st.tau + self.c.dot(&x2) + self.h.dot(&z2)) / denom;
        let dx = &x2 + x1 * dtau;
        let mut dz = z2;
        dz.axpy(dtau, z1);
        let ds = sc.map(&l_r4.sub(&sc.map(&dz, Op::W)), Op::Wt);
        let dkappa = (r5 - st.kappa * dtau) / st.tau;
        Direction {
            dx,
            dz,
            ds,
            dtau,
            dkappa,
        }
    }

    fn step_limit(&self, sc: &Scaling, st: &State, d: &Direction) -> f64 {
        let mut a = sc
            .max_step(&sc.map(&d.ds, Op::Wit))
            .min(sc.max_step(&sc.map(&d.dz, Op::W)));
        if d.dtau < 0.0 {
            a = a.min(-st.tau / d.dtau);
        }
        if d.dkappa < 0.0 {
            a = a.min(-st.kappa / d.dkappa);
        }
        a
    }

    fn run(&self, opts: &SolverOptions, iterates: &mut Vec<Iterate>, iters: &mut usize) -> Outcome {
        let Some(mut st) = self.initial_point() else {
            return Outcome::Failure(
                State {
                    x: DVector::zeros(self.c.len()),
                    s: YElement::identity(self.structure),
                    z: YElement::identity(self.structure),
                    tau: 1.0,
                    kappa: 1.0,
                },
                "singular system at the initial point".into(),
            );
        };
        let nu = degree(self.structure) as f64;
        let hnorm = self.h.norm().max(1.0);
        let cnorm = self.c.norm().max(1.0);
        let e = YElement::identity(self.structure);
        for it in 0..=opts.max_iter {
            *iters = it;
            let rx = self.cols.adjoint(&st.z) + &self.c * st.tau;
            let mut rz = self.cols.apply(&st.x, self.structure);
            rz.axpy(1.0, &st.s);
            rz.axpy(-st.tau, self.h);
            let cx = self.c.dot(&st.x);
            let hz = self.h.dot(&st.z);
            let rt = st.kappa + cx + hz;
            let sz = st.s.dot(&st.z);
            let mu = (sz + st.tau * st.kappa) / (nu + 1.0);

            let pcost = cx / st.tau;
            let dcost = -hz / st.tau;
            let pres = rz.norm() / st.tau / hnorm;
            let dres = rx.norm() / st.tau / cnorm;
            let gap = sz / (st.tau * st.tau);
            let rel_gap = gap / pcost.abs().min(dcost.abs()).max(1.0);

            if opts.record_iterates {
                iterates.push(Iterate {
                    x: &st.x / st.tau,
                    y: st.z.scaled(1.0 / st.tau),
                    tau: st.tau,
                    kappa: st.kappa,
                });
            }
            if opts.verbose {
                eprintln!(
                    "{it:3} pcost {pcost:+.8e} dcost {dcost:+.8e} gap {gap:.2e} pres {pres:.2e} dres {dres:.2e} k/t {:.2e}",
                    st.kappa / st.tau
                );
            }

            if pres <= opts.tol && dres <= opts.tol && rel_gap <= opts.tol {
                return Outcome::Optimal(st);
            }
            if hz < 0.0 {
                let pinf = self.cols.adjoint(&st.z).norm() / cnorm / (-hz);
                if pinf <= opts.tol {
                    return Outcome::PrimalInfeasible(st.z.scaled(1.0 / (-hz)));
                }
            }
            if cx < 0.0 {
                let mut gs = self.cols.apply(&st.x, self.structure);
                gs.axpy(1.0, &st.s);
                let dinf = gs.norm() / hnorm / (-cx);
                if dinf <= opts.tol {
                    return Outcome::DualInfeasible(&st.x / (-cx));
                }
            }
            if it == opts.max_iter {
                return Outcome::Failure(
                    st,
                    format!("no convergence in {} iterations", opts.max_iter),
                );
            }

            let Some(sc) = Scaling::new(&st.s, &st.z) else {
                return Outcome::Failure(st, "lost interiority".into());
            };
            let Some(kkt) = Kkt::new(&self.cols, &sc, self.structure) else {
                return Outcome::Failure(st, "singular KKT system".into());
            };
            let (x1, z1) = kkt.solve(&self.cols, &(-&self.c), self.h);
            let lam = sc.lambda_elem();
            let lam_sq = jordan(&lam, &lam);

            // predictor
            let aff = self.direction(
                &kkt,
                &x1,
                &z1,
                &st,
                &(-&rx),
                &rz.scaled(-1.0),
                rt,
                &lam_sq.scaled(-1.0),
                -st.tau * st.kappa,
            );
            let a_aff = self.step_limit(&sc, &st, &aff).min(1.0);
            let sigma = (1.0 - a_aff).powi(3);

            // corrector
            let corr = jordan(&sc.map(&aff.ds, Op::Wit), &sc.map(&aff.dz, Op::W));
            let mut r4 = lam_sq.scaled(-1.0);
            r4.axpy(-1.0, &corr);
            r4.axpy(sigma * mu, &e);
            let r5 = -st.tau * st.kappa - aff.dtau * aff.dkappa + sigma * mu;
            let f = 1.0 - sigma;
            let d = self.direction(
                &kkt,
                &x1,
                &z1,
                &st,
                &(-&rx * f),
                &rz.scaled(-f),
                rt * f,
                &r4,
                r5,
            );
            let mut alpha = (0.99 * self.step_limit(&sc, &st, &d)).min(1.0);

            let mut next = None;
            for _ in 0..20 {
                let mut s = st.s.clone();
                s.axpy(alpha, &d.ds);
                let mut z = st.z.clone();
                z.axpy(alpha, &d.dz);
                let tau = st.tau + alpha * d.dtau;
                let kappa = st.kappa + alpha * d.dkappa;
                if tau > 0.0 && kappa > 0.0 && Scaling::new(&s, &z).is_some() {
                    next = Some(State {
                        x: &st.x + &d.dx * alpha,
                        s,
                        z,
                        tau,
                        kappa,
                    });
                    break;
                }
                alpha *= 0.5;
            }
            match next {
                Some(n) => st = n,
                None => return Outcome::Failure(st, "step length collapsed".into()),
            }
        }
        unreachable!("loop returns at max_iter")
    }
}

/// Columns of `A` kept by the solver, in order, plus for each dropped column
/// its expansion in the kept ones.
fn independent_columns(a: &[YElement]) -> (Vec<usize>, Vec<(usize, DVector<f64>)>) {
    let vecs: Vec<DVector<f64>> = a.iter().map(YElement::to_svec).collect();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    let mut dropped_idx = Vec::new();
    for (j, v) in vecs.iter().enumerate() {
        let norm = v.norm();
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let t = q.dot(&r);
                r.axpy(-t, q, 1.0);
            }
        }
        let rn = r.norm();
        if norm > 0.0 && rn > 1e-9 * norm {
            basis.push(r / rn);
            kept.push(j);
        } else {
            dropped_idx.push(j);
        }
    }
    let mut dropped = Vec::new();
    if !dropped_idx.is_empty() {
        let k = kept.len();
        let gram = DMatrix::from_fn(k, k, |i, l| vecs[kept[i]].dot(&vecs[kept[l]]));
        let pinv = crate::linalg::sym_pinv(&gram, 1e-14);
        for j in dropped_idx {
            let rhs = DVector::from_fn(k, |i, _| vecs[kept[i]].dot(&vecs[j]));
            dropped.push((j, &pinv * rhs));
        }
    }
    (kept, dropped)
}

fn finish(
    p: &ConicProgram,
    status: SolveStatus,
    x: DVector<f64>,
    y: YElement,
    ray: Option<DVector<f64>>,
    iterations: usize,
    iterates: Vec<Iterate>,
) -> SolveResult {
    let slack = p.slack(x.as_slice()).expect("length checked");
    let aty = p.adjoint(&y).expect("structure checked");
    let bn = p.b.norm().max(1.0);
    let cn = p.c.norm().max(1.0);
    let primal_obj = p.c.dot(&x);
    let dual_obj = p.b.dot(&y);
    let viol = slack.cone_violation();
    let gap = slack.dot(&y);
    let residuals = Residuals {
        primal: viol / bn,
        dual: (aty - &p.c).norm() / cn,
        gap,
        rel_gap: gap.abs() / primal_obj.abs().min(dual_obj.abs()).max(1.0),
    };
    SolveResult {
        status,
        x,
        y,
        slack,
        ray,
        primal_obj,
        dual_obj,
        residuals,
        iterations,
        iterates,
    }
}

/// Solves `sup ⟨c,x⟩ s.t. b − Ax ∈ K` together with its dual.
pub fn solve_conic_lp(p: &ConicProgram, opts: &SolverOptions) -> SolveResult {
    let m = p.m();
    let (kept, dropped) = independent_columns(&p.a);
    let cnorm = p.c.norm().max(1.0);
    for (j, t) in &dropped {
        let implied: f64 = kept.iter().zip(t.iter()).map(|(&k, tk)| tk * p.c[k]).sum();
        let defect = p.c[*j] - implied;
        if defect.abs() > opts.tol.sqrt() * cnorm * (1.0 + t.norm()) {
            // d = e_j − Σ t_k e_k has A d = 0 and ⟨c,d⟩ = defect
            let mut ray = DVector::zeros(m);
            ray[*j] = 1.0;
            for (&k, tk) in kept.iter().zip(t.iter()) {
                ray[k] -= tk;
            }
            ray /= defect;
            return unbounded_or_dual_infeasible(p, opts, ray);
        }
    }

    let cols = Columns {
        g: kept.iter().map(|&j| &p.a[j]).collect(),
    };
    let emb = Embedding {
        structure: &p.blocks,
        cols,
        c: DVector::from_iterator(kept.len(), kept.iter().map(|&j| -p.c[j])),
        h: &p.b,
    };
    let scatter = |xk: &DVector<f64>| {
        let mut x = DVector::zeros(m);
        for (i, &j) in kept.iter().enumerate() {
            x[j] = xk[i];
        }
        x
    };
    let mut iterates = Vec::new();
    let mut iters = 0;
    match emb.run(opts, &mut iterates, &mut iters) {
        Outcome::Optimal(st) => finish(
            p,
            SolveStatus::Optimal,
            scatter(&(&st.x / st.tau)),
            st.z.scaled(1.0 / st.tau),
            None,
            iters,
            iterates,
        ),
        Outcome::PrimalInfeasible(y) => finish(
            p,
            SolveStatus::PrimalInfeasible,
            DVector::zeros(m),
            y,
            None,
            iters,
            iterates,
        ),
        Outcome::DualInfeasible(ray) => {
            let mut r = unbounded_or_dual_infeasible(p, opts, scatter(&ray));
            r.iterations = iters;
            r.iterates = iterates;
            r
        }
        Outcome::Failure(st, msg) => {
            if opts.verbose {
                eprintln!("solver: {msg}");
            }
            finish(
                p,
                SolveStatus::NumericalFailure,
                scatter(&(&st.x / st.tau)),
                st.z.scaled(1.0 / st.tau),
                None,
                iters,
                iterates,
            )
        }
    }
}

fn unbounded_or_dual_infeasible(
    p: &ConicProgram,
    opts: &SolverOptions,
    ray: DVector<f64>,
) -> SolveResult {
    let mut feas = p.clone();
    feas.c = DVector::zeros(p.m());
    let inner = solve_conic_lp(
        &feas,
        &SolverOptions {
            record_iterates: false,
            ..opts.clone()
        },
    );
    let zero_y = YElement::zeros(&p.blocks);
    if inner.status == SolveStatus::Optimal {
        finish(
            p,
            SolveStatus::Unbounded,
            inner.x,
            zero_y,
            Some(ray),
            0,
            Vec::new(),
        )
    } else {
        finish(
            p,
            SolveStatus::DualInfeasible,
            DVector::zeros(p.m()),
            zero_y,
            Some(ray),
            0,
            Vec::new(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::sdp_example;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn orthant(v: &[f64]) -> YElement {
        YElement::from_vector(DVector::from_column_slice(v))
    }

    fn kkt_check(p: &ConicProgram, r: &SolveResult, tol: f64) {
        assert_eq!(r.status, SolveStatus::Optimal);
        let s = p.slack(r.x.as_slice()).unwrap();
        assert!(
            s.cone_violation() <= tol,
            "slack violation {}",
            s.cone_violation()
        );
        assert!(
            r.y.cone_violation() <= tol,
            "dual violation {}",
            r.y.cone_violation()
        );
        let res = (p.adjoint(&r.y).unwrap() - &p.c).norm();
        assert!(res <= tol * p.c.norm().max(1.0), "dual residual {res}");
        assert!(
            s.dot(&r.y).abs() <= tol * (1.0 + r.primal_obj.abs()),
            "gap {}",
            s.dot(&r.y)
        );
    }

    #[test]
    fn small_lp() {
        // max x1 s.t. x1 <= 1, x1 >= 0, x2 >= 0, x2 <= 3
        let p = ConicProgram::new(
            "lp",
            vec![ConeBlock::Orthant(4)],
            vec![
                orthant(&[1.0, -1.0, 0.0, 0.0]),
                orthant(&[0.0, 0.0, -1.0, 1.0]),
            ],
            orthant(&[1.0, 0.0, 0.0, 3.0]),
            DVector::from_vec(vec![1.0, 0.0]),
        )
        .unwrap();
        let r = solve_conic_lp(&p, &SolverOptions::default());
        kkt_check(&p, &r, 1e-7);
        assert!((r.primal_obj - 1.0).abs() < 1e-7);
        assert!((r.dual_obj - 1.0).abs() < 1e-7);
    }

    #[test]
    fn infeasible_lp() {
        // x <= -1 and x >= 0
        let p = ConicProgram::new(
            "inf",
            vec![ConeBlock::Orthant(2)],
            vec![orthant(&[1.0, -1.0])],
            orthant(&[-1.0, 0.0]),
            DVector::from_vec(vec![1.0]),
        )
        .unwrap();
        let r = solve_conic_lp(&p, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::PrimalInfeasible);
        assert!(r.y.cone_violation() <= 1e-9);
        assert!(p.adjoint(&r.y).unwrap().norm() <= 1e-7);
        assert!((p.b.dot(&r.y) + 1.0).abs() < 1e-9);
    }

    #[test]
    fn unbounded_lp() {
        // max x s.t. -x <= 0
        let p = ConicProgram::new(
            "unb",
            vec![ConeBlock::Orthant(1)],
            vec![orthant(&[-1.0])],
            orthant(&[0.0]),
            DVector::from_vec(vec![1.0]),
        )
        .unwrap();
        let r = solve_conic_lp(&p, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Unbounded);
        let ray = r.ray.unwrap();
        assert!((p.c.dot(&ray) - 1.0).abs() < 1e-9);
        assert!(ray[0] > 0.0);
    }

    #[test]
    fn dependent_columns() {
        // a2 = 2 a1 with consistent objective, and an inconsistent variant
        let a1 = orthant(&[1.0, -1.0]);
        let p = ConicProgram::new(
            "dep",
            vec![ConeBlock::Orthant(2)],
            vec![a1.clone(), a1.scaled(2.0)],
            orthant(&[1.0, 0.0]),
            DVector::from_vec(vec![1.0, 2.0]),
        )
        .unwrap();
        let r = solve_conic_lp(&p, &SolverOptions::default());
        kkt_check(&p, &r, 1e-7);
        assert!((r.primal_obj - 1.0).abs() < 1e-7);
        let mut q = p.clone();
        q.c = DVector::from_vec(vec![1.0, 0.0]);
        let r = solve_conic_lp(&q, &SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Unbounded);
    }

    #[test]
    fn random_strictly_feasible_sdps() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..10 {
            let blocks = vec![ConeBlock::Psd(4), ConeBlock::Orthant(3), ConeBlock::Psd(2)];
            let d = crate::model::ambient_dim(&blocks);
            let mut rand_el = || {
                let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                YElement::from_svec(&blocks, &v).unwrap()
            };
            let m = 5;
            let a: Vec<YElement> = (0..m).map(|_| rand_el()).collect();
            let x0: Vec<f64> = (0..m).map(|_| 0.3).collect();
            let id = YElement::identity(&blocks);
            // b = A x0 + I so x0 is strictly feasible; c = A*(I + small) keeps the dual strict
            let mut b = id.clone();
            for (xi, ai) in x0.iter().zip(&a) {
                b.axpy(*xi, ai);
            }
            let mut y0 = id.clone();
            y0.axpy(0.1, &rand_el());
            let tmp =
                ConicProgram::new("t", blocks.clone(), a.clone(), b.clone(), DVector::zeros(m))
                    .unwrap();
            let c = tmp.adjoint(&y0).unwrap();
            let p = ConicProgram::new(format!("r{trial}"), blocks.clone(), a, b, c).unwrap();
            let r = solve_conic_lp(&p, &SolverOptions::default());
            kkt_check(&p, &r, 1e-7);
            assert!((r.primal_obj - r.dual_obj).abs() <= 1e-6 * (1.0 + r.dual_obj.abs()));
        }
    }

    #[test]
    fn standard_dual_of_sdp_example_stays_interior() {
        let p = sdp_example();
        let opts = SolverOptions {
            record_iterates: true,
            ..SolverOptions::default()
        };
        let r = solve_conic_lp(&p, &opts);
        assert!(!r.iterates.is_empty());
        for it in &r.iterates {
            assert!(it.y.matrix(0)[(0, 0)] > 0.0);
        }
        let last = r.iterates.last().unwrap().y.matrix(0).clone();
        assert!(last[(0, 0)] < 1e-3);
    }
}

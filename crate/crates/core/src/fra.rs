//! The facial reduction driver: builds the chain `K = F_0 ⊋ F_1 ⊋ … ⊋ F_t = F_min`
//! together with the certificates `y_i ∈ L ∩ F_{i−1}*`, and the tools that
//! check, split and consume such chains.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::config::{default_rank_tol, Tolerances};
use crate::error::{FaceError, ModelError, SolverError};
use crate::faces::{
    chain_length, dual_face_violation, intersect_with_hyperplane, tangent_pattern_membership,
    FaceRep,
};
use crate::linalg::{null_space, nullspace_basis, sym_eig, sym_pinv, symmetrize};
use crate::model::{BlockValue, ConicProgram, YElement};
use crate::reducing::{
    solve_reducing_pair_with, strict_margin, strict_point, ReducingOptions, ReducingOutcome,
};
use crate::refine::refine_chain;

/// Output of [`run_facial_reduction`].
///
/// `ys[0]` is zero and `faces[0]` is `K`; entry `i ≥ 1` records the
/// certificate `y_i` and the face `F_i = F_{i−1} ∩ y_i^⊥`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReductionCertificate {
    pub ys: Vec<YElement>,
    pub faces: Vec<FaceRep>,
    pub reducing: Vec<bool>,
    /// `x` with `b − Ax ∈ ri F_t`, when known.
    pub x_strict: Option<DVector<f64>>,
}

impl ReductionCertificate {
    /// The chain of length zero: `F_0 = K`.
    pub fn trivial(p: &ConicProgram) -> Self {
        Self {
            ys: vec![YElement::zeros(&p.blocks)],
            faces: vec![FaceRep::full(&p.blocks)],
            reducing: vec![false],
            x_strict: None,
        }
    }

    /// Builds faces and flags from bare certificates `y_1, …, y_t`.
    ///
    /// A certificate outside `F_{i−1}*` leaves the face unchanged; the
    /// verifier reports it.
    pub fn from_certificates(p: &ConicProgram, ys: &[YElement], rank_tol: f64) -> Self {
        let mut cert = Self::trivial(p);
        for y in ys {
            let prev = cert.faces.last().expect("nonempty").clone();
            let next =
                intersect_with_hyperplane(&prev, y, rank_tol).unwrap_or_else(|_| prev.clone());
            cert.reducing.push(next.dim() < prev.dim());
            cert.ys.push(y.clone());
            cert.faces.push(next);
        }
        cert
    }

    pub fn final_face(&self) -> &FaceRep {
        self.faces.last().expect("chain starts at K")
    }

    /// Number of recorded steps `t`.
    pub fn len(&self) -> usize {
        self.ys.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn reducing_steps(&self) -> usize {
        self.reducing.iter().filter(|&&r| r).count()
    }

    /// The certificate list padded with zeros to `ℓ + 1` entries `y_0, …, y_ℓ`.
    pub fn padded(&self, ell: usize) -> Vec<YElement> {
        let mut ys = self.ys.clone();
        let zero = YElement::zeros(&self.ys[0].structure());
        while ys.len() < ell + 1 {
            ys.push(zero.clone());
        }
        ys
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("facial reduction stopped after {} reducing steps: {source}", partial.reducing_steps())]
pub struct ReductionError {
    pub partial: Box<ReductionCertificate>,
    #[source]
    pub source: SolverError,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FraOptions {
    pub tol: Tolerances,
    pub max_iter: usize,
    /// Seed for the perturbed retry after a nonreducing certificate.
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 20_130_821;

impl Default for FraOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            max_iter: 200,
            seed: DEFAULT_SEED,
        }
    }
}

/// `dim L` for `L = N((A,b)*)`.
pub fn dim_l(p: &ConicProgram, rank_tol: f64) -> usize {
    nullspace_basis(&p.homogenized_rows(), &p.blocks, rank_tol).len()
}

/// `ℓ = min{ℓ_K − 1, dim L}`.
pub fn compute_ell(p: &ConicProgram) -> usize {
    (chain_length(&p.blocks) - 1).min(dim_l(p, default_rank_tol()))
}

/// Runs facial reduction until a strictly feasible point for the current face
/// is found. Every recorded step is reducing.
pub fn run_facial_reduction(
    p: &ConicProgram,
    opts: &FraOptions,
) -> Result<ReductionCertificate, ReductionError> {
    let mut cert = ReductionCertificate::trivial(p);
    let fail = |cert: &ReductionCertificate, source: SolverError| ReductionError {
        partial: Box::new(cert.clone()),
        source,
    };
    // each reducing step lowers dim F by at least one
    let bound = FaceRep::full(&p.blocks).dim() + 1;
    for step in 0..bound {
        let face = cert.final_face().clone();
        let mut ropts = ReducingOptions {
            tol: opts.tol,
            max_iter: opts.max_iter,
            perturb_seed: None,
            span_tol: Some(opts.tol.accept.sqrt()),
        };
        let mut attempt = 0;
        let next = loop {
            match solve_reducing_pair_with(p, &face, &ropts) {
                Ok(ReducingOutcome::MinimalReached(x)) => {
                    cert.x_strict = Some(x);
                    return Ok(finish(p, cert, &opts.tol));
                }
                Ok(ReducingOutcome::Reduced(y)) => {
                    let next = intersect_with_hyperplane(&face, &y, opts.tol.rank)
                        .map_err(|e| fail(&cert, e.into()))?;
                    if next.dim() < face.dim() {
                        break (y, next);
                    }
                }
                Err(e) => return Err(fail(&cert, e)),
            }
            attempt += 1;
            if attempt > 1 {
                // no rank drop twice: the face should already be minimal
                return match strict_point(p, &face, &ropts) {
                    Ok(x) => {
                        cert.x_strict = Some(x);
                        Ok(finish(p, cert, &opts.tol))
                    }
                    Err(e) => Err(fail(&cert, e)),
                };
            }
            ropts.perturb_seed = Some(opts.seed.wrapping_add(step as u64));
        };
        cert.ys.push(next.0);
        cert.faces.push(next.1);
        cert.reducing.push(true);
    }
    Err(fail(
        &cert,
        SolverError::NumericalFailure("face dimension did not decrease".into()),
    ))
}

/// Refines the chain when possible; otherwise keeps it if its strict point
/// passes the tight test, and drops the point if not.
fn finish(
    p: &ConicProgram,
    mut cert: ReductionCertificate,
    tol: &Tolerances,
) -> ReductionCertificate {
    if let Some(refined) = refine_chain(p, &cert, tol) {
        return refined;
    }
    let tight = cert
        .x_strict
        .as_ref()
        .is_some_and(|x| strict_margin(p, cert.final_face(), x, tol).is_some());
    if !tight {
        cert.x_strict = None;
    }
    cert
}

/// One line of a verification report.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub step: Option<usize>,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        match self.step {
            Some(i) => write!(f, "{verdict} step {i} {}: {}", self.name, self.detail),
            None => write!(f, "{verdict} {}: {}", self.name, self.detail),
        }
    }
}

/// Result of [`verify_certificate_chain`].
#[derive(Clone, Debug, PartialEq)]
pub struct ChainReport {
    pub checks: Vec<Check>,
    /// Faces recomputed from the certificates.
    pub faces: Vec<FaceRep>,
}

impl ChainReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn failed(&self, name: &str) -> bool {
        self.failures().any(|c| c.name == name)
    }
}

impl fmt::Display for ChainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

pub(crate) fn check(
    step: Option<usize>,
    name: &'static str,
    passed: bool,
    detail: String,
) -> Check {
    Check {
        step,
        name,
        passed,
        detail,
    }
}

/// Largest relative residual `|⟨row_j, y⟩| / (‖row_j‖ ‖y‖)` over `(a_1, …, a_m, b)`.
pub fn l_residual(p: &ConicProgram, y: &YElement) -> f64 {
    let yn = y.norm().max(1.0);
    p.homogenized_rows()
        .iter()
        .map(|r| r.dot(y).abs() / (r.norm().max(1.0) * yn))
        .fold(0.0, f64::max)
}

/// Rechecks every claim of a chain without solving anything.
pub fn verify_certificate_chain(
    p: &ConicProgram,
    cert: &ReductionCertificate,
    tol: &Tolerances,
) -> ChainReport {
    let mut checks = Vec::new();
    let structure_ok = cert.ys.iter().all(|y| y.matches(&p.blocks))
        && cert.faces.iter().all(|f| f.structure() == p.blocks);
    checks.push(check(
        None,
        "structure",
        structure_ok && !cert.ys.is_empty(),
        format!("{} certificates, {} faces", cert.ys.len(), cert.faces.len()),
    ));
    if !structure_ok || cert.ys.is_empty() {
        return ChainReport {
            checks,
            faces: Vec::new(),
        };
    }
    checks.push(check(
        Some(0),
        "y0 is zero",
        cert.ys[0].max_abs() == 0.0,
        format!("max |y0| = {:e}", cert.ys[0].max_abs()),
    ));
    let mut faces = vec![FaceRep::full(&p.blocks)];
    if let Some(f0) = cert.faces.first() {
        checks.push(check(
            Some(0),
            "face recomputation",
            f0.is_full(),
            format!("claimed F0 = {f0}"),
        ));
    }
    for i in 1..cert.ys.len() {
        let y = &cert.ys[i];
        let prev = faces[i - 1].clone();
        let res = l_residual(p, y);
        checks.push(check(
            Some(i),
            "membership in L",
            res <= tol.accept,
            format!("relative residual {res:e}"),
        ));
        let viol = dual_face_violation(&prev, y).unwrap_or(f64::INFINITY);
        let scale = y.max_abs().max(1.0);
        checks.push(check(
            Some(i),
            "membership in dual face",
            viol <= tol.accept * scale,
            format!("violation {viol:e}"),
        ));
        let next = intersect_with_hyperplane(&prev, y, tol.rank).unwrap_or_else(|_| prev.clone());
        if let Some(claimed) = cert.faces.get(i) {
            let same = claimed.approx_eq(&next, tol.rank.sqrt());
            checks.push(check(
                Some(i),
                "face recomputation",
                same,
                format!("claimed {claimed}, recomputed {next}"),
            ));
        }
        let drop = next.dim() < prev.dim();
        if let Some(&flag) = cert.reducing.get(i) {
            checks.push(check(
                Some(i),
                "reducing flag",
                flag == drop,
                format!("flag {flag}, dim {} -> {}", prev.dim(), next.dim()),
            ));
        }
        checks.push(check(
            Some(i),
            "monotone chain",
            next.is_subface_of(&prev, tol.rank.sqrt()),
            format!("dim {} -> {}", prev.dim(), next.dim()),
        ));
        faces.push(next);
    }
    if !cert.faces.is_empty() {
        checks.push(check(
            None,
            "chain length",
            cert.faces.len() == cert.ys.len() && cert.reducing.len() == cert.ys.len(),
            format!(
                "{} certificates, {} faces, {} flags",
                cert.ys.len(),
                cert.faces.len(),
                cert.reducing.len()
            ),
        ));
    }
    let ell = compute_ell(p);
    let count = faces.windows(2).filter(|w| w[1].dim() < w[0].dim()).count();
    checks.push(check(
        None,
        "reducing count",
        count <= ell,
        format!("{count} reducing steps, bound {ell}"),
    ));
    let last = faces.last().expect("nonempty");
    match &cert.x_strict {
        None => checks.push(check(None, "Slater margin", true, "not provided".into())),
        Some(x) if x.len() != p.m() => checks.push(check(
            None,
            "Slater margin",
            false,
            format!("point has length {}, expected {}", x.len(), p.m()),
        )),
        Some(x) => {
            let margin = strict_margin(p, last, x, tol);
            checks.push(check(
                None,
                "Slater margin",
                margin.is_some(),
                match margin {
                    Some(m) => format!("b - Ax in ri F_t with margin {m:e}"),
                    None => {
                        let s = p.slack(x.as_slice()).expect("length checked");
                        format!(
                            "margin {:e}, off-face residual {:e}",
                            last.interior_margin(&s),
                            last.project_complement(&s).max_abs()
                        )
                    }
                },
            ))
        }
    }
    ChainReport { checks, faces }
}

/// The splitting `y_i = u_i + v_i` with `u_i ∈ K*` and `v_i ∈ F_{i−1}^⊥`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecomposedChain {
    pub pairs: Vec<(YElement, YElement)>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecompositionError {
    #[error("step {step}: certificate is not in the dual face (residual {residual:e})")]
    Residual { step: usize, residual: f64 },
    #[error("step {step}: v is not tangent to u_0 + ... + u_{{i-1}}")]
    NotTangent { step: usize },
    #[error(transparent)]
    Face(#[from] FaceError),
}

fn clip_block(v: &BlockValue) -> (BlockValue, f64) {
    match v {
        BlockValue::Vector(x) => {
            let neg = x.iter().fold(0.0_f64, |a, &t| a.max(-t));
            (BlockValue::Vector(x.map(|t| t.max(0.0))), neg)
        }
        BlockValue::Matrix(m) => {
            let eig = sym_eig(&symmetrize(m)).expect("symmetrized");
            let neg = (-eig.min_value()).max(0.0);
            (
                BlockValue::Matrix(eig.reconstruct_with(|l| l.max(0.0))),
                neg,
            )
        }
    }
}

/// Splits each certificate by clipping its compression to the cone.
pub fn decompose_certificates(
    p: &ConicProgram,
    cert: &ReductionCertificate,
    tol: f64,
) -> Result<DecomposedChain, DecompositionError> {
    let zero = YElement::zeros(&p.blocks);
    let mut pairs = vec![(zero.clone(), zero.clone())];
    let mut sum = zero;
    for i in 1..cert.ys.len() {
        let y = &cert.ys[i];
        y.check_structure(&p.blocks).map_err(FaceError::from)?;
        let face = cert
            .faces
            .get(i - 1)
            .cloned()
            .unwrap_or_else(|| FaceRep::full(&p.blocks));
        let z = face.compress(y);
        let mut worst = 0.0_f64;
        let clipped = YElement {
            blocks: z
                .blocks
                .iter()
                .map(|b| {
                    let (c, neg) = clip_block(b);
                    worst = worst.max(neg);
                    c
                })
                .collect(),
        };
        let scale = y.max_abs().max(1.0);
        if worst > tol * scale {
            return Err(DecompositionError::Residual {
                step: i,
                residual: worst,
            });
        }
        let u = face.expand(&clipped);
        let v = y.sub(&u);
        if !tangent_pattern_membership(&sum, &v, tol.max(default_rank_tol()))? {
            return Err(DecompositionError::NotTangent { step: i });
        }
        sum = sum.add(&u);
        pairs.push((u, v));
    }
    Ok(DecomposedChain { pairs })
}

/// A program over `F_min` in compressed coordinates with `x = x_p + N d`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedProgram {
    pub program: ConicProgram,
    pub offset: DVector<f64>,
    pub basis: DMatrix<f64>,
}

impl ReducedProgram {
    /// Maps a point of the reduced program back to the original variables.
    pub fn lift(&self, d: &[f64]) -> DVector<f64> {
        &self.offset + &self.basis * DVector::from_column_slice(d)
    }
}

/// Replaces `K` by the final face of the chain. The variables are restricted
/// to the affine set where `b − Ax` lies in the span of the face.
pub fn reduced_program(
    p: &ConicProgram,
    cert: &ReductionCertificate,
    tol: &Tolerances,
) -> Result<ReducedProgram, SolverError> {
    let face = cert.final_face();
    if face.is_zero() {
        return Err(SolverError::Model(ModelError::InvalidBlock(
            "the minimal face is {0}".into(),
        )));
    }
    let d = p.ambient_dim();
    let mut pa = DMatrix::zeros(d, p.m());
    for (i, a) in p.a.iter().enumerate() {
        pa.set_column(i, &face.project_complement(a).to_svec());
    }
    let pb = face.project_complement(&p.b).to_svec();
    let offset = match &cert.x_strict {
        Some(x) => x.clone(),
        None => sym_pinv(&(pa.transpose() * &pa), 1e-12) * (pa.transpose() * &pb),
    };
    let resid = (&pa * &offset - &pb).norm();
    if resid > tol.accept * pb.norm().max(1.0) {
        return Err(SolverError::Infeasible(format!(
            "no slack lies in the span of the final face (residual {resid:e})"
        )));
    }
    let basis = if p.m() == 0 {
        DMatrix::zeros(0, 0)
    } else {
        null_space(&pa, tol.rank)
    };
    let a = basis
        .column_iter()
        .map(|n| face.compress(&p.apply(n.as_slice()).expect("length m")))
        .collect();
    let b = face.compress(&p.slack(offset.as_slice())?);
    let c = basis.transpose() * &p.c;
    let program = ConicProgram::new(
        format!("{}-reduced", p.name),
        face.compressed_structure(),
        a,
        b,
        c,
    )?;
    Ok(ReducedProgram {
        program,
        offset,
        basis,
    })
}

/// `"K"` for the full cone, otherwise the per-block supports and ranks.
pub fn describe_face(face: &FaceRep) -> String {
    if face.is_full() {
        "K".into()
    } else {
        face.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faces::BlockFace;
    use crate::fixtures::{
        lp_example, lp_example_chain, lp_example_one_step, sdp_example, sdp_example_chain,
        sdp_example_decomposition,
    };
    use crate::linalg::subspace_distance;
    use crate::model::ConeBlock;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn lp_vec(v: &[f64]) -> YElement {
        YElement::from_vector(DVector::from_column_slice(v))
    }

    #[test]
    fn ell_of_examples() {
        // rank(a_1, a_2, a_3, b) = 3 in R^5
        assert_eq!(compute_ell(&lp_example()), 2);
        // S^3 has a face chain of length 4; L has dimension 6 - 3
        assert_eq!(compute_ell(&sdp_example()), 3);
    }

    #[test]
    fn ell_is_zero_when_l_is_trivial() {
        let p = ConicProgram::new(
            "tight",
            vec![ConeBlock::Orthant(2)],
            vec![lp_vec(&[1.0, 0.0])],
            lp_vec(&[0.0, 1.0]),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        assert_eq!(compute_ell(&p), 0);
    }

    #[test]
    fn lp_example_reduces_to_first_coordinate() {
        let p = lp_example();
        let cert = run_facial_reduction(&p, &FraOptions::default()).unwrap();
        assert_eq!(cert.final_face().to_string(), "orthant support {1}");
        assert!(cert.reducing_steps() <= 2);
        assert!(cert.x_strict.is_some());
        let report = verify_certificate_chain(&p, &cert, &tol());
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn sdp_example_reduces_to_e1() {
        let p = sdp_example();
        let cert = run_facial_reduction(&p, &FraOptions::default()).unwrap();
        assert!(cert.reducing_steps() <= 2);
        let BlockFace::Psd { basis, .. } = &cert.final_face().blocks[0] else {
            panic!("psd block expected");
        };
        let e1 = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        assert_eq!(basis.ncols(), 1);
        assert!(subspace_distance(basis, &e1) <= 1e-6);
        let report = verify_certificate_chain(&p, &cert, &tol());
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn strictly_feasible_sdp_needs_no_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 4;
        let a: Vec<YElement> = (0..3)
            .map(|_| {
                let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
                YElement::from_matrix(symmetrize(&m))
            })
            .collect();
        let b = YElement::from_matrix(DMatrix::identity(n, n));
        let c = DVector::zeros(3);
        let p = ConicProgram::new("slater", vec![ConeBlock::Psd(n)], a, b, c).unwrap();
        let cert = run_facial_reduction(&p, &FraOptions::default()).unwrap();
        assert_eq!(cert.reducing_steps(), 0);
        assert!(cert.final_face().is_full());
    }

    #[test]
    fn reference_chains_verify() {
        let p = lp_example();
        for ys in [lp_example_chain(), lp_example_one_step()] {
            let cert = ReductionCertificate::from_certificates(&p, &ys, tol().rank);
            let report = verify_certificate_chain(&p, &cert, &tol());
            assert!(report.passed(), "{report}");
            assert_eq!(cert.final_face().to_string(), "orthant support {1}");
        }
        let p = sdp_example();
        let cert = ReductionCertificate::from_certificates(&p, &sdp_example_chain(), tol().rank);
        let report = verify_certificate_chain(&p, &cert, &tol());
        assert!(report.passed(), "{report}");
        assert_eq!(cert.reducing_steps(), 2);
        assert_eq!(cert.final_face().ranks(), vec![1]);
    }

    #[test]
    fn tampered_chain_fails_dual_face_check() {
        let p = lp_example();
        let mut ys = lp_example_chain();
        ys[1] = lp_vec(&[0.0, -1.0, 1.0, 0.0, -1.0]);
        let cert = ReductionCertificate::from_certificates(&p, &ys, tol().rank);
        let report = verify_certificate_chain(&p, &cert, &tol());
        assert!(!report.passed());
        assert!(report.failed("membership in dual face"), "{report}");
    }

    #[test]
    fn wrong_claimed_face_is_reported() {
        let p = lp_example();
        let mut cert = ReductionCertificate::from_certificates(&p, &lp_example_chain(), tol().rank);
        cert.faces[2] = FaceRep::full(&p.blocks);
        let report = verify_certificate_chain(&p, &cert, &tol());
        assert!(report.failed("face recomputation"));
    }

    #[test]
    fn bad_strict_point_is_reported() {
        let p = lp_example();
        let mut cert = ReductionCertificate::from_certificates(&p, &lp_example_chain(), tol().rank);
        cert.x_strict = Some(DVector::from_vec(vec![-1.0, 0.0, 0.0]));
        assert!(verify_certificate_chain(&p, &cert, &tol()).passed());
        cert.x_strict = Some(DVector::from_vec(vec![1.0, 0.0, 0.0]));
        assert!(verify_certificate_chain(&p, &cert, &tol()).failed("Slater margin"));
    }

    #[test]
    fn decomposition_of_sdp_chain() {
        let p = sdp_example();
        let cert = ReductionCertificate::from_certificates(&p, &sdp_example_chain(), tol().rank);
        let dec = decompose_certificates(&p, &cert, 1e-8).unwrap();
        assert_eq!(dec.pairs.len(), 3);
        assert_eq!(dec.pairs[0].0.max_abs(), 0.0);
        for ((u, v), (eu, ev)) in dec.pairs[1..].iter().zip(sdp_example_decomposition()) {
            assert!(u.sub(&eu).max_abs() < 1e-12);
            assert!(v.sub(&ev).max_abs() < 1e-12);
        }
    }

    #[test]
    fn decomposition_of_zero_chain() {
        let p = sdp_example();
        let zero = YElement::zeros(&p.blocks);
        let cert = ReductionCertificate::from_certificates(&p, &[zero.clone(), zero], tol().rank);
        let dec = decompose_certificates(&p, &cert, 1e-8).unwrap();
        assert!(dec
            .pairs
            .iter()
            .all(|(u, v)| u.max_abs() == 0.0 && v.max_abs() == 0.0));
    }

    #[test]
    fn reduced_programs_need_no_further_steps() {
        for p in [lp_example(), sdp_example()] {
            let cert = run_facial_reduction(&p, &FraOptions::default()).unwrap();
            let red = reduced_program(&p, &cert, &tol()).unwrap();
            let again = run_facial_reduction(&red.program, &FraOptions::default()).unwrap();
            assert_eq!(again.reducing_steps(), 0, "{}", p.name);
        }
    }

    #[test]
    fn padding_appends_zeros() {
        let p = sdp_example();
        let cert = ReductionCertificate::from_certificates(&p, &sdp_example_chain(), tol().rank);
        let ys = cert.padded(4);
        assert_eq!(ys.len(), 5);
        assert_eq!(ys[4].max_abs(), 0.0);
        assert_eq!(cert.padded(1).len(), 3);
    }
}

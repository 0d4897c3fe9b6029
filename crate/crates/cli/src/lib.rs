//! Command implementations behind the `facred` binary.
//!
//! Every command returns its standard output as a string so the binary stays
//! a thin shell and tests can compare output byte for byte. Wall time is kept
//! out of that output and printed separately.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use facred_core::extended::{write_point, ALPHA_CAP};
use facred_core::fra::{dim_l, DEFAULT_SEED};
use facred_core::{
    build_extended_dual, check_extended_point, compute_ell, emit_sdpa, fmin_membership_detail,
    parse_sdpa, read_certificate, run_facial_reduction, solve_conic_lp, solve_extended_dual,
    verify_certificate_chain, write_certificate, BlockValue, CertificateFile, ConeBlock,
    ConicProgram, DualError, FaceRep, FraOptions, ParseError, ReductionError, SolveStatus,
    SolverError, SolverOptions, Tolerances, Variant, YElement,
};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const TOL_ENV: &str = "FACRED_TOL";
pub const DEFAULT_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("invalid tolerance {0:?}")]
    Tolerance(String),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Dual(#[from] DualError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 2 when facial reduction could not decide a step, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Reduction(e) if matches!(e.source, SolverError::AmbiguousOutcome { .. }) => 2,
            _ => 1,
        }
    }
}

/// Flag value, then `FACRED_TOL`, then [`DEFAULT_TOL`].
pub fn resolve_tol(flag: Option<f64>, env: Option<&str>) -> Result<f64, CliError> {
    let tol = match (flag, env) {
        (Some(t), _) => t,
        (None, Some(s)) => s
            .trim()
            .parse()
            .map_err(|_| CliError::Tolerance(s.to_owned()))?,
        (None, None) => DEFAULT_TOL,
    };
    if tol.is_finite() && tol > 0.0 {
        Ok(tol)
    } else {
        Err(CliError::Tolerance(tol.to_string()))
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn load_problem(path: &Path) -> Result<(ConicProgram, String), CliError> {
    let text = read(path)?;
    let p = parse_sdpa(&text).map_err(|source| CliError::Parse {
        path: path.to_owned(),
        source,
    })?;
    Ok((p, hex::encode(Sha256::digest(text.as_bytes()))))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Fixed-width rendering with roundoff below `1e-12` shown as zero.
pub fn fmt_value(x: f64) -> String {
    if x.abs() < 1e-12 {
        "0".into()
    } else {
        format!("{x:.6e}")
    }
}

/// Output of one command.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub stdout: String,
    pub exit_code: i32,
    pub elapsed: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DualSummary {
    Solved { value: f64, attained: Attainment },
    Failed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Attainment {
    /// Slater holds or every block is an orthant.
    Guaranteed,
    /// Checker-verified optimal point.
    Verified,
    NotGuaranteed,
}

impl fmt::Display for DualSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DualSummary::Solved { value, attained } => {
                let a = match attained {
                    Attainment::Guaranteed => "attained",
                    Attainment::Verified => "attained (verified point)",
                    Attainment::NotGuaranteed => "attainment not guaranteed",
                };
                write!(f, "{}, {a}", fmt_value(*value))
            }
            DualSummary::Failed(msg) => write!(f, "not solved ({msg})"),
        }
    }
}

/// Summary of a reduction run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub input: String,
    pub digest: String,
    pub seed: u64,
    pub tol: f64,
    pub ell: usize,
    pub dim_l: usize,
    pub reducing_iterations: usize,
    pub fmin: FaceRep,
    pub fmin_is_k: bool,
    pub primal_value: Option<f64>,
    pub standard_dual: DualSummary,
    pub extended_dual: DualSummary,
    pub wall_time: Duration,
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "input: {}", self.input)?;
        writeln!(f, "sha256: {}", self.digest)?;
        writeln!(f, "seed: {}", self.seed)?;
        writeln!(f, "tol: {:e}", self.tol)?;
        writeln!(f, "ell: {} (dim L = {})", self.ell, self.dim_l)?;
        writeln!(f, "reducing iterations: {}", self.reducing_iterations)?;
        if self.fmin_is_k {
            writeln!(f, "F_min = K")?;
        } else {
            writeln!(f, "F_min: {}", self.fmin)?;
        }
        match self.primal_value {
            Some(v) => writeln!(f, "primal value: {}", fmt_value(v))?,
            None => writeln!(f, "primal value: unknown")?,
        }
        writeln!(f, "standard dual: {}", self.standard_dual)?;
        writeln!(f, "extended dual: {}", self.extended_dual)
    }
}

/// Settings shared by the commands.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Settings {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: FraOptions::default().max_iter,
            seed: DEFAULT_SEED,
        }
    }
}

impl Settings {
    pub fn fra_options(&self) -> FraOptions {
        FraOptions {
            tol: Tolerances::with_accept(self.tol),
            max_iter: self.max_iter,
            seed: self.seed,
        }
    }
}

/// Runs facial reduction, writes the chain to `out` and reports.
pub fn cmd_reduce(
    input: &Path,
    out: &Path,
    s: &Settings,
) -> Result<(RunReport, Outcome), CliError> {
    let start = Instant::now();
    let (p, digest) = load_problem(input)?;
    let opts = s.fra_options();
    let cert = run_facial_reduction(&p, &opts)?;
    let file = CertificateFile::from_certificate(Some(&p.name), &p.blocks, &cert);
    write(out, &write_certificate(&file))?;

    let fmin = cert.final_face().clone();
    let fmin_is_k = fmin.is_full();
    let polyhedral = p.blocks.iter().all(|b| matches!(b, ConeBlock::Orthant(_)));
    let std = solve_conic_lp(&p, &SolverOptions::default());
    let standard_dual = if std.status == SolveStatus::Optimal {
        DualSummary::Solved {
            value: std.dual_obj,
            attained: if fmin_is_k || polyhedral {
                Attainment::Guaranteed
            } else {
                Attainment::NotGuaranteed
            },
        }
    } else {
        DualSummary::Failed(format!("{:?}", std.status))
    };
    let ell = compute_ell(&p);
    let (extended_dual, primal_value) = match build_extended_dual(&p, Variant::Star, None)
        .and_then(|prog| solve_extended_dual(&prog, &opts))
    {
        Ok(sol) => {
            let verified = check_extended_point(&p, &sol.dual.point, Variant::Star, s.tol).passed();
            let summary = DualSummary::Solved {
                value: sol.dual.value,
                attained: if verified {
                    Attainment::Verified
                } else {
                    Attainment::NotGuaranteed
                },
            };
            (summary, Some(sol.primal_value))
        }
        Err(e) => (DualSummary::Failed(e.to_string()), None),
    };
    let report = RunReport {
        input: file_name(input),
        digest,
        seed: s.seed,
        tol: s.tol,
        ell,
        dim_l: dim_l(&p, opts.tol.rank),
        reducing_iterations: cert.reducing_steps(),
        fmin,
        fmin_is_k,
        primal_value,
        standard_dual,
        extended_dual,
        wall_time: start.elapsed(),
    };
    let mut stdout = report.to_string();
    let _ = writeln!(stdout, "certificate: {}", file_name(out));
    let outcome = Outcome {
        stdout,
        exit_code: 0,
        elapsed: report.wall_time,
    };
    Ok((report, outcome))
}

/// Emits the extended dual of the chosen variant as an SDPA file and reports
/// the optimal point measured against the file as written.
pub fn cmd_dualize(
    input: &Path,
    out: &Path,
    variant: Variant,
    ell: Option<usize>,
    s: &Settings,
) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let (p, _) = load_problem(input)?;
    let prog = build_extended_dual(&p, variant, ell)?;
    let text = emit_sdpa(&prog.program);
    write(out, &text)?;
    let mut stdout = String::new();
    let _ = writeln!(stdout, "input: {}", file_name(input));
    let _ = writeln!(stdout, "variant: {variant}");
    let _ = writeln!(stdout, "ell: {}", prog.ell);
    let _ = writeln!(
        stdout,
        "extended dual: {} blocks, {} equations",
        prog.program.blocks.len(),
        prog.program.m()
    );
    let _ = writeln!(stdout, "written: {}", file_name(out));
    let emitted = parse_sdpa(&text).map_err(|source| CliError::Parse {
        path: out.to_owned(),
        source,
    })?;
    match solve_extended_dual(&prog, &s.fra_options()) {
        Ok(sol) => {
            let y = write_point(&prog, &sol.dual.point)?;
            let (residual, margin) = measure_dual_point(&emitted, &y);
            let ok = residual <= s.tol && margin >= -s.tol;
            let _ = writeln!(stdout, "value: {}", fmt_value(emitted.b.dot(&y)));
            let _ = writeln!(
                stdout,
                "attained: {} (equality residual {}, cone margin {})",
                if ok { "yes" } else { "no" },
                fmt_value(residual),
                fmt_value(margin)
            );
        }
        // too shallow for the reduction chain: the written program may have
        // an unattained optimum, so only its value is reported
        Err(DualError::Unsupported(why)) => {
            let res = solve_conic_lp(&emitted, &SolverOptions::default());
            let _ = writeln!(stdout, "note: {why}");
            if res.status == SolveStatus::Optimal {
                let _ = writeln!(stdout, "value: {}", fmt_value(res.dual_obj));
            } else {
                let _ = writeln!(stdout, "value: not solved ({:?})", res.status);
            }
            let _ = writeln!(stdout, "attained: not verified");
        }
        Err(e) => return Err(e.into()),
    }
    Ok(Outcome {
        stdout,
        exit_code: 0,
        elapsed: start.elapsed(),
    })
}

/// Equality residual `max |A*y − c|` and cone margin (smallest eigenvalue or
/// entry) of `y` as a dual point of `p`.
pub fn measure_dual_point(p: &ConicProgram, y: &YElement) -> (f64, f64) {
    let residual = p
        .adjoint(y)
        .map(|r| (r - &p.c).amax())
        .unwrap_or(f64::INFINITY);
    let margin = y
        .blocks
        .iter()
        .map(|b| match b {
            BlockValue::Vector(v) => v.min(),
            BlockValue::Matrix(m) => m.clone().symmetric_eigenvalues().min(),
        })
        .fold(f64::INFINITY, f64::min);
    (residual, margin)
}

/// Checks a certificate file against a problem.
pub fn cmd_verify(problem: &Path, cert_path: &Path, s: &Settings) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let (p, _) = load_problem(problem)?;
    let file = read_certificate(&read(cert_path)?).map_err(|source| CliError::Parse {
        path: cert_path.to_owned(),
        source,
    })?;
    if file.blocks != p.blocks {
        return Err(CliError::Usage(format!(
            "certificate blocks {:?} do not match the problem's {:?}",
            file.blocks, p.blocks
        )));
    }
    let tol = Tolerances::with_accept(s.tol);
    let cert = file.to_certificate(&p, tol.rank);
    let report = verify_certificate_chain(&p, &cert, &tol);
    let mut stdout = report.to_string();
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    let _ = writeln!(
        stdout,
        "{verdict}: {} checks, {} failed",
        report.checks.len(),
        report.failures().count()
    );
    Ok(Outcome {
        stdout,
        exit_code: if report.passed() { 0 } else { 1 },
        elapsed: start.elapsed(),
    })
}

/// Reads a point as `block row col value` lines (1-based, either triangle;
/// `*` starts a comment) in the structure of `blocks`.
pub fn parse_point(text: &str, blocks: &[ConeBlock]) -> Result<YElement, ParseError> {
    let mut y = YElement::zeros(blocks);
    for (idx, line) in text.lines().enumerate() {
        let ln = idx + 1;
        let l = line.trim();
        if l.is_empty() || l.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = l.split_whitespace().collect();
        let bad = |msg: String| ParseError::Syntax { line: ln, msg };
        if toks.len() != 4 {
            return Err(bad("expected: block row col value".into()));
        }
        let ints: Vec<usize> = toks[..3]
            .iter()
            .map(|t| t.parse().map_err(|_| bad(format!("bad index {t:?}"))))
            .collect::<Result<_, _>>()?;
        let v: f64 = toks[3]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| bad(format!("bad value {:?}", toks[3])))?;
        let (k, r, c) = (ints[0], ints[1], ints[2]);
        let out_of_range = || ParseError::OutOfRange {
            line: ln,
            msg: format!("block {k} entry ({r}, {c})"),
        };
        if k == 0 || k > blocks.len() {
            return Err(out_of_range());
        }
        let n = blocks[k - 1].size();
        if r == 0 || c == 0 || r > n || c > n {
            return Err(out_of_range());
        }
        match &mut y.blocks[k - 1] {
            BlockValue::Vector(vec) if r == c => vec[r - 1] = v,
            BlockValue::Vector(_) => {
                return Err(bad("off-diagonal entry in an orthant block".into()))
            }
            BlockValue::Matrix(m) => {
                m[(r - 1, c - 1)] = v;
                m[(c - 1, r - 1)] = v;
            }
        }
    }
    Ok(y)
}

/// Decides whether a point lies in the minimal cone.
pub fn cmd_member(problem: &Path, point: &Path, s: &Settings) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let (p, _) = load_problem(problem)?;
    let y = parse_point(&read(point)?, &p.blocks).map_err(|source| CliError::Parse {
        path: point.to_owned(),
        source,
    })?;
    let m = fmin_membership_detail(&p, &y, s.tol)?;
    let mut stdout = String::new();
    let _ = writeln!(stdout, "point: {}", file_name(point));
    let _ = writeln!(
        stdout,
        "member of F_min: {}",
        if m.member { "yes" } else { "no" }
    );
    let _ = writeln!(stdout, "violation: {}", fmt_value(m.violation));
    let _ = writeln!(stdout, "alpha cap: {ALPHA_CAP:e}");
    Ok(Outcome {
        stdout,
        exit_code: 0,
        elapsed: start.elapsed(),
    })
}

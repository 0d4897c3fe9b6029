//! Facial reduction and extended duals for conic linear programs over
//! products of nonnegative orthants and positive semidefinite cones.

pub mod certfile;
pub mod config;
pub mod error;
pub mod extended;
pub mod faces;
pub mod fixtures;
pub mod fra;
pub mod generate;
pub mod linalg;
pub mod model;
pub mod reducing;
pub mod refine;
pub mod sdpa;
pub mod solver;

pub use certfile::{read_certificate, write_certificate, CertificateFile, CERT_HEADER};
pub use config::Tolerances;
pub use error::{DualError, FaceError, LinalgError, ModelError, ParseError, SolverError};
pub use extended::{
    build_extended_dual, check_extended_point, extract_dual_solution, fmin_membership,
    fmin_membership_detail, solve_extended_dual, ExtendedDualPoint, ExtendedDualProgram,
    ExtendedReport, ExtendedSolve, ExtractedDual, Membership, Variant,
};
pub use faces::{BlockFace, FaceRep};
pub use fra::{
    compute_ell, run_facial_reduction, verify_certificate_chain, ChainReport, FraOptions,
    ReductionCertificate, ReductionError,
};
pub use model::{BlockValue, ConeBlock, ConicProgram, YElement};
pub use sdpa::{emit_sdpa, parse_sdpa};
pub use solver::{solve_conic_lp, SolveResult, SolveStatus, SolverOptions};

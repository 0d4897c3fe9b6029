//! Numerical tolerances shared by the face, solver and reduction layers.

use std::sync::atomic::{AtomicU64, Ordering};

const DEFAULT_RANK_TOL: f64 = 1e-6;

static RANK_TOL_BITS: AtomicU64 = AtomicU64::new(0);

/// Process-wide default for the relative rank cutoff used when deciding face
/// dimensions. Facial reduction is only as reliable as this number.
pub fn default_rank_tol() -> f64 {
    match RANK_TOL_BITS.load(Ordering::Relaxed) {
        0 => DEFAULT_RANK_TOL,
        bits => f64::from_bits(bits),
    }
}

pub fn set_default_rank_tol(tol: f64) {
    assert!(
        tol > 0.0 && tol.is_finite(),
        "rank tolerance must be positive"
    );
    RANK_TOL_BITS.store(tol.to_bits(), Ordering::Relaxed);
}

/// Tolerance ladder for facial reduction: the interior-point solves run at
/// `solve`, certificates are accepted at `accept`, and `rank` decides which
/// eigenvalues count as zero when faces are recomputed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rank: f64,
    pub solve: f64,
    pub accept: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank: default_rank_tol(),
            solve: 1e-8,
            accept: 1e-7,
        }
    }
}

impl Tolerances {
    pub fn with_accept(accept: f64) -> Self {
        Self {
            accept,
            ..Self::default()
        }
    }
}

//! Benchmark workloads shared by the criterion targets.

use facred_core::fixtures::{lp_example, sdp_example};
use facred_core::generate::degenerate_instance;
use facred_core::ConicProgram;

/// The two worked examples plus a few random degenerate instances.
pub fn workloads() -> Vec<(String, ConicProgram)> {
    let mut out = vec![
        ("lp_example".to_owned(), lp_example()),
        ("sdp_example".to_owned(), sdp_example()),
    ];
    for seed in [3, 11, 27] {
        out.push((format!("random_{seed}"), degenerate_instance(seed).program));
    }
    out
}

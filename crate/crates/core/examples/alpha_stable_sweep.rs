//! Robustness to heavy-tailed noise across the stability index.

use mcc_cs::harness::desk_alpha_stable_experiment;
use mcc_cs::run_sweep;

fn main() -> mcc_cs::Result<()> {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let spec = desk_alpha_stable_experiment(vec![0.8, 1.0, 1.25, 1.5, 1.75, 2.0], trials, 7);
    for r in run_sweep(&spec)?.results {
        println!(
            "alpha={:<5} {:<10} p={:.2}  msd={}",
            r.axis_value.unwrap_or_default(),
            r.variant.to_string(),
            r.probability,
            r.msd_success.map(|m| format!("{m:.2e}")).unwrap_or_else(|| "-".into())
        );
    }
    Ok(())
}

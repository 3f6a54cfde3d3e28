//! Recovery probability against sparsity level.

use mcc_cs::harness::{desk_gmm_experiment, write_sweep_csv};
use mcc_cs::{run_sweep, SweepAxis};

fn main() -> mcc_cs::Result<()> {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let mut spec = desk_gmm_experiment(trials, 6);
    spec.sweep = Some(SweepAxis::Sparsity(vec![20, 40, 60, 80, 100, 120, 150]));
    let out = run_sweep(&spec)?.without_timings();
    for r in &out.results {
        println!("K={:<4} {:<10} p={:.2}", r.axis_value.unwrap_or_default(), r.variant.to_string(), r.probability);
    }
    write_sweep_csv(&out.results, std::fs::File::create("sparsity_sweep.csv")?)?;
    Ok(())
}

//! One reconstruction under impulsive noise, comparing l0-MCC with l0-LMS.

use mcc_cs::harness::desk_gmm_experiment;
use mcc_cs::rng::{purpose_seed, Purpose};
use mcc_cs::{run, SolverConfig, Variant};

fn main() -> mcc_cs::Result<()> {
    let spec = desk_gmm_experiment(1, 42);
    let problem = spec.problem.generate(&spec.noise, 42)?;
    let truth = problem.truth.as_ref().expect("generated problems keep the signal");

    for variant in [Variant::L0Mcc, Variant::L0Lms] {
        let cfg = SolverConfig::recommended(variant);
        match run(&problem, &cfg, purpose_seed(42, Purpose::Solver)) {
            Ok(out) => {
                let err: f64 = out.w.iter().zip(truth.values()).map(|(a, b)| (a - b).powi(2)).sum();
                println!(
                    "{variant:<10} ||w - x||^2 = {err:.3e} after {} updates ({:?})",
                    out.trace.updates_used, out.trace.termination
                );
            }
            Err(e) => println!("{variant:<10} {e}"),
        }
    }
    Ok(())
}

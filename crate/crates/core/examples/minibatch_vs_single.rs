//! Averaged learning curves of l0-MCC and MB-l0-MCC, written as CSV.

use std::fs::File;

use mcc_cs::harness::desk_gmm_experiment;
use mcc_cs::learning_curve;

fn main() -> mcc_cs::Result<()> {
    let mut spec = desk_gmm_experiment(10, 5);
    spec.trace_stride = Some(100);
    let out = learning_curve(&spec)?;
    for curve in &out.curves {
        let path = format!("curve_{}.csv", curve.variant);
        curve.write_csv(File::create(&path)?)?;
        println!(
            "{:<10} reaches 1e-2 after {:?} updates, final MSD {:.3e} -> {path}",
            curve.variant.to_string(),
            curve.first_below(1e-2),
            curve.final_msd().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

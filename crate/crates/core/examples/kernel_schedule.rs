//! Kernel width annealing: estimate the starting width from data, then decay it.

use mcc_cs::{anneal_sigma, estimate_sigma_max, kernel_weight, sample_noise, KernelSchedule, NoiseModel};

fn main() -> mcc_cs::Result<()> {
    let y = sample_noise(&NoiseModel::Gaussian { variance: 0.05 }, 300, 11)?;
    let sigma_min = 0.03;
    let sigma_max = estimate_sigma_max(&y, sigma_min)?;
    let schedule = KernelSchedule::new(sigma_max, sigma_min, 20.0, 100_000)?;
    println!("sigma_max from the measurement quantiles: {sigma_max:.4}");
    for i in [0, 1000, 5000, 10_000, 25_000, 50_000, 100_000] {
        let s = anneal_sigma(i, &schedule);
        println!("i={i:>6}  sigma={s:.5}  weight(e=0.1)={:.4}", kernel_weight(0.1, s)?);
    }
    Ok(())
}

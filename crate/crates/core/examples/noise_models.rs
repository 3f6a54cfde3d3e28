//! Empirical moments of the three noise families.

use mcc_cs::{sample_noise, NoiseModel};

fn summary(name: &str, model: &NoiseModel) -> mcc_cs::Result<()> {
    let mut v = sample_noise(model, 200_000, 7)?;
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
    v.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| v[(p * (v.len() - 1) as f64) as usize];
    println!(
        "{name:<22} nominal var {:<22} sample var {var:<12.4e} median {:>9.2e} 99.9% {:>10.3e} max {:>10.3e}",
        format!("{:?}", model.nominal_variance()),
        q(0.5),
        q(0.999),
        v[v.len() - 1]
    );
    Ok(())
}

fn main() -> mcc_cs::Result<()> {
    summary("gaussian", &NoiseModel::Gaussian { variance: 1e-3 })?;
    summary("gmm c=0.04", &NoiseModel::Gmm { c: 0.04, sigma_a_sq: 0.01, m: 300.0, sigma_b_sq: 0.1 })?;
    for alpha in [1.0, 1.5, 2.0] {
        summary(&format!("alpha-stable a={alpha}"), &NoiseModel::AlphaStable { alpha, gamma: 0.01 })?;
    }
    Ok(())
}

//! Build one noisy compressive-sensing instance by hand and inspect it.

use mcc_cs::{measure, sample_noise, MatrixKind, NoiseModel, NonzeroDist, SensingMatrix, SparseSignal};

fn main() -> mcc_cs::Result<()> {
    let (n, m, k) = (1000, 300, 40);
    let x = SparseSignal::generate(n, k, NonzeroDist::UniformSym, true, 1)?;
    let phi = SensingMatrix::generate(m, n, MatrixKind::GaussianIid, 1.0 / m as f64, 2)?;
    let noise = NoiseModel::Gmm { c: 0.04, sigma_a_sq: 0.01, m: m as f64, sigma_b_sq: 0.1 };
    let v = sample_noise(&noise, m, 3)?;
    let y = measure(&phi, x.values(), Some(&v))?;

    println!("N={n} M={m} K={}", x.sparsity());
    println!("||x||^2 = {:.6}", x.norm_sq());
    println!("first support indices: {:?}", &x.support()[..8]);
    let energy: f64 = y.iter().map(|v| v * v).sum();
    let noise_energy: f64 = v.iter().map(|v| v * v).sum();
    println!("||y||^2 = {energy:.4}, ||v||^2 = {noise_energy:.4}");
    Ok(())
}

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mcc_cs::solver::{draw_batch, l0_lms_step, l0_mcc_step, mb_step_with_indices, run, zero_attraction, SolverState, Weighting};
use mcc_cs::{BatchSize, MatrixKind, ReconstructionProblem, SensingMatrix, SolverConfig, Variant};

fn problem(m: usize, n: usize, seed: u64, y_scale: f64) -> ReconstructionProblem {
    let phi = SensingMatrix::generate(m, n, MatrixKind::GaussianIid, 1.0 / m as f64, seed).unwrap();
    let y = (0..m).map(|i| y_scale * ((i as f64 + 1.0) * 0.7 + seed as f64).sin()).collect();
    ReconstructionProblem::new(phi, y, None).unwrap()
}

fn config(variant: Variant, mu: f64, lambda: f64) -> SolverConfig {
    let mut c = SolverConfig::recommended(variant);
    c.mu = mu;
    c.lambda = lambda;
    c
}

/// Dense `w + mu * Phi^T (y - Phi w) + mu * lambda * z(w)`, written out longhand.
fn dense_full_gradient(p: &ReconstructionProblem, w: &[f64], mu: f64, lambda: f64, beta: f64) -> Vec<f64> {
    let (m, n) = (p.m(), p.n());
    let mut e = vec![0.0; m];
    for (i, ei) in e.iter_mut().enumerate() {
        *ei = p.y[i] - (0..n).map(|j| p.phi.as_slice()[i * n + j] * w[j]).sum::<f64>();
    }
    let z = zero_attraction(w, beta);
    (0..n)
        .map(|j| w[j] + mu * (0..m).map(|i| p.phi.as_slice()[i * n + j] * e[i]).sum::<f64>() + mu * lambda * z[j])
        .collect()
}

#[test]
fn unit_weighted_full_batch_is_the_dense_gradient_step() {
    for seed in 0..20 {
        let p = problem(15, 30, seed, 1.0);
        let w: Vec<f64> = (0..30).map(|j| 0.03 * ((j as f64) - 14.5) / 15.0).collect();
        let cfg = config(Variant::MbL0Mcc, 0.3, 0.02);
        let want = dense_full_gradient(&p, &w, cfg.mu, cfg.lambda, cfg.beta);
        let mut s = SolverState::from_weights(w, 1.0);
        let all: Vec<usize> = (0..15).collect();
        mb_step_with_indices(&mut s, &p, &all, &cfg, Weighting::Unit).unwrap();
        for (a, b) in s.w.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn wide_kernel_batch_matches_unit_weighting() {
    let p = problem(10, 20, 3, 0.5);
    let cfg = config(Variant::MbL0Mcc, 0.2, 0.0);
    let idx = [0, 3, 3, 9];
    let mut a = SolverState::new(20, 1e9);
    let mut b = SolverState::new(20, 1e9);
    mb_step_with_indices(&mut a, &p, &idx, &cfg, Weighting::Correntropy).unwrap();
    mb_step_with_indices(&mut b, &p, &idx, &cfg, Weighting::Unit).unwrap();
    for (x, y) in a.w.iter().zip(&b.w) {
        assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-12));
    }
}

#[test]
fn noiseless_orthogonal_recovery() {
    let n = 16;
    let phi = SensingMatrix::generate(n, n, MatrixKind::Orthogonal, 1.0 / n as f64, 5).unwrap();
    let x: Vec<f64> = (0..n).map(|j| if j % 5 == 0 { 0.4 } else { 0.0 }).collect();
    let y = phi.matvec(&x).unwrap();
    let p = ReconstructionProblem::new(phi, y, None).unwrap();
    let mut cfg = config(Variant::L0Mcc, 0.5, 0.0);
    cfg.max_updates = 20_000;
    cfg.epsilon = 0.0;
    let out = run(&p, &cfg, 1).unwrap();
    let err: f64 = out.w.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
    assert!(err < 1e-12, "{err}");
}

#[test]
fn batches_without_replacement_are_distinct() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for s in [1, 5, 30] {
        let mut b = draw_batch(&mut rng, 30, s, false);
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), s);
        assert!(b.iter().all(|&k| k < 30));
    }
}

#[test]
fn batch_fraction_resolves_to_at_least_one_row() {
    assert_eq!(BatchSize::FractionOfRows(0.1).resolve(300), 30);
    assert_eq!(BatchSize::FractionOfRows(0.001).resolve(10), 1);
    assert_eq!(BatchSize::Fixed(7).resolve(300), 7);
}

proptest! {
    #[test]
    fn large_sigma_reduces_to_lms(
        w in prop::collection::vec(-0.5f64..0.5, 1..25),
        seed in any::<u64>(),
        y in -3.0f64..3.0,
        mu in 0.001f64..1.0,
        lambda in 0.0f64..0.05,
    ) {
        let row: Vec<f64> = (0..w.len()).map(|j| ((seed.wrapping_add(j as u64) % 1000) as f64 / 500.0) - 1.0).collect();
        let cfg = config(Variant::L0Mcc, mu, lambda);
        let mut a = SolverState::from_weights(w.clone(), 1e10);
        let mut b = SolverState::from_weights(w, 1e10);
        l0_mcc_step(&mut a, &row, y, &cfg).unwrap();
        l0_lms_step(&mut b, &row, y, &cfg).unwrap();
        for (x, z) in a.w.iter().zip(&b.w) {
            prop_assert!((x - z).abs() <= 1e-9 * z.abs().max(1e-9));
        }
    }

    #[test]
    fn single_row_batch_matches_single_step(
        seed in 0u64..500,
        k in 0usize..8,
        sigma in 0.01f64..3.0,
        mu in 0.001f64..1.0,
        lambda in 0.0f64..0.05,
    ) {
        let p = problem(8, 12, seed, 2.0);
        let w: Vec<f64> = (0..12).map(|j| 0.02 * (j as f64 - 6.0)).collect();
        let cfg = config(Variant::MbL0Mcc, mu, lambda);
        let mut a = SolverState::from_weights(w.clone(), sigma);
        let mut b = SolverState::from_weights(w, sigma);
        mb_step_with_indices(&mut a, &p, &[k], &cfg, Weighting::Correntropy).unwrap();
        l0_mcc_step(&mut b, p.phi.row(k), p.y[k], &cfg).unwrap();
        prop_assert_eq!(a.w, b.w);
    }

    #[test]
    fn zero_is_a_fixed_point_of_zero_data(
        n in 1usize..30,
        sigma in 0.01f64..5.0,
        lambda in 0.0f64..1.0,
    ) {
        let cfg = config(Variant::L0Mcc, 0.3, lambda);
        let row = vec![0.5; n];
        let mut s = SolverState::new(n, sigma);
        l0_mcc_step(&mut s, &row, 0.0, &cfg).unwrap();
        prop_assert!(s.w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn attractor_pulls_toward_zero_inside_its_range(w in -1.0f64..1.0, beta in 1.0f64..50.0) {
        let z = zero_attraction(&[w], beta)[0];
        if w.abs() > 1.0 / beta || w == 0.0 {
            prop_assert_eq!(z, 0.0);
        } else {
            prop_assert!(z * w <= 0.0);
        }
    }
}

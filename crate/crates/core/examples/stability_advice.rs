//! Step-size bounds, and a Monte Carlo look at the kernel moments behind them.

use mcc_cs::stability::{advise, monte_carlo_moments, NoiseDraw, Regime, RowSampling};
use mcc_cs::{eval_ph_pk_bounded, ProbePoint};

fn main() {
    let (n, sa) = (1000, 1.0 / 300.0);
    for regime in [Regime::Rademacher, Regime::BoundedNoise, Regime::GaussianNoise] {
        if let Some(a) = advise(regime, n, sa, Some((1.0, 2.0))) {
            println!("{:<34} mu < {:.6}  (suggest {:.4})", a.regime, a.bound, a.suggested_mu);
        }
    }

    let probe = ProbePoint { wtilde_norm_sq: 0.5, v: 0.3, sigma: 0.8, sigma_a_sq: 0.02, n: 40 };
    let exact = eval_ph_pk_bounded(&probe);
    let mc = monte_carlo_moments(40, 0.8, 0.02, 0.5, NoiseDraw::Fixed(0.3), &RowSampling::Projected, 400_000, 1);
    println!("P_H closed form {:.6}, Monte Carlo {:.6}", exact.p_h, mc.p_h);
    println!("P_K closed form {:.6}, Monte Carlo {:.6}", exact.p_k, mc.p_k);
    println!("P_K / P_H = {:.4}", exact.ratio());
}

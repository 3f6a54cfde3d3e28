//! Load an experiment from TOML and run it.
//!
//! `cargo run --release --example config_file -- configs/gmm_small.toml`

use mcc_cs::{run_sweep, ExperimentConfig};

fn main() -> mcc_cs::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/gmm_small.toml").into());
    let cfg = ExperimentConfig::load(std::path::Path::new(&path))?;
    let spec = cfg.experiment_spec(None, None)?;
    println!("{} trials per point, seed {}", spec.trials, spec.master_seed);
    for r in run_sweep(&spec)?.results {
        println!("{:?} {} {}/{}", r.axis_value, r.variant, r.successes, r.trials);
    }

    match ExperimentConfig::from_toml_str("schema_version = 1\n[problem]\nn = 10\nm = 5\nk = 2\nmistake = 1\n") {
        Ok(_) => unreachable!(),
        Err(e) => println!("rejected as expected: {e}"),
    }
    Ok(())
}

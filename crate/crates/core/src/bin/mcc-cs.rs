//! `mcc-cs`: run reconstruction experiments, step-size advice and block image
//! compressive sensing from TOML experiment files.
//!
//! Exit codes: 0 success, 2 invalid input, 3 runtime or I/O failure, 4 when
//! most runs diverged.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mcc_cs::config::ExperimentConfig;
use mcc_cs::harness::{learning_curve, output_name, run_sweep, write_sweep_csv};
use mcc_cs::image::{reconstruct_image, ImageGrid};
use mcc_cs::stability::{advise, BoundAdvice, Regime};
use mcc_cs::Error;

#[derive(Parser)]
#[command(name = "mcc-cs", version, about = "Robust sparse recovery with l0-regularized maximum-correntropy filters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Average learning curves at one experiment point.
    Simulate(RunArgs),
    /// Reconstruction probability and MSD along a sweep axis.
    Sweep(RunArgs),
    /// Sufficient step-size bounds for mean-square stability.
    AdviseStepsize(AdviseArgs),
    /// Block-based compressive sensing of a grayscale PGM image.
    Image(ImageArgs),
}

#[derive(Args)]
struct Common {
    /// Master seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: config `output_dir`, then $MCC_CS_OUT, then ./results].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Trace sampling stride in updates.
    #[arg(long)]
    trace_stride: Option<usize>,
    /// Include wall-clock timings in the written reports.
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ImageArgs {
    /// Input 8-bit binary PGM.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    image: Option<PathBuf>,
    /// Use the built-in test pattern of the given size instead, e.g. `128x128`.
    #[arg(long, value_parser = parse_size)]
    synthetic: Option<(usize, usize)>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Rademacher,
    Bounded,
    Gaussian,
    All,
}

#[derive(Args)]
struct AdviseArgs {
    /// Signal length N.
    #[arg(long, required_unless_present = "config")]
    n: Option<usize>,
    /// Sensing entry variance; defaults to 1/M when --m is given.
    #[arg(long)]
    sigma_a_sq: Option<f64>,
    /// Measurement count M.
    #[arg(long)]
    m: Option<usize>,
    /// Take N, M and the entry variance from a config's `[problem]`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    regime: RegimeArg,
    /// Kernel width (bounded-noise regime).
    #[arg(long)]
    sigma: Option<f64>,
    /// Noise magnitude bound (bounded-noise regime).
    #[arg(long)]
    v_max: Option<f64>,
    #[arg(long)]
    json: bool,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s.split_once('x').ok_or("expected HEIGHTxWIDTH")?;
    let h = h.parse().map_err(|_| "bad height")?;
    let w = w.parse().map_err(|_| "bad width")?;
    if h == 0 || w == 0 {
        return Err("dimensions must be positive".into());
    }
    Ok((h, w))
}

enum Failure {
    Lib(Error),
    Diverged(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Lib(Error::Format(e.to_string()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Sweep(a) => sweep(&a),
        Command::AdviseStepsize(a) => advise_stepsize(&a),
        Command::Image(a) => image(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Diverged(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(4)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config { .. } | Error::Parameter(_) | Error::Dimension(_) => 2,
                Error::Divergence { .. } => 4,
                Error::Io(_) | Error::Format(_) => 3,
            })
        }
    }
}

fn setup(common: &Common, cfg_dir: Option<&Path>) -> Result<PathBuf, Failure> {
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::Parameter("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Parameter(e.to_string()))?;
    }
    if common.trace_stride == Some(0) {
        return Err(Error::Parameter("--trace-stride must be at least 1".into()).into());
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg_dir.map(Path::to_path_buf))
        .or_else(|| std::env::var_os("MCC_CS_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    fs::create_dir_all(&out)?;
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn simulate(args: &RunArgs) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let spec = cfg.experiment_spec(args.common.seed, args.common.trace_stride)?;
    let out = setup(&args.common, cfg.output_dir.as_deref())?;
    let mut outcome = learning_curve(&spec)?;
    if args.common.timings {
        report_timings(outcome.trials.iter().filter_map(|t| t.wall_time_s));
    } else {
        outcome = outcome.without_timings();
    }
    for curve in &outcome.curves {
        let path = out.join(output_name(&format!("curve_{}", curve.variant), spec.master_seed, "csv"));
        curve.write_csv(fs::File::create(&path)?)?;
        match curve.final_msd() {
            Some(m) => println!(
                "{}: final MSD {m:.4e} over {} trials ({} diverged) -> {}",
                curve.variant,
                curve.trials,
                curve.diverged,
                path.display()
            ),
            None => println!("{}: every trial diverged", curve.variant),
        }
    }
    write_json(&out.join(output_name("trials", spec.master_seed, "json")), &outcome)?;
    if outcome.divergence_dominated() {
        return Err(Failure::Diverged("most runs diverged".into()));
    }
    Ok(())
}

fn sweep(args: &RunArgs) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let spec = cfg.experiment_spec(args.common.seed, args.common.trace_stride)?;
    let out = setup(&args.common, cfg.output_dir.as_deref())?;
    let mut outcome = run_sweep(&spec)?;
    if args.common.timings {
        report_timings(outcome.trials.iter().filter_map(|t| t.wall_time_s));
    } else {
        outcome = outcome.without_timings();
    }
    let csv_path = out.join(output_name("sweep", spec.master_seed, "csv"));
    write_sweep_csv(&outcome.results, fs::File::create(&csv_path)?)?;
    write_json(&out.join(output_name("sweep", spec.master_seed, "json")), &outcome)?;
    let mut stdout = std::io::stdout().lock();
    for r in &outcome.results {
        let value = r.axis_value.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
        writeln!(
            stdout,
            "{}={value} {}: p={:.3} ({}/{}) msd_success={} diverged={}",
            r.axis.unwrap_or("point"),
            r.variant,
            r.probability,
            r.successes,
            r.trials,
            r.msd_success.map(|m| format!("{m:.3e}")).unwrap_or_else(|| "-".into()),
            r.diverged
        )?;
    }
    writeln!(stdout, "wrote {}", csv_path.display())?;
    if outcome.divergence_dominated() {
        return Err(Failure::Diverged("most runs diverged".into()));
    }
    Ok(())
}

fn report_timings(times: impl Iterator<Item = f64>) {
    let (sum, count) = times.fold((0.0, 0usize), |(s, c), t| (s + t, c + 1));
    if count > 0 {
        eprintln!("{count} solver runs, {sum:.2}s total, {:.3}s mean", sum / count as f64);
    }
}

#[derive(Serialize)]
struct Advice {
    n: usize,
    sigma_a_sq: f64,
    sigma: Option<f64>,
    v_max: Option<f64>,
    bounds: Vec<BoundAdvice>,
}

fn usage(message: &str) -> ! {
    Cli::command()
        .error(clap::error::ErrorKind::MissingRequiredArgument, message)
        .exit()
}

fn advise_stepsize(args: &AdviseArgs) -> Result<(), Failure> {
    let problem = match &args.config {
        Some(path) => Some(
            ExperimentConfig::load(path)?
                .problem
                .ok_or_else(|| Error::Config {
                    field: "problem".into(),
                    message: "section is required for advise-stepsize".into(),
                })?,
        ),
        None => None,
    };
    let n = args.n.or(problem.as_ref().map(|p| p.n)).unwrap_or_else(|| usage("--n is required"));
    let m = args.m.or(problem.as_ref().map(|p| p.m));
    let sigma_a_sq = args
        .sigma_a_sq
        .or(problem.as_ref().and_then(|p| p.entry_variance))
        .or(m.map(|m| 1.0 / m as f64))
        .unwrap_or_else(|| usage("give --sigma-a-sq or --m"));
    if n == 0 || sigma_a_sq.is_nan() || sigma_a_sq <= 0.0 {
        return Err(Error::Parameter("N and sigma_a_sq must be positive".into()).into());
    }
    let bounded = match (args.sigma, args.v_max) {
        (Some(s), Some(v)) if s > 0.0 && v >= 0.0 => Some((s, v)),
        (Some(_), Some(_)) => return Err(Error::Parameter("need sigma > 0 and v_max >= 0".into()).into()),
        _ => None,
    };
    let regimes: Vec<Regime> = match args.regime {
        RegimeArg::Rademacher => vec![Regime::Rademacher],
        RegimeArg::Gaussian => vec![Regime::GaussianNoise],
        RegimeArg::Bounded => {
            if bounded.is_none() {
                usage("the bounded regime needs --sigma and --v-max");
            }
            vec![Regime::BoundedNoise]
        }
        RegimeArg::All => vec![Regime::Rademacher, Regime::BoundedNoise, Regime::GaussianNoise],
    };
    let bounds: Vec<BoundAdvice> = regimes
        .into_iter()
        .filter_map(|r| advise(r, n, sigma_a_sq, bounded))
        .collect();
    let mut stdout = std::io::stdout().lock();
    if args.json {
        let advice = Advice {
            n,
            sigma_a_sq,
            sigma: bounded.map(|b| b.0),
            v_max: bounded.map(|b| b.1),
            bounds,
        };
        writeln!(stdout, "{}", serde_json::to_string_pretty(&advice)?)?;
    } else {
        writeln!(stdout, "N = {n}, sigma_a^2 = {sigma_a_sq}")?;
        writeln!(stdout, "{:<34} {:>12} {:>14}", "regime", "mu_max", "suggested_mu")?;
        for b in &bounds {
            writeln!(stdout, "{:<34} {:>12.6} {:>14.6}", b.regime, b.bound, b.suggested_mu)?;
        }
        if bounded.is_none() {
            writeln!(stdout, "(bounded-noise regime needs --sigma and --v-max)")?;
        }
    }
    Ok(())
}

fn image(args: &ImageArgs) -> Result<(), Failure> {
    let cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::from_toml_str("schema_version = 1\n")?,
    };
    let img = match (&args.image, args.synthetic) {
        (Some(path), _) => ImageGrid::load_pgm(path)?,
        (None, Some((h, w))) => ImageGrid::synthetic(h, w),
        (None, None) => usage("give --image or --synthetic"),
    };
    let out = setup(&args.common, cfg.output_dir.as_deref())?;
    let seed = args.common.seed.unwrap_or(cfg.seed);
    let image_cfg = cfg.image_config(args.common.trace_stride);
    let outcome = reconstruct_image(&img, &image_cfg, seed)?;
    let report = if args.common.timings {
        report_timings(outcome.report.blocks.iter().filter_map(|b| b.wall_time_s));
        outcome.report
    } else {
        outcome.report.without_timings()
    };
    let pgm = out.join(output_name("reconstructed", seed, "pgm"));
    outcome.image.write_pgm(fs::File::create(&pgm)?)?;
    write_json(&out.join(output_name("image_report", seed, "json")), &report)?;
    let psnr = if report.psnr_db.is_infinite() {
        "inf".to_string()
    } else {
        format!("{:.2} dB", report.psnr_db)
    };
    println!(
        "PSNR {psnr} over {} blocks ({} diverged) -> {}",
        report.blocks.len(),
        report.diverged_blocks,
        pgm.display()
    );
    if 2 * report.diverged_blocks > report.blocks.len() {
        return Err(Failure::Diverged("most blocks diverged".into()));
    }
    Ok(())
}

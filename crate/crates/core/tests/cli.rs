use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "schema_version = 1\nseed = 3\n[problem]\nn = 120\nm = 60\nk = 4\n\
    [noise]\nkind = \"gaussian\"\nvariance = 1e-4\n[experiment]\ntrials = 2\n\
    [[solver]]\nvariant = \"l0_mcc\"\nmax_updates = 6000\n";

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcc-cs"))
        .args(args)
        .current_dir(dir)
        .env_remove("MCC_CS_OUT")
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn advise_prints_the_three_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["advise-stepsize", "--n", "1000", "--m", "300", "--sigma", "1", "--v-max", "2"]);
    assert!(out.status.success());
    let stdout = text(&out.stdout);
    assert!(stdout.contains("0.600000"), "{stdout}");
    assert!(stdout.contains("0.597015"), "{stdout}");
    assert!(stdout.contains("0.598802"), "{stdout}");

    let json = cli(dir.path(), &["advise-stepsize", "--n", "1000", "--sigma-a-sq", "0.0033333333333333335", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    let bounds = v["bounds"].as_array().unwrap();
    assert_eq!(bounds.len(), 2);
    assert!((bounds[0]["bound"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    assert!((bounds[0]["suggested_mu"].as_f64().unwrap() - 0.3).abs() < 1e-12);
}

#[test]
fn bounded_regime_without_noise_bound_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["advise-stepsize", "--n", "100", "--m", "50", "--regime", "bounded"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("--v-max"));
}

#[test]
fn oversized_batch_is_rejected_with_its_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace("variant = \"l0_mcc\"", "variant = \"mb_l0_mcc\"\nbatch_size = 61");
    std::fs::write(dir.path().join("bad.toml"), cfg).unwrap();
    let out = cli(dir.path(), &["simulate", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("solver[0].batch_size"), "{}", text(&out.stderr));
    assert!(!dir.path().join("results").exists());
}

#[test]
fn unknown_key_is_rejected_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), SMALL.replace("trials = 2", "trials = 2\ntrails = 3")).unwrap();
    let out = cli(dir.path(), &["sweep", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("experiment.trails"), "{}", text(&out.stderr));
}

#[test]
fn missing_image_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["image", "--image", "nope.pgm"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(text(&out.stderr).contains("nope.pgm"));
}

#[test]
fn simulate_writes_curves_and_trials() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), SMALL).unwrap();
    let out = cli(dir.path(), &["simulate", "--config", "run.toml", "--trace-stride", "100"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let results = dir.path().join("results");
    let curve = std::fs::read_to_string(results.join("curve_l0_mcc_seed3.csv")).unwrap();
    let mut lines = curve.lines();
    assert_eq!(lines.next(), Some("iteration,msd"));
    assert_eq!(lines.count(), 61);
    let trials: serde_json::Value =
        serde_json::from_slice(&std::fs::read(results.join("trials_seed3.json")).unwrap()).unwrap();
    assert!(trials.to_string().contains("final_squared_deviation"));

    let reseeded = cli(dir.path(), &["simulate", "--config", "run.toml", "--seed", "9", "--out", "other"]);
    assert!(reseeded.status.success());
    assert!(dir.path().join("other/curve_l0_mcc_seed9.csv").exists());
}

#[test]
fn sparsity_sweep_has_one_row_per_point_and_variant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{SMALL}[[solver]]\nvariant = \"mb_l0_mcc\"\nmax_updates = 600\n[sweep]\nparameter = \"sparsity\"\nvalues = [2, 4, 8]\n"
    );
    std::fs::write(dir.path().join("sweep.toml"), cfg).unwrap();
    let out = cli(dir.path(), &["sweep", "--config", "sweep.toml"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("results/sweep_seed3.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "axis,axis_value,variant,trials,successes,probability,msd_success,msd_all,diverged");
    assert_eq!(rows.len(), 1 + 3 * 2);
    assert!(rows[1..].iter().all(|r| r.starts_with("k,")));
}

#[test]
fn noiseless_orthogonal_image_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("img.toml"),
        "schema_version = 1\n[image]\nblock = 8\ns = 64\nm_img = 64\nmatrix = \"orthogonal\"\n\
         [image.solver]\nvariant = \"l0_mcc\"\nmu = 1.0\nlambda = 0.0\ntheta = 0.0\nsigma_max = 1.0\n\
         max_updates = 2560\nepsilon = 0.0\n",
    )
    .unwrap();
    let out = cli(dir.path(), &["image", "--synthetic", "16x24", "--config", "img.toml", "--seed", "4"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).starts_with("PSNR inf"), "{}", text(&out.stdout));
    let report = std::fs::read_to_string(dir.path().join("results/image_report_seed4.json")).unwrap();
    assert!(report.contains("\"psnr_db\": \"inf\""), "{report}");
    let pgm = std::fs::read(dir.path().join("results/reconstructed_seed4.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5"));
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), SMALL).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mcc-cs"))
        .args(["simulate", "--config", "run.toml"])
        .current_dir(dir.path())
        .env("MCC_CS_OUT", "from_env")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from_env/trials_seed3.json").exists());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = mcc_cs::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        if cfg.problem.is_some() {
            cfg.experiment_spec(None, None).unwrap().points().unwrap();
        } else {
            cfg.image_config(None).validate().unwrap();
        }
        seen += 1;
    }
    assert!(seen >= 4);
}

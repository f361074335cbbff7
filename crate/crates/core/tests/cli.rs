use std::fs;
use std::path::Path;

use quatsagnac::cli::main_with_args;
use quatsagnac::io::read_interferogram;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> i32 {
    let mut full = vec!["quatsagnac".to_string(), "--out".into(), dir.display().to_string()];
    full.extend(args.iter().map(|s| s.to_string()));
    main_with_args(full)
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("experiment.toml");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

const SMALL: &str = "[campaign]\nn_runs = 12\n[sweep]\nn_runs = 6\nepsilons = [0.0, 0.05]\n";

#[test]
fn simulate_is_deterministic_and_fits_back() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert_eq!(run(a.path(), &["--seed", "5", "simulate", "--lc-only"]), 0);
    assert_eq!(run(b.path(), &["--seed", "5", "simulate", "--lc-only"]), 0);
    for name in ["nim_only.csv", "both.csv", "lc_only.csv", "none.csv"] {
        let x = fs::read(a.path().join(name)).unwrap();
        assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let ig = read_interferogram(fs::File::open(a.path().join("both.csv")).unwrap(), "both").unwrap();
    assert_eq!(ig.len(), 100);

    let both = a.path().join("both.csv").display().to_string();
    assert_eq!(run(a.path(), &["fit", &both]), 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("fit_report.json")).unwrap()).unwrap();
    let v = report[0]["fits"][0]["result"]["visibility"]["value"].as_f64().unwrap();
    assert!((v - 0.038).abs() < 0.012, "{v}");
}

#[test]
fn campaign_outputs_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg = write_config(a.path(), SMALL);
    assert_eq!(run(a.path(), &["--config", &cfg, "--seed", "3", "campaign"]), 0);
    assert_eq!(
        run(b.path(), &["--config", &cfg, "--seed", "3", "--jobs", "1", "campaign"]),
        0
    );
    for name in [
        "runs.json",
        "bound_report.json",
        "delta_v_hist.csv",
        "gamma_ratio_hist.csv",
    ] {
        let x = fs::read(a.path().join(name)).unwrap();
        assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name}");
    }

    // the saved runs reproduce the report
    let c = TempDir::new().unwrap();
    let runs = a.path().join("runs.json").display().to_string();
    assert_eq!(run(c.path(), &["--config", &cfg, "bound", "--runs", &runs]), 0);
    assert_eq!(
        fs::read(c.path().join("bound_report.json")).unwrap(),
        fs::read(a.path().join("bound_report.json")).unwrap()
    );
}

#[test]
fn sweep_writes_table() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    assert_eq!(run(dir.path(), &["--config", &cfg, "sweep"]), 0);
    let text = fs::read_to_string(dir.path().join("sensitivity.csv")).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "epsilon,gamma_shift,significance");
    assert_eq!(lines.len(), 3);
}

#[test]
fn index_of_half_wave_at_790() {
    let dir = TempDir::new().unwrap();
    let spectrum = dir.path().join("spectrum.csv");
    fs::write(&spectrum, "wavelength_nm,phase_rad\n790,-3.141592653589793\n").unwrap();
    assert_eq!(run(dir.path(), &["index", &spectrum.display().to_string()]), 0);
    let text = fs::read_to_string(dir.path().join("index.csv")).unwrap();
    let row = text.lines().nth(1).unwrap();
    let n: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((n + 0.39).abs() <= 0.01, "{n}");
}

#[test]
fn bound_from_ratio() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        run(dir.path(), &["bound", "--ratio", "0.99999999", "--sigma", "2e-7"]),
        0
    );
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("theta_bound.json")).unwrap()).unwrap();
    let c = v["theta"]["conservative_deg"].as_f64().unwrap();
    assert!((0.03..=0.04).contains(&c), "{c}");
    assert_eq!(run(dir.path(), &["bound", "--ratio", "1.0", "--sigma=-1"]), 2);
}

#[test]
fn input_errors_map_to_exit_codes() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    assert_eq!(run(dir.path(), &["fit", &empty.display().to_string()]), 3);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "phase_rad,counts_d1,counts_d2\n0.0,1,x\n").unwrap();
    assert_eq!(run(dir.path(), &["fit", &bad.display().to_string()]), 3);

    let missing = dir.path().join("missing.csv").display().to_string();
    assert_eq!(run(dir.path(), &["fit", &missing]), 3);

    // too few usable points is a soft fit failure
    let short = dir.path().join("short.csv");
    fs::write(&short, "phase_rad,counts_d1,counts_d2\n0.0,1,2\n0.1,2,1\n").unwrap();
    assert_eq!(run(dir.path(), &["fit", &short.display().to_string()]), 4);
    assert!(dir.path().join("fit_report.json").exists());

    let zero = write_config(dir.path(), "[campaign]\nn_runs = 0\n");
    assert_eq!(run(dir.path(), &["--config", &zero, "campaign"]), 2);
    assert_eq!(run(dir.path(), &["campaign", "--runs", "1"]), 2);

    let unknown = write_config(dir.path(), "[scan]\nsteps = 10\n");
    assert_eq!(run(dir.path(), &["--config", &unknown, "simulate"]), 2);
}

#[test]
fn shipped_config_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    let cfg = quatsagnac::config::ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg, quatsagnac::config::ExperimentConfig::default());
}

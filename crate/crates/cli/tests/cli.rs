use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_parity-qst");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).env_remove("RUST_LOG").output().expect("binary runs")
}

fn config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn malformed_config_exits_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "[mediator\ng = ");
    let o = run(tmp.path(), &["spectrum", "--config", cfg.to_str().unwrap(), "--out", "res"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("res").exists());

    let cfg = config(tmp.path(), "[mediator]\nnot_a_key = 1\n");
    let o = run(tmp.path(), &["check", "--config", cfg.to_str().unwrap(), "--out", "res"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("res").exists());
}

#[test]
fn spectrum_csv_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["spectrum", "--sweep", "g:0:1:5", "--plot", "--out", "res"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("res/spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("g,level_index,freq,parity,dark"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5 * 12);
    for r in &rows {
        assert_eq!(r.len(), 5);
        assert!(r[3] == "1" || r[3] == "-1");
        assert!(r[4] == "true" || r[4] == "false");
    }
    assert!(tmp.path().join("res/spectrum.svg").exists());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("res/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "spectrum");
    assert_eq!(manifest["config"]["spectrum"]["sweep"], "g:0:1:5");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn check_passes_on_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["check", "--out", "res"]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.contains("selection_rules: PASS"));
    assert!(text.contains("fock_convergence: PASS"));
    assert!(text.contains("thermal_product: "));
    assert!(tmp.path().join("res/check_report.txt").exists());
}

#[test]
fn tiny_fock_space_fails_convergence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "[mediator]\nn_fock = 4\n");
    let o = run(tmp.path(), &["check", "--config", cfg.to_str().unwrap(), "--out", "res"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("fock_convergence: FAIL"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("res/check_report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn lossless_check_reports_no_dressed_rates() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "[losses]\nkappa_mhz = 0.0\ngamma_mhz = 0.0\n");
    let o = run(tmp.path(), &["check", "--config", cfg.to_str().unwrap(), "--out", "res"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("dressed_rates: none (kappa = gamma = 0)"));
}

#[test]
fn existing_run_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["spectrum", "--sweep", "g:0:0.5:3", "--out", "res"];
    assert_eq!(run(tmp.path(), &args).status.code(), Some(0));
    let o = run(tmp.path(), &args);
    assert_eq!(o.status.code(), Some(2));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(run(tmp.path(), &forced).status.code(), Some(0));
}

#[test]
fn csv_output_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = run(tmp.path(), &["spectrum", "--sweep", "omega_q:0.5:1.5:7", "--out", out]);
        assert_eq!(o.status.code(), Some(0));
    }
    let a = fs::read(tmp.path().join("a/spectrum.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/spectrum.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn env_overrides_file_and_flags_override_env() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "[spectrum]\nsweep = \"g:0:1:4\"\nlevels = 6\n");
    let o = Command::new(BIN)
        .current_dir(tmp.path())
        .args(["spectrum", "--config", cfg.to_str().unwrap(), "--out", "res"])
        .env("PQST_SPECTRUM_LEVELS", "3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("res/spectrum.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 3);

    let o = Command::new(BIN)
        .current_dir(tmp.path())
        .args(["spectrum", "--config", cfg.to_str().unwrap(), "--out", "res2", "--sweep", "g:0:1:2"])
        .env("PQST_SPECTRUM_SWEEP", "g:0:1:9")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("res2/spectrum.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 6);
}

#[test]
fn qst_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "[qst]\nt_max = 100.0\ntime_points = 11\nframe_cutoff = 2.5\n");
    let o = run(tmp.path(), &["qst", "--config", cfg.to_str().unwrap(), "--samples", "20", "--seed", "3", "--out", "res"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("F_peak="));
    let avg = fs::read_to_string(tmp.path().join("res/qst_average.csv")).unwrap();
    assert!(avg.starts_with("t,observable_name,value"));
    let samples = fs::read_to_string(tmp.path().join("res/qst_samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 21);
    for line in samples.lines().skip(1) {
        let f: Vec<f64> = line.split(',').skip(3).map(|v| v.parse().unwrap()).collect();
        assert!(f[0] >= -1e-6 && f[1] <= 1.0 + 1e-6 && f[0] <= f[1]);
    }
}

#[test]
fn transfer_effective_only() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["transfer", "--effective-only", "--out", "res"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("half_period_omega_cav="));
    assert!(text.contains("half_period_source=effective model"));
    assert!(tmp.path().join("res/transfer_effective.csv").exists());
    assert!(tmp.path().join("res/transfer_report.txt").exists());
    assert!(!tmp.path().join("res/transfer_full.csv").exists());

    let o = run(tmp.path(), &["transfer", "--mediator", "dicke", "--out", "res2"]);
    assert_eq!(o.status.code(), Some(2));
}

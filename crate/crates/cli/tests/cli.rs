use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use shsa::config::{AccuracyKindSpec, ExperimentConfig, ReductionSpec};
use shsa::report::{SolutionDoc, CSV_HEADER};
use shsa::{CliError, ExperimentReport};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn shsa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shsa")).args(args).env_remove("SHSA_OUT_DIR").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// The bundled single-cell config shrunk to a few seconds of work.
fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::load(&configs().join("table1_m1.cfg")).unwrap();
    cfg.simulation.horizon = 1.0;
    cfg.simulation.max_step = Some(2e-3);
    cfg.bounds.n = Some(60);
    cfg.bounds.alphas = vec![0.1, 0.2];
    cfg.accuracy.kind = AccuracyKindSpec::Scalar;
    cfg.validation.scenarios = 300;
    cfg
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> PathBuf {
    let path = dir.join("small.cfg");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    path
}

fn load_report(dir: &Path) -> ExperimentReport {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn sample_size_subcommand() {
    let o = shsa(&["sample-size", "--eps", "0.25", "--beta", "1e-10", "--alpha", "0.10", "--r", "28"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().any(|l| l == "implicit 1697"), "{text}");
    assert!(text.lines().any(|l| l.starts_with("chernoff ")));
    assert!(text.lines().any(|l| l.starts_with("vc ")));
}

#[test]
fn bundled_configs_round_trip_exactly() {
    for name in ["table1_m1.cfg", "table1.cfg", "design.cfg"] {
        let cfg = ExperimentConfig::load(&configs().join(name)).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again, "{name}");
    }
}

#[test]
fn awkward_floats_round_trip_bit_exactly() {
    let mut cfg = small_config();
    let odd = [0.1 + 0.2, 1e-300, -2.2250738585072014e-308, 1.0 / 3.0, 123_456_789.123_456_78, -0.0];
    for (k, v) in odd.iter().enumerate() {
        cfg.system.drift[k % 6][k / 6] = *v;
    }
    let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    for (a, b) in cfg.system.drift.iter().flatten().zip(again.system.drift.iter().flatten()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn alpha_not_below_eps_is_rejected() {
    let mut cfg = small_config();
    cfg.bounds.alphas = vec![0.1, 0.25];
    let err = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap_err();
    assert!(matches!(err, CliError::Config(_)));
    assert!(err.to_string().contains("alpha must satisfy 0 <= alpha < eps"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    let o = shsa(&["--out", dir.path().to_str().unwrap(), "assess", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha"), "{}", stderr(&o));
}

#[test]
fn inconsistent_r_is_rejected() {
    let mut cfg = small_config();
    cfg.accuracy.kind = AccuracyKindSpec::Quadratic;
    cfg.bounds.r = Some(27);
    let err = cfg.validate().unwrap_err().to_string();
    assert!(err.contains("28 decision variables"), "{err}");
    cfg.bounds.r = Some(28);
    cfg.validate().unwrap();
}

#[test]
fn malformed_configs_are_rejected() {
    let mut cfg = small_config();
    cfg.system.drift[2].pop();
    assert!(cfg.validate().is_err());

    let mut cfg = small_config();
    cfg.models[0].reduction = ReductionSpec::Truncate { order: 7 };
    assert!(cfg.validate().is_err());

    let text = small_config().to_toml().unwrap().replace("[seeds]", "[seeds]\ntypo = 3");
    assert!(ExperimentConfig::from_toml(&text).is_err());
}

#[test]
fn usage_and_missing_files() {
    assert_eq!(shsa(&["assess"]).status.code(), Some(2));
    assert_eq!(shsa(&["sample-size", "--eps", "0.25", "--bogus", "1"]).status.code(), Some(2));
    let o = shsa(&["assess", "/nonexistent/config.cfg"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("/nonexistent/config.cfg"));
}

#[test]
fn bisim_subcommand_on_bundled_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("table1.cfg");
    let o = shsa(&["--out", dir.path().to_str().unwrap(), "bisim", cfg.to_str().unwrap(), "--validation", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = load_report(dir.path());
    let j: Vec<f64> = report.cells.iter().map(|c| c.j).collect();
    for (got, want) in j.iter().zip([10.13, 19.77, 15.63]) {
        assert!((got - want).abs() <= 0.05 * want, "{j:?}");
    }
}

#[test]
fn assess_is_deterministic_and_reproducible_from_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config());
    let run = |out: &str, cfg: &Path| {
        let out = dir.path().join(out);
        let o = shsa(&["--out", out.to_str().unwrap(), "assess", cfg.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let a = run("a", &cfg);
    let b = run("b", &cfg);
    let ja = std::fs::read(a.join("report.json")).unwrap();
    assert_eq!(ja, std::fs::read(b.join("report.json")).unwrap());

    let report = load_report(&a);
    assert_eq!(report.cells.len(), 2);
    for c in &report.cells {
        let v = c.validation.unwrap();
        assert_eq!(v.m, 300);
        assert!(v.ci_lo <= v.eps_hat && v.eps_hat <= v.ci_hi);
        assert_eq!(c.n, Some(60));
        let s = c.solution.as_ref().unwrap();
        assert_eq!(s.removed.len(), (c.alpha.unwrap() * 60.0).floor() as usize);
    }

    // the embedded config alone reproduces the run
    let embedded = dir.path().join("embedded.cfg");
    std::fs::write(&embedded, report.config.to_toml().unwrap()).unwrap();
    let c = run("c", &embedded);
    assert_eq!(ja, std::fs::read(c.join("report.json")).unwrap());

    let csv = std::fs::read_to_string(a.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(lines.count(), 2);
}

#[test]
fn validate_round_trips_a_saved_solution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config());
    let out = dir.path().join("run");
    let o = shsa(&["--out", out.to_str().unwrap(), "assess", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let sol = out.join("solutions").join("M1_assess_alpha0.1.json");
    let doc = SolutionDoc::load(&sol).unwrap();
    let text = serde_json::to_string(&doc).unwrap();
    assert_eq!(serde_json::from_str::<SolutionDoc>(&text).unwrap(), doc);

    let vout = dir.path().join("val");
    let o = Command::new(env!("CARGO_BIN_EXE_shsa"))
        .args(["validate", sol.to_str().unwrap(), "--seed", "99", "--scenarios", "200"])
        .env("SHSA_OUT_DIR", &vout)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let report = load_report(&vout);
    assert_eq!(report.seeds.root, 99);
    let cell = &report.cells[0];
    assert_eq!(cell.solution.as_ref(), Some(&doc.solution));
    let v = cell.validation.unwrap();
    assert_eq!(v.m, 200);
    assert!(v.ci_lo <= v.eps_hat && v.eps_hat <= v.ci_hi);
}

#[test]
fn design_two_step_and_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::load(&configs().join("design.cfg")).unwrap();
    cfg.bounds.n = Some(40);
    cfg.validation.scenarios = 100;
    let path = write_config(dir.path(), &cfg);
    let out = dir.path().join("d");
    let o = shsa(&["--out", out.to_str().unwrap(), "design", path.to_str().unwrap(), "--two-step", "0.1", "0.2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = load_report(&out);
    assert_eq!(report.cells.len(), 2);
    let l_design = report.cells[0].solution.as_ref().unwrap().init_map.clone().unwrap();
    let l_step2 = report.cells[1].solution.as_ref().unwrap().init_map.clone().unwrap();
    assert_eq!(l_design, l_step2);
    assert_eq!((l_design.len(), l_design[0].len()), (4, 6));
    assert!(out.join("solutions").join("M1_two_step_alpha0.2.json").exists());

    let o = shsa(&["--out", out.to_str().unwrap(), "simulate", path.to_str().unwrap(), "--count", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("trajectories_M1.csv")).unwrap();
    assert!(csv.starts_with("scenario,t,source,y0,y1\n"));
    // 2 scenarios x (system + model) x at least 1001 grid points
    assert!(csv.lines().count() > 4 * 1001);
}

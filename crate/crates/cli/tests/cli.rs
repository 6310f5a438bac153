use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use aelt_core::DiscreteFunction;
use serde_json::Value;
use tempfile::TempDir;

const QUICK_CHECKS: &str = r#"
[checks]
cloud_count = 2000
r0_count = 10
polar = { n_radii = 100, n_angles = 90, r_min = 1e-8 }
"#;

fn config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn example(dir: &Path, problem: &str, extra: &str) -> PathBuf {
    config(
        dir,
        &format!("{problem}.toml"),
        &format!("seed = 11\n[problem]\nname = \"{problem}\"\n{extra}\n{QUICK_CHECKS}"),
    )
}

fn aelt(args: &[&str], cfg: &Path, out: &Path) -> (i32, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_aelt"))
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&output.stdout).to_string() + &String::from_utf8_lossy(&output.stderr);
    (output.status.code().unwrap(), text)
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn meta(csv: &str, key: &str) -> String {
    let prefix = format!("# {key}: ");
    csv.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no {key} line"))
        .to_string()
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("malformed.toml", "seed = [\n"),
        ("noseed.toml", "[problem]\nname = \"example5\"\n"),
        ("unknown.toml", "seed = 1\nspeed = 2\n[problem]\nname = \"example5\"\n"),
        ("badgrid.toml", "seed = 1\n[problem]\nname = \"example5\"\n[grid]\nn = 5\n"),
    ];
    for (name, body) in cases {
        let cfg = config(dir.path(), name, body);
        let (code, text) = aelt(&["check"], &cfg, &dir.path().join("out"));
        assert_eq!(code, 2, "{name}: {text}");
        assert!(text.contains("config error"));
    }
    let (code, _) = aelt(&["check"], &dir.path().join("missing.toml"), &dir.path().join("out"));
    assert_eq!(code, 2);
    let ok = example(dir.path(), "example5", "");
    let (code, _) = aelt(&["solve", "--grid-n", "7"], &ok, &dir.path().join("out"));
    assert_eq!(code, 2);
}

#[test]
fn check_reports_every_hypothesis() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("check");
    let (code, text) = aelt(&["check"], &example(dir.path(), "example5", ""), &out);
    let r = report(&out);
    let checks = r["checks"].as_array().unwrap();
    let names: Vec<&str> = checks.iter().map(|c| c["name"].as_str().unwrap()).collect();
    for name in ["F1", "F3", "F4", "F5", "F6", "V1", "V2-AR", "V3", "V5", "f", "Delta2", "nabla2", "G"] {
        assert!(names.contains(&name), "{name} missing from {names:?}");
    }
    let required_fail = checks
        .iter()
        .any(|c| c["required"].as_bool().unwrap() && c["status"].as_str().unwrap() != "pass");
    assert_eq!(code, if required_fail { 4 } else { 0 }, "{text}");
    assert_eq!(r["legacy"]["rows"].as_array().unwrap().len(), 10);
    let legacy = fs::read_to_string(out.join("legacy.csv")).unwrap();
    assert!(legacy.starts_with("# tool: aelt "));
    assert_eq!(meta(&legacy, "seed"), "11");
    assert!(out.join("summary.txt").exists() && out.join("config.toml").exists());
}

#[test]
fn large_envelope_breaks_forcing_condition() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("check");
    let (code, _) = aelt(&["check"], &example(dir.path(), "example5", "envelope = 0.01"), &out);
    assert_eq!(code, 4);
    let r = report(&out);
    let f = r["checks"].as_array().unwrap().iter().find(|c| c["name"] == "f").unwrap();
    assert_eq!(f["status"], "fail");
    assert!(f["metrics"]["lhs"].as_f64().unwrap() > f["metrics"]["rhs"].as_f64().unwrap());
}

fn c1(out: &Path) -> f64 {
    report(out)["solution"]["mountain_pass"]["value"].as_f64().unwrap()
}

#[test]
fn solve_gate_force_and_refinement() {
    let dir = TempDir::new().unwrap();
    let cfg = example(dir.path(), "example5", "");

    let gated = dir.path().join("gated");
    let (code, text) = aelt(&["solve"], &cfg, &gated);
    let r = report(&gated);
    if code == 4 {
        assert_eq!(r["status"], "hypotheses-failed");
        assert!(text.contains("--force"));
    } else {
        assert_eq!(code, 0, "{text}");
    }

    let forced = dir.path().join("forced");
    let (code, text) = aelt(&["solve", "--force"], &cfg, &forced);
    assert_eq!(code, 0, "{text}");
    let r = report(&forced);
    let verified = r["solution"]["hypotheses_verified"].as_bool().unwrap();
    assert_eq!(r["status"] == "hypotheses-unverified", !verified);
    let c2 = r["solution"]["minimizer"]["value"].as_f64().unwrap();
    assert!(c2 <= 0.0 && 0.0 < c1(&forced));
    let u1 = DiscreteFunction::read_csv(fs::File::open(forced.join("u1.csv")).unwrap()).unwrap();
    assert_eq!(u1.grid().n(), 64);
    for f in ["u2.csv", "e1.csv", "u1_trace.csv", "u2_trace.csv", "ekeland.csv", "timing.json"] {
        assert!(forced.join(f).exists(), "{f}");
    }

    let coarse = dir.path().join("coarse");
    let (code, _) = aelt(&["solve", "--force", "--grid-n", "32"], &cfg, &coarse);
    assert_eq!(code, 0);
    assert_eq!(report(&coarse)["config"]["grid"]["n"], 32);
    assert!((c1(&coarse) - c1(&forced)).abs() <= 0.1 * c1(&forced));
}

#[test]
fn unforced_solve_finds_nontrivial_minimizer() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("f0");
    let (code, text) = aelt(&["solve", "--force"], &example(dir.path(), "example5_f0", ""), &out);
    assert_eq!(code, 0, "{text}");
    let cert = &report(&out)["solution"]["certificate"];
    assert_eq!(cert["unforced"], true);
    assert_eq!(cert["nontrivial"], true);
}

#[test]
fn solver_failure_exits_three_with_trace() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fail");
    let cfg = example(dir.path(), "example5", "[solver]\nmax_iter = 2");
    let (code, text) = aelt(&["solve", "--force"], &cfg, &out);
    assert_eq!(code, 3, "{text}");
    let trace = out.join("failure_trace.csv");
    assert!(text.contains(&trace.display().to_string()));
    assert!(fs::read_to_string(trace).unwrap().contains("iteration,value,residual"));
    assert_eq!(report(&out)["status"], "solver-failed");
}

#[test]
fn scans_write_plot_tables() {
    let dir = TempDir::new().unwrap();
    let cfg = example(dir.path(), "example5", "[scan]\nresolution = 121\nboundary_directions = 60");

    let out = dir.path().join("h1");
    assert_eq!(aelt(&["scan", "h1"], &cfg, &out).0, 0);
    let h1 = fs::read_to_string(out.join("h1.csv")).unwrap();
    assert!(meta(&h1, "max").parse::<f64>().unwrap() > 0.0);
    assert_eq!(h1.lines().filter(|l| !l.starts_with('#')).count(), 1 + 121 * 121);

    let out = dir.path().join("regions");
    assert_eq!(aelt(&["scan", "regions"], &cfg, &out).0, 0);
    let regions = fs::read_to_string(out.join("regions.csv")).unwrap();
    let mut lines = regions.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next().unwrap(), "x1,x2,in_a,in_c,in_ball_1,in_ball_2");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let in_c = rows.iter().filter(|r| r[3] == "true").count();
    let c_not_a = rows.iter().filter(|r| r[3] == "true" && r[2] == "false").count();
    assert_eq!(meta(&regions, "c_count"), in_c.to_string());
    assert_eq!(meta(&regions, "c_not_a"), c_not_a.to_string());

    let out = dir.path().join("boundary");
    assert_eq!(aelt(&["scan", "boundary"], &cfg, &out).0, 0);
    let b = fs::read_to_string(out.join("boundary.csv")).unwrap();
    let values: Vec<f64> = b
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 60);
    assert!(values.iter().all(|&v| v > 0.0));
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "timing.json")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn identical_inputs_give_identical_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = example(dir.path(), "example5", "");
    let out = dir.path().join("run");
    assert_eq!(aelt(&["solve", "--force", "--seed", "5"], &cfg, &out).0, 0);
    let first = snapshot(&out);
    assert_eq!(aelt(&["solve", "--force", "--seed", "5"], &cfg, &out).0, 0);
    assert_eq!(first, snapshot(&out));

    // the echoed config alone reproduces the run
    let echoed = out.join("config.toml");
    let status = Command::new(env!("CARGO_BIN_EXE_aelt"))
        .args(["solve", "--force", "--config"])
        .arg(&echoed)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert_eq!(first, snapshot(&out));
    assert_eq!(report(&out)["config"]["seed"], 5);
}

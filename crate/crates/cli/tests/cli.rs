use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const LIGHT: &str = r#"{
    "L_start": 10, "L_count": 2, "p": [2],
    "epsilons": [0.2], "max_span": 32, "offsets": [0, 1],
    "targets": [0, 1], "tau_nodes": 8, "l_max": 16
}"#;

fn qwalk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qwalk")).args(args).current_dir(dir).env_remove("QW_CACHE_DIR").output().unwrap()
}

fn light() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("light.json"), LIGHT).unwrap();
    dir
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().skip(2).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn verify_passes_and_corrupt_coin_fails() {
    let dir = light();
    let ok = qwalk(dir.path(), &["verify", "--config", "light.json", "--out", "a"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));
    let report = json(&dir.path().join("a/verify.json"));
    assert_eq!(report["result"]["passed"], true);
    let checks = report["result"]["checks"].as_array().unwrap();
    assert!(checks.len() >= 8);
    assert!(checks.iter().all(|c| c["passed"] == true));

    let bad = qwalk(dir.path(), &["verify", "--config", "light.json", "--out", "b", "--corrupt-coin", "3"]);
    assert_eq!(code(&bad), 1);
    let report = json(&dir.path().join("b/verify.json"));
    assert_eq!(report["result"]["passed"], false);
    let unitarity = checks_named(&report, "coin_unitarity");
    assert_eq!(unitarity["passed"], false);
    assert_eq!(report["config"]["corrupt_coin"]["site"], 3);
}

fn checks_named<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["result"]["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap()
}

#[test]
fn bad_arguments_exit_2() {
    let dir = light();
    assert_eq!(code(&qwalk(dir.path(), &["simulate", "--theta", "2.0"])), 2);
    assert_eq!(code(&qwalk(dir.path(), &["simulate", "--L-ratio", "1.0"])), 2);
    assert_eq!(code(&qwalk(dir.path(), &["simulate", "--sequence", "tribonacci"])), 2);
    assert_eq!(code(&qwalk(dir.path(), &["simulate", "--config", "missing.json"])), 2);
    fs::write(dir.path().join("typo.json"), r#"{"thetta": 0.5}"#).unwrap();
    assert_eq!(code(&qwalk(dir.path(), &["simulate", "--config", "typo.json"])), 2);
}

#[test]
fn resource_cap_exits_3() {
    let dir = light();
    let o = qwalk(dir.path(), &["simulate", "--l-max", "100000"]);
    assert_eq!(code(&o), 3);
    assert!(!dir.path().join("out/profiles.csv").exists());
}

#[test]
fn flags_override_config_and_land_in_provenance() {
    let dir = light();
    let o = qwalk(
        dir.path(),
        &[
            "exponents",
            "--config",
            "light.json",
            "--theta",
            "0.4",
            "--p",
            "1,3",
            "--L-count",
            "5",
            "--L-ratio",
            "1.5",
            "--out",
            "e",
        ],
    );
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(dir.path().join("e/moments.csv")).unwrap();
    let (config, lines) = qwalk::export::read_provenance(&text).unwrap();
    assert_eq!(config["theta"], 0.4);
    assert_eq!(config["p"], serde_json::json!([1.0, 3.0]));
    assert_eq!(config["L_start"], 10.0);
    assert_eq!(config["L_count"], 5);
    assert_eq!(config["command"], "exponents");
    assert_eq!(lines[0], "L,p,moment,log_moment");
    assert_eq!(lines.len(), 1 + 2 * 5);
    let exps = json(&dir.path().join("e/exponents.json"));
    assert_eq!(exps["config"], config);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = light();
    for (threads, out) in [("1", "t1"), ("3", "t3")] {
        for cmd in ["simulate", "certify", "transfer-scan"] {
            let o = qwalk(dir.path(), &[cmd, "--config", "light.json", "--threads", threads, "--out", out]);
            assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
    }
    let mut names: Vec<_> = fs::read_dir(dir.path().join("t1")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 6);
    for name in names {
        let a = fs::read(dir.path().join("t1").join(&name)).unwrap();
        let b = fs::read(dir.path().join("t3").join(&name)).unwrap();
        assert!(a == b, "{name:?} differs");
    }
}

#[test]
fn constant_quarter_turn_coin_spreads_evenly() {
    let dir = light();
    let quarter = std::f64::consts::FRAC_PI_4.to_string();
    let o =
        qwalk(dir.path(), &["simulate", "--sequence", "constant", "--phi", &quarter, "--l-max", "2", "--L-count", "1"]);
    assert_eq!(code(&o), 0);
    let rows = csv(&dir.path().join("out/profiles.csv"));
    let at = |l: &str, n: &str| -> f64 {
        rows.iter().find(|r| r[0] == l && r[1] == n).map(|r| r[4].parse().unwrap()).unwrap()
    };
    assert!((at("2", "0") - 0.5).abs() < 1e-14);
    assert!((at("2", "2") - 0.25).abs() < 1e-14);
    assert!((at("2", "-2") - 0.25).abs() < 1e-14);
    assert!((at("1", "1") - 0.5).abs() < 1e-14);
    assert!(dir.path().join("out/window.json").exists());
    assert!(dir.path().join("out/averaged.csv").exists());
}

#[test]
fn certificate_holds_and_small_p_warns() {
    let dir = light();
    let o = qwalk(dir.path(), &["certify", "--config", "light.json", "--p", "1,2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning: p = 1"));
    let cert = json(&dir.path().join("out/certificate.json"));
    for r in cert["result"].as_array().unwrap() {
        assert_eq!(r["all_positive"], true);
        assert_eq!(r["all_ordered"], true);
    }
    let rows = csv(&dir.path().join("out/certificate.csv"));
    assert_eq!(rows.len(), 4);
}

#[test]
fn parseval_sides_agree_for_the_shift() {
    let dir = light();
    let o = qwalk(dir.path(), &["parseval", "--config", "light.json", "--walk", "shift"]);
    assert_eq!(code(&o), 0);
    let v = json(&dir.path().join("out/parseval.json"));
    for r in v["result"].as_array().unwrap() {
        let (lhs, rhs, scale, n) = (
            r["lhs"].as_f64().unwrap(),
            r["rhs"].as_f64().unwrap(),
            r["L"].as_f64().unwrap(),
            r["n"].as_f64().unwrap(),
        );
        let exact = (-2.0 * n / scale).exp();
        assert!((lhs - exact).abs() <= 1e-6 * exact, "lhs {lhs} vs {exact}");
        assert!((rhs - exact).abs() <= 1e-6 * exact, "rhs {rhs} vs {exact}");
    }
}

#[test]
fn cache_dir_is_used() {
    let dir = light();
    let cache = dir.path().join("cache");
    fs::create_dir(&cache).unwrap();
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_qwalk"))
            .args(["simulate", "--config", "light.json", "--l-max", "40"])
            .current_dir(dir.path())
            .env("QW_CACHE_DIR", &cache)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run()), 0);
    assert!(fs::read_dir(&cache).unwrap().count() > 0);
    let first = fs::read(dir.path().join("out/profiles.csv")).unwrap();
    assert_eq!(code(&run()), 0);
    assert_eq!(first, fs::read(dir.path().join("out/profiles.csv")).unwrap());
}

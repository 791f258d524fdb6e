use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mar")).args(args).env_remove("MAR_THREADS").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn simulate(dir: &Path, name: &str, extra: &[&str]) -> String {
    let path = dir.join(name).to_str().unwrap().to_string();
    let mut args = vec!["simulate", "--t", "500", "--phi", "0.65", "--vphi", "0.35", "--nu", "3", "-o", &path];
    args.extend_from_slice(extra);
    let out = mar(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn simulate_then_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = simulate(dir.path(), "y.csv", &["--seed", "5"]);
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# mar "));
    assert!(text.contains("# seed: 5"));

    let out = mar(&["fit", &path, "--seed", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["model"]["r"], 1);
    assert_eq!(report["model"]["s"], 1);
    let phi = report["model"]["phi"][0].as_f64().unwrap();
    let vphi = report["model"]["vphi"][0].as_f64().unwrap();
    assert!((phi - 0.65).abs() < 0.1 && (vphi - 0.35).abs() < 0.1, "{phi} {vphi}");
    assert!(report["se"]["classic"]["phi"][0].as_f64().unwrap() > 0.0);
    assert!(report["se"]["block_hessian"]["phi"][0].as_f64().unwrap() > 0.0);
    assert!(report["se"]["robust"]["vphi"][0].as_f64().unwrap() > 0.0);
    assert_eq!(report["meta"]["seed"], 1);
    assert!(report["meta"]["command"].as_str().unwrap().starts_with("mar fit"));
}

#[test]
fn classic_is_null_for_infinite_variance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("heavy.csv").to_str().unwrap().to_string();
    let out = mar(&["simulate", "--t", "400", "--phi", "0.5", "--vphi", "0.3", "--nu", "1.3", "--seed", "2", "-o", &path]);
    assert_eq!(code(&out), 0);
    let out = mar(&["fit", &path, "--r", "1", "--s", "1", "--center", "median"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["se"]["classic"].is_null());
    let reasons = report["diagnostics"]["unavailable"].as_array().unwrap();
    assert!(reasons.iter().any(|u| u["method"] == "classic" && u["reason"] == "nu<=2"));

    let out = mar(&["fit", &path, "--r", "1", "--s", "1", "--format", "table"]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.lines().any(|l| l.starts_with("phi_1") && l.contains(" / ")), "{table}");
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = mar(&["simulate", "--t", "200", "--phi", "0.5", "--vphi", "0.2", "--nu", "2", "--seed", "42"]);
    let b = mar(&["simulate", "--t", "200", "--phi", "0.5", "--vphi", "0.2", "--nu", "2", "--seed", "42"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);

    let cal = ["calibrate-k", "--nu", "1.5", "--t", "100", "--n", "2000", "--seed", "42"];
    let a = mar(&cal);
    let b = mar(&cal);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);

    let path = simulate(dir.path(), "y.csv", &["--seed", "9"]);
    let a = mar(&["fit", &path, "--seed", "42"]);
    let b = mar(&["fit", &path, "--seed", "42", "--threads", "2"]);
    let strip = |o: &Output| {
        let mut v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        v["meta"]["command"] = serde_json::Value::Null;
        v
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn calibration_output_layout() {
    let out = mar(&["calibrate-k", "--gaussian", "--t", "200", "--n", "2000", "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines[0], "nu,T,N,bandwidth,kstar,trimmed_fraction");
    assert!(lines[1].starts_with("inf,200,2000,"));
    assert_eq!(lines[2], "x,density");
    assert_eq!(lines.len(), 3 + 512);
}

#[test]
fn erf_and_sd_growth_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("erf.json");
    fs::write(
        &cfg,
        r#"{"dgp": {"phi": [0.5], "vphi": [0.3], "nu": 1.8, "eta": 1.0, "burn": 200},
            "t_grid": [100], "n": 100, "seed": 4, "kstar": {"kind": "reference"}}"#,
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let out = mar(&["erf", "--config", cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("T,method,erf_phi,erf_vphi,n_used,n_failed"));
    assert!(text.contains("100,classic,/,/,0,0"));
    assert!(text.lines().any(|l| l.starts_with("100,robust,")));

    let out = mar(&["sd-growth", "--config", cfg, "--n", "20", "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rows"][0]["t"], 100);
    assert!(v["rows"][0]["median"].as_f64().unwrap() > 0.0);
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&mar(&["simulate", "--phi", "0.5", "--nu", "3"])), 1);
    assert_eq!(code(&mar(&["fit"])), 1);
    assert_eq!(code(&mar(&["nonsense"])), 1);
    assert_eq!(code(&mar(&["fit", "x.csv", "--criterion", "hqc"])), 1);
    assert_eq!(code(&mar(&["simulate", "--t", "50", "--phi", "1.5", "--nu", "3"])), 1);
    assert_eq!(code(&mar(&["--version"])), 0);
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = mar(&["fit", empty.to_str().unwrap()]);
    assert_eq!(code(&out), 2);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "y\n1.0\n2.0\noops\n").unwrap();
    let out = mar(&["fit", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let msg = String::from_utf8(out.stderr).unwrap();
    assert!(msg.contains("line 4") && msg.contains("oops"), "{msg}");

    let out = mar(&["fit", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn numerical_failures_exit_with_three() {
    // A constant series has no scale: the AR regressions degenerate.
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.csv");
    fs::write(&flat, "5\n".repeat(50)).unwrap();
    let out = mar(&["fit", flat.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

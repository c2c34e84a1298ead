use std::ffi::OsString;
use std::process::Command;

use freechain::cli::run_to_string;

fn args(line: &str) -> Vec<OsString> {
    std::iter::once("freechain")
        .chain(line.split_whitespace())
        .map(OsString::from)
        .collect()
}

fn run(line: &str) -> String {
    match run_to_string(args(line), &[]) {
        Ok(r) => r.text,
        Err(f) => panic!("`{line}` failed with {}: {}", f.code, f.message),
    }
}

fn exit_code(line: &str) -> i32 {
    run_to_string(args(line), &[]).err().map_or(0, |f| f.code)
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
        .to_string()
}

#[test]
fn spectrum_table() {
    let out = run("spectrum --model ising --n 8 --lambda 1 --boundary periodic --parity even");
    let lines = data_lines(&out);
    assert_eq!(lines[0], "k,phi,lambda_k");
    assert_eq!(lines.len(), 9);
    let lambdas: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    // λ = 1: Λ(φ) = 4 sin(φ/2) at φ = π/8 is the softest mode
    let min = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!((min - 4.0 * (std::f64::consts::PI / 16.0).sin()).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    assert_eq!(exit_code("spectrum --boundary open --lambda 0"), 2);
    assert_eq!(exit_code("spectrum --boundary open --lambda 0 --matrix"), 0);
    assert_eq!(exit_code("spectrum --no-such-flag"), 2);
    assert_eq!(exit_code("schmidt --n 7"), 2);
    assert_eq!(exit_code("gns --preset m2-lambda --lambda 1.5"), 2);
    assert_eq!(exit_code("entropy-scan --l 0:4:1"), 2);
    assert_eq!(exit_code("--threads 0 bell"), 2);
}

#[test]
fn binary_reports_exit_status() {
    let bin = env!("CARGO_BIN_EXE_freechain");
    let ok = Command::new(bin).args(["bell", "--paper-angles"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("violated=true"));

    let bad = Command::new(bin)
        .args(["spectrum", "--boundary", "open", "--lambda", "0"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("--matrix"));

    let missing = Command::new(bin)
        .args(["collapse", "--input", "/nonexistent/sweep.csv"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn output_is_deterministic() {
    for line in [
        "schmidt --n 6,8 --lambda 0.5:1.5:0.25",
        "entropy-scan --preset off-critical --l 1:20:1",
        "bell --paper-angles --chsh-lambda 0.5 --seed 7",
        "gns --preset two-fermion --theta 0.3",
    ] {
        assert_eq!(run(line), run(line), "{line}");
    }
}

#[test]
fn config_file_env_and_flags_layer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# defaults\nn = 6\nlambda=0.5\n").unwrap();
    let base = format!("spectrum --config {}", cfg.display());

    let from_file = run(&base);
    assert!(from_file.contains("# config.n=6\n"));
    assert!(from_file.contains("# config.lambda=0.5\n"));
    assert_eq!(data_lines(&from_file).len(), 7);

    let env = [("FREECHAIN_N".to_string(), "4".to_string())];
    let from_env = run_to_string(args(&base), &env).ok().unwrap().text;
    assert!(from_env.contains("# config.n=4\n"));
    assert!(from_env.contains("# config.lambda=0.5\n"));

    let from_flag = run_to_string(args(&format!("{base} --n 10")), &env).ok().unwrap().text;
    assert!(from_flag.contains("# config.n=10\n"));
    assert_eq!(data_lines(&from_flag).len(), 11);

    std::fs::write(&cfg, "bogus=1\n").unwrap();
    assert_eq!(exit_code(&base), 2);
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gap.csv");
    let bin = env!("CARGO_BIN_EXE_freechain");
    let status = Command::new(bin)
        .args(["schmidt", "--n", "4", "--lambda", "1", "--output"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(data_lines(&text)[0], "N,lambda,schmidt_gap,entropy,ground_energy");
}

#[test]
fn schmidt_then_collapse() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    std::fs::write(&path, run("schmidt --n 8,10,12 --lambda 0.9:1.1:0.02")).unwrap();
    let out = run(&format!("collapse --input {} --lambda-c 1.0", path.display()));
    let json: serde_json::Value = serde_json::from_str(&out).unwrap();
    for key in ["mu1", "mu2", "cost", "nu_est", "beta_est"] {
        assert!(json[key].as_f64().unwrap().is_finite(), "{key}");
    }
    assert!(json["metadata"].is_object());
    assert_eq!(json["config"]["lambda_c"], 1.0);
}

#[test]
fn schmidt_reproduces_n10_curve() {
    let out = run("schmidt --n 10 --lambda 0:2:0.05");
    let rows = data_lines(&out);
    assert_eq!(rows[0], "N,lambda,schmidt_gap,entropy,ground_energy");
    let gaps: Vec<f64> = rows[1..]
        .iter()
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(gaps.len(), 41);
    assert!(gaps[0].abs() < 1e-12);
    assert!(gaps[40] > 0.8);
}

#[test]
fn entropy_scan_presets_and_log2() {
    for preset in ["xx-critical", "ising-critical", "off-critical"] {
        let out = run(&format!("entropy-scan --preset {preset} --l 16:96:16 --fit-c"));
        assert_eq!(data_lines(&out)[0], "lambda,gamma,L,entropy");
        assert!(out.lines().any(|l| l.starts_with("# fit[") && l.contains("].c=")));
    }
    let nats = run("entropy-scan --preset ising-critical --l 8");
    let bits = run("entropy-scan --preset ising-critical --l 8 --log2");
    let last = |t: &str| -> f64 { data_lines(t)[1].rsplit(',').next().unwrap().parse().unwrap() };
    assert!((last(&bits) - last(&nats) / std::f64::consts::LN_2).abs() < 1e-14);
}

#[test]
fn json_format_for_tables() {
    let out = run("spectrum --n 4 --format json");
    let json: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn bell_standard_angles() {
    let out = run("bell --paper-angles");
    assert_eq!(value(&out, "lhs").parse::<f64>().unwrap(), 1.0);
    assert!((value(&out, "rhs").parse::<f64>().unwrap() - 0.75).abs() < 1e-15);
    assert_eq!(value(&out, "violated"), "true");
}

#[test]
fn gns_presets() {
    let m2 = run("gns --preset m2-lambda --lambda 0.3");
    assert_eq!(value(&m2, "hilbert_dim"), "4");
    let s: f64 = value(&m2, "entropy").parse().unwrap();
    assert!((s - freechain::binary_entropy(0.3)).abs() < 1e-12);

    let tf = run("gns --preset two-fermion --theta 0");
    assert_eq!(value(&tf, "entropy").parse::<f64>().unwrap().abs(), 0.0);
    assert_eq!(value(&tf, "irreducible"), "true");
}

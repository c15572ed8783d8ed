use std::fs;
use std::path::Path;
use std::process::Command;

use delay_blowup_cli::run;

fn go(dir: &Path, args: &[&str]) -> i32 {
    let out = dir.display().to_string();
    let mut full = vec!["delay-blowup"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out-dir", &out]);
    run(full)
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_delay-blowup");
    let status = |args: &[&str]| {
        Command::new(bin)
            .args(args)
            .arg("--out-dir")
            .arg(dir.path())
            .output()
            .unwrap()
            .status
            .code()
    };
    assert_eq!(status(&["verify-theorem1", "--delta", "100", "--tau", "1"]), Some(0));
    assert_eq!(status(&["verify-theorem1", "--delta", "0.001", "--tau", "1"]), Some(1));
    assert_eq!(status(&["periodic", "--tau", "0"]), Some(2));
    assert_eq!(status(&["no-such-command"]), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(go(d, &["periodic", "--tau", "0"]), 2);
    assert_eq!(go(d, &["periodic", "--tau", "-1"]), 2);
    assert_eq!(go(d, &["threshold", "--lo", "3", "--hi", "2"]), 2);
    assert_eq!(go(d, &["figure"]), 2);
    assert_eq!(go(d, &["simulate", "--phi-tilde", "nope"]), 2);
    assert_eq!(go(d, &["simulate", "--rel-tol", "0"]), 2);

    let conf = d.join("bad.conf");
    fs::write(&conf, "bogus_key = 1\n").unwrap();
    assert_eq!(go(d, &["simulate", "--config", conf.to_str().unwrap()]), 2);
    fs::write(&conf, "command = periodic\n").unwrap();
    assert_eq!(go(d, &["simulate", "--config", conf.to_str().unwrap()]), 2);
    assert_eq!(go(d, &["simulate", "--config", "/nonexistent/x.conf"]), 2);
}

#[test]
fn theorem_check_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(go(dir.path(), &["verify-theorem1", "--delta", "0.001", "--tau", "1"]), 1);
    let v: serde_json::Value = serde_json::from_str(&read(dir.path(), "verify_theorem1.json")).unwrap();
    assert!(v["report"].is_object());
    assert_eq!(v["config"]["delta"], "0.001");
}

#[test]
fn flags_override_config_file_which_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let conf = d.join("in.conf");
    fs::write(&conf, "# comment\ntau = 2\nn_max = 1\nrel_tol = 1e-10\n").unwrap();
    assert_eq!(go(d, &["periodic", "--config", conf.to_str().unwrap(), "--n-max", "2"]), 0);
    let resolved = read(d, "periodic.resolved.conf");
    assert!(resolved.starts_with("command = periodic\n"));
    assert!(resolved.contains("\ntau = 2\n"));
    assert!(resolved.contains("\nn_max = 2\n"));
    assert!(resolved.contains("\nrel_tol = 1e-10\n"));
    assert!(resolved.contains("\nabs_tol = 1e-12\n"));
}

#[test]
fn rerun_from_resolved_config_is_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(go(a.path(), &["figure", "tau1", "--workers", "3"]), 0);
    let conf = a.path().join("figure_tau1.resolved.conf");
    assert_eq!(
        go(b.path(), &["figure", "--config", conf.to_str().unwrap(), "--workers", "1"]),
        0
    );
    for name in ["figure_tau1.csv", "figure_tau1_summary.csv"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
}

#[test]
fn csv_headers_and_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(go(d, &["simulate", "--tau", "0", "--r0", "0.1"]), 0);
    let csv = read(d, "simulate_trajectory.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x,y,r,theta"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 5);
    for cell in row {
        let mantissa = cell.split('e').next().unwrap();
        assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{cell}");
        cell.parse::<f64>().unwrap();
    }
    for f in ["simulate_r.svg", "simulate_orbit.svg", "simulate_report.json"] {
        assert!(d.join(f).exists(), "{f}");
    }
}

#[test]
fn format_flag_limits_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(go(d, &["periodic", "--tau", "1", "--format", "json"]), 0);
    assert!(d.join("periodic.json").exists());
    assert!(!d.join("periodic_equilibria.csv").exists());
    assert!(!d.join("periodic.svg").exists());
}

#[test]
fn periodic_and_threshold_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(go(d, &["periodic", "--tau", "0.2", "--n-max", "1", "--seed-run"]), 0);
    let eq = read(d, "periodic_equilibria.csv");
    assert!(eq.starts_with("n,tau,omega,r,r4tau,res_cos,res_sin,res_relation\n"));
    assert!(d.join("periodic_seeded.csv").exists());

    assert_eq!(go(d, &["threshold", "--tau", "0.2", "--lo", "2", "--hi", "3"]), 0);
    let v: serde_json::Value = serde_json::from_str(&read(d, "threshold.json")).unwrap();
    let lo = v["report"]["result"]["lower"].as_f64().unwrap();
    let hi = v["report"]["result"]["upper"].as_f64().unwrap();
    assert!(2.0 <= lo && lo < hi && hi <= 3.0 && hi - lo < 0.01);
    assert_eq!(v["report"]["monotone"], true);
    let probes = read(d, "threshold_probes.csv");
    let deltas: Vec<f64> = probes
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(deltas.windows(2).all(|w| w[0] <= w[1]));
}

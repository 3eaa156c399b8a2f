use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn stabiliser(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stabiliser"))
        .current_dir(dir)
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Rows of a CSV file as (header, values).
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (header, rows) = read_csv(path);
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn generate_lean(dir: &Path) {
    let out = stabiliser(dir, &["generate", "lean", "--amplitude", "0.58", "--duration", "2.0"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

fn generate_fall(dir: &Path) {
    let out = stabiliser(dir, &["generate", "fall", "--dip", "1.0", "--onset", "16.0"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn generate_lean_reports_payout_excursion() {
    let dir = TempDir::new().unwrap();
    generate_lean(dir.path());
    let t = column(&dir.path().join("lean.csv"), "t");
    assert_eq!(t[0], 0.0);
    assert!((t[1] - 0.004).abs() < 1e-12);
    let out = stabiliser(dir.path(), &["generate", "lean", "--amplitude", "0.58", "--duration", "2.0"]);
    assert!(stdout(&out).contains("left: peak payout 58.00 cm"), "{}", stdout(&out));
}

#[test]
fn generate_fall_places_dip_after_onset() {
    let dir = TempDir::new().unwrap();
    generate_fall(dir.path());
    let path = dir.path().join("fall.csv");
    let t = column(&path, "t");
    let x = column(&path, "x");
    let y = column(&path, "y");
    let z = column(&path, "z");
    let speed: Vec<f64> = (1..t.len())
        .map(|i| {
            let d = [x[i] - x[i - 1], y[i] - y[i - 1], z[i] - z[i - 1]];
            (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() / (t[i] - t[i - 1])
        })
        .collect();
    let peak = (0..speed.len()).max_by(|&a, &b| speed[a].total_cmp(&speed[b])).unwrap();
    let t_peak = 0.5 * (t[peak] + t[peak + 1]);
    assert!((t_peak - 16.125).abs() < 0.01, "peak speed at {t_peak}");
    assert!((speed[peak] - 1.0).abs() < 0.01);
}

#[test]
fn missing_required_flag_exits_2_with_usage() {
    let dir = TempDir::new().unwrap();
    let out = stabiliser(dir.path(), &["generate", "lean", "--amplitude", "0.58"]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--duration") && err.contains("Usage"), "{err}");
}

#[test]
fn simulate_lean_never_locks() {
    let dir = TempDir::new().unwrap();
    generate_lean(dir.path());
    let out = stabiliser(dir.path(), &["simulate", "--input", "lean.csv"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("left: 0 LOCK, 0 RESET"), "{}", stdout(&out));

    let trace = dir.path().join("trace_left.csv");
    let length = column(&trace, "length_m");
    let payout: Vec<f64> = length.iter().map(|l| l - length[0]).collect();
    // Mid-hold, after the smoothing window has cleared the stroke.
    let hold = (2.1 * 250.0) as usize..(2.45 * 250.0) as usize;
    for i in hold {
        assert!((payout[i] - 0.58).abs() < 1e-6, "row {i}: {}", payout[i]);
    }
    // The cubic smoother overshoots slightly where the stroke meets the hold.
    let max = payout.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!((max - 0.58).abs() < 1e-5, "max payout {max}");
    let (_, events) = read_csv(&dir.path().join("events_left.csv"));
    assert!(events.is_empty());
}

#[test]
fn simulate_fall_locks_then_resets() {
    let dir = TempDir::new().unwrap();
    generate_fall(dir.path());
    let out = stabiliser(dir.path(), &["simulate", "--input", "fall.csv"]);
    assert_eq!(code(&out), 0);
    let (header, events) = read_csv(&dir.path().join("events_left.csv"));
    assert_eq!(header, ["t", "event"]);
    let kinds: Vec<&str> = events.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(kinds, ["LOCK", "RESET"]);
    let t_lock: f64 = events[0][0].parse().unwrap();
    assert!(t_lock > 16.0 && t_lock < 16.25, "lock at {t_lock}");
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        generate_fall(dir.path());
        assert_eq!(code(&stabiliser(dir.path(), &["simulate", "--input", "fall.csv"])), 0);
    }
    for name in ["trace_left.csv", "events_left.csv", "trace_right.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
}

#[test]
fn missing_input_exits_3() {
    let dir = TempDir::new().unwrap();
    let out = stabiliser(dir.path(), &["simulate", "--input", "nope.csv"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn non_monotonic_trajectory_exits_4() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("t,x,y,z\n");
    for t in [0.0, 0.004, 0.008, 0.006, 0.012] {
        text.push_str(&format!("{t},0.05,0,0.95\n"));
    }
    fs::write(dir.path().join("bad.csv"), text).unwrap();
    let out = stabiliser(dir.path(), &["simulate", "--input", "bad.csv"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn invalid_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, "[sg]\nwindow = 30\norder = 3\n").unwrap();
    let out = stabiliser(dir.path(), &["--config", config.to_str().unwrap(), "tune", "--v-star", "0.9"]);
    assert_eq!(code(&out), 2);
    fs::write(&config, "unknown_key = 1\n").unwrap();
    let out = stabiliser(dir.path(), &["--config", config.to_str().unwrap(), "tune", "--v-star", "0.9"]);
    assert_eq!(code(&out), 2);
}

fn tuned_f_retain(dir: &Path) -> f64 {
    let text = fs::read_to_string(dir.join("tuned.toml")).unwrap();
    let line = text.lines().find(|l| l.starts_with("f_retain_n")).unwrap();
    line.split('=').nth(1).unwrap().trim().parse().unwrap()
}

#[test]
fn tune_solves_retention_force() {
    let dir = TempDir::new().unwrap();
    let out = stabiliser(dir.path(), &["tune", "--v-star", "0.9"]);
    assert_eq!(code(&out), 0);
    assert!((tuned_f_retain(dir.path()) - 0.72).abs() < 1e-12);
    assert!(stdout(&out).contains("f_retain = 0.720000 N"), "{}", stdout(&out));

    let out = stabiliser(dir.path(), &["tune", "--v-star", "0.628"]);
    assert_eq!(code(&out), 0);
    // m ω² r with ω = 0.628 / 0.015 rad/s, m = 0.01 kg, r = 0.02 m.
    let omega: f64 = 0.628 / 0.015;
    assert!((tuned_f_retain(dir.path()) - 0.01 * omega * omega * 0.02).abs() < 1e-12);
}

#[test]
fn tune_rejects_infeasible_target() {
    let dir = TempDir::new().unwrap();
    let out = stabiliser(dir.path(), &["tune", "--v-star", "-1"]);
    assert_eq!(code(&out), 5);
    assert!(!dir.path().join("tuned.toml").exists());
}

#[test]
fn sweep_writes_one_row_per_grid_point() {
    let dir = TempDir::new().unwrap();
    let out = stabiliser(dir.path(), &["sweep", "--v-star", "0.6,0.9"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let path = dir.path().join("sweep.csv");
    let (header, rows) = read_csv(&path);
    assert_eq!(header, ["grid_point", "fp_rate", "miss_rate", "median_latency_s", "v_star_mps"]);
    assert_eq!(rows.len(), 2);
    let v_star = column(&path, "v_star_mps");
    assert!((v_star[0] - 0.6).abs() < 1e-9 && (v_star[1] - 0.9).abs() < 1e-9);
}

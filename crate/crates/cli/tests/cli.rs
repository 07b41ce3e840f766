use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dicke_core::classify::RegimeKind;
use dicke_core::config::{RunConfig, ECHO_FILE};
use dicke_core::io;

fn dicke(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dicke")).args(args).output().expect("spawn dicke")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn echo(dir: &Path) -> RunConfig {
    RunConfig::from_text(&fs::read_to_string(dir.join(ECHO_FILE)).unwrap()).unwrap()
}

const SHORT: [&str; 4] = ["--t-total", "3000", "--t-transient", "1000"];

#[test]
fn fixed_points_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = dicke(&["fixed-points", "--g", "0.26", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("g_t1=0.250000"), "{s}");
    assert!(s.contains("g_u=0.707107"), "{s}");
    assert!(s.contains("g_t2=0.2797"), "{s}");
    let fps = io::read_fixed_points(fs::File::open(dir.path().join("fixed_points.csv")).unwrap()).unwrap();
    assert_eq!(fps.len(), 3);
    assert!(fps.iter().filter(|f| f.kind.label().starts_with("SP")).all(|f| f.stable));
}

#[test]
fn fixed_points_without_decay_have_no_sp() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = dicke(&["fixed-points", "--g", "0.3", "--gamma-down", "0", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let fps = io::read_fixed_points(fs::File::open(dir.path().join("fixed_points.csv")).unwrap()).unwrap();
    assert_eq!(fps.len(), 1);
    assert_eq!(fps[0].kind.label(), "NP");
}

#[test]
fn simulate_converges_to_np_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["simulate", "--g", "0.2", "--omega-q", "0.1", "--out", out];
    args.extend(SHORT);
    let o = dicke(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("diverged=false"));

    let path = dir.path().join("trajectory.csv");
    let text = fs::read(&path).unwrap();
    let rows = io::read_trajectory(&text[..]).unwrap();
    let (_, last) = rows.last().unwrap();
    assert!(last.n < 1e-10 && (last.sz + 1.0).abs() < 1e-6, "{last:?}");
    let mut out = io::CsvOut::new(Vec::new(), &io::TRAJECTORY_HEADER).unwrap();
    for (t, s) in &rows {
        out.row(&io::trajectory_row(*t, s)).unwrap();
    }
    assert_eq!(out.into_inner().unwrap(), text);

    let c = echo(dir.path());
    assert_eq!(c.g, 0.2);
    assert_eq!(c.t_total, 3000.0);
}

#[test]
fn simulate_reports_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = dicke(&["simulate", "--g", "0.3", "--ic-scale", "1e13", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("diverged=true"));
}

#[test]
fn missing_coupling_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = dicke(&["simulate", "--omega-q", "0.1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(dicke(&["simulate", "--g", "abc"]).status.code(), Some(2));
    assert_eq!(dicke(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(dicke(&[]).status.code(), Some(2));
}

#[test]
fn invalid_values_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(dicke(&["simulate", "--g", "0.3", "--kappa=-1", "--out", out]).status.code(), Some(2));
    assert_eq!(dicke(&["simulate", "--g", "0.3", "--t-transient", "9e9", "--out", out]).status.code(), Some(2));
}

#[test]
fn unwritable_output_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = dicke(&["fixed-points", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# test\ng = 0.21\nomega-q = 0.12\nt_total = 2500\nt_transient = 500\n").unwrap();
    let out = dir.path().join("out");
    let o = dicke(&["simulate", "--config", cfg.to_str().unwrap(), "--omega-q", "0.1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let c = echo(&out);
    assert_eq!(c.g, 0.21);
    assert_eq!(c.omega_q, 0.1);
    assert_eq!(c.t_total, 2500.0);

    let missing = dicke(&["simulate", "--config", dir.path().join("none.cfg").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(3));
    fs::write(&cfg, "g = 0.2\nbogus = 1\n").unwrap();
    let bad = dicke(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn lyapunov_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["lyapunov", "--g", "0.2", "--omega-q", "0.1", "--raw", "--out", out];
    args.extend(SHORT);
    let o = dicke(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let le: f64 = stdout(&o).split_whitespace().find_map(|w| w.strip_prefix("le=")).unwrap().parse().unwrap();
    assert!(le < -1e-3, "{le}");
    let text = fs::read(dir.path().join("trace.csv")).unwrap();
    let rows = io::read_trace(&text[..]).unwrap();
    assert!(rows.len() > 1000);
    assert!(rows.iter().filter(|r| r.finite_time_le.is_some()).count() >= 2);
    let mut again = Vec::new();
    io::write_trace(&mut again, &rows).unwrap();
    assert_eq!(again, text);
    assert!(dir.path().join("raw_growth.csv").exists());
}

#[test]
fn psd_writes_spectrum_and_peaks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = dicke(&["psd", "--g", "0.3", "--omega-q", "0.1", "--t-total", "5000", "--t-transient", "1000", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let spec = io::read_pairs(fs::File::open(dir.path().join("spectrum.csv")).unwrap(), io::SPECTRUM_HEADER).unwrap();
    assert!(spec.len() > 2000);
    assert!(spec.windows(2).all(|w| w[1].0 > w[0].0));
    let peaks = io::read_pairs(fs::File::open(dir.path().join("peaks.csv")).unwrap(), io::PEAKS_HEADER).unwrap();
    assert!(!peaks.is_empty());
    assert!(stdout(&o).contains("comb="));
}

#[test]
fn phase_resumes_by_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = [
        "phase", "--wq-from", "0.1", "--wq-to", "0.12", "--wq-step", "0.01", "--g-from", "0.2", "--g-to", "0.22",
        "--g-step", "0.01", "--t-total", "2000", "--t-transient", "500", "--out", out,
    ];
    let o = dicke(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let path = dir.path().join("phase.csv");
    let full = fs::read_to_string(&path).unwrap();
    let rows = io::read_phase(full.as_bytes()).unwrap();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r.label == RegimeKind::Np));

    // one complete row, part of the next, and a line cut mid-write
    let mut torn: String = full.lines().take(6).map(|l| format!("{l}\n")).collect();
    torn.push_str("0.11,0.2");
    fs::write(&path, torn).unwrap();
    let mut resumed = args.to_vec();
    resumed.push("--resume");
    let o = dicke(&resumed);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("resuming after 1 complete rows"));
    assert_eq!(fs::read_to_string(&path).unwrap(), full);
}

#[test]
fn bifurcation_writes_amplitudes_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = dicke(&[
        "bifurcation", "--omega-q", "0.1", "--g-from", "0.41", "--g-to", "0.42", "--steps", "1", "--continuation",
        "--t-total", "20000", "--t-transient", "10000", "--out", out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let amps = io::read_pairs(fs::File::open(dir.path().join("bifurcation.csv")).unwrap(), io::AMPLITUDE_HEADER).unwrap();
    assert!(amps.iter().any(|&(g, _)| g == 0.41) && amps.iter().any(|&(g, _)| g == 0.42));
    let labels = io::read_phase(fs::File::open(dir.path().join("bifurcation_labels.csv")).unwrap()).unwrap();
    assert_eq!(labels.len(), 2);
    assert!(echo(dir.path()).continuation);
}

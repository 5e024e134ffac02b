use std::path::Path;
use std::process::{Command, Output};

use orbit_krein::io::{document, parse_document};
use orbit_krein::monodromy::MonodromyReport;
use orbit_krein::shooting::{Certificate, Orbit};
use orbit_krein::systems::hill_system;
use orbit_krein::State4;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orbit-krein")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn hill_shot(dir: &Path) -> Output {
    bin(&[
        "shoot",
        "--system",
        "hill",
        "--energy",
        "-2.5",
        "--bracket",
        "0.05,0.6",
        "--branch",
        "retro",
        "--out-dir",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn classify_examples() {
    let o = bin(&["classify", "--matrix", "3,2,4,3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "positive-hyperbolic, B-sign +");
    let o = bin(&["classify", "--matrix", "0,1,-1,0"]);
    assert_eq!(stdout(&o).trim(), "elliptic, B-sign +");
    let o = bin(&["classify", "--matrix", "1,1,1,1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("determinant"));
    assert_eq!(code(&bin(&["classify", "--matrix", "1,2,3"])), 1);
    assert_eq!(code(&bin(&["classify"])), 1);
}

#[test]
fn hill_shot_writes_equal_signs() {
    let dir = tempfile::tempdir().unwrap();
    let o = hill_shot(dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["orbit.json", "report.json", "trajectory.csv", "orbit.svg", "meta.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let orbit: Orbit =
        parse_document(&std::fs::read_to_string(dir.path().join("orbit.json")).unwrap(), "orbit").unwrap();
    assert_eq!(orbit.certificate.label(), "doubly_symmetric");
    let report: MonodromyReport =
        parse_document(&std::fs::read_to_string(dir.path().join("report.json")).unwrap(), "monodromy-report").unwrap();
    assert!(report.b_sign_0.is_some());
    assert_eq!(report.b_sign_0, report.b_sign_half);
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,q1,q2,p1,p2"));
    assert_eq!(csv.lines().count(), 257);
}

#[test]
fn data_files_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(code(&hill_shot(a.path())), 0);
    assert_eq!(code(&hill_shot(b.path())), 0);
    for f in ["orbit.json", "report.json", "trajectory.csv", "orbit.svg"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn langmuir_shots() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    // the start point sits near q2 = 0.469 at this energy, left of the bracket
    let o = bin(&["shoot", "--system", "langmuir", "--energy", "-3", "--bracket", "0.5,2.0", "--out-dir", d]);
    assert_eq!(code(&o), 3);
    let o = bin(&["shoot", "--system", "langmuir", "--energy", "-3", "--out-dir", d]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("orbit.json").exists());
    assert!(stdout(&o).contains("B-signs + / +"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&bin(&["shoot", "--system", "hill"])), 1);
    assert_eq!(code(&bin(&["shoot", "--system", "nowhere", "--energy", "-2"])), 1);
    assert_eq!(code(&bin(&["shoot", "--energy", "-2.5", "--samples", "10"])), 1);
    assert_eq!(code(&bin(&["shoot", "--energy", "-2.5", "--format", "pdf"])), 1);
    assert_eq!(code(&bin(&["bogus"])), 1);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("out");
    std::fs::write(
        &cfg,
        format!("system = \"hill\"\nenergy = -9.0\nbracket = [0.05, 0.6]\nbranch = \"retro\"\nout-dir = {:?}\nformat = [\"json\"]\n", out),
    )
    .unwrap();
    // the flag energy wins over the file
    let o = bin(&["shoot", "--config", cfg.to_str().unwrap(), "--energy", "-2.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let orbit: Orbit = parse_document(&std::fs::read_to_string(out.join("orbit.json")).unwrap(), "orbit").unwrap();
    assert_eq!(orbit.energy, -2.5);
    assert!(!out.join("trajectory.csv").exists());

    std::fs::write(&cfg, "energy = -2.5\nenergi = 1\n").unwrap();
    assert_eq!(code(&bin(&["shoot", "--config", cfg.to_str().unwrap()])), 1);
}

#[test]
fn hill_family_has_no_negative_hyperbolic_member() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = bin(&["family", "--system", "hill", "--from", "-4.0", "--to", "-2.3", "--step", "0.05", "--out-dir", d]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("family.csv")).unwrap();
    assert_eq!(csv.lines().count(), 36);
    assert!(csv.lines().skip(1).all(|l| !l.ends_with("negative-hyperbolic")));
    let json = std::fs::read_to_string(dir.path().join("family.json")).unwrap();
    assert!(json.contains("\"no_negative_hyperbolic_doubly_symmetric\": true"));
    assert!(json.contains("\"stable_orbit_flag\": true"));
}

#[test]
fn single_energy_family_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = bin(&["family", "--system", "hill", "--from", "-2.5", "--bracket", "0.05,0.6", "--out-dir", d]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("family.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    // one elliptic member: chi = -1
    assert!(stdout(&o).contains("chi_sft -1, stable orbit flag true"));
}

#[test]
fn stalled_family_keeps_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    // the quarter period grows past the time limit near energy -1
    let o = bin(&[
        "family",
        "--system",
        "langmuir",
        "--from",
        "-3",
        "--to",
        "-0.5",
        "--step",
        "0.25",
        "--t-max",
        "1.0",
        "--out-dir",
        d,
    ]);
    assert_eq!(code(&o), 4);
    let csv = std::fs::read_to_string(dir.path().join("family.csv")).unwrap();
    assert!(csv.lines().count() > 2);
    let json = std::fs::read_to_string(dir.path().join("family.json")).unwrap();
    assert!(json.contains("continuation stalled"));
}

#[test]
fn monodromy_and_euler_on_stored_files() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hill_shot(dir.path())), 0);
    let orbit = dir.path().join("orbit.json");
    let report = dir.path().join("again.json");
    let o = bin(&["monodromy", "--orbit", orbit.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(&report).unwrap(), std::fs::read(dir.path().join("report.json")).unwrap());
    let r = report.to_str().unwrap();
    let o = bin(&["euler", r]);
    assert_eq!(stdout(&o), "chi_sft -1\nstable orbit flag true\n");
    let twice = format!("{r}:2");
    assert_eq!(stdout(&bin(&["euler", r, &twice])), "chi_sft -2\nstable orbit flag true\n");
    let zero = format!("{r}:0");
    assert_eq!(code(&bin(&["euler", &zero])), 1);
    assert_eq!(code(&bin(&["euler", orbit.to_str().unwrap()])), 1);
}

#[test]
fn lc_lift_of_hill_orbit() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hill_shot(dir.path())), 0);
    let out = dir.path().join("lc");
    let o = bin(&[
        "lc-lift",
        "--orbit",
        dir.path().join("orbit.json").to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("winding -1"));
    let csv = std::fs::read_to_string(out.join("lc_curve.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,z_re,z_im,w_re,w_im"));
    assert_eq!(csv.lines().count(), 513);
    assert!(out.join("lc_curve.json").exists());
}

#[test]
fn lc_lift_rejects_even_winding_and_corrupt_files() {
    let dir = tempfile::tempdir().unwrap();
    // q(t) = 0.5 e^{4 pi i t / T}: winding 2, conjugation symmetric
    let n = 64;
    let states: Vec<State4> = (0..n)
        .map(|k| {
            let th = 4.0 * std::f64::consts::PI * k as f64 / n as f64;
            State4::new(0.5 * th.cos(), 0.5 * th.sin(), -th.sin(), th.cos())
        })
        .collect();
    let orbit = Orbit::from_samples(&hill_system(), 1.0, states, Certificate::Symmetric { inv: 0 }).unwrap();
    let path = dir.path().join("even.json");
    std::fs::write(&path, document("orbit", &orbit)).unwrap();
    let o = bin(&["lc-lift", "--orbit", path.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 5);
    assert!(String::from_utf8_lossy(&o.stderr).contains("even"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"schema\": \"orbit-krein/1\", \"kind\": \"orbit\"").unwrap();
    assert_eq!(code(&bin(&["lc-lift", "--orbit", bad.to_str().unwrap()])), 1);
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&bin(&["lc-lift", "--orbit", missing.to_str().unwrap()])), 1);
}

#[test]
fn selfcheck_passes() {
    let o = bin(&["selfcheck"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.lines().all(|l| l.starts_with("PASS")), "{out}");
    assert!(out.lines().count() >= 15);
}

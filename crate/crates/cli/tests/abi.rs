//! The command-line contract: flags, config files, exit codes, report schema and replay.

use std::path::Path;
use std::process::Command;

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_planar-spectra");

/// `(exit code, stdout, stderr)` of one invocation in `dir`.
fn run(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).current_dir(dir).args(args).output().expect("binary runs");
    (
        out.status.code().expect("exited normally"),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn values(report: &Value) -> Vec<f64> {
    report["body"]["eigenvalues"].as_array().unwrap().iter().map(|e| e["value"].as_f64().unwrap()).collect()
}

#[test]
fn disc_dirichlet_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(
        dir.path(),
        &["spectrum", "--domain", "disc", "--radius", "1", "--problem", "dirichlet", "--level", "3", "--k", "3"],
    );
    assert_eq!(code, 0, "{err}");
    let r = read_json(&dir.path().join("spectrum.json"));
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["config"]["level"], "3");
    assert_eq!(r["footer"]["pass"], true);
    assert!(r["footer"].get("timing").is_none());
    let v = values(&r);
    // j_{0,1}^2 and j_{1,1}^2 (twice).
    assert!((v[0] / 5.783_185_962_946_784 - 1.0).abs() < 5e-3, "{v:?}");
    assert!((v[1] / 14.681_970_642_123_893 - 1.0).abs() < 5e-3, "{v:?}");
    assert!((v[2] / v[1] - 1.0).abs() < 1e-8, "{v:?}");
}

#[test]
fn unit_square_first_eigenvalue() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) =
        run(dir.path(), &["spectrum", "--domain", "rectangle", "--w", "1", "--h", "1", "--problem", "dirichlet", "--level", "3"]);
    assert_eq!(code, 0, "{err}");
    let v = values(&read_json(&dir.path().join("spectrum.json")));
    let two_pi_sq = 2.0 * std::f64::consts::PI.powi(2);
    assert!((v[0] / two_pi_sq - 1.0).abs() < 1e-3, "{v:?}");
}

#[test]
fn malformed_and_unknown_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(dir.path(), &["spectrum", "--level", "four"]);
    assert_eq!(code, 2);
    assert!(err.contains("--level"), "{err}");
    let (code, _, err) = run(dir.path(), &["spectrum", "--levle", "3"]);
    assert_eq!(code, 2);
    assert!(err.contains("--levle"), "{err}");
    let (code, _, err) = run(dir.path(), &["verify", "--check", "nonsense"]);
    assert_eq!(code, 2);
    assert!(err.contains("--check"), "{err}");
    let (code, _, err) = run(dir.path(), &["spectrum", "--domain", "disc", "--radius", "-1"]);
    assert_eq!(code, 2, "{err}");
    assert!(!dir.path().join("spectrum.json").exists());
}

#[test]
fn nonpositive_star_radius_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(dir.path(), &["optimize", "--start", "a2=1.5", "--level", "2"]);
    assert_eq!(code, 2);
    assert!(err.contains("--start"), "{err}");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.cfg"),
        "# coarse run\ndomain = ellipse\na = 2\nb = 1\nlevel = 2\nproblem = buckling\noutput = out/r.json\n",
    )
    .unwrap();
    let (code, _, err) = run(dir.path(), &["spectrum", "--config", "run.cfg", "--level", "3"]);
    assert_eq!(code, 0, "{err}");
    let r = read_json(&dir.path().join("out/r.json"));
    assert_eq!(r["config"]["level"], "3");
    assert_eq!(r["config"]["problem"], "buckling");
    assert_eq!(r["config"]["semi_a"], "2");
    assert_eq!(r["body"]["level"], 3);
}

#[test]
fn replay_is_bitwise_and_detects_edits() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) =
        run(dir.path(), &["spectrum", "--domain", "star", "--cos", "0,0.15", "--problem", "stokes", "--level", "2"]);
    assert_eq!(code, 0, "{err}");
    let (code, out, err) = run(dir.path(), &["replay", "spectrum.json", "--output", "again.json"]);
    assert_eq!(code, 0, "{out}{err}");
    assert_eq!(
        std::fs::read(dir.path().join("spectrum.json")).unwrap(),
        std::fs::read(dir.path().join("again.json")).unwrap()
    );
    let text = std::fs::read_to_string(dir.path().join("spectrum.json")).unwrap();
    let v = values(&read_json(&dir.path().join("spectrum.json")))[0];
    std::fs::write(dir.path().join("edited.json"), text.replacen(&v.to_string(), "1.5", 1)).unwrap();
    let (code, _, _) = run(dir.path(), &["replay", "edited.json"]);
    assert_eq!(code, 1);
}

#[test]
fn verify_single_check_and_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) =
        run(dir.path(), &["verify", "--check", "schiffer", "--domain", "disc", "--expect", "disc", "--level", "3"]);
    assert_eq!(code, 0, "{out}{err}");
    let r = read_json(&dir.path().join("verify.json"));
    let checks = r["body"]["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 1);
    assert_eq!(checks[0]["status"], "done");
    assert_eq!(checks[0]["report"]["check_name"], "schiffer");
    // Claiming the disc is not a disc must fail the check, with exit status 1.
    let (code, _, _) = run(
        dir.path(),
        &["verify", "--check", "schiffer", "--domain", "disc", "--expect", "nondisc", "--level", "2", "--output", "neg.json"],
    );
    assert_eq!(code, 1);
    assert_eq!(read_json(&dir.path().join("neg.json"))["footer"]["pass"], false);
}

#[test]
fn cellular_flow_is_skipped_on_the_annulus() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) =
        run(dir.path(), &["verify", "--check", "cellular-flow", "--domain", "annulus", "--level", "1"]);
    assert_eq!(code, 0, "{err}");
    let r = read_json(&dir.path().join("verify.json"));
    assert_eq!(r["body"]["checks"][0]["status"], "not_applicable");
}

#[test]
fn optimize_from_the_disc_stops_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run(
        dir.path(),
        &["optimize", "--start", "none", "--level", "2", "--certificate-level", "3", "--table", "traj.txt"],
    );
    assert_eq!(code, 0, "{out}{err}");
    let r = read_json(&dir.path().join("optimize.json"));
    assert_eq!(r["body"]["converged"], true);
    assert!(r["body"]["evaluations"].as_u64().unwrap() <= 8);
    assert_eq!(r["body"]["final"]["max_abs_coeff"], 0.0);
    let table = std::fs::read_to_string(dir.path().join("traj.txt")).unwrap();
    assert!(table.starts_with("iteration evaluations a1"));
}

#[test]
fn optimize_budget_exhaustion_exits_4_with_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(
        dir.path(),
        &["optimize", "--start", "a2=0.1", "--level", "1", "--max-evaluations", "9", "--certificate-level", "1"],
    );
    assert_eq!(code, 4, "{err}");
    let r = read_json(&dir.path().join("optimize.json"));
    assert_eq!(r["body"]["converged"], false);
    assert_eq!(r["footer"]["exit_code"], 4);
    assert!(!r["body"]["trajectory"].as_array().unwrap().is_empty());
    assert!(r["body"]["evaluations"].as_u64().unwrap() <= 9);
    // Six free coefficients need seven points before the first step.
    let (code, _, err) = run(dir.path(), &["optimize", "--start", "a2=0.1", "--level", "1", "--max-evaluations", "4"]);
    assert_eq!(code, 2);
    assert!(err.contains("budget"), "{err}");
}

#[test]
fn convergence_table_on_the_square() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(
        dir.path(),
        &["convergence", "--domain", "rectangle", "--problem", "dirichlet", "--level-min", "1", "--level-max", "3", "--k", "1", "--table", "conv.txt"],
    );
    assert_eq!(code, 0, "{err}");
    let r = read_json(&dir.path().join("convergence.json"));
    assert_eq!(r["body"]["reference_source"], "separable_modes");
    assert_eq!(r["body"]["monotone"][0], true);
    let rows = r["body"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let order = rows[1]["orders"][0].as_f64().unwrap();
    // P2 on an exact polygon: fourth order for eigenvalues.
    assert!(order > 3.0, "{order}");
    assert!(std::fs::read_to_string(dir.path().join("conv.txt")).unwrap().lines().count() == 4);
}

#[test]
fn plots_mesh_and_timing() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(
        dir.path(),
        &["spectrum", "--problem", "buckling", "--level", "2", "--plots", "figs", "--mesh", "disc.mesh", "--timing"],
    );
    assert_eq!(code, 0, "{err}");
    for f in ["buckling_psi.svg", "buckling_w.svg", "buckling_w_trace.svg"] {
        let svg = std::fs::read_to_string(dir.path().join("figs").join(f)).unwrap();
        assert!(svg.starts_with("<svg"), "{f}");
    }
    let mesh = std::fs::read_to_string(dir.path().join("disc.mesh")).unwrap();
    assert!(mesh.lines().any(|l| l.starts_with("t ")));
    assert!(mesh.lines().any(|l| l.starts_with("b ")));
    let r = read_json(&dir.path().join("spectrum.json"));
    assert!(r["footer"]["timing"]["total_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn library_entry_point_matches_binary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lib.json");
    let code = planar_spectra_cli::run([
        "planar-spectra",
        "spectrum",
        "--problem",
        "stokes",
        "--level",
        "1",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let (code, _, _) = run(dir.path(), &["spectrum", "--problem", "stokes", "--level", "1", "--output", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let (code, _, _) = run(dir.path(), &["replay", out.to_str().unwrap()]);
    assert_eq!(code, 0);
}

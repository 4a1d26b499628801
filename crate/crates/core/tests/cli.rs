use std::fs;
use std::path::{Path, PathBuf};

use semistream::cli::{main_with, RunReport};

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.json"))
}

/// Runs a subcommand with solution and report redirected to temp files.
fn run(args: &[&str]) -> (i32, String, Option<RunReport>) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solution.txt");
    let rep = dir.path().join("report.json");
    let mut argv = vec!["semistream".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    argv.extend(["--output".into(), out.display().to_string(), "--report".into(), rep.display().to_string()]);
    let code = main_with(argv);
    let solution = fs::read_to_string(&out).unwrap_or_default();
    let report = fs::read_to_string(&rep).ok().map(|s| serde_json::from_str(&s).unwrap());
    (code, solution, report)
}

fn code_of(args: &[&str]) -> i32 {
    main_with(std::iter::once("semistream").chain(args.iter().copied()))
}

/// Compares a report with its golden file: meters exactly, value to 1e-6.
/// `SEMISTREAM_BLESS=1` rewrites the golden file instead.
fn check_golden(name: &str, report: &RunReport) {
    let path = golden(name);
    if std::env::var_os("SEMISTREAM_BLESS").is_some() {
        let mut fixed = report.clone();
        fixed.solution_path = "solution.txt".into();
        fixed.wall_seconds = 0.0;
        fs::write(&path, serde_json::to_string_pretty(&fixed).unwrap() + "\n").unwrap();
        return;
    }
    let want: RunReport = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report.problem, want.problem);
    assert_eq!(report.eps, want.eps);
    assert_eq!((report.passes, report.peak_words, report.work), (want.passes, want.peak_words, want.work), "{name}");
    assert!((report.value - want.value).abs() <= 1e-6, "{name}: {} vs {}", report.value, want.value);
    assert!(report.solution_path.ends_with(&want.solution_path));
    assert!(report.wall_seconds >= 0.0);
}

#[test]
fn mcm_on_a_path() {
    let (code, sol, rep) = run(&["mcm", "--input", &data("p4.el"), "--eps", "0.1"]);
    assert_eq!(code, 0);
    let rep = rep.unwrap();
    assert_eq!(rep.value, 2.0);
    assert_eq!(sol.lines().count(), 2);
    check_golden("mcm", &rep);
}

#[test]
fn mcm_exact_on_a_path() {
    let (code, _, rep) = run(&["mcm-exact", "--input", &data("p4.el")]);
    assert_eq!(code, 0);
    check_golden("mcm-exact", &rep.unwrap());
}

#[test]
fn mwm_prefers_two_edges() {
    let (code, _, rep) = run(&["mwm", "--input", &data("mwm.el"), "--eps", "0.1"]);
    assert_eq!(code, 0);
    let rep = rep.unwrap();
    assert_eq!(rep.value, 7.0);
    check_golden("mwm", &rep);
}

#[test]
fn ot_with_free_diagonal() {
    let m = format!("{},{}", data("u.txt"), data("u.txt"));
    let (code, _, rep) = run(&["ot", "--input", &data("cost2x2.mat"), "--marginals", &m, "--eps", "0.05"]);
    assert_eq!(code, 0);
    let rep = rep.unwrap();
    assert!(rep.value.abs() <= 1e-9);
    check_golden("ot", &rep);
}

#[test]
fn sssp_on_a_triangle() {
    let args = ["sssp", "--input", &data("tri.el"), "--source", "0", "--target", "2", "--eps", "0.1"];
    let (code, sol, rep) = run(&args);
    assert_eq!(code, 0);
    let rep = rep.unwrap();
    assert!(rep.value <= 2.2);
    assert_eq!(sol.lines().next(), Some("0"));
    check_golden("sssp", &rep);
}

#[test]
fn transship_on_a_triangle() {
    let args = ["transship", "--input", &data("tri.el"), "--demands", &data("tri_demands.txt"), "--eps", "0.1"];
    let (code, _, rep) = run(&args);
    assert_eq!(code, 0);
    let rep = rep.unwrap();
    assert!(rep.value <= 2.2);
    check_golden("transship", &rep);
}

#[test]
fn solve_game_value() {
    let args = ["solve-game", "--input", &data("game.rows"), "--demands", &data("game_b.txt"), "--eps", "0.05"];
    let (code, _, rep) = run(&args);
    assert_eq!(code, 0);
    let rep = rep.unwrap();
    assert!(rep.value >= -1e-9 && rep.value <= 0.05);
    check_golden("solve-game", &rep);
}

#[test]
fn solutions_verify() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("s.txt").display().to_string();
    let rep = dir.path().join("r.json").display().to_string();
    let m = format!("{},{}", data("u.txt"), data("u.txt"));
    let cases: Vec<(Vec<String>, Vec<String>)> = vec![
        (vec!["mcm".into(), "--input".into(), data("p4.el")], vec![]),
        (vec!["mwm".into(), "--input".into(), data("mwm.el")], vec![]),
        (vec!["ot".into(), "--input".into(), data("cost2x2.mat"), "--marginals".into(), m.clone()], vec![
            "--marginals".into(),
            m.clone(),
        ]),
        (
            vec!["transship".into(), "--input".into(), data("tri.el"), "--demands".into(), data("tri_demands.txt")],
            vec!["--demands".into(), data("tri_demands.txt")],
        ),
        (
            vec!["solve-game".into(), "--input".into(), data("game.rows"), "--demands".into(), data("game_b.txt")],
            vec!["--demands".into(), data("game_b.txt")],
        ),
        (
            vec!["sssp".into(), "--input".into(), data("tri.el"), "--source".into(), "0".into(), "--target".into(), "2".into()],
            vec!["--source".into(), "0".into(), "--target".into(), "2".into()],
        ),
    ];
    for (solve, extra) in cases {
        let mut argv = vec!["semistream".to_string()];
        argv.extend(solve.iter().cloned());
        argv.extend(["--output".into(), sol.clone(), "--report".into(), rep.clone()]);
        assert_eq!(main_with(argv), 0, "{solve:?}");
        let mut argv = vec!["semistream".to_string(), "verify".into(), "--problem".into(), solve[0].clone()];
        argv.extend(["--input".into(), solve[2].clone(), "--solution".into(), sol.clone()]);
        argv.extend(extra);
        assert_eq!(main_with(argv), 0, "verify {}", solve[0]);
    }
}

#[test]
fn verify_rejects_a_broken_matching() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("s.txt");
    fs::write(&sol, "0 0\n1 0\n").unwrap();
    let code = code_of(&["verify", "--problem", "mcm", "--input", &data("p4.el"), "--solution", &sol.display().to_string()]);
    assert_eq!(code, 1);
}

#[test]
fn verify_rejects_a_point_off_the_simplex() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("s.txt");
    fs::write(&sol, "0 0.5\n1 0.4\n").unwrap();
    let sol = sol.display().to_string();
    let code = code_of(&["verify", "--problem", "solve-game", "--input", &data("game.rows"), "--solution", &sol]);
    assert_eq!(code, 1);
}

#[test]
fn exit_codes() {
    assert_eq!(code_of(&["mcm", "--bogus"]), 2);
    assert_eq!(code_of(&["frobnicate"]), 2);
    assert_eq!(code_of(&["mcm", "--input", &data("p4.el"), "--eps", "0.9", "--output", "/dev/null"]), 2);
    assert_eq!(code_of(&["mcm", "--input", &data("missing.el")]), 1);
    assert_eq!(code_of(&["transship", "--input", &data("tri.el"), "--demands", &data("u.txt")]), 1);
    assert_eq!(code_of(&["--help"]), 0);
}

#[test]
fn config_overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.txt");
    fs::write(&cfg, "C_T = 10\n").unwrap();
    let (_, _, base) = run(&["mcm", "--input", &data("p4.el")]);
    let (code, _, tuned) = run(&["mcm", "--input", &data("p4.el"), "--config", &cfg.display().to_string()]);
    assert_eq!(code, 0);
    assert!(tuned.unwrap().passes < base.unwrap().passes);
    fs::write(&cfg, "nonsense = 1\n").unwrap();
    assert_eq!(code_of(&["mcm", "--input", &data("p4.el"), "--config", &cfg.display().to_string()]), 2);
}

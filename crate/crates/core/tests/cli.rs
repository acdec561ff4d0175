use std::fs;
use std::process::Command;

use nitsche::study::CSV_HEADER;
use nitsche::{CsrMatrix, StudyTable};

fn nitsche() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nitsche"))
}

fn run_ok(args: &[&str]) -> String {
    let out = nitsche().args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn csv_to_stdout() {
    let text = run_ok(&["--levels", "1:3", "--no-timing"]);
    let table = StudyTable::parse_csv(&text).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(table.rows.len(), 3);
    assert!(table.rows[0].l2_rate.is_none());
    assert!(table.rows.iter().all(|r| r.elapsed == 0.0));
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = ["--degree", "2", "--levels", "1:4", "--alpha", "2", "--no-timing"];
    assert_eq!(run_ok(&args), run_ok(&args));
}

#[test]
fn markdown_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("table.md");
    let vtk = dir.path().join("u.vtk");
    let mtx = dir.path().join("a.mtx");
    run_ok(&[
        "--dim",
        "3",
        "--levels",
        "1:2",
        "--format",
        "markdown",
        "--out",
        out.to_str().unwrap(),
        "--export-vtk",
        vtk.to_str().unwrap(),
        "--dump-matrix",
        mtx.to_str().unwrap(),
    ]);
    let md = fs::read_to_string(&out).unwrap();
    assert!(md.starts_with("| Level |"));
    assert_eq!(md.lines().count(), 4);
    let v = fs::read_to_string(&vtk).unwrap();
    assert!(v.contains("CELL_TYPES 384"));
    assert!(v.contains("SCALARS u3 double 1"));
    let a = CsrMatrix::read_matrix_market(&fs::read_to_string(&mtx).unwrap()).unwrap();
    assert_eq!(a.nrows(), 125);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# regime\ndegree = 2\nlevels = 1:2\nno-timing = true\nc0 = 0\n").unwrap();
    let from_file = run_ok(&["--config", cfg.to_str().unwrap()]);
    let t = StudyTable::parse_csv(&from_file).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.rows[0].dofs, 25);
    let overridden = run_ok(&["--config", cfg.to_str().unwrap(), "--levels", "1:3"]);
    assert_eq!(StudyTable::parse_csv(&overridden).unwrap().rows.len(), 3);
    assert_eq!(from_file, run_ok(&["--degree", "2", "--levels", "1:2", "--c0", "0", "--no-timing"]));
}

#[test]
fn interpolation_mode() {
    let text = run_ok(&["--interpolation", "--degree", "2", "--levels", "2:4", "--projection", "plain"]);
    assert!(text.starts_with("level,h,dofs,l2,l2_rate,bnd_l2"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn failures_exit_nonzero() {
    for args in [
        vec!["--levels", "3:3"],
        vec!["--levels", "x"],
        vec!["--beta", "0.5"],
        vec!["--solution", "custom"],
        vec!["--dim", "3", "--solution", "sine2d", "--levels", "1:2"],
        vec!["--grading", "0.5"],
        vec!["--format", "xml"],
        vec!["--config", "/nonexistent/file"],
        vec!["--bogus"],
    ] {
        let out = nitsche().args(&args).output().unwrap();
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(!out.stderr.is_empty(), "{args:?} printed no message");
    }
}

#[test]
fn symmetric_default_penalty_and_krylov() {
    let direct = StudyTable::parse_csv(&run_ok(&["--beta", "-1", "--levels", "1:3", "--no-timing"])).unwrap();
    let krylov = StudyTable::parse_csv(&run_ok(&["--beta", "-1", "--levels", "1:3", "--no-timing", "--solver", "krylov"])).unwrap();
    for (a, b) in direct.rows.iter().zip(&krylov.rows) {
        assert!((a.l2_rel - b.l2_rel).abs() < 1e-9 * a.l2_rel);
        assert!(b.residual <= 1e-12);
    }
}

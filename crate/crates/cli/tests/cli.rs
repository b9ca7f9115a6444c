use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn tomo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tomo"))
        .args(args)
        .env("TOMO_THREADS", "1")
        .output()
        .expect("running tomo")
}

fn ok(args: &[&str]) -> Output {
    let out = tomo(args);
    assert!(
        out.status.success(),
        "tomo {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_matrix(p: &Path, re: &[&[f64]]) {
    let dim = re.len();
    let im = vec![vec![0.0; dim]; dim];
    let v = serde_json::json!({"dim": dim, "re": re, "im": im});
    std::fs::write(p, v.to_string()).unwrap();
}

fn csv_rows(p: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines.map(|l| l.split(',').map(|t| t.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn line_pipeline_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (f, t, r, rep) = (
        path(&dir, "f.grd"),
        path(&dir, "t.grd"),
        path(&dir, "r.grd"),
        path(&dir, "report.json"),
    );
    ok(&["phantom", "--kind", "gaussian", "--grid", "64", "--sigma", "0.7", "--out", s(&f)]);
    ok(&["forward", "--input", s(&f), "--geometry", "line", "--angles", "128", "--out", s(&t)]);
    ok(&[
        "invert",
        "--input",
        s(&t),
        "--geometry",
        "line",
        "--reference",
        s(&f),
        "--report",
        s(&rep),
        "--out",
        s(&r),
    ]);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&rep).unwrap()).unwrap();
    let err = report["l2_error"].as_f64().unwrap();
    assert!(err < 0.05, "{err}");
    assert_eq!(report["geometry"], "line");
}

#[test]
fn sinogram_csv_has_lambda_theta_columns() {
    let dir = tempfile::tempdir().unwrap();
    let (f, t, c) = (path(&dir, "f.grd"), path(&dir, "t.grd"), path(&dir, "t.csv"));
    ok(&["phantom", "--grid", "32", "--out", s(&f)]);
    ok(&["forward", "--input", s(&f), "--angles", "8", "--out", s(&t), "--csv", s(&c)]);
    let (header, rows) = csv_rows(&c);
    assert_eq!(header, "lambda,theta,value");
    assert!(rows.iter().all(|r| r.len() == 3 && (0.0..std::f64::consts::PI).contains(&r[1])));
}

#[test]
fn circle_family_csv_lists_curves() {
    let dir = tempfile::tempdir().unwrap();
    let (f, t, c) = (path(&dir, "f.grd"), path(&dir, "t.grd"), path(&dir, "fam.csv"));
    ok(&[
        "phantom", "--kind", "bump", "--grid", "24", "--extent", "0.5,-1,2.5,1", "--center", "1.5,0", "--radius",
        "0.6", "--out", s(&f),
    ]);
    ok(&[
        "forward",
        "--input",
        s(&f),
        "--geometry",
        "circle",
        "--angles",
        "6",
        "--lambda-step",
        "0.1",
        "--out",
        s(&t),
        "--family-csv",
        s(&c),
    ]);
    let (header, rows) = csv_rows(&c);
    assert_eq!(header, "lambda,mu,nu,center_x,center_y,radius,value");
    assert!(!rows.is_empty());
    for r in &rows {
        assert!((r[3].hypot(r[4]) - r[5]).abs() <= 1e-9 * r[5]);
    }
}

#[test]
fn misspelled_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(&dir, "cfg.json");
    std::fs::write(&cfg, r#"{"gird": 32}"#).unwrap();
    let out = tomo(&["--config", s(&cfg), "phantom", "--out", s(&path(&dir, "f.grd"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gird"));
}

#[test]
fn config_values_apply_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, a, b) = (path(&dir, "cfg.json"), path(&dir, "a.csv"), path(&dir, "b.csv"));
    std::fs::write(&cfg, r#"{"grid": 5, "kind": "bump"}"#).unwrap();
    ok(&["--config", s(&cfg), "phantom", "--out", "-", "--csv", s(&a)]);
    ok(&["--config", s(&cfg), "phantom", "--grid", "7", "--out", "-", "--csv", s(&b)]);
    assert_eq!(csv_rows(&a).1.len(), 25);
    assert_eq!(csv_rows(&b).1.len(), 49);
}

#[test]
fn invalid_values_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let f = path(&dir, "f.grd");
    assert_eq!(tomo(&["phantom", "--grid", "1", "--out", s(&f)]).status.code(), Some(2));
    assert_eq!(tomo(&["phantom", "--kind", "square", "--out", s(&f)]).status.code(), Some(2));
    assert_eq!(tomo(&["phantom", "--bogus"]).status.code(), Some(2));
    assert!(!f.exists());
}

#[test]
fn unwritable_output_exits_with_2() {
    let out = tomo(&["phantom", "--grid", "8", "--out", "/nonexistent-dir/f.grd"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn vacuum_husimi_peaks_at_the_origin() {
    let dir = tempfile::tempdir().unwrap();
    let (st, q, c) = (path(&dir, "vac.json"), path(&dir, "q.grd"), path(&dir, "q.csv"));
    let mut re = vec![vec![0.0; 5]; 5];
    re[0][0] = 1.0;
    let rows: Vec<&[f64]> = re.iter().map(|r| r.as_slice()).collect();
    write_matrix(&st, &rows);
    ok(&["qtomo", "husimi", "--nmax", "4", "--state", s(&st), "--grid", "21", "--out", s(&q), "--csv", s(&c)]);
    let (header, rows) = csv_rows(&c);
    assert_eq!(header, "re_z,im_z,re,im");
    let best = rows.iter().max_by(|a, b| a[2].total_cmp(&b[2])).unwrap();
    assert!(best[0].abs() < 1e-12 && best[1].abs() < 1e-12, "{best:?}");
    assert!(rows.iter().all(|r| r[2] >= -1e-12 && r[3].abs() < 1e-12));
}

#[test]
fn star_product_over_budget_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let (m, k) = (path(&dir, "m.json"), path(&dir, "k.grd"));
    let id: Vec<Vec<f64>> = (0..6).map(|i| (0..6).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let rows: Vec<&[f64]> = id.iter().map(|r| r.as_slice()).collect();
    write_matrix(&m, &rows);
    ok(&["qtomo", "husimi", "--nmax", "5", "--state", s(&m), "--grid", "9", "--out", s(&k)]);
    let out = tomo(&["qtomo", "star", "--left", s(&k), "--right", s(&k), "--nmax", "5", "--out", "-"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn spin_tomogram_is_a_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let (st, c) = (path(&dir, "rho.json"), path(&dir, "spin.csv"));
    write_matrix(&st, &[&[0.5, 0.5], &[0.5, 0.5]]);
    ok(&["gtomo", "spin", "--j", "0.5", "--state", s(&st), "--axis", "0,0,1", "--out", "-", "--csv", s(&c)]);
    let (header, rows) = csv_rows(&c);
    assert_eq!(header, "lambda,weight");
    assert_eq!(rows.len(), 2);
    let total: f64 = rows.iter().map(|r| r[1]).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(rows.iter().all(|r| (r[1] - 0.5).abs() < 1e-12));
}

#[test]
fn gram_report_passes_for_random_states() {
    let out = ok(&["gtomo", "gram", "--j", "1", "--trials", "3", "--elements", "6", "--seed", "7", "--out", "-"]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["seed"], 7);
    assert!(report["min_eigenvalue"].as_f64().unwrap() >= -1e-9);
}

#[test]
fn line_report_is_small_and_passes() {
    let out = ok(&["report", "--geometry", "line", "--grid", "48", "--angles", "96", "--seed", "3", "--out", "-"]);
    let reports: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let line = &reports[0];
    assert_eq!(line["geometry"], "line");
    assert!(line["l2_error"].as_f64().unwrap() < 0.05);
    for inv in line["invariants"].as_array().unwrap() {
        assert_eq!(inv["pass"], true, "{inv}");
    }
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let (f, t) = (path(&dir, &format!("f{tag}.grd")), path(&dir, &format!("t{tag}.grd")));
        ok(&["phantom", "--kind", "mixture", "--count", "3", "--seed", "11", "--grid", "32", "--out", s(&f)]);
        ok(&["forward", "--input", s(&f), "--angles", "16", "--out", s(&t)]);
        (std::fs::read(&f).unwrap(), std::fs::read(&t).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn grids_stream_through_stdout() {
    let out = ok(&["phantom", "--grid", "8", "--out", "-"]);
    assert_eq!(&out.stdout[..8], b"TOMOGRD1");
}

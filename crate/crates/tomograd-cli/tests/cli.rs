//! End-to-end checks of the binary surface: flag handling, output
//! formats, error reporting, and cleanup of partial outputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::tempdir;

fn tomograd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tomograd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = tomograd(args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn make_disk_sino(dir: &Path, name: &str) -> PathBuf {
    let path = dir.join(name);
    ok(&[
        "project", "--analytic", "disk", "--size", "48", "--n-angles", "24", "--out", s(&path),
    ]);
    path
}

#[test]
fn full_pipeline_runs_and_scores_itself() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    let img = d.join("disk.imgf");
    ok(&["phantom", "--type", "disk", "--size", "48", "--out", s(&img)]);
    let sino = d.join("disk.sino");
    ok(&["project", "--img", s(&img), "--n-angles", "48", "--out", s(&sino)]);

    let (gx, gy) = (d.join("gx.imgf"), d.join("gy.imgf"));
    ok(&[
        "grad", "--method", "fbp-combined", "--epsilon", "2", "--sino", s(&sino),
        "--size", "48", "--out-gx", s(&gx), "--out-gy", s(&gy),
    ]);
    let edges = d.join("edges.pgm");
    ok(&["canny", "--gx", s(&gx), "--gy", s(&gy), "--out", s(&edges)]);

    // perfect self-match
    let line = ok(&["score", "--pred", s(&edges), "--truth", s(&edges), "--radius", "0"]);
    assert_eq!(line.trim(), "precision=1.000000 recall=1.000000 f1=1.000000");

    // and a viewable panel with its normalization sidecar
    let view = d.join("gx.pgm");
    ok(&["view", "--in", s(&gx), "--out", s(&view)]);
    assert!(view.exists());
    assert!(d.join("gx.pgm.minmax.txt").exists());
}

#[test]
fn paper_style_invocations_work() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    let sino = make_disk_sino(d, "disk.sino");
    // method 2 settings: epsilon 6 px, absolute lambda 0.01
    ok(&[
        "grad", "--method", "l1", "--lambda", "0.01", "--epsilon", "6", "--max-iters", "30",
        "--sino", s(&sino), "--size", "48",
        "--out-gx", s(&d.join("l1_gx.imgf")), "--out-gy", s(&d.join("l1_gy.imgf")),
        "--diag", s(&d.join("diag.csv")),
    ]);
    let diag = std::fs::read_to_string(d.join("diag.csv")).unwrap();
    let mut lines = diag.lines();
    assert_eq!(lines.next(), Some("component,iter,objective"));
    assert!(diag.lines().any(|l| l.starts_with("gy,")));

    // method 1 settings: epsilon 3 px
    ok(&[
        "grad", "--method", "fbp-combined", "--epsilon", "3", "--sino", s(&sino),
        "--size", "48",
        "--out-gx", s(&d.join("m1_gx.imgf")), "--out-gy", s(&d.join("m1_gy.imgf")),
    ]);
    // preprocess route with an explicit band cutoff
    ok(&[
        "grad", "--method", "fbp-preprocess", "--epsilon", "3", "--cutoff", "0.8",
        "--sino", s(&sino), "--size", "48",
        "--out-gx", s(&d.join("p_gx.imgf")), "--out-gy", s(&d.join("p_gy.imgf")),
    ]);
}

#[test]
fn subsample_noise_fbp_chain() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    let sino = make_disk_sino(d, "disk.sino");
    let sub = d.join("sub.sino");
    ok(&["subsample", "--in", s(&sino), "--keep-every", "2", "--out", s(&sub)]);
    let noisy = d.join("noisy.sino");
    ok(&["noise", "--in", s(&sub), "--sigma-frac", "0.02", "--seed", "9", "--out", s(&noisy)]);
    let recon = d.join("recon.imgf");
    ok(&["fbp", "--sino", s(&noisy), "--size", "48", "--cutoff", "0.9", "--out", s(&recon)]);
    assert!(recon.exists());
}

#[test]
fn csv_import_matches_direct_read() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    let csv = d.join("rows.csv");
    std::fs::write(&csv, "0.0,1.5,0.0\n2.5,0.0,0.25\n").unwrap();
    let out = d.join("rows.sino");
    ok(&["import", "--csv", s(&csv), "--s-spacing", "0.5", "--out", s(&out)]);
    let sino = tomograd_cli::formats::read_sinogram(&out).unwrap();
    assert_eq!(sino.n_angles(), 2);
    assert_eq!(sino.n_s(), 3);
    assert_eq!(sino.get(1, 0), 2.5);
}

#[test]
fn unknown_flags_and_methods_are_usage_errors() {
    let out = tomograd(&["grad", "--method", "magic"]);
    assert!(!out.status.success());
    let out = tomograd(&["fbp", "--no-such-flag"]);
    assert!(!out.status.success());
    let out = tomograd(&["frobnicate"]);
    assert!(!out.status.success());
}

#[test]
fn failed_runs_leave_no_partial_outputs() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    // gx is written before the gy write fails on a missing directory
    let sino = make_disk_sino(d, "disk.sino");
    let gx = d.join("gx.imgf");
    let out = tomograd(&[
        "grad", "--method", "fbp-combined", "--sino", s(&sino), "--size", "48",
        "--out-gx", s(&gx), "--out-gy", s(&d.join("no_such_dir/gy.imgf")),
    ]);
    assert!(!out.status.success());
    assert!(!gx.exists(), "partial gx output must be removed on failure");

    // corrupt input: error message names the problem, nothing written
    let bad = d.join("bad.sino");
    std::fs::write(&bad, b"JUNK!data").unwrap();
    let recon = d.join("recon.imgf");
    let out = tomograd(&["fbp", "--sino", s(&bad), "--size", "16", "--out", s(&recon)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad magic"));
    assert!(!recon.exists());
}

#[test]
fn ellipse_phantoms_parse_and_project() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    let img = d.join("e.imgf");
    ok(&[
        "phantom", "--type", "ellipses", "--size", "48",
        "--ellipses", "1.0,0.4,0.25,0.1,-0.05,30; -0.5,0.2,0.2,0.0,0.0,0",
        "--out", s(&img),
    ]);
    let loaded = tomograd_cli::formats::read_image(&img).unwrap();
    assert_eq!(loaded.n(), 48);
    // analytic projection of the same spec string
    ok(&[
        "project", "--analytic", "ellipses", "--size", "48",
        "--ellipses", "1.0,0.4,0.25,0.1,-0.05,30; -0.5,0.2,0.2,0.0,0.0,0",
        "--n-angles", "12", "--out", s(&d.join("e.sino")),
    ]);
    // missing the ellipse list is an error
    let out = tomograd(&[
        "phantom", "--type", "ellipses", "--size", "48", "--out", s(&d.join("x.imgf")),
    ]);
    assert!(!out.status.success());
}

#[test]
fn score_rejects_mismatched_maps() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    let img = d.join("disk.imgf");
    ok(&["phantom", "--type", "disk", "--size", "32", "--out", s(&img)]);
    let sino = d.join("disk.sino");
    ok(&["project", "--img", s(&img), "--n-angles", "16", "--out", s(&sino)]);
    let (gx, gy) = (d.join("gx.imgf"), d.join("gy.imgf"));
    ok(&[
        "grad", "--method", "fbp-combined", "--sino", s(&sino), "--size", "32",
        "--out-gx", s(&gx), "--out-gy", s(&gy),
    ]);
    let e32 = d.join("e32.pgm");
    ok(&["canny", "--gx", s(&gx), "--gy", s(&gy), "--out", s(&e32)]);

    let img48 = d.join("disk48.imgf");
    ok(&["phantom", "--type", "disk", "--size", "48", "--out", s(&img48)]);
    let sino48 = d.join("disk48.sino");
    ok(&["project", "--img", s(&img48), "--n-angles", "16", "--out", s(&sino48)]);
    let (gx48, gy48) = (d.join("gx48.imgf"), d.join("gy48.imgf"));
    ok(&[
        "grad", "--method", "fbp-combined", "--sino", s(&sino48), "--size", "48",
        "--out-gx", s(&gx48), "--out-gy", s(&gy48),
    ]);
    let e48 = d.join("e48.pgm");
    ok(&["canny", "--gx", s(&gx48), "--gy", s(&gy48), "--out", s(&e48)]);

    let out = tomograd(&["score", "--pred", s(&e32), "--truth", s(&e48), "--radius", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("differ in size"));
}

//! Acceptance suite: every release-gating property runs here, one
//! pass/fail line per criterion. Run with
//! `cargo test -p tomograd-cli --test acceptance -- --nocapture`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use tomograd::filters::{
    convolve_image, convolve_s, detector_derivative_kernel, direction_weights,
    gaussian_derivative_kernel_2d,
};
use tomograd::phantom::{analytic_sinogram, disk_specs, rasterize, shepp_logan};
use tomograd::projector::{backproject, forward_radon, RadonOperator};
use tomograd::sparse::{ista_solve, IstaConfig, Lambda, LinearOperator};
use tomograd::{AngleSet, Axis, DetectorGrid, GridSpec, ImageGrid, Sinogram};

use tomograd_cli::experiment::{run_sparse_view, SparseViewConfig};

fn rel_l2(a: &[f64], b: &[f64], mask: Option<&[bool]>) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..a.len() {
        if mask.map_or(true, |m| m[i]) {
            let d = a[i] - b[i];
            num += d * d;
            den += b[i] * b[i];
        }
    }
    (num / den).sqrt()
}

fn check(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn random_vec(len: usize, seed: u64) -> Vec<f64> {
    // xorshift-based fill; the test only needs fixed pseudo-random data
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
    (0..len)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

fn criterion_1_adjoint_identity() -> Result<(), String> {
    let start = Instant::now();
    let spec = GridSpec::new(32, 1.0).unwrap();
    let angles = AngleSet::evenly_distributed(16).unwrap();
    let det = DetectorGrid::covering(spec, 1.0).unwrap();
    let op = RadonOperator::new(spec, &angles, det).unwrap();
    for seed in 0..20u64 {
        let f = random_vec(32 * 32, 2 * seed + 1);
        let y = random_vec(angles.len() * det.n_s, 2 * seed + 2);
        let rf = op.apply(&f);
        let rty = op.apply_adjoint(&y);
        let gap = (dot(&rf, &y) - dot(&f, &rty)).abs()
            / (dot(&rf, &rf).sqrt() * dot(&y, &y).sqrt());
        check(gap <= 1e-10, format!("seed {seed}: normalized gap {gap:.3e}"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 1.0, format!("took {secs:.2} s, budget 1 s"))
}

fn criterion_2_intertwining_consistency() -> Result<(), String> {
    let start = Instant::now();
    let n = 128;
    let spec = GridSpec::new(n, 2.0 / n as f64).unwrap();
    let h = spec.pixel_size;
    let img = shepp_logan(n, h).unwrap();
    let eps = 3.0 * h;
    let angles = AngleSet::evenly_distributed(180).unwrap();
    // the smoothed phantom spills past the grid; project it on a padded
    // embedding so both routes see the full support
    let pad = 14;
    let padded = img.embedded(pad);
    let det = DetectorGrid::covering(padded.spec(), h).unwrap();
    let rf = forward_radon(&img, &angles, det).unwrap();
    let kernel_1d = detector_derivative_kernel(eps, det.s_spacing).unwrap();
    for axis in [Axis::X1, Axis::X2] {
        let kernel = gaussian_derivative_kernel_2d(eps, h, axis).unwrap();
        let lhs = forward_radon(&convolve_image(&padded, &kernel), &angles, det).unwrap();
        let rhs = convolve_s(&rf, &kernel_1d, &direction_weights(&angles, axis)).unwrap();
        let rel = rel_l2(lhs.data(), rhs.data(), None);
        check(rel <= 0.02, format!("{axis:?}: relative l2 {rel:.4}"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 10.0, format!("took {secs:.2} s, budget 10 s"))
}

fn disk_128() -> (GridSpec, ImageGrid, Sinogram) {
    let spec = GridSpec::new(128, 1.0).unwrap();
    let img = rasterize(&disk_specs(spec), spec).unwrap();
    let angles = AngleSet::evenly_distributed(180).unwrap();
    let det = DetectorGrid::covering(spec, 1.0).unwrap();
    let sino = forward_radon(&img, &angles, det).unwrap();
    (spec, img, sino)
}

fn criterion_3_route_equivalence() -> Result<(), String> {
    let (spec, _, sino) = disk_128();
    let a = tomograd::fbp::gradient_preprocess(&sino, 3.0, spec, 1.0).unwrap();
    let b = tomograd::fbp::gradient_combined(&sino, 3.0, spec).unwrap();
    for (ca, cb, name) in [(&a.gx, &b.gx, "gx"), (&a.gy, &b.gy, "gy")] {
        let rel = rel_l2(ca.data(), cb.data(), None);
        check(rel <= 0.05, format!("{name}: routes differ by {rel:.4}"))?;
    }
    Ok(())
}

fn criterion_4_image_domain_oracle() -> Result<(), String> {
    let (spec, img, sino) = disk_128();
    let eps = 3.0 * spec.pixel_size;
    let mask = spec.interior_mask(3);
    let routes = [
        ("preprocess", tomograd::fbp::gradient_preprocess(&sino, eps, spec, 1.0).unwrap()),
        ("combined", tomograd::fbp::gradient_combined(&sino, eps, spec).unwrap()),
    ];
    for (name, gf) in &routes {
        for (comp, axis) in [(&gf.gx, Axis::X1), (&gf.gy, Axis::X2)] {
            let kernel = gaussian_derivative_kernel_2d(eps, spec.pixel_size, axis).unwrap();
            let oracle = convolve_image(&img, &kernel);
            let rel = rel_l2(comp.data(), oracle.data(), Some(&mask));
            check(rel <= 0.10, format!("{name} {axis:?}: oracle distance {rel:.4}"))?;
        }
    }
    Ok(())
}

struct Identity(usize);

impl LinearOperator for Identity {
    fn domain_len(&self) -> usize {
        self.0
    }
    fn range_len(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }
}

fn criterion_5_ista_correctness() -> Result<(), String> {
    // (a) monotone objective descent on a tomographic problem
    let spec = GridSpec::new(16, 1.0).unwrap();
    let angles = AngleSet::evenly_distributed(24).unwrap();
    let det = DetectorGrid::covering(spec, 1.0).unwrap();
    let img = rasterize(&disk_specs(spec), spec).unwrap();
    let y = forward_radon(&img, &angles, det).unwrap();
    let op = RadonOperator::new(spec, &angles, det).unwrap();
    let cfg = IstaConfig {
        lambda: Lambda::Absolute(0.5),
        max_iters: 400,
        rel_tol: 0.0,
        ..Default::default()
    };
    let (_, diag) = ista_solve(&op, y.data(), &cfg).unwrap();
    for (i, pair) in diag.objectives.windows(2).enumerate() {
        check(
            pair[1] <= pair[0] * (1.0 + 1e-10),
            format!("objective rose at iteration {i}: {} -> {}", pair[0], pair[1]),
        )?;
    }

    // (b) identity harness recovers the closed-form separable minimizer
    let idty = Identity(3);
    let data = [2.0, -0.5, 0.0];
    let cfg = IstaConfig {
        lambda: Lambda::Absolute(2.0),
        max_iters: 3000,
        rel_tol: 0.0,
        ..Default::default()
    };
    let (f, _) = ista_solve(&idty, &data, &cfg).unwrap();
    for (a, b) in f.iter().zip([1.0, 0.0, 0.0]) {
        check((a - b).abs() <= 1e-6, format!("identity harness gave {f:?}"))?;
    }

    // (c) subgradient optimality at convergence
    let spec = GridSpec::new(8, 1.0).unwrap();
    let angles = AngleSet::evenly_distributed(32).unwrap();
    let det = DetectorGrid::covering(spec, 1.0).unwrap();
    let img = rasterize(&disk_specs(spec), spec).unwrap();
    let y = forward_radon(&img, &angles, det).unwrap();
    let op = RadonOperator::new(spec, &angles, det).unwrap();
    let lambda = 0.5;
    let cfg = IstaConfig {
        lambda: Lambda::Absolute(lambda),
        max_iters: 20000,
        rel_tol: 0.0,
        ..Default::default()
    };
    let (f, _) = ista_solve(&op, y.data(), &cfg).unwrap();
    let mut residual = op.apply(&f);
    for (r, yv) in residual.iter_mut().zip(y.data()) {
        *r -= yv;
    }
    let grad = op.apply_adjoint(&residual);
    for (p, (&fp, &gp)) in f.iter().zip(&grad).enumerate() {
        let g = 2.0 * gp;
        if fp == 0.0 {
            check(
                g.abs() <= lambda * (1.0 + 1e-3),
                format!("pixel {p}: zero coefficient but |gradient| {:.4e} > lambda", g.abs()),
            )?;
        } else {
            let residue = (g + lambda * fp.signum()).abs();
            check(
                residue <= 1e-3 * lambda,
                format!("pixel {p}: stationarity residue {residue:.4e}"),
            )?;
        }
    }
    Ok(())
}

fn criterion_6_undersampling_claim() -> Result<(), String> {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = SparseViewConfig::default();
    let mut written = Vec::new();
    let report = run_sparse_view(&cfg, dir.path(), &mut written).map_err(|e| e.to_string())?;
    let m1_sparse = report.row("sparse", "fbp-combined");
    let m2_sparse = report.row("sparse", "l1");
    check(
        m2_sparse.f1 > m1_sparse.f1,
        format!(
            "sparse f1: l1 {:.4} must strictly exceed fbp {:.4}",
            m2_sparse.f1, m1_sparse.f1
        ),
    )?;
    check(
        m2_sparse.spurious_fraction < m1_sparse.spurious_fraction,
        format!(
            "sparse spurious fraction: l1 {:.4} must be below fbp {:.4}",
            m2_sparse.spurious_fraction, m1_sparse.spurious_fraction
        ),
    )?;
    let m1_dense = report.row("dense", "fbp-combined");
    let m2_dense = report.row("dense", "l1");
    let gap = (m1_dense.f1 - m2_dense.f1).abs();
    check(
        gap <= 0.05,
        format!("dense f1 gap {gap:.4} exceeds 0.05"),
    )?;
    let secs = start.elapsed().as_secs_f64();
    check(secs < 60.0, format!("took {secs:.1} s, budget 60 s"))
}

fn criterion_7_fbp_calibration() -> Result<(), String> {
    let (spec, _, sino) = disk_128();
    let recon = tomograd::fbp::reconstruct(&sino, spec, 1.0).unwrap();
    let radius = 0.25 * 128.0;
    let mut sum = 0.0;
    let mut count = 0usize;
    for r in 0..128 {
        for c in 0..128 {
            let (x1, x2) = spec.pixel_center(r, c);
            if (x1 * x1 + x2 * x2).sqrt() <= radius - 3.0 {
                sum += recon.get(r, c);
                count += 1;
            }
        }
    }
    let mean = sum / count as f64;
    check(
        (0.95..=1.05).contains(&mean),
        format!("disk interior mean {mean:.4} outside [0.95, 1.05]"),
    )?;

    let ones = Sinogram::from_vec(
        sino.angle_set().clone(),
        sino.detector(),
        vec![1.0; sino.data().len()],
    )
    .unwrap();
    let bp = backproject(&ones, spec).unwrap();
    let mask = spec.interior_mask(0);
    for (i, &v) in bp.data().iter().enumerate() {
        if mask[i] {
            let rel = (v - std::f64::consts::PI).abs() / std::f64::consts::PI;
            check(
                rel <= 0.01,
                format!("interior pixel {i} backprojects ones to {v:.5}, not pi"),
            )?;
        }
    }
    Ok(())
}

fn criterion_8_analytic_vs_discrete() -> Result<(), String> {
    let spec = GridSpec::new(128, 1.0).unwrap();
    let specs = disk_specs(spec);
    let img = rasterize(&specs, spec).unwrap();
    let angles = AngleSet::evenly_distributed(24).unwrap();
    let det = DetectorGrid::covering(spec, 1.0).unwrap();
    let discrete = forward_radon(&img, &angles, det).unwrap();
    let exact = analytic_sinogram(&specs, &angles, det).unwrap();
    let rel = rel_l2(discrete.data(), exact.data(), None);
    check(rel <= 0.02, format!("relative l2 discrepancy {rel:.4}"))
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tomograd"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "command {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn file_bytes(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn criterion_9_cli_determinism() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name);
    let s = |path: &std::path::PathBuf| path.to_str().unwrap().to_owned();

    // seeded noise and a seeded l1 reconstruction, run twice each
    let sino = p("disk.sino");
    run_cli(&[
        "project", "--analytic", "disk", "--size", "32", "--n-angles", "16", "--out", &s(&sino),
    ])?;
    for (tag, out) in [("a", p("n1.sino")), ("b", p("n2.sino"))] {
        let _ = tag;
        run_cli(&[
            "noise", "--in", &s(&sino), "--sigma-frac", "0.05", "--seed", "11", "--out", &s(&out),
        ])?;
    }
    check(
        file_bytes(&p("n1.sino"))? == file_bytes(&p("n2.sino"))?,
        "seeded noise runs differ".into(),
    )?;

    for run in ["a", "b"] {
        run_cli(&[
            "grad", "--method", "l1", "--sino", &s(&p("n1.sino")), "--size", "32",
            "--epsilon", "3", "--lambda", "0.01", "--max-iters", "40", "--seed", "3",
            "--out-gx", &s(&p(&format!("gx_{run}.imgf"))),
            "--out-gy", &s(&p(&format!("gy_{run}.imgf"))),
        ])?;
    }
    check(
        file_bytes(&p("gx_a.imgf"))? == file_bytes(&p("gx_b.imgf"))?
            && file_bytes(&p("gy_a.imgf"))? == file_bytes(&p("gy_b.imgf"))?,
        "seeded l1 reconstructions differ".into(),
    )?;

    // the scripted experiment, twice, at reduced scale
    for run in ["e1", "e2"] {
        run_cli(&[
            "experiment", "sparse-view", "--angles", "12", "--dense-angles", "36",
            "--size", "48", "--max-iters", "60", "--seed", "5",
            "--out-dir", &s(&p(run)),
        ])?;
    }
    check(
        file_bytes(&p("e1").join("metrics.csv"))? == file_bytes(&p("e2").join("metrics.csv"))?,
        "experiment metrics differ between identical runs".into(),
    )?;
    check(
        file_bytes(&p("e1").join("sparse_l1_gx.imgf"))?
            == file_bytes(&p("e2").join("sparse_l1_gx.imgf"))?,
        "experiment images differ between identical runs".into(),
    )
}

#[test]
fn acceptance_criteria() {
    let criteria: Vec<(&str, fn() -> Result<(), String>)> = vec![
        ("adjoint identity", criterion_1_adjoint_identity),
        ("intertwining consistency", criterion_2_intertwining_consistency),
        ("route equivalence", criterion_3_route_equivalence),
        ("image-domain oracle", criterion_4_image_domain_oracle),
        ("ista correctness", criterion_5_ista_correctness),
        ("undersampling claim", criterion_6_undersampling_claim),
        ("fbp calibration", criterion_7_fbp_calibration),
        ("analytic vs discrete projector", criterion_8_analytic_vs_discrete),
        ("cli determinism", criterion_9_cli_determinism),
    ];
    let mut failures = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => println!("acceptance {} ({name}): PASS  [{secs:.2} s]", i + 1),
            Err(msg) => {
                println!("acceptance {} ({name}): FAIL - {msg}  [{secs:.2} s]", i + 1);
                failures.push(format!("{} ({name}): {msg}", i + 1));
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria:\n{}", failures.join("\n"));
}

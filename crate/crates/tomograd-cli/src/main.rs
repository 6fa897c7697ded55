//! Command-line front end. Every subcommand is a thin composition of
//! library operations; on failure, files written by the current
//! invocation are removed so partial outputs never linger.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tomograd::edges::{canny_from_gradient, edge_f1};
use tomograd::phantom::{
    add_noise, analytic_sinogram, disk_specs, half_extent, rasterize, shepp_logan_specs,
    subsample_angles, EllipseSpec,
};
use tomograd::sparse::{IstaConfig, Lambda};
use tomograd::{AngleSet, DetectorGrid, GradientField, GridSpec, Sinogram};

use tomograd_cli::experiment::{run_sparse_view, SparseViewConfig};
use tomograd_cli::formats;

#[derive(Parser)]
#[command(
    name = "tomograd",
    about = "Gradient reconstruction and edge detection for parallel-beam CT sinograms",
    version
)]
struct Cli {
    /// Worker threads for the compute kernels (0 = auto). Falls back to
    /// the TOMOGRAD_THREADS environment variable.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PhantomKind {
    #[value(name = "shepp-logan")]
    SheppLogan,
    Disk,
    Ellipses,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GradMethod {
    #[value(name = "fbp-preprocess")]
    FbpPreprocess,
    #[value(name = "fbp-combined")]
    FbpCombined,
    L1,
}

#[derive(Subcommand)]
enum Command {
    /// Rasterize a test object to an IMGF1 image.
    Phantom {
        #[arg(long, value_enum)]
        r#type: PhantomKind,
        #[arg(long)]
        size: usize,
        /// Physical pixel size; defaults to 2/size (unit half-extent).
        #[arg(long)]
        pixel_size: Option<f64>,
        /// Ellipse list "amp,a,b,cx,cy,deg;..." for --type ellipses.
        #[arg(long)]
        ellipses: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Project an image (or a spec-defined phantom, exactly) to a sinogram.
    Project {
        /// IMGF1 image to project discretely.
        #[arg(long, conflicts_with = "analytic")]
        img: Option<PathBuf>,
        /// Phantom whose exact sinogram is evaluated instead.
        #[arg(long, value_enum)]
        analytic: Option<PhantomKind>,
        /// Grid size defining the physical scale of --analytic.
        #[arg(long, required_if_eq_any = [("analytic", "shepp-logan"), ("analytic", "disk"), ("analytic", "ellipses")])]
        size: Option<usize>,
        #[arg(long)]
        pixel_size: Option<f64>,
        #[arg(long)]
        ellipses: Option<String>,
        #[arg(long)]
        n_angles: usize,
        /// Detector sample count; defaults to an odd count covering the grid.
        #[arg(long)]
        n_s: Option<usize>,
        /// Detector spacing; defaults to the pixel size.
        #[arg(long)]
        s_spacing: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Import a CSV sinogram (one row per angle) into SINO1.
    Import {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        s_spacing: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep every q-th projection angle.
    Subsample {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        keep_every: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Add seeded Gaussian noise scaled to the sinogram peak.
    Noise {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        sigma_frac: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ramp-filtered backprojection.
    Fbp {
        #[arg(long)]
        sino: PathBuf,
        #[arg(long)]
        size: usize,
        /// Pixel size of the reconstruction grid; defaults to the
        /// detector spacing.
        #[arg(long)]
        pixel_size: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        cutoff: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct the smoothed gradient directly from a sinogram.
    Grad {
        #[arg(long, value_enum)]
        method: GradMethod,
        /// Smoothing width in pixels; defaults to 3 (filtered routes) or
        /// 6 (l1 route).
        #[arg(long)]
        epsilon: Option<f64>,
        /// Absolute regularization weight (l1 route).
        #[arg(long, conflicts_with = "lambda_rel")]
        lambda: Option<f64>,
        /// Regularization weight as a fraction of the data gradient.
        #[arg(long)]
        lambda_rel: Option<f64>,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-6)]
        rel_tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Ramp cutoff for the preprocess route.
        #[arg(long, default_value_t = 1.0)]
        cutoff: f64,
        #[arg(long)]
        sino: PathBuf,
        #[arg(long)]
        size: usize,
        #[arg(long)]
        pixel_size: Option<f64>,
        #[arg(long)]
        out_gx: PathBuf,
        #[arg(long)]
        out_gy: PathBuf,
        /// Objective-per-iteration CSV (l1 route).
        #[arg(long)]
        diag: Option<PathBuf>,
    },
    /// Edge map from reconstructed gradient components.
    Canny {
        #[arg(long)]
        gx: PathBuf,
        #[arg(long)]
        gy: PathBuf,
        /// Low threshold, fraction of the peak suppressed magnitude.
        #[arg(long, default_value_t = 0.1)]
        low: f64,
        #[arg(long, default_value_t = 0.25)]
        high: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a predicted edge map against ground truth.
    Score {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        radius: f64,
    },
    /// Export an IMGF1 image as a normalized 16-bit PGM for viewing.
    View {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scripted end-to-end experiments.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Sparse-view undersampling study on the head phantom.
    #[command(name = "sparse-view")]
    SparseView(SparseViewArgs),
}

#[derive(Args)]
struct SparseViewArgs {
    /// Sparse angle count (must divide the dense count).
    #[arg(long, default_value_t = 36)]
    angles: usize,
    #[arg(long, default_value_t = 180)]
    dense_angles: usize,
    #[arg(long, default_value_t = 128)]
    size: usize,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Smoothing width in pixels for both methods.
    #[arg(long, default_value_t = 3.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 300)]
    max_iters: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("TOMOGRAD_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        if t > 0 {
            // ignore failure: the pool may already exist in tests
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
    }
    let mut written: Vec<PathBuf> = Vec::new();
    if let Err(err) = run(cli.command, &mut written) {
        for path in &written {
            let _ = std::fs::remove_file(path);
        }
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(command: Command, written: &mut Vec<PathBuf>) -> Result<()> {
    match command {
        Command::Phantom {
            r#type,
            size,
            pixel_size,
            ellipses,
            out,
        } => {
            let spec = grid_spec(size, pixel_size)?;
            let specs = phantom_specs(r#type, spec, ellipses.as_deref())?;
            let img = rasterize(&specs, spec)?;
            written.push(out.clone());
            formats::write_image(&img, &out)
        }
        Command::Project {
            img,
            analytic,
            size,
            pixel_size,
            ellipses,
            n_angles,
            n_s,
            s_spacing,
            out,
        } => {
            let angles = AngleSet::evenly_distributed(n_angles)?;
            let sino = match (img, analytic) {
                (Some(path), None) => {
                    let image = formats::read_image(&path)?;
                    let det = detector_for(image.spec(), n_s, s_spacing)?;
                    tomograd::projector::forward_radon(&image, &angles, det)?
                }
                (None, Some(kind)) => {
                    let spec = grid_spec(
                        size.ok_or_else(|| anyhow!("--analytic needs --size"))?,
                        pixel_size,
                    )?;
                    let specs = phantom_specs(kind, spec, ellipses.as_deref())?;
                    let det = detector_for(spec, n_s, s_spacing)?;
                    analytic_sinogram(&specs, &angles, det)?
                }
                _ => bail!("give exactly one of --img or --analytic"),
            };
            written.push(out.clone());
            formats::write_sinogram(&sino, &out)
        }
        Command::Import { csv, s_spacing, out } => {
            let sino = formats::import_sinogram_csv(&csv, s_spacing)?;
            written.push(out.clone());
            formats::write_sinogram(&sino, &out)
        }
        Command::Subsample {
            input,
            keep_every,
            out,
        } => {
            let sino = formats::read_sinogram(&input)?;
            let sub = subsample_angles(&sino, keep_every)?;
            written.push(out.clone());
            formats::write_sinogram(&sub, &out)
        }
        Command::Noise {
            input,
            sigma_frac,
            seed,
            out,
        } => {
            let sino = formats::read_sinogram(&input)?;
            let noisy = add_noise(&sino, sigma_frac, seed)?;
            written.push(out.clone());
            formats::write_sinogram(&noisy, &out)
        }
        Command::Fbp {
            sino,
            size,
            pixel_size,
            cutoff,
            out,
        } => {
            let sino = formats::read_sinogram(&sino)?;
            let spec = recon_spec(size, pixel_size, &sino)?;
            let img = tomograd::fbp::reconstruct(&sino, spec, cutoff)?;
            written.push(out.clone());
            formats::write_image(&img, &out)
        }
        Command::Grad {
            method,
            epsilon,
            lambda,
            lambda_rel,
            max_iters,
            rel_tol,
            seed,
            cutoff,
            sino,
            size,
            pixel_size,
            out_gx,
            out_gy,
            diag,
        } => {
            let sino = formats::read_sinogram(&sino)?;
            let spec = recon_spec(size, pixel_size, &sino)?;
            let eps_px = epsilon.unwrap_or(match method {
                GradMethod::L1 => 6.0,
                _ => 3.0,
            });
            let eps = eps_px * spec.pixel_size;
            let field: GradientField = match method {
                GradMethod::FbpPreprocess => {
                    tomograd::fbp::gradient_preprocess(&sino, eps, spec, cutoff)?
                }
                GradMethod::FbpCombined => tomograd::fbp::gradient_combined(&sino, eps, spec)?,
                GradMethod::L1 => {
                    let lambda = match (lambda, lambda_rel) {
                        (Some(v), None) => Lambda::Absolute(v),
                        (None, Some(f)) => Lambda::RelativeToData(f),
                        (None, None) => Lambda::Absolute(0.01),
                        _ => unreachable!("clap enforces the conflict"),
                    };
                    let cfg = IstaConfig {
                        lambda,
                        max_iters,
                        rel_tol,
                        seed,
                        ..Default::default()
                    };
                    let (field, diags) = tomograd::sparse::gradient(&sino, eps, spec, &cfg)?;
                    if let Some(diag_path) = diag {
                        let mut csv = String::from("component,iter,objective\n");
                        for (d, comp) in diags.iter().zip(["gx", "gy"]) {
                            for (i, obj) in d.objectives.iter().enumerate() {
                                csv.push_str(&format!("{comp},{i},{obj:.12e}\n"));
                            }
                        }
                        written.push(diag_path.clone());
                        std::fs::write(&diag_path, csv)
                            .with_context(|| format!("writing {}", diag_path.display()))?;
                    }
                    field
                }
            };
            written.push(out_gx.clone());
            formats::write_image(&field.gx, &out_gx)?;
            written.push(out_gy.clone());
            formats::write_image(&field.gy, &out_gy)
        }
        Command::Canny {
            gx,
            gy,
            low,
            high,
            out,
        } => {
            let gx = formats::read_image(&gx)?;
            let gy = formats::read_image(&gy)?;
            let field = GradientField::new(gx, gy)?;
            let map = canny_from_gradient(&field, low, high)?;
            written.push(out.clone());
            formats::export_edge_map(&map, &out)
        }
        Command::Score {
            pred,
            truth,
            radius,
        } => {
            let pred = formats::read_edge_map_pgm(&pred)?;
            let truth = formats::read_edge_map_pgm(&truth)?;
            let (precision, recall, f1) = edge_f1(&pred, &truth, radius)?;
            println!("precision={precision:.6} recall={recall:.6} f1={f1:.6}");
            Ok(())
        }
        Command::View { input, out } => {
            let img = formats::read_image(&input)?;
            written.push(out.clone());
            written.push(formats::sidecar_path(&out));
            formats::export_view(&img, &out)
        }
        Command::Experiment(ExperimentCommand::SparseView(args)) => {
            let cfg = SparseViewConfig {
                size: args.size,
                pixel_size: 2.0 / args.size as f64,
                sparse_angles: args.angles,
                dense_angles: args.dense_angles,
                noise_frac: args.noise,
                seed: args.seed,
                epsilon_px: args.epsilon,
                max_iters: args.max_iters,
                ..Default::default()
            };
            let report = run_sparse_view(&cfg, &args.out_dir, written)?;
            for row in &report.rows {
                if row.selected {
                    println!(
                        "{} {}: precision={:.4} recall={:.4} f1={:.4} spurious={:.4}",
                        row.sampling, row.method, row.precision, row.recall, row.f1,
                        row.spurious_fraction
                    );
                }
            }
            println!("metrics written to {}", report.metrics_path.display());
            Ok(())
        }
    }
}

fn grid_spec(size: usize, pixel_size: Option<f64>) -> Result<GridSpec> {
    let h = pixel_size.unwrap_or(2.0 / size as f64);
    GridSpec::new(size, h).map_err(Into::into)
}

/// Reconstruction grid for a sinogram; the pixel size defaults to the
/// detector spacing.
fn recon_spec(size: usize, pixel_size: Option<f64>, sino: &Sinogram) -> Result<GridSpec> {
    let h = pixel_size.unwrap_or(sino.detector().s_spacing);
    GridSpec::new(size, h).map_err(Into::into)
}

fn detector_for(spec: GridSpec, n_s: Option<usize>, s_spacing: Option<f64>) -> Result<DetectorGrid> {
    let d = s_spacing.unwrap_or(spec.pixel_size);
    match n_s {
        Some(n) => DetectorGrid::new(n, d).map_err(Into::into),
        None => DetectorGrid::covering(spec, d).map_err(Into::into),
    }
}

fn phantom_specs(
    kind: PhantomKind,
    spec: GridSpec,
    ellipses: Option<&str>,
) -> Result<Vec<EllipseSpec>> {
    match kind {
        PhantomKind::SheppLogan => Ok(shepp_logan_specs(half_extent(spec))),
        PhantomKind::Disk => Ok(disk_specs(spec)),
        PhantomKind::Ellipses => {
            let text = ellipses.ok_or_else(|| {
                anyhow!("--type ellipses needs --ellipses \"amp,a,b,cx,cy,deg;...\"")
            })?;
            parse_ellipses(text)
        }
    }
}

fn parse_ellipses(text: &str) -> Result<Vec<EllipseSpec>> {
    let mut specs = Vec::new();
    for (i, chunk) in text.split(';').enumerate() {
        let chunk = chunk.trim();
        if chunk.is_empty() {
            continue;
        }
        let fields: Vec<f64> = chunk
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("ellipse {i}: fields must be numbers: {chunk:?}"))?;
        if fields.len() != 6 {
            bail!("ellipse {i}: expected 6 fields amp,a,b,cx,cy,deg, found {}", fields.len());
        }
        specs.push(EllipseSpec {
            amplitude: fields[0],
            semi_axes: (fields[1], fields[2]),
            center: (fields[3], fields[4]),
            rotation: fields[5].to_radians(),
        });
    }
    if specs.is_empty() {
        bail!("no ellipses given");
    }
    Ok(specs)
}

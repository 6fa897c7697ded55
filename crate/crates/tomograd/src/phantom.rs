//! Analytic test objects: ellipse phantoms with closed-form sinograms,
//! plus noise injection and angular subsampling.

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{AngleSet, DetectorGrid, EdgeMap, GridSpec, ImageGrid, Sinogram};

/// One ellipse of an analytic phantom, in physical coordinates.
#[derive(Debug, Clone, Copy)]
pub struct EllipseSpec {
    pub center: (f64, f64),
    /// Semi-axes (a along the rotated x1 axis, b along the rotated x2 axis).
    pub semi_axes: (f64, f64),
    /// Counterclockwise rotation, radians.
    pub rotation: f64,
    /// Value added inside the ellipse.
    pub amplitude: f64,
}

impl EllipseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.semi_axes.0 > 0.0 && self.semi_axes.1 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ellipse semi-axes must be positive, got {:?}",
                self.semi_axes
            )));
        }
        Ok(())
    }

    /// Whether the physical point lies inside (boundary included).
    pub fn contains(&self, x1: f64, x2: f64) -> bool {
        let dx = x1 - self.center.0;
        let dy = x2 - self.center.1;
        let (sin_a, cos_a) = self.rotation.sin_cos();
        let u = cos_a * dx + sin_a * dy;
        let v = -sin_a * dx + cos_a * dy;
        let (a, b) = self.semi_axes;
        (u / a) * (u / a) + (v / b) * (v / b) <= 1.0
    }

    /// Mirror image under x1 -> -x1.
    pub fn mirrored(&self) -> EllipseSpec {
        EllipseSpec {
            center: (-self.center.0, self.center.1),
            rotation: -self.rotation,
            ..*self
        }
    }
}

/// Standard ten-ellipse head phantom (the original low-contrast
/// parameter table), scaled so the canonical unit square maps to
/// `[-half_extent, half_extent]^2`.
pub fn shepp_logan_specs(half_extent: f64) -> Vec<EllipseSpec> {
    // columns: amplitude, a, b, x1, x2, rotation in degrees
    const TABLE: [(f64, f64, f64, f64, f64, f64); 10] = [
        (2.0, 0.69, 0.92, 0.0, 0.0, 0.0),
        (-0.98, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
        (-0.02, 0.1100, 0.3100, 0.22, 0.0, -18.0),
        (-0.02, 0.1600, 0.4100, -0.22, 0.0, 18.0),
        (0.01, 0.2100, 0.2500, 0.0, 0.35, 0.0),
        (0.01, 0.0460, 0.0460, 0.0, 0.1, 0.0),
        (0.01, 0.0460, 0.0460, 0.0, -0.1, 0.0),
        (0.01, 0.0460, 0.0230, -0.08, -0.605, 0.0),
        (0.01, 0.0230, 0.0230, 0.0, -0.605, 0.0),
        (0.01, 0.0230, 0.0460, 0.06, -0.605, 0.0),
    ];
    TABLE
        .iter()
        .map(|&(amp, a, b, x1, x2, deg)| EllipseSpec {
            center: (x1 * half_extent, x2 * half_extent),
            semi_axes: (a * half_extent, b * half_extent),
            rotation: deg.to_radians(),
            amplitude: amp,
        })
        .collect()
}

/// Centered disk of value 1 with radius a quarter of the field width.
pub fn disk_specs(spec: GridSpec) -> Vec<EllipseSpec> {
    let r = 0.25 * spec.n as f64 * spec.pixel_size;
    vec![EllipseSpec {
        center: (0.0, 0.0),
        semi_axes: (r, r),
        rotation: 0.0,
        amplitude: 1.0,
    }]
}

/// Rasterize a list of ellipses by pixel-center point sampling.
pub fn rasterize(specs: &[EllipseSpec], spec: GridSpec) -> Result<ImageGrid> {
    for e in specs {
        e.validate()?;
    }
    ImageGrid::from_fn(spec, |r, c| {
        let (x1, x2) = spec.pixel_center(r, c);
        specs
            .iter()
            .filter(|e| e.contains(x1, x2))
            .map(|e| e.amplitude)
            .sum()
    })
}

/// Standard head phantom rasterized on an `n`-by-`n` grid. The canonical
/// unit square spans the full grid.
pub fn shepp_logan(n: usize, pixel_size: f64) -> Result<ImageGrid> {
    if n < 32 {
        return Err(Error::InvalidParameter(format!(
            "head phantom needs n >= 32, got {n}"
        )));
    }
    let spec = GridSpec::new(n, pixel_size)?;
    rasterize(&shepp_logan_specs(half_extent(spec)), spec)
}

/// Half-width of a grid's physical field of view.
pub fn half_extent(spec: GridSpec) -> f64 {
    spec.n as f64 * spec.pixel_size / 2.0
}

/// Exact continuous Radon transform of a sum of ellipses: each ellipse
/// contributes `2 A a b sqrt(rho^2 - s'^2) / rho^2` inside its shadow,
/// where `rho^2 = a^2 cos^2(phi - alpha) + b^2 sin^2(phi - alpha)` and
/// `s'` is the offset relative to the projected center.
pub fn analytic_sinogram(
    specs: &[EllipseSpec],
    angles: &AngleSet,
    detector: DetectorGrid,
) -> Result<Sinogram> {
    if specs.is_empty() {
        return Err(Error::InvalidParameter("no ellipses given".into()));
    }
    for e in specs {
        e.validate()?;
    }
    let n_s = detector.n_s;
    let mut data = vec![0.0; angles.len() * n_s];
    for (k, &phi) in angles.angles().iter().enumerate() {
        let (sin_p, cos_p) = phi.sin_cos();
        let row = &mut data[k * n_s..(k + 1) * n_s];
        for e in specs {
            let (a, b) = e.semi_axes;
            let rel = phi - e.rotation;
            let (sin_r, cos_r) = rel.sin_cos();
            let rho2 = a * a * cos_r * cos_r + b * b * sin_r * sin_r;
            let s_center = e.center.0 * cos_p + e.center.1 * sin_p;
            for (i, o) in row.iter_mut().enumerate() {
                let sp = detector.offset(i) - s_center;
                let under = rho2 - sp * sp;
                if under > 0.0 {
                    *o += 2.0 * e.amplitude * a * b * under.sqrt() / rho2;
                }
            }
        }
    }
    Sinogram::from_vec(angles.clone(), detector, data)
}

/// One-pixel-wide rasterization of the ellipse boundaries: a pixel is an
/// edge pixel of an ellipse when it lies inside and a 4-neighbor lies
/// outside. Used as scoring ground truth.
pub fn boundary_edge_map(specs: &[EllipseSpec], spec: GridSpec) -> Result<EdgeMap> {
    for e in specs {
        e.validate()?;
    }
    let n = spec.n;
    let mut data = vec![false; n * n];
    for e in specs {
        let mut inside = vec![false; n * n];
        for r in 0..n {
            for c in 0..n {
                let (x1, x2) = spec.pixel_center(r, c);
                inside[r * n + c] = e.contains(x1, x2);
            }
        }
        for r in 0..n {
            for c in 0..n {
                if !inside[r * n + c] {
                    continue;
                }
                let mut boundary = false;
                if r == 0 || !inside[(r - 1) * n + c] {
                    boundary = true;
                } else if r + 1 == n || !inside[(r + 1) * n + c] {
                    boundary = true;
                } else if c == 0 || !inside[r * n + c - 1] {
                    boundary = true;
                } else if c + 1 == n || !inside[r * n + c + 1] {
                    boundary = true;
                }
                if boundary {
                    data[r * n + c] = true;
                }
            }
        }
    }
    EdgeMap::new(n, data)
}

/// Additive Gaussian noise with standard deviation
/// `sigma_frac * max |sinogram|`, deterministic per seed.
pub fn add_noise(sino: &Sinogram, sigma_frac: f64, seed: u64) -> Result<Sinogram> {
    if !(sigma_frac >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise fraction must be >= 0, got {sigma_frac}"
        )));
    }
    let sigma = sigma_frac * sino.max_abs();
    if sigma == 0.0 {
        return Ok(sino.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let data = sino.data().iter().map(|&v| v + normal.sample(&mut rng)).collect();
    Sinogram::from_vec(sino.angle_set().clone(), sino.detector(), data)
}

/// Keep every `keep_every`-th angle (indices 0, q, 2q, ...), rows copied
/// bit for bit.
pub fn subsample_angles(sino: &Sinogram, keep_every: usize) -> Result<Sinogram> {
    if keep_every < 1 {
        return Err(Error::InvalidParameter(
            "keep_every must be at least 1".into(),
        ));
    }
    if keep_every == 1 {
        return Ok(sino.clone());
    }
    let kept: Vec<usize> = (0..sino.n_angles()).step_by(keep_every).collect();
    let angles = AngleSet::new(
        kept.iter()
            .map(|&k| sino.angle_set().angles()[k])
            .collect(),
    )?;
    let mut data = Vec::with_capacity(kept.len() * sino.n_s());
    for &k in &kept {
        data.extend_from_slice(sino.row(k));
    }
    Sinogram::from_vec(angles, sino.detector(), data)
}

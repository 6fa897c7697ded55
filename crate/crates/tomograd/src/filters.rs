//! Detector-axis filters and image-domain kernels.
//!
//! Spatial kernels are sampled from their continuous counterparts and
//! carry the quadrature weight of the sampling step, so discrete
//! convolution approximates continuous convolution directly. Frequency
//! filters are continuous responses sampled on DFT bin frequencies
//! `omega_m = 2 pi m / (n_fft * s_spacing)` with the Nyquist bin on the
//! non-negative branch.
//!
//! The detector-domain derivative filter and the combined
//! ramp-plus-derivative filter both separate into an angle factor
//! `theta_j(phi)` times an angle-free 1D filter; `convolve_s` therefore
//! filters every row once and applies the angle factors as per-row
//! scalar weights.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::geometry::{Axis, ImageGrid, Sinogram};

const SQRT_TAU: f64 = 2.5066282746310002; // sqrt(2 pi)

/// One-dimensional detector-axis filter: either a centered spatial
/// kernel of odd length or a frequency response over `n_fft` DFT bins.
#[derive(Debug, Clone)]
pub struct Filter1D {
    repr: FilterRepr,
    sample_spacing: f64,
}

#[derive(Debug, Clone)]
enum FilterRepr {
    Spatial(Vec<f64>),
    Frequency(Vec<Complex64>),
}

impl Filter1D {
    /// Spatial kernel, odd length, centered at `(len-1)/2`. Taps are
    /// discrete weights (any quadrature scaling already applied).
    pub fn spatial(taps: Vec<f64>, sample_spacing: f64) -> Result<Self> {
        if taps.is_empty() || taps.len() % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "spatial kernels must have odd length, got {}",
                taps.len()
            )));
        }
        if !(sample_spacing > 0.0) {
            return Err(Error::InvalidParameter(
                "filter sample spacing must be positive".into(),
            ));
        }
        Ok(Self {
            repr: FilterRepr::Spatial(taps),
            sample_spacing,
        })
    }

    /// Frequency response on `response.len()` DFT bins (power of two).
    /// The strictly paired bins must be Hermitian-symmetric so real rows
    /// filter to real rows; DC and Nyquist are self-paired and exempt.
    pub fn frequency(response: Vec<Complex64>, sample_spacing: f64) -> Result<Self> {
        let n = response.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "frequency responses need a power-of-two bin count, got {n}"
            )));
        }
        if !(sample_spacing > 0.0) {
            return Err(Error::InvalidParameter(
                "filter sample spacing must be positive".into(),
            ));
        }
        let peak = response.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        for m in 1..n / 2 {
            if (response[m] - response[n - m].conj()).norm() > 1e-9 * peak.max(1e-300) {
                return Err(Error::InvalidParameter(format!(
                    "frequency response is not Hermitian at bin pair ({m}, {})",
                    n - m
                )));
            }
        }
        Ok(Self {
            repr: FilterRepr::Frequency(response),
            sample_spacing,
        })
    }

    pub fn sample_spacing(&self) -> f64 {
        self.sample_spacing
    }

    pub fn taps(&self) -> Option<&[f64]> {
        match &self.repr {
            FilterRepr::Spatial(t) => Some(t),
            FilterRepr::Frequency(_) => None,
        }
    }

    pub fn response(&self) -> Option<&[Complex64]> {
        match &self.repr {
            FilterRepr::Spatial(_) => None,
            FilterRepr::Frequency(r) => Some(r),
        }
    }
}

/// Signed frequency of DFT bin `m` out of `n_fft` at sample spacing `d`.
/// Bins above `n_fft/2` are the negative branch; Nyquist is positive.
#[inline]
pub fn fft_bin_frequency(m: usize, n_fft: usize, d: f64) -> f64 {
    let signed = if m <= n_fft / 2 {
        m as f64
    } else {
        m as f64 - n_fft as f64
    };
    2.0 * std::f64::consts::PI * signed / (n_fft as f64 * d)
}

fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Small dense 2D kernel sampled on the image pixel lattice.
///
/// `tap(i1, i2)` is the value at physical offset `(i1 * h, i2 * h)`;
/// storage follows the image convention (rows along -x2).
#[derive(Debug, Clone)]
pub struct Kernel2D {
    half: usize,
    data: Vec<f64>,
}

impl Kernel2D {
    fn from_fn(half: usize, mut f: impl FnMut(f64, f64) -> f64, h: f64) -> Self {
        let w = 2 * half + 1;
        let mut data = Vec::with_capacity(w * w);
        for kr in 0..w {
            let x2 = (half as f64 - kr as f64) * h;
            for kc in 0..w {
                let x1 = (kc as f64 - half as f64) * h;
                data.push(f(x1, x2));
            }
        }
        Self { half, data }
    }

    #[inline]
    pub fn half_width(&self) -> usize {
        self.half
    }

    /// Value at offset `(i1, i2)` in pixel steps along +x1 / +x2.
    #[inline]
    pub fn tap(&self, i1: isize, i2: isize) -> f64 {
        let w = (2 * self.half + 1) as isize;
        let kr = self.half as isize - i2;
        let kc = self.half as isize + i1;
        if kr < 0 || kr >= w || kc < 0 || kc >= w {
            0.0
        } else {
            self.data[(kr * w + kc) as usize]
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// Sampled isotropic Gaussian of width `epsilon`, scaled by
/// `pixel_size^2` so the taps sum to ~1. Stencil half-width is
/// `ceil(4 epsilon / pixel_size)`; the tail beyond is below the
/// discretization error at the tolerances used here.
pub fn gaussian_kernel_2d(epsilon: f64, pixel_size: f64) -> Result<Kernel2D> {
    check_epsilon(epsilon)?;
    let half = (4.0 * epsilon / pixel_size).ceil() as usize;
    let norm = pixel_size * pixel_size / (2.0 * std::f64::consts::PI * epsilon * epsilon);
    Ok(Kernel2D::from_fn(
        half,
        |x1, x2| norm * (-(x1 * x1 + x2 * x2) / (2.0 * epsilon * epsilon)).exp(),
        pixel_size,
    ))
}

/// Sampled partial derivative of the Gaussian along `axis`, scaled by
/// `pixel_size^2`. Dense-sampling reference for the reconstruction
/// routes: convolving an image with this kernel gives the smoothed
/// partial derivative directly in the image domain.
pub fn gaussian_derivative_kernel_2d(
    epsilon: f64,
    pixel_size: f64,
    axis: Axis,
) -> Result<Kernel2D> {
    check_epsilon(epsilon)?;
    let half = (4.0 * epsilon / pixel_size).ceil() as usize;
    let norm = pixel_size * pixel_size / (2.0 * std::f64::consts::PI * epsilon * epsilon);
    let e2 = epsilon * epsilon;
    Ok(Kernel2D::from_fn(
        half,
        |x1, x2| {
            let xj = match axis {
                Axis::X1 => x1,
                Axis::X2 => x2,
            };
            -(xj / e2) * norm * (-(x1 * x1 + x2 * x2) / (2.0 * e2)).exp()
        },
        pixel_size,
    ))
}

/// Dense 2D convolution with zero extension beyond the grid. Exact for
/// images whose support lies inside the grid.
pub fn convolve_image(img: &ImageGrid, kernel: &Kernel2D) -> ImageGrid {
    let n = img.n();
    let half = kernel.half_width() as isize;
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
        for (c, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for dr in -half..=half {
                let rq = r as isize - dr;
                if rq < 0 || rq >= n as isize {
                    continue;
                }
                for dc in -half..=half {
                    let cq = c as isize - dc;
                    if cq < 0 || cq >= n as isize {
                        continue;
                    }
                    // physical offset: x1 steps +dc, x2 steps -dr
                    acc += img.get(rq as usize, cq as usize) * kernel.tap(dc, -dr);
                }
            }
            *o = acc;
        }
    });
    ImageGrid::from_vec(img.spec(), out).expect("finite inputs convolve to finite outputs")
}

/// Angle-free profile of the detector-domain derivative filter,
/// `-s / (eps^3 sqrt(2 pi)) * exp(-s^2 / (2 eps^2))` — the derivative of
/// the unit-mass 1D Gaussian of width `eps`.
#[inline]
pub fn derivative_profile(s: f64, epsilon: f64) -> f64 {
    -s / (epsilon.powi(3) * SQRT_TAU) * (-(s * s) / (2.0 * epsilon * epsilon)).exp()
}

/// Detector-axis derivative kernel sampled on `[-4 eps, 4 eps]` and
/// scaled by `s_spacing`. Convolving a sinogram row with it (and the
/// per-angle weight `theta_j`) yields the data of the smoothed partial
/// derivative.
pub fn detector_derivative_kernel(epsilon: f64, s_spacing: f64) -> Result<Filter1D> {
    check_epsilon(epsilon)?;
    if !(s_spacing > 0.0) {
        return Err(Error::InvalidParameter(
            "detector spacing must be positive".into(),
        ));
    }
    let half = (4.0 * epsilon / s_spacing).ceil() as i64;
    let taps = (-half..=half)
        .map(|i| derivative_profile(i as f64 * s_spacing, epsilon) * s_spacing)
        .collect();
    Filter1D::spatial(taps, s_spacing)
}

/// Band-limited ramp filter `|omega| / (2 pi)` up to
/// `cutoff_fraction * omega_Nyquist`, zero beyond. Composed with the
/// backprojection quadrature this inverts the discrete Radon transform.
pub fn ram_lak_filter(n_fft: usize, s_spacing: f64, cutoff_fraction: f64) -> Result<Filter1D> {
    if !(cutoff_fraction > 0.0 && cutoff_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "cutoff fraction must lie in (0, 1], got {cutoff_fraction}"
        )));
    }
    if !n_fft.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "ramp filter length must be a power of two, got {n_fft}"
        )));
    }
    let omega_cut = cutoff_fraction * std::f64::consts::PI / s_spacing * (1.0 + 1e-12);
    let response = (0..n_fft)
        .map(|m| {
            let w = fft_bin_frequency(m, n_fft, s_spacing);
            let mag = if w.abs() <= omega_cut {
                w.abs() / (2.0 * std::f64::consts::PI)
            } else {
                0.0
            };
            Complex64::new(mag, 0.0)
        })
        .collect();
    Filter1D::frequency(response, s_spacing)
}

/// Combined ramp-and-derivative frequency filter,
/// `i omega |omega| exp(-eps^2 omega^2 / 2) / (2 pi)`. One pass of this
/// filter followed by backprojection yields a smoothed partial
/// derivative; the Gaussian factor is the built-in regularization, so no
/// extra cutoff is applied.
pub fn combined_derivative_filter(epsilon: f64, n_fft: usize, s_spacing: f64) -> Result<Filter1D> {
    check_epsilon(epsilon)?;
    if !n_fft.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "filter length must be a power of two, got {n_fft}"
        )));
    }
    let response = (0..n_fft)
        .map(|m| {
            let w = fft_bin_frequency(m, n_fft, s_spacing);
            let mag =
                w * w.abs() * (-(epsilon * epsilon * w * w) / 2.0).exp() / (2.0 * std::f64::consts::PI);
            Complex64::new(0.0, mag)
        })
        .collect();
    Filter1D::frequency(response, s_spacing)
}

/// Per-angle weights `theta_j(phi_k)` for the given axis.
pub fn direction_weights(angles: &crate::geometry::AngleSet, axis: Axis) -> Vec<f64> {
    angles.angles().iter().map(|&a| axis.theta(a)).collect()
}

/// Row-wise convolution of a sinogram along the detector axis, each row
/// scaled by its weight. Spatial kernels use FFT convolution zero-padded
/// to the next power of two holding the full linear convolution, with
/// the centered segment extracted; frequency filters multiply the padded
/// row spectrum bin by bin.
pub fn convolve_s(sino: &Sinogram, filter: &Filter1D, weights: &[f64]) -> Result<Sinogram> {
    if weights.len() != sino.n_angles() {
        return Err(Error::Dimension(format!(
            "{} per-angle weights for {} angles",
            weights.len(),
            sino.n_angles()
        )));
    }
    let d = sino.detector().s_spacing;
    if (filter.sample_spacing() - d).abs() > 1e-9 * d {
        return Err(Error::Dimension(format!(
            "filter sample spacing {} does not match detector spacing {d}",
            filter.sample_spacing()
        )));
    }
    let n_s = sino.n_s();
    let (spectrum, n_fft, offset) = match &filter.repr {
        FilterRepr::Spatial(taps) => {
            let n_fft = next_pow2(n_s + taps.len() - 1);
            let mut planner = FftPlanner::new();
            let fft = planner.plan_fft_forward(n_fft);
            let mut buf = vec![Complex64::default(); n_fft];
            for (b, &t) in buf.iter_mut().zip(taps.iter()) {
                *b = Complex64::new(t, 0.0);
            }
            fft.process(&mut buf);
            (buf, n_fft, (taps.len() - 1) / 2)
        }
        FilterRepr::Frequency(resp) => {
            if resp.len() < n_s {
                return Err(Error::Dimension(format!(
                    "frequency filter has {} bins for rows of {n_s} samples",
                    resp.len()
                )));
            }
            (resp.clone(), resp.len(), 0)
        }
    };

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n_fft);
    let ifft = planner.plan_fft_inverse(n_fft);

    let mut out = vec![0.0; sino.n_angles() * n_s];
    out.par_chunks_mut(n_s).enumerate().for_each(|(k, dst)| {
        let weight = weights[k];
        if weight == 0.0 {
            dst.fill(0.0);
            return;
        }
        let row = sino.row(k);
        let mut buf = vec![Complex64::default(); n_fft];
        for (b, &v) in buf.iter_mut().zip(row.iter()) {
            *b = Complex64::new(v, 0.0);
        }
        fft.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(spectrum.iter()) {
            *b *= s;
        }
        ifft.process(&mut buf);
        let scale = weight / n_fft as f64;
        for (i, o) in dst.iter_mut().enumerate() {
            *o = buf[i + offset].re * scale;
        }
    });
    Sinogram::from_vec(sino.angle_set().clone(), sino.detector(), out)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "smoothing width must be positive and finite, got {epsilon}"
        )));
    }
    Ok(())
}

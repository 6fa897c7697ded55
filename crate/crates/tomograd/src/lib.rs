//! Gradient reconstruction and edge detection directly from parallel-beam
//! CT sinograms.
//!
//! The pipeline stages are:
//!
//! 1. **geometry** — grids, angle sets, sinograms, and the coordinate
//!    conventions every other module relies on.
//! 2. **projector** — discrete forward Radon transform and its exact
//!    adjoint / scaled backprojection.
//! 3. **filters** — Gaussian and derivative-of-Gaussian kernels, the
//!    detector-domain derivative filter, ramp and combined frequency
//!    filters, and FFT convolution along the detector axis.
//! 4. **fbp** — filtered-backprojection reconstruction and the two
//!    FBP-type routes to the smoothed image gradient.
//! 5. **sparse** — l1-regularized gradient recovery via iterative soft
//!    thresholding.
//! 6. **edges** — Canny edge extraction from a reconstructed gradient
//!    field, plus edge-map scoring.
//! 7. **phantom** — analytic test objects, noise injection, and angular
//!    subsampling for controlled experiments.
//!
//! All compute paths are `f64`; all functions are pure (inputs are
//! immutable value objects) and safe to call concurrently.

pub mod edges;
mod error;
pub mod fbp;
pub mod filters;
pub mod geometry;
pub mod phantom;
pub mod projector;
pub mod sparse;

pub use error::{Error, Result};
pub use geometry::{
    gradient_magnitude, AngleSet, Axis, DetectorGrid, EdgeMap, GradientField, GridSpec, ImageGrid,
    Sinogram,
};

//! Sparsity-regularized gradient recovery.
//!
//! Each smoothed partial derivative solves
//! `min_f ||R f - y||_2^2 + lambda ||f||_1` by iterative soft
//! thresholding, where `y` is the sinogram preprocessed with the
//! detector-domain derivative kernel. The gradient of the quadratic term
//! is taken as `2 R^T (R f - y)`, so its Lipschitz constant is `2 L`
//! with `L = ||R^T R||_2`, the step is `step_safety / (2 L)` and the
//! shrink threshold is `step * lambda`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::filters::{convolve_s, detector_derivative_kernel, direction_weights};
use crate::geometry::{Axis, GradientField, GridSpec, ImageGrid, Sinogram};
use crate::projector::RadonOperator;

/// Linear map between flat coefficient vectors. The solver only ever
/// sees this trait, so tests can drive it with stand-in operators.
pub trait LinearOperator {
    fn domain_len(&self) -> usize;
    fn range_len(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64>;
}

impl LinearOperator for RadonOperator {
    fn domain_len(&self) -> usize {
        self.spec().n * self.spec().n
    }

    fn range_len(&self) -> usize {
        self.angle_set().len() * self.detector().n_s
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.range_len()];
        self.forward_into(x, &mut out);
        out
    }

    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.domain_len()];
        self.adjoint_into(y, &mut out);
        out
    }
}

/// Regularization weight: a fixed value, or a fraction of
/// `||2 R^T y||_inf` for scale-free experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Absolute(f64),
    RelativeToData(f64),
}

impl Lambda {
    fn validate(&self) -> Result<()> {
        let v = match self {
            Lambda::Absolute(v) | Lambda::RelativeToData(v) => *v,
        };
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "regularization weight must be >= 0 and finite, got {v}"
            )));
        }
        Ok(())
    }
}

/// Solver configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IstaConfig {
    pub lambda: Lambda,
    pub max_iters: usize,
    /// Stop when `|F_k - F_{k-1}| <= rel_tol * F_k`.
    pub rel_tol: f64,
    /// Step is `step_safety / (2 L)`; must lie in (0, 1).
    pub step_safety: f64,
    /// Power-method iterations for the operator-norm estimate.
    pub lipschitz_iters: usize,
    /// Seed of the power-method start vector.
    pub seed: u64,
}

impl Default for IstaConfig {
    fn default() -> Self {
        Self {
            lambda: Lambda::Absolute(0.01),
            max_iters: 500,
            rel_tol: 1e-6,
            step_safety: 0.9,
            lipschitz_iters: 30,
            seed: 0,
        }
    }
}

impl IstaConfig {
    fn validate(&self) -> Result<()> {
        self.lambda.validate()?;
        if self.max_iters < 1 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if !(self.step_safety > 0.0 && self.step_safety < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "step_safety must lie in (0, 1), got {}",
                self.step_safety
            )));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::InvalidParameter("rel_tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-solve record: objective value per iterate, iteration count,
/// whether the tolerance was hit, and the constants actually used.
#[derive(Debug, Clone)]
pub struct IstaDiagnostics {
    pub objectives: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub lipschitz: f64,
    pub step: f64,
    pub lambda: f64,
}

/// Elementwise shrink `sign(v) * max(|v| - t, 0)`.
pub fn soft_threshold(v: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "shrink threshold must be >= 0, got {t}"
        )));
    }
    Ok(v.iter().map(|&x| shrink(x, t)).collect())
}

#[inline]
fn shrink(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Largest eigenvalue of `R^T R` by power iteration from a seeded random
/// start; the returned sequence of Rayleigh quotients is non-decreasing.
pub fn estimate_lipschitz_history(
    op: &impl LinearOperator,
    iters: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if iters < 5 {
        return Err(Error::InvalidParameter(format!(
            "power method needs at least 5 iterations, got {iters}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b: Vec<f64> = (0..op.domain_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut history = Vec::with_capacity(iters);
    for _ in 0..iters {
        let a = op.apply_adjoint(&op.apply(&b));
        let bb = dot(&b, &b);
        if bb == 0.0 {
            history.push(0.0);
            break;
        }
        history.push(dot(&b, &a) / bb);
        let norm = dot(&a, &a).sqrt();
        if norm == 0.0 {
            // b is in the null space; the quotient is already 0
            history.push(0.0);
            break;
        }
        b = a.iter().map(|v| v / norm).collect();
    }
    Ok(history)
}

/// Final power-method estimate of `||R^T R||_2`.
pub fn estimate_lipschitz(op: &impl LinearOperator, iters: usize, seed: u64) -> Result<f64> {
    Ok(*estimate_lipschitz_history(op, iters, seed)?
        .last()
        .expect("history is never empty"))
}

/// Iterative soft thresholding for
/// `min_f ||op f - y||_2^2 + lambda ||f||_1`, started from zero.
pub fn ista_solve(
    op: &impl LinearOperator,
    y: &[f64],
    config: &IstaConfig,
) -> Result<(Vec<f64>, IstaDiagnostics)> {
    config.validate()?;
    if y.len() != op.range_len() {
        return Err(Error::Dimension(format!(
            "data has {} values, operator range is {}",
            y.len(),
            op.range_len()
        )));
    }
    let lambda = match config.lambda {
        Lambda::Absolute(v) => v,
        Lambda::RelativeToData(frac) => {
            let grad0 = op.apply_adjoint(y);
            frac * 2.0 * grad0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        }
    };
    let lipschitz = estimate_lipschitz(op, config.lipschitz_iters, config.seed)?;
    if !(lipschitz > 0.0) {
        return Err(Error::InvalidParameter(
            "operator norm estimate is zero; nothing to solve".into(),
        ));
    }
    let step = config.step_safety / (2.0 * lipschitz);
    let threshold = step * lambda;

    let mut f = vec![0.0; op.domain_len()];
    let mut objectives = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..config.max_iters {
        let mut residual = op.apply(&f);
        for (r, &yi) in residual.iter_mut().zip(y) {
            *r -= yi;
        }
        let obj = dot(&residual, &residual) + lambda * l1(&f);
        if !obj.is_finite() {
            return Err(Error::Divergence(format!(
                "objective became {obj} at iteration {it}"
            )));
        }
        objectives.push(obj);
        if it > 0 {
            let prev = objectives[it - 1];
            if (prev - obj).abs() <= config.rel_tol * obj {
                converged = true;
                break;
            }
        }
        let grad = op.apply_adjoint(&residual);
        for (fp, &gp) in f.iter_mut().zip(&grad) {
            *fp = shrink(*fp - 2.0 * step * gp, threshold);
        }
        iterations += 1;
    }
    if !converged {
        // record the objective of the final iterate as well
        let mut residual = op.apply(&f);
        for (r, &yi) in residual.iter_mut().zip(y) {
            *r -= yi;
        }
        let obj = dot(&residual, &residual) + lambda * l1(&f);
        if !obj.is_finite() {
            return Err(Error::Divergence("final objective is non-finite".into()));
        }
        objectives.push(obj);
    }

    Ok((
        f,
        IstaDiagnostics {
            objectives,
            iterations,
            converged,
            lipschitz,
            step,
            lambda,
        },
    ))
}

/// Sparsity-regularized smoothed gradient: preprocess the sinogram with
/// the derivative kernel per axis, then solve the l1 problem per
/// component.
pub fn gradient(
    sino: &Sinogram,
    epsilon: f64,
    spec: GridSpec,
    config: &IstaConfig,
) -> Result<(GradientField, [IstaDiagnostics; 2])> {
    let op = RadonOperator::new(spec, sino.angle_set(), sino.detector())?;
    let kernel = detector_derivative_kernel(epsilon, sino.detector().s_spacing)?;
    let mut comps = [None, None];
    let mut diags = [None, None];
    for ((slot, diag), axis) in comps.iter_mut().zip(diags.iter_mut()).zip([Axis::X1, Axis::X2]) {
        let weights = direction_weights(sino.angle_set(), axis);
        let rhs = convolve_s(sino, &kernel, &weights)?;
        let (flat, d) = ista_solve(&op, rhs.data(), config)?;
        *slot = Some(ImageGrid::from_vec(spec, flat)?);
        *diag = Some(d);
    }
    let [gx, gy] = comps;
    let [dx, dy] = diags;
    Ok((
        GradientField::new(gx.unwrap(), gy.unwrap())?,
        [dx.unwrap(), dy.unwrap()],
    ))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

//! Fringe normalization, weighted sinusoid fitting, and visibility extraction.
//!
//! The fit model is `A sin²(f x + p) + B`, whose visibility is `A / (A + 2B)`.
//! Fitting is damped Gauss-Newton (Levenberg-Marquardt) on the binomially
//! weighted residuals.

use std::f64::consts::PI;

use log::warn;
use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interferometer::Estimate;
use crate::photonsim::Interferogram;

pub const MIN_POINTS: usize = 8;
pub const MAX_ITERATIONS: usize = 200;
pub const RELATIVE_TOLERANCE: f64 = 1e-10;
const INITIAL_DAMPING: f64 = 1e-3;
const DAMPING_FACTOR: f64 = 10.0;
const MAX_DAMPING: f64 = 1e16;
const PHASE_GRID: usize = 180;
/// A fit whose visibility is below this many sigmas is flagged low-signal.
pub const LOW_SIGNAL_SIGMAS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least {MIN_POINTS} samples with nonzero counts, got {0}")]
    TooFewPoints(usize),
    #[error("fit is invalid: A + 2B = {0} is not positive")]
    InvalidFit(f64),
    #[error("gradient has {gradient} entries but covariance is {rows}x{cols}")]
    DimensionMismatch { gradient: usize, rows: usize, cols: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    D1,
    D2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub phase: f64,
    pub ratio: f64,
    pub sigma_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedFringe {
    pub points: Vec<FringePoint>,
}

impl NormalizedFringe {
    /// Noiseless fringe sampled from `params` with a common sigma.
    pub fn synthetic(params: &SinusoidParams, phases: &[f64], sigma: f64) -> Self {
        let points = phases
            .iter()
            .map(|&x| FringePoint {
                phase: x,
                ratio: params.eval(x),
                sigma_ratio: sigma,
            })
            .collect();
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// D1 fraction of the counts at each step.
pub fn normalize(ig: &Interferogram) -> Result<NormalizedFringe, FitError> {
    normalize_detector(ig, Detector::D1)
}

/// Fraction of counts in `detector`, with a binomial sigma floored at
/// `1/(n+2)`. Steps without counts are dropped.
pub fn normalize_detector(ig: &Interferogram, detector: Detector) -> Result<NormalizedFringe, FitError> {
    let points: Vec<_> = ig
        .samples
        .iter()
        .filter(|s| s.total() > 0)
        .map(|s| {
            let n = s.total() as f64;
            let k = match detector {
                Detector::D1 => s.counts_d1,
                Detector::D2 => s.counts_d2,
            } as f64;
            let ratio = k / n;
            let binomial = (ratio * (1.0 - ratio) / n).sqrt();
            FringePoint {
                phase: s.phase_rad,
                ratio,
                sigma_ratio: binomial.max(1.0 / (n + 2.0)),
            }
        })
        .collect();
    if points.len() < MIN_POINTS {
        return Err(FitError::TooFewPoints(points.len()));
    }
    Ok(NormalizedFringe { points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidParams {
    pub a: f64,
    pub b: f64,
    pub f: f64,
    pub p: f64,
}

impl SinusoidParams {
    pub const fn new(a: f64, b: f64, f: f64, p: f64) -> Self {
        Self { a, b, f, p }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = (self.f * x + self.p).sin();
        self.a * s * s + self.b
    }

    /// Partial derivatives with respect to (A, B, f, p).
    pub fn gradient(&self, x: f64) -> [f64; 4] {
        let u = self.f * x + self.p;
        let s = u.sin();
        let s2u = (2.0 * u).sin();
        [s * s, 1.0, self.a * s2u * x, self.a * s2u]
    }

    fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.a, self.b, self.f, self.p)
    }

    fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    /// `A / (A + 2B)`, equal to `(max - min)/(max + min)` of the curve.
    pub fn visibility(&self) -> f64 {
        self.a / (self.a + 2.0 * self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: SinusoidParams,
    /// Row-major covariance of (A, B, f, p).
    pub covariance: [[f64; 4]; 4],
    pub visibility: Estimate,
    pub converged: bool,
    pub low_signal: bool,
    pub iterations: usize,
    /// `√χ²` of the weighted residuals.
    pub residual_norm: f64,
    pub reduced_chi2: f64,
    pub n_points: usize,
}

fn chi2(params: &SinusoidParams, fringe: &NormalizedFringe) -> f64 {
    fringe
        .points
        .iter()
        .map(|pt| {
            let r = (pt.ratio - params.eval(pt.phase)) / pt.sigma_ratio;
            r * r
        })
        .sum()
}

fn normal_equations(params: &SinusoidParams, fringe: &NormalizedFringe) -> (Matrix4<f64>, Vector4<f64>) {
    let mut jtj = Matrix4::zeros();
    let mut jtr = Vector4::zeros();
    for pt in &fringe.points {
        let w = 1.0 / pt.sigma_ratio;
        let g = Vector4::from(params.gradient(pt.phase)) * w;
        let r = (pt.ratio - params.eval(pt.phase)) * w;
        jtj += g * g.transpose();
        jtr += g * r;
    }
    (jtj, jtr)
}

/// Starting point: baseline and amplitude from the extremes, frequency from
/// the strongest nonzero periodogram peak, phase from a grid search.
pub fn initial_guess(fringe: &NormalizedFringe) -> SinusoidParams {
    let pts = &fringe.points;
    let (min, max) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.ratio), hi.max(p.ratio))
    });
    let omega = dominant_angular_frequency(fringe);
    let (a0, b0, f0) = (max - min, min, 0.5 * omega);

    let p0 = (0..PHASE_GRID)
        .map(|k| PI * k as f64 / PHASE_GRID as f64)
        .map(|p| (p, chi2(&SinusoidParams::new(a0, b0, f0, p), fringe)))
        .fold(
            (0.0, f64::INFINITY),
            |best, (p, c)| if c < best.1 { (p, c) } else { best },
        )
        .0;
    SinusoidParams::new(a0, b0, f0, p0)
}

fn periodogram(fringe: &NormalizedFringe, mean: f64, omega: f64) -> f64 {
    let (c, s) = fringe.points.iter().fold((0.0, 0.0), |(c, s), p| {
        let y = p.ratio - mean;
        (c + y * (omega * p.phase).cos(), s + y * (omega * p.phase).sin())
    });
    c * c + s * s
}

/// Angular frequency of the fringe in `x` (twice the `f` of the sin² model).
fn dominant_angular_frequency(fringe: &NormalizedFringe) -> f64 {
    let n = fringe.points.len();
    let mean = fringe.points.iter().map(|p| p.ratio).sum::<f64>() / n as f64;
    let (lo, hi) = fringe
        .points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.phase), hi.max(p.phase))
        });
    // span of a uniform grid of n samples, end point excluded
    let period = (hi - lo) * n as f64 / (n - 1) as f64;
    if !(period > 0.0) {
        return 1.0;
    }
    let bin = 2.0 * PI / period;
    let k_best = (1..=n / 2)
        .map(|k| (k, periodogram(fringe, mean, bin * k as f64)))
        .fold(
            (1, f64::NEG_INFINITY),
            |best, (k, pw)| if pw > best.1 { (k, pw) } else { best },
        )
        .0;
    // refine between the neighbouring bins
    let steps = 40;
    let start = (k_best as f64 - 1.0).max(0.5);
    let end = k_best as f64 + 1.0;
    (0..=steps)
        .map(|i| start + (end - start) * i as f64 / steps as f64)
        .map(|k| (k, periodogram(fringe, mean, bin * k)))
        .fold((k_best as f64, f64::NEG_INFINITY), |best, (k, pw)| {
            if pw > best.1 {
                (k, pw)
            } else {
                best
            }
        })
        .0
        * bin
}

fn damped_solve(jtj: &Matrix4<f64>, jtr: &Vector4<f64>, lambda: f64) -> Option<Vector4<f64>> {
    let scale = jtj.diagonal().max().max(1e-300);
    let mut m = *jtj;
    for i in 0..4 {
        let d = jtj[(i, i)].max(1e-12 * scale);
        m[(i, i)] += lambda * d;
    }
    m.cholesky().map(|c| c.solve(jtr)).or_else(|| m.lu().solve(jtr))
}

/// Canonical parameters: `A >= 0`, `f >= 0`, `p` in `[0, π)`. Returns the
/// Jacobian of the reparameterization for transforming the covariance.
fn canonicalize(mut params: SinusoidParams) -> (SinusoidParams, Matrix4<f64>) {
    let mut t = Matrix4::identity();
    if params.a < 0.0 {
        // -|A| sin²u + B = |A| sin²(u + π/2) + B - |A|
        params.b += params.a;
        params.a = -params.a;
        params.p += 0.5 * PI;
        let step = Matrix4::new(
            -1.0, 0.0, 0.0, 0.0, //
            1.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        );
        t = step * t;
    }
    if params.f < 0.0 {
        params.f = -params.f;
        params.p = -params.p;
        t = Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, -1.0, -1.0)) * t;
    }
    params.p = params.p.rem_euclid(PI);
    if params.p >= PI {
        params.p = 0.0;
    }
    (params, t)
}

fn covariance_matrix(jtj: &Matrix4<f64>, reduced_chi2: f64) -> Matrix4<f64> {
    // singular when A = 0 (f and p unconstrained)
    let inv = jtj
        .try_inverse()
        .filter(|m| m.iter().all(|x| x.is_finite()))
        .unwrap_or_else(|| {
            jtj.pseudo_inverse(1e-12 * jtj.norm())
                .unwrap_or_else(|_| Matrix4::zeros())
        });
    let c = inv * reduced_chi2;
    (c + c.transpose()) * 0.5
}

/// Weighted least-squares fit of `A sin²(f x + p) + B`.
///
/// Returns `Err` only for unusable input or a fit with `A + 2B <= 0`;
/// non-convergence and weak fringes are reported through flags.
pub fn fit_sinusoid(fringe: &NormalizedFringe) -> Result<FitResult, FitError> {
    let n = fringe.points.len();
    if n < MIN_POINTS {
        return Err(FitError::TooFewPoints(n));
    }
    let mut params = initial_guess(fringe);
    let mut current = chi2(&params, fringe);
    let mut lambda = INITIAL_DAMPING;
    let mut converged = false;
    let mut iterations = 0;
    let floor = 1e-28 * n as f64;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        if current <= floor {
            converged = true;
            break;
        }
        let (jtj, jtr) = normal_equations(&params, fringe);
        let Some(step) = damped_solve(&jtj, &jtr, lambda) else {
            lambda *= DAMPING_FACTOR;
            if lambda > MAX_DAMPING {
                converged = true;
                break;
            }
            continue;
        };
        let trial = SinusoidParams::from_vector(&(params.to_vector() + step));
        let trial_chi2 = chi2(&trial, fringe);
        if trial_chi2.is_finite() && trial_chi2 <= current {
            let reduction = (current - trial_chi2) / current;
            params = trial;
            current = trial_chi2;
            lambda = (lambda / DAMPING_FACTOR).max(1e-12);
            if reduction < RELATIVE_TOLERANCE {
                converged = true;
                break;
            }
        } else {
            lambda *= DAMPING_FACTOR;
            if lambda > MAX_DAMPING {
                // no descent direction left at working precision
                converged = true;
                break;
            }
        }
    }

    let dof = n.saturating_sub(4).max(1) as f64;
    let reduced_chi2 = current / dof;
    let (jtj, _) = normal_equations(&params, fringe);
    let raw_cov = covariance_matrix(&jtj, reduced_chi2);
    let (params, t) = canonicalize(params);
    let cov = t * raw_cov * t.transpose();
    let mut covariance = [[0.0; 4]; 4];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c = cov[(i, j)];
        }
    }

    let mut result = FitResult {
        params,
        covariance,
        visibility: Estimate::new(f64::NAN, f64::NAN),
        converged,
        low_signal: false,
        iterations,
        residual_norm: current.sqrt(),
        reduced_chi2,
        n_points: n,
    };
    result.visibility = visibility_from_fit(&result)?;
    result.low_signal = params.a == 0.0 || result.visibility.value < LOW_SIGNAL_SIGMAS * result.visibility.sigma;
    Ok(result)
}

/// Normalize one detector of an interferogram and fit it.
pub fn fit_interferogram(ig: &Interferogram, detector: Detector) -> Result<FitResult, FitError> {
    fit_sinusoid(&normalize_detector(ig, detector)?)
}

/// `V = A/(A+2B)` with sigma from the (A, B) covariance block.
pub fn visibility_from_fit(fit: &FitResult) -> Result<Estimate, FitError> {
    let SinusoidParams { a, b, .. } = fit.params;
    let denom = a + 2.0 * b;
    if !(denom > 0.0) {
        return Err(FitError::InvalidFit(denom));
    }
    let d2 = denom * denom;
    let gradient = [2.0 * b / d2, -2.0 * a / d2];
    let block = vec![
        vec![fit.covariance[0][0], fit.covariance[0][1]],
        vec![fit.covariance[1][0], fit.covariance[1][1]],
    ];
    Ok(Estimate::new(a / denom, propagate(&gradient, &block)?))
}

/// `√(gᵀ C g)`; a slightly negative quadratic form is clamped to zero.
pub fn propagate(gradient: &[f64], covariance: &[Vec<f64>]) -> Result<f64, FitError> {
    let n = gradient.len();
    let cols = covariance.first().map_or(0, Vec::len);
    if covariance.len() != n || covariance.iter().any(|row| row.len() != n) {
        return Err(FitError::DimensionMismatch {
            gradient: n,
            rows: covariance.len(),
            cols,
        });
    }
    let q: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| gradient[i] * covariance[i][j] * gradient[j])
        .sum();
    if q < 0.0 {
        warn!("negative variance {q:e} in error propagation, clamped to zero");
        return Ok(0.0);
    }
    Ok(q.sqrt())
}

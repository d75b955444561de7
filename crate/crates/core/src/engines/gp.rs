//! Gaussian-process surrogate with expected-improvement acquisition.
//!
//! The kernel is squared-exponential on unit-scaled grid coordinates with the
//! length scale pinned to one grid step per axis. Scores are standardized,
//! so the signal variance is one and the only free hyperparameter is the
//! noise variance, chosen by maximum marginal likelihood over [`noise_grid`].

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use statrs::function::erf::erfc;

use super::space_filling::UnitGrid;
use super::{to_arm, Engine, Exhausted, History};
use crate::rng::EngineRng;
use crate::{ArmIndex, GridSpec};

/// Candidate noise variances (standardized units): four per decade over
/// `[1e-8, 1e1]`.
pub fn noise_grid() -> impl Iterator<Item = f64> {
    (0..=36).map(|i| 10f64.powf(-8.0 + i as f64 / 4.0))
}

#[derive(Debug, Clone)]
pub struct GaussianProcess {
    points: Vec<Vec<f64>>,
    inv_lengthscales: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    noise: f64,
    log_likelihood: f64,
    y_mean: f64,
    y_scale: f64,
}

impl GaussianProcess {
    /// Fits the noise variance by maximum likelihood over [`noise_grid`];
    /// ties go to the smaller noise.
    pub fn fit(points: Vec<Vec<f64>>, y: &[f64], lengthscales: &[f64]) -> Self {
        let mut best: Option<Self> = None;
        for noise in noise_grid() {
            if let Some(gp) = Self::with_noise(points.clone(), y, lengthscales, noise) {
                if best
                    .as_ref()
                    .is_none_or(|b| gp.log_likelihood > b.log_likelihood)
                {
                    best = Some(gp);
                }
            }
        }
        best.expect("the largest noise level always yields a positive-definite system")
    }

    /// Conditions on the data with a fixed noise variance (standardized
    /// units). `None` if the covariance is not numerically positive definite.
    pub fn with_noise(
        points: Vec<Vec<f64>>,
        y: &[f64],
        lengthscales: &[f64],
        noise: f64,
    ) -> Option<Self> {
        assert_eq!(points.len(), y.len());
        assert!(!y.is_empty());
        let n = y.len();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let ys = DVector::from_iterator(n, y.iter().map(|v| (v - y_mean) / y_scale));

        let inv_lengthscales: Vec<f64> = lengthscales.iter().map(|l| 1.0 / l).collect();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = kernel(&inv_lengthscales, &points[i], &points[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
            k[(i, i)] += noise;
        }
        let chol = Cholesky::new(k)?;
        let alpha = chol.solve(&ys);
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
        let log_likelihood =
            -0.5 * ys.dot(&alpha) - log_det - 0.5 * n as f64 * (2.0 * PI).ln();
        if !log_likelihood.is_finite() {
            return None;
        }
        Some(Self {
            points,
            inv_lengthscales,
            chol,
            alpha,
            noise,
            log_likelihood,
            y_mean,
            y_scale,
        })
    }

    /// Fitted noise variance in standardized units.
    pub fn noise_variance(&self) -> f64 {
        self.noise
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// Standard deviation used to standardize the observations.
    pub fn y_scale(&self) -> f64 {
        self.y_scale
    }

    /// Posterior mean and latent-function variance at `x`, in score units.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let ks = DVector::from_iterator(
            self.points.len(),
            self.points
                .iter()
                .map(|p| kernel(&self.inv_lengthscales, x, p)),
        );
        let mean = ks.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&ks)
            .expect("non-singular factor");
        let var = (1.0 - v.norm_squared()).max(0.0);
        (
            self.y_mean + self.y_scale * mean,
            self.y_scale * self.y_scale * var,
        )
    }
}

fn kernel(inv_ls: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let r2: f64 = a
        .iter()
        .zip(b)
        .zip(inv_ls)
        .map(|((x, y), il)| ((x - y) * il).powi(2))
        .sum();
    (-0.5 * r2).exp()
}

/// Expected improvement of a Gaussian `(mean, sd)` over `best`.
pub(crate) fn expected_improvement(mean: f64, sd: f64, best: f64) -> f64 {
    let gain = mean - best;
    if sd <= 1e-12 {
        return gain.max(0.0);
    }
    let z = gain / sd;
    let cdf = 0.5 * erfc(-z / std::f64::consts::SQRT_2);
    let pdf = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    gain * cdf + sd * pdf
}

pub(crate) struct GpEi {
    xi: f64,
    warm_start: usize,
    units: UnitGrid,
    lengthscales: Vec<f64>,
}

impl GpEi {
    pub(crate) fn new(spec: &GridSpec, xi: f64, warm_start: usize) -> Self {
        let lengthscales = spec
            .sizes()
            .iter()
            .map(|&n| if n > 1 { 1.0 / (n - 1) as f64 } else { 1.0 })
            .collect();
        Self {
            xi,
            warm_start,
            units: UnitGrid::new(spec),
            lengthscales,
        }
    }
}

impl Engine for GpEi {
    fn suggest(
        &mut self,
        history: &History,
        spec: &GridSpec,
        rng: &mut EngineRng,
    ) -> Result<ArmIndex, Exhausted> {
        if history.len() < self.warm_start {
            return to_arm(spec, self.units.maximin(history, rng));
        }
        let observed = history.score_map(spec.len());
        let (points, y): (Vec<Vec<f64>>, Vec<f64>) = observed
            .iter()
            .enumerate()
            .filter_map(|(k, s)| s.map(|s| (self.units.point(k).to_vec(), s)))
            .unzip();
        let gp = GaussianProcess::fit(points, &y, &self.lengthscales);
        let best = y.iter().copied().fold(f64::NEG_INFINITY, f64::max) + self.xi * gp.y_scale();

        let mut pick: Option<(f64, usize)> = None;
        for k in (0..spec.len()).filter(|&k| observed[k].is_none()) {
            let (mean, var) = gp.predict(self.units.point(k));
            let ei = expected_improvement(mean, var.sqrt(), best);
            if pick.is_none_or(|(b, _)| ei > b) {
                pick = Some((ei, k));
            }
        }
        to_arm(spec, pick.map(|(_, k)| k))
    }
}

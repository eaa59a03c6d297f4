//! Generalized Extreme Value distribution.
//!
//! With `t(x) = 1 + κ (x - μ) / σ` the distribution function is
//! `F(x) = exp(-t^{-1/κ})` for κ ≠ 0 and `F(x) = exp(-exp(-(x - μ)/σ))` in
//! the Gumbel limit κ = 0. Positive κ gives a heavy upper tail and a lower
//! end point, negative κ a bounded upper tail. Shapes with `|κ| < KAPPA_EPS`
//! are evaluated through the Gumbel formulas.

mod fit;
mod solve;

pub use fit::{fit_gev_mle, fit_gev_with, fit_gumbel_mle, FitOptions, FitReport, MIN_FIT_SAMPLES};

use rand_distr::{Distribution, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Shapes closer to zero than this use the Gumbel branch. The general
/// branch is evaluated through `ln_1p`/`expm1`, so it stays accurate far
/// below this; the cut-off only has to keep the switch itself smooth.
pub const KAPPA_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub kappa: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl GevParams {
    pub fn new(kappa: f64, mu: f64, sigma: f64) -> Result<Self> {
        let p = GevParams { kappa, mu, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn gumbel(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(0.0, mu, sigma)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.mu.is_finite() && self.sigma.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "non-finite parameters {self:?}"
            )));
        }
        if self.sigma <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "scale {} must be positive",
                self.sigma
            )));
        }
        Ok(())
    }

    pub fn is_gumbel(&self) -> bool {
        self.kappa.abs() < KAPPA_EPS
    }

    /// Standardised variable `(x - μ) / σ`.
    fn z(&self, x: f64) -> f64 {
        (x - self.mu) / self.sigma
    }

    /// `-ln F(x)`, i.e. `t^{-1/κ}` (or `e^{-z}`), with the out-of-support
    /// side mapped to `+∞` (below the lower end) or `0` (above the upper end).
    fn neg_log_cdf(&self, x: f64) -> f64 {
        let z = self.z(x);
        if self.is_gumbel() {
            return (-z).exp();
        }
        let kz = self.kappa * z;
        if kz <= -1.0 {
            return if self.kappa > 0.0 { f64::INFINITY } else { 0.0 };
        }
        (-kz.ln_1p() / self.kappa).exp()
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFinite(x));
        }
        let z = self.z(x);
        if self.is_gumbel() {
            return Ok((-z - (-z).exp()).exp() / self.sigma);
        }
        let kz = self.kappa * z;
        if kz <= -1.0 {
            return Ok(0.0);
        }
        let ln_t = kz.ln_1p();
        let s = (-ln_t / self.kappa).exp();
        Ok((-(1.0 + 1.0 / self.kappa) * ln_t - s).exp() / self.sigma)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = self.z(x);
        if self.is_gumbel() {
            return -self.sigma.ln() - z - (-z).exp();
        }
        let kz = self.kappa * z;
        if kz <= -1.0 {
            return f64::NEG_INFINITY;
        }
        let ln_t = kz.ln_1p();
        -self.sigma.ln() - (1.0 + 1.0 / self.kappa) * ln_t - (-ln_t / self.kappa).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        (-self.neg_log_cdf(x)).exp()
    }

    /// `1 - F(x)`, computed without cancellation in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        -(-self.neg_log_cdf(x)).exp_m1()
    }

    /// Inverse of the distribution function on `(0, 1)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        Ok(self.at_neg_log(-p.ln()))
    }

    /// Point `x` with `-ln F(x) = y`.
    fn at_neg_log(&self, y: f64) -> f64 {
        let ln_y = y.ln();
        if self.is_gumbel() {
            self.mu - self.sigma * ln_y
        } else {
            // μ − (σ/κ)(1 − y^{−κ}), written with expm1 so it stays accurate near κ = 0
            self.mu + self.sigma * (-self.kappa * ln_y).exp_m1() / self.kappa
        }
    }

    /// Log-likelihood of `samples`; `-∞` if any sample falls outside the support.
    pub fn log_likelihood(&self, samples: &[f64]) -> f64 {
        samples.iter().map(|&x| self.ln_pdf(x)).sum()
    }
}

pub fn pdf(x: f64, p: &GevParams) -> Result<f64> {
    p.pdf(x)
}

pub fn cdf(x: f64, p: &GevParams) -> f64 {
    p.cdf(x)
}

/// Threshold `λ` with `P(X > λ) = pf`:
/// `μ − (σ/κ)(1 − y^{−κ})`, or `μ − σ ln y` for the Gumbel branch,
/// where `y = −ln(1 − pf)`.
pub fn threshold_for_pf(pf: f64, p: &GevParams) -> Result<f64> {
    if !(pf > 0.0 && pf < 1.0) {
        return Err(Error::ProbabilityOutOfRange(pf));
    }
    p.validate()?;
    let y = -(-pf).ln_1p();
    Ok(p.at_neg_log(y))
}

/// `n` inverse-CDF draws from `p`.
pub fn sample_gev(p: &GevParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    p.validate()?;
    if n == 0 {
        return Err(Error::InvalidParams(
            "sample count must be at least 1".into(),
        ));
    }
    let mut rng = seed::rng(seed);
    Ok((0..n)
        .map(|_| {
            let u: f64 = Open01.sample(&mut rng);
            p.at_neg_log(-u.ln())
        })
        .collect())
}

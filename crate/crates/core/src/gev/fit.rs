//! Maximum-likelihood fitting.
//!
//! The fit runs in two stages. The Gumbel (κ = 0) likelihood is maximised
//! first: eliminating μ from its two score equations leaves a scalar
//! equation in σ,
//!
//! ```text
//! σ = mean(N) − Σ N_i e^{−N_i/σ} / Σ e^{−N_i/σ}
//! ```
//!
//! after which `μ = −σ ln( (1/L) Σ e^{−N_i/σ} )`. With (μ, σ) held at those
//! values the shape is found by solving `∂l/∂κ = 0` for the profile
//! likelihood over a bracket of shapes that keeps every sample inside the
//! support. An optional joint refinement then maximises the full
//! three-parameter likelihood starting from the two-stage estimate.
//!
//! All work happens on standardised data `(N − mean)/sd` and is mapped back
//! at the end, which makes the estimates exactly affine-equivariant up to
//! rounding.

use serde::{Deserialize, Serialize};

use super::solve::{brent, nelder_mead_max};
use super::{GevParams, KAPPA_EPS};
use crate::error::{Error, Result};

pub const MIN_FIT_SAMPLES: usize = 30;

/// Points probed across the κ bracket when looking for sign changes of the
/// profile score.
const KAPPA_SCAN_POINTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Closed interval searched for the shape parameter.
    pub kappa_bracket: (f64, f64),
    /// Polish the two-stage estimate with a joint maximisation over all
    /// three parameters.
    pub joint_refinement: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-9,
            max_iter: 200,
            kappa_bracket: (-0.5, 0.5),
            joint_refinement: false,
        }
    }
}

impl FitOptions {
    pub fn with_tolerance(tol: f64, max_iter: usize) -> Self {
        FitOptions {
            tol,
            max_iter,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "FitReportJson", try_from = "FitReportJson")]
pub struct FitReport {
    pub params: GevParams,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub sample_count: usize,
    pub tol: f64,
    /// Human-readable remarks about fallbacks taken during the fit.
    pub notes: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct SolverJson {
    tol: f64,
    iterations: usize,
}

#[derive(Serialize, Deserialize)]
struct FitReportJson {
    kappa: f64,
    mu: f64,
    sigma: f64,
    log_likelihood: f64,
    converged: bool,
    sample_count: usize,
    solver: SolverJson,
}

impl From<FitReport> for FitReportJson {
    fn from(r: FitReport) -> Self {
        FitReportJson {
            kappa: r.params.kappa,
            mu: r.params.mu,
            sigma: r.params.sigma,
            log_likelihood: r.log_likelihood,
            converged: r.converged,
            sample_count: r.sample_count,
            solver: SolverJson {
                tol: r.tol,
                iterations: r.iterations,
            },
        }
    }
}

impl TryFrom<FitReportJson> for FitReport {
    type Error = Error;

    fn try_from(j: FitReportJson) -> Result<Self> {
        Ok(FitReport {
            params: GevParams::new(j.kappa, j.mu, j.sigma)?,
            log_likelihood: j.log_likelihood,
            iterations: j.solver.iterations,
            converged: j.converged,
            sample_count: j.sample_count,
            tol: j.solver.tol,
            notes: Vec::new(),
        })
    }
}

impl FitReport {
    /// Normalised residuals of the two Gumbel score equations at the
    /// fitted (μ, σ): `mean(e^{−z}) − 1` and `mean(z (1 − e^{−z})) − 1`.
    pub fn gumbel_score_residuals(&self, samples: &[f64]) -> (f64, f64) {
        gumbel_score_residuals(samples, self.params.mu, self.params.sigma)
    }
}

pub fn gumbel_score_residuals(samples: &[f64], mu: f64, sigma: f64) -> (f64, f64) {
    let n = samples.len() as f64;
    let (mut r_mu, mut r_sigma) = (0.0, 0.0);
    for &x in samples {
        let z = (x - mu) / sigma;
        let e = (-z).exp();
        r_mu += e;
        r_sigma += z * (1.0 - e);
    }
    (r_mu / n - 1.0, r_sigma / n - 1.0)
}

struct Standardised {
    y: Vec<f64>,
    center: f64,
    scale: f64,
}

fn standardise(samples: &[f64]) -> Result<Standardised> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            got: samples.len(),
        });
    }
    if let Some(&bad) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(bad));
    }
    let n = samples.len() as f64;
    let center = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - center).powi(2)).sum::<f64>() / n;
    let scale = var.sqrt();
    let magnitude = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale.is_nan() || scale <= 1e-12 * magnitude || scale == 0.0 {
        return Err(Error::DegenerateSamples(format!(
            "{} samples have zero variance; a scale parameter cannot be estimated",
            samples.len()
        )));
    }
    Ok(Standardised {
        y: samples.iter().map(|x| (x - center) / scale).collect(),
        center,
        scale,
    })
}

struct GumbelStage {
    mu: f64,
    sigma: f64,
    iterations: usize,
    converged: bool,
}

fn gumbel_stage(y: &[f64], tol: f64, max_iter: usize) -> GumbelStage {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);

    // Σ e^{−(y−ymin)/σ} and Σ y e^{−(y−ymin)/σ}; the shift keeps the largest weight at 1
    let sums = |sigma: f64| {
        y.iter().fold((0.0, 0.0), |(w, wy), &v| {
            let e = (-(v - ymin) / sigma).exp();
            (w + e, wy + v * e)
        })
    };
    let h = |sigma: f64| {
        let (w, wy) = sums(sigma);
        sigma - mean + wy / w
    };

    let start = 6f64.sqrt() / std::f64::consts::PI;
    let (mut lo, mut hi) = (0.5 * start, 2.0 * start);
    let (mut h_lo, mut h_hi) = (h(lo), h(hi));
    for _ in 0..64 {
        if h_lo < 0.0 {
            break;
        }
        lo *= 0.5;
        h_lo = h(lo);
    }
    for _ in 0..64 {
        if h_hi > 0.0 {
            break;
        }
        hi *= 2.0;
        h_hi = h(hi);
    }

    let root = brent(h, lo, hi, h_lo, h_hi, 1e-3 * tol * start, max_iter);
    let sigma = root.x;
    let (w, _) = sums(sigma);
    let mu = ymin - sigma * (w / n).ln();
    GumbelStage {
        mu,
        sigma,
        iterations: root.iterations,
        converged: root.converged,
    }
}

/// Per-sample contribution to `∂l/∂κ` at standardised value `z`.
fn kappa_score_term(kappa: f64, z: f64) -> f64 {
    if kappa.abs() < KAPPA_EPS {
        // second-order expansion about κ = 0
        let e = (-z).exp();
        let first = 0.5 * z * z * (1.0 - e) - z;
        let second = -(z.powi(3) / 3.0 - z * z / 2.0) - e * (z.powi(4) / 8.0 - z.powi(3) / 3.0);
        return first + 2.0 * kappa * second;
    }
    let t = 1.0 + kappa * z;
    let ln_t = (kappa * z).ln_1p();
    let s = (-ln_t / kappa).exp();
    let a = ln_t / (kappa * kappa) - z / (kappa * t);
    a - z / t - s * a
}

fn kappa_score(kappa: f64, z: &[f64]) -> f64 {
    z.iter().map(|&v| kappa_score_term(kappa, v)).sum()
}

/// Profile log-likelihood of shape `kappa` on standardised residuals `z`
/// (the constant `−L ln σ` is omitted).
fn kappa_profile(kappa: f64, z: &[f64]) -> f64 {
    let p = GevParams {
        kappa,
        mu: 0.0,
        sigma: 1.0,
    };
    z.iter().map(|&v| p.ln_pdf(v)).sum()
}

struct ShapeStage {
    kappa: f64,
    iterations: usize,
    converged: bool,
    note: Option<String>,
}

fn shape_stage(z: &[f64], opts: &FitOptions) -> ShapeStage {
    let zmin = z.iter().copied().fold(f64::INFINITY, f64::min);
    let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shrink = 1.0 - 1e-6;
    let mut lo = opts.kappa_bracket.0;
    let mut hi = opts.kappa_bracket.1;
    if zmax > 0.0 {
        lo = lo.max(-shrink / zmax);
    }
    if zmin < 0.0 {
        hi = hi.min(-shrink / zmin);
    }
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return ShapeStage {
            kappa: 0.0,
            iterations: 0,
            converged: true,
            note: Some(format!(
                "shape bracket [{}, {}] is empty once every sample is kept inside the support; \
                 falling back to the Gumbel fit",
                opts.kappa_bracket.0, opts.kappa_bracket.1
            )),
        };
    }

    let grid: Vec<f64> = (0..=KAPPA_SCAN_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / KAPPA_SCAN_POINTS as f64)
        .collect();
    let scores: Vec<f64> = grid.iter().map(|&k| kappa_score(k, z)).collect();

    let mut best: Option<(f64, f64, usize, bool)> = None;
    let mut iterations = 0;
    for i in 0..KAPPA_SCAN_POINTS {
        let (ga, gb) = (scores[i], scores[i + 1]);
        if !(ga > 0.0 && gb <= 0.0) {
            continue;
        }
        let root = brent(
            |k| kappa_score(k, z),
            grid[i],
            grid[i + 1],
            ga,
            gb,
            opts.tol,
            opts.max_iter,
        );
        iterations += root.iterations;
        let value = kappa_profile(root.x, z);
        if best.is_none_or(|(_, v, _, _)| value > v) {
            best = Some((root.x, value, root.iterations, root.converged));
        }
    }

    match best {
        Some((kappa, _, _, converged)) => ShapeStage {
            kappa,
            iterations,
            converged,
            note: None,
        },
        None => ShapeStage {
            kappa: 0.0,
            iterations,
            converged: true,
            note: Some(format!(
                "profile likelihood has no interior stationary point in [{lo}, {hi}]; using kappa = 0"
            )),
        },
    }
}

/// Gumbel (κ = 0) maximum-likelihood fit.
pub fn fit_gumbel_mle(samples: &[f64], tol: f64, max_iter: usize) -> Result<FitReport> {
    let std = standardise(samples)?;
    let g = gumbel_stage(&std.y, tol, max_iter);
    let params = GevParams::new(0.0, std.center + std.scale * g.mu, std.scale * g.sigma)?;
    let (r_mu, r_sigma) = gumbel_score_residuals(&std.y, g.mu, g.sigma);
    Ok(FitReport {
        log_likelihood: params.log_likelihood(samples),
        params,
        iterations: g.iterations,
        converged: g.converged && r_mu.abs() <= tol && r_sigma.abs() <= tol,
        sample_count: samples.len(),
        tol,
        notes: Vec::new(),
    })
}

/// Two-stage GEV fit with the default shape bracket.
pub fn fit_gev_mle(samples: &[f64], tol: f64, max_iter: usize) -> Result<FitReport> {
    fit_gev_with(samples, &FitOptions::with_tolerance(tol, max_iter))
}

pub fn fit_gev_with(samples: &[f64], opts: &FitOptions) -> Result<FitReport> {
    let (klo, khi) = opts.kappa_bracket;
    if !(klo.is_finite() && khi.is_finite() && klo <= khi) {
        return Err(Error::InvalidParams(format!(
            "bad shape bracket [{klo}, {khi}]"
        )));
    }
    let std = standardise(samples)?;
    let g = gumbel_stage(&std.y, opts.tol, opts.max_iter);
    let (r_mu, r_sigma) = gumbel_score_residuals(&std.y, g.mu, g.sigma);
    let gumbel_ok = g.converged && r_mu.abs() <= opts.tol && r_sigma.abs() <= opts.tol;

    let z: Vec<f64> = std.y.iter().map(|v| (v - g.mu) / g.sigma).collect();
    let shape = shape_stage(&z, opts);
    let mut notes = Vec::new();
    if let Some(note) = shape.note {
        log::info!("{note}");
        notes.push(note);
    }

    let mut kappa = shape.kappa;
    let mut mu = g.mu;
    let mut sigma = g.sigma;
    let mut iterations = g.iterations + shape.iterations;
    let mut converged = gumbel_ok && shape.converged;

    if opts.joint_refinement {
        let y = &std.y;
        let objective = |theta: &[f64]| {
            if theta[0] < klo || theta[0] > khi {
                return f64::NEG_INFINITY;
            }
            let p = GevParams {
                kappa: theta[0],
                mu: theta[1],
                sigma: theta[2].exp(),
            };
            p.log_likelihood(y)
        };
        let m = nelder_mead_max(
            objective,
            &[kappa, mu, sigma.ln()],
            &[0.02, 0.05, 0.05],
            opts.tol,
            opts.max_iter.max(200) * 25,
        );
        if m.value.is_finite() && m.value >= objective(&[kappa, mu, sigma.ln()]) {
            kappa = m.x[0];
            mu = m.x[1];
            sigma = m.x[2].exp();
        }
        iterations += m.iterations;
        converged = converged && m.converged;
    }

    let params = GevParams::new(kappa, std.center + std.scale * mu, std.scale * sigma)?;
    Ok(FitReport {
        log_likelihood: params.log_likelihood(samples),
        params,
        iterations,
        converged,
        sample_count: samples.len(),
        tol: opts.tol,
        notes,
    })
}

//! Monte Carlo experiments: collect noise-only α-profile values, fit the
//! noise model, and sweep preset false-alarm probabilities to build
//! theoretical and empirical ROC curves.
//!
//! Every window is generated from a seed derived from `(master_seed,
//! stream, lane, index)`, so results do not depend on how the windows are
//! scheduled across threads. Aggregation is counting only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{decide, StatisticEstimator};
use crate::error::{Error, Result};
use crate::gev::{fit_gev_with, threshold_for_pf, FitOptions, FitReport, GevParams};
use crate::scd::{snap_alpha, ScdConfig};
use crate::seed::{self, Stream};
use crate::siggen::{
    generate_am, generate_awgn_at, mix_at_snr, NoiseSpec, SampleBuffer, SignalSpec,
};

/// Minimum window counts for the statistical checks to mean anything.
pub const MIN_STATISTICAL_TRIALS: usize = 100;

fn default_noise_variance() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub signal_spec: SignalSpec,
    pub scd_cfg: ScdConfig,
    #[serde(rename = "noise_windows_L")]
    pub noise_windows: usize,
    #[serde(rename = "signal_windows_M")]
    pub signal_windows: usize,
    pub snr_db_list: Vec<f64>,
    pub pf_grid: Vec<f64>,
    pub master_seed: u64,
    #[serde(default = "default_noise_variance")]
    pub noise_variance: f64,
    /// Histogram bin count; Sturges' rule when absent.
    #[serde(default)]
    pub histogram_bins: Option<usize>,
    #[serde(default)]
    pub fit: FitOptions,
}

/// Cyclic offsets within ±`half_width` bins of `center`, even only.
pub fn alpha_neighbourhood(center: i64, half_width: i64) -> Vec<i64> {
    let start = center - half_width;
    let start = start + start.rem_euclid(2);
    (start..=center + half_width).step_by(2).collect()
}

impl ExperimentPlan {
    /// Desk-scale run: L = M = 1000, SNRs {−15, −10, −5, 0} dB.
    pub fn desk() -> Self {
        let signal_spec = SignalSpec::table1();
        let alpha0 = snap_alpha(
            2.0 * signal_spec.carrier_freq_hz,
            signal_spec.sample_rate_hz,
            4096,
        );
        ExperimentPlan {
            signal_spec,
            scd_cfg: ScdConfig::table1(alpha_neighbourhood(alpha0, 32)),
            noise_windows: 1000,
            signal_windows: 1000,
            snr_db_list: vec![-15.0, -10.0, -5.0, 0.0],
            pf_grid: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5],
            master_seed: 20_100_101,
            noise_variance: 1.0,
            histogram_bins: None,
            fit: FitOptions::default(),
        }
    }

    /// Same as [`desk`](Self::desk) with L = 10000 noise windows.
    pub fn paper() -> Self {
        ExperimentPlan {
            noise_windows: 10_000,
            ..Self::desk()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "desk" => Some(Self::desk()),
            "paper" => Some(Self::paper()),
            _ => None,
        }
    }

    pub fn window_length(&self) -> usize {
        self.scd_cfg.window_length
    }

    /// `2 f_c` snapped to the even-bin grid.
    pub fn alpha0_bins(&self) -> i64 {
        snap_alpha(
            2.0 * self.signal_spec.carrier_freq_hz,
            self.signal_spec.sample_rate_hz,
            self.window_length(),
        )
    }

    pub fn alpha0_hz(&self) -> f64 {
        self.alpha0_bins() as f64 * self.scd_cfg.bin_hz(self.signal_spec.sample_rate_hz)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPlan(m));
        self.scd_cfg.validate()?;
        self.signal_spec.validate_for_window(self.window_length())?;
        if self.noise_windows == 0 || self.signal_windows == 0 {
            return bad("noise_windows_L and signal_windows_M must be positive".into());
        }
        if !(self.noise_variance.is_finite() && self.noise_variance > 0.0) {
            return bad(format!(
                "noise_variance {} must be positive",
                self.noise_variance
            ));
        }
        if self.snr_db_list.iter().any(|s| !s.is_finite()) {
            return bad("snr_db_list entries must be finite".into());
        }
        if self.pf_grid.is_empty() {
            return bad("pf_grid is empty".into());
        }
        if self.pf_grid.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return bad("pf_grid entries must lie in (0, 1)".into());
        }
        if self.pf_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("pf_grid must be strictly increasing".into());
        }
        if self.histogram_bins == Some(0) {
            return bad("histogram_bins must be positive".into());
        }
        // the statistic column must have support
        let alpha0 = self.alpha0_bins();
        let support = self.window_length() as i64 - alpha0.abs();
        if support < self.scd_cfg.effective_smoothing_length() as i64 {
            return bad(format!(
                "alpha0 = {alpha0} bins leaves {support} in-band bins, fewer than the smoothing length"
            ));
        }
        Ok(())
    }

    /// Validation plus the window counts needed for ROC statistics.
    pub fn validate_statistical(&self) -> Result<()> {
        self.validate()?;
        if self.noise_windows < MIN_STATISTICAL_TRIALS
            || self.signal_windows < MIN_STATISTICAL_TRIALS
        {
            return Err(Error::InvalidPlan(format!(
                "noise_windows_L and signal_windows_M must both be at least {MIN_STATISTICAL_TRIALS}"
            )));
        }
        Ok(())
    }

    fn trial_spec(&self) -> SignalSpec {
        SignalSpec {
            duration_samples: self.window_length(),
            ..self.signal_spec.clone()
        }
    }

    /// Noise-only window `index` of `stream`.
    pub fn noise_window(&self, stream: Stream, lane: u64, index: usize) -> Result<SampleBuffer> {
        let spec = NoiseSpec {
            variance: self.noise_variance,
            seed: seed::derive(self.master_seed, stream, lane, index as u64),
        };
        generate_awgn_at(self.window_length(), &spec, self.signal_spec.sample_rate_hz)
    }

    /// Signal-plus-noise window `index` at SNR list entry `snr_index`.
    pub fn signal_window(&self, snr_index: usize, index: usize) -> Result<SampleBuffer> {
        self.signal_window_at(self.snr_db_list[snr_index], snr_index as u64, index)
    }

    /// Signal-plus-noise window at an arbitrary SNR, seeded from `lane`.
    pub fn signal_window_at(&self, snr_db: f64, lane: u64, index: usize) -> Result<SampleBuffer> {
        let message_seed = seed::derive(self.master_seed, Stream::Message, lane, index as u64);
        let signal = generate_am(&self.trial_spec(), message_seed)?;
        let noise = self.noise_window(Stream::SignalNoise, lane, index)?;
        mix_at_snr(&signal, &noise, snr_db)
    }
}

fn statistics(
    plan: &ExperimentPlan,
    count: usize,
    window: impl Fn(usize) -> Result<SampleBuffer> + Sync,
) -> Result<Vec<f64>> {
    let est = StatisticEstimator::new(&plan.scd_cfg, plan.alpha0_bins())?;
    (0..count)
        .into_par_iter()
        .map(|i| est.statistic(&window(i)?))
        .collect()
}

/// α-profile values at `alpha0` for the L noise-only windows used to fit
/// the noise model.
pub fn collect_noise_profile(plan: &ExperimentPlan) -> Result<Vec<f64>> {
    plan.validate()?;
    statistics(plan, plan.noise_windows, |i| {
        plan.noise_window(Stream::FitNoise, 0, i)
    })
}

/// Fresh noise-only statistics (disjoint from the fitting set).
pub fn collect_test_noise(plan: &ExperimentPlan) -> Result<Vec<f64>> {
    plan.validate()?;
    statistics(plan, plan.noise_windows, |i| {
        plan.noise_window(Stream::TestNoise, 0, i)
    })
}

/// H1 statistics for SNR list entry `snr_index`.
pub fn collect_signal_statistics(plan: &ExperimentPlan, snr_index: usize) -> Result<Vec<f64>> {
    plan.validate()?;
    if snr_index >= plan.snr_db_list.len() {
        return Err(Error::InvalidPlan(format!("no SNR entry {snr_index}")));
    }
    statistics(plan, plan.signal_windows, |i| {
        plan.signal_window(snr_index, i)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramReport {
    pub bin_edges: Vec<f64>,
    pub bin_counts: Vec<usize>,
    pub fit: FitReport,
    pub ks_statistic: f64,
}

impl HistogramReport {
    pub fn fitted(&self) -> &GevParams {
        &self.fit.params
    }

    /// Counts normalised to a probability density.
    pub fn densities(&self) -> Vec<f64> {
        let n: usize = self.bin_counts.iter().sum();
        self.bin_counts
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(&c, e)| c as f64 / (n as f64 * (e[1] - e[0])))
            .collect()
    }
}

pub fn sturges_bins(n: usize) -> usize {
    (n as f64).log2().ceil() as usize + 1
}

/// `sup_x |F_n(x) − F(x)|` for the empirical CDF of `samples`.
pub fn ks_statistic(samples: &[f64], model: &GevParams) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = model.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Equal-width histogram over `[min, max]`; the last bin is closed.
pub fn histogram(samples: &[f64], bins: usize) -> (Vec<f64>, Vec<usize>) {
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0usize; bins];
    for &x in samples {
        let i = if width > 0.0 {
            (((x - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[i] += 1;
    }
    (edges, counts)
}

/// Fits the noise model and measures how well it matches the samples.
pub fn fit_and_histogram(
    samples: &[f64],
    bins: Option<usize>,
    opts: &FitOptions,
) -> Result<HistogramReport> {
    let fit = fit_gev_with(samples, opts)?;
    let bins = bins.unwrap_or_else(|| sturges_bins(samples.len()));
    let (bin_edges, bin_counts) = histogram(samples, bins);
    Ok(HistogramReport {
        ks_statistic: ks_statistic(samples, &fit.params),
        bin_edges,
        bin_counts,
        fit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Theoretical,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub kind: CurveKind,
    pub snr_db: f64,
    /// `(pf, pd)` pairs, ascending in `pf`.
    pub points: Vec<(f64, f64)>,
}

impl RocCurve {
    /// Linear interpolation of the curve at false-alarm rate `pf`, with the
    /// end points (0, 0) and (1, 1) every ROC curve passes through. Points
    /// sharing an abscissa are averaged.
    pub fn pd_at(&self, pf: f64) -> f64 {
        let mut pts: Vec<(f64, f64)> = vec![(0.0, 0.0)];
        pts.extend(self.points.iter().copied());
        pts.push((1.0, 1.0));
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut merged: Vec<(f64, f64, usize)> = Vec::new();
        for (x, y) in pts {
            match merged.last_mut() {
                Some(last) if last.0 == x => {
                    last.1 += y;
                    last.2 += 1;
                }
                _ => merged.push((x, y, 1)),
            }
        }
        let merged: Vec<(f64, f64)> = merged
            .into_iter()
            .map(|(x, s, c)| (x, s / c as f64))
            .collect();
        let pf = pf.clamp(0.0, 1.0);
        for w in merged.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if pf >= x0 && pf <= x1 {
                return y0 + (y1 - y0) * (pf - x0) / (x1 - x0);
            }
        }
        merged.last().map_or(1.0, |p| p.1)
    }
}

/// One row of a ROC sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocRow {
    pub pf_preset: f64,
    pub pf_empirical: f64,
    /// Measured detection rate at the model threshold: the ordinate of the
    /// theoretical curve at `pf_preset`.
    pub pd_theoretical_curve: f64,
    /// The empirical curve `(pf_empirical, pd)` interpolated at `pf_preset`.
    pub pd_empirical: f64,
    pub threshold: f64,
    pub h0_trials: usize,
    pub h1_trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocResult {
    pub snr_db: f64,
    pub theoretical: RocCurve,
    pub empirical: RocCurve,
    pub rows: Vec<RocRow>,
}

impl RocResult {
    pub fn max_abs_pd_gap(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.pd_theoretical_curve - r.pd_empirical).abs())
            .fold(0.0, f64::max)
    }
}

/// Fraction of `statistics` strictly above `threshold`.
pub fn exceedance_rate(statistics: &[f64], threshold: f64) -> f64 {
    let hits = statistics.iter().filter(|&&t| decide(t, threshold)).count();
    hits as f64 / statistics.len() as f64
}

/// Builds the curve pair for one SNR from pre-computed statistics.
pub fn roc_from_statistics(
    snr_db: f64,
    pf_grid: &[f64],
    model: &GevParams,
    h0: &[f64],
    h1: &[f64],
) -> Result<RocResult> {
    if h0.is_empty() || h1.is_empty() {
        return Err(Error::InvalidPlan("ROC needs H0 and H1 trials".into()));
    }
    let mut partial = Vec::with_capacity(pf_grid.len());
    for &pf in pf_grid {
        let threshold = threshold_for_pf(pf, model)?;
        partial.push((
            pf,
            exceedance_rate(h0, threshold),
            exceedance_rate(h1, threshold),
            threshold,
        ));
    }
    let theoretical = RocCurve {
        kind: CurveKind::Theoretical,
        snr_db,
        points: partial.iter().map(|&(pf, _, pd, _)| (pf, pd)).collect(),
    };
    let mut emp_points: Vec<(f64, f64)> =
        partial.iter().map(|&(_, pf_e, pd, _)| (pf_e, pd)).collect();
    emp_points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let empirical = RocCurve {
        kind: CurveKind::Empirical,
        snr_db,
        points: emp_points,
    };
    let rows = partial
        .iter()
        .map(|&(pf, pf_e, pd, threshold)| RocRow {
            pf_preset: pf,
            pf_empirical: pf_e,
            pd_theoretical_curve: pd,
            pd_empirical: empirical.pd_at(pf),
            threshold,
            h0_trials: h0.len(),
            h1_trials: h1.len(),
        })
        .collect();
    Ok(RocResult {
        snr_db,
        theoretical,
        empirical,
        rows,
    })
}

/// One curve pair per SNR in the plan, thresholds from `model`.
pub fn run_roc(plan: &ExperimentPlan, model: &GevParams) -> Result<Vec<RocResult>> {
    plan.validate_statistical()?;
    let h0 = collect_test_noise(plan)?;
    (0..plan.snr_db_list.len())
        .map(|s| {
            let h1 = collect_signal_statistics(plan, s)?;
            roc_from_statistics(plan.snr_db_list[s], &plan.pf_grid, model, &h0, &h1)
        })
        .collect()
}

/// Everything one `roc` run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub noise_samples: Vec<f64>,
    pub histogram: HistogramReport,
    pub roc: Vec<RocResult>,
}

/// Collect, fit, then sweep.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Experiment> {
    plan.validate_statistical()?;
    let noise_samples = collect_noise_profile(plan)?;
    let histogram = fit_and_histogram(&noise_samples, plan.histogram_bins, &plan.fit)?;
    if !histogram.fit.converged {
        log::warn!("noise model fit did not converge; continuing with the best iterate");
    }
    let roc = run_roc(plan, histogram.fitted())?;
    Ok(Experiment {
        noise_samples,
        histogram,
        roc,
    })
}

//! Single-cyclic-frequency feature detector.
//!
//! A window is reduced to its α-profile value at `alpha0` and declared
//! occupied when that statistic strictly exceeds the threshold. The
//! threshold is either given directly or derived from a preset false-alarm
//! probability through the fitted noise model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gev::{threshold_for_pf, GevParams};
use crate::scd::{ScdConfig, ScdEstimator};
use crate::siggen::SampleBuffer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Cyclic frequency of the feature, as an even bin offset.
    pub alpha0_bins: i64,
    pub scd_cfg: ScdConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset_pf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_model: Option<GevParams>,
}

impl DetectorConfig {
    pub fn with_threshold(alpha0_bins: i64, scd_cfg: ScdConfig, threshold: f64) -> Self {
        DetectorConfig {
            alpha0_bins,
            scd_cfg,
            threshold: Some(threshold),
            preset_pf: None,
            noise_model: None,
        }
    }

    pub fn with_preset_pf(
        alpha0_bins: i64,
        scd_cfg: ScdConfig,
        pf: f64,
        noise_model: GevParams,
    ) -> Self {
        DetectorConfig {
            alpha0_bins,
            scd_cfg,
            threshold: None,
            preset_pf: Some(pf),
            noise_model: Some(noise_model),
        }
    }

    /// The threshold this config implies.
    pub fn resolve_threshold(&self) -> Result<f64> {
        match (self.threshold, self.preset_pf) {
            (Some(t), None) if !t.is_nan() => Ok(t),
            (Some(_), None) => Err(Error::Detector("threshold is NaN".into())),
            (None, Some(pf)) => {
                let model = self.noise_model.as_ref().ok_or_else(|| {
                    Error::Detector("preset_pf needs a noise_model to resolve a threshold".into())
                })?;
                threshold_for_pf(pf, model)
            }
            (Some(_), Some(_)) => Err(Error::Detector(
                "set exactly one of threshold and preset_pf, not both".into(),
            )),
            (None, None) => Err(Error::Detector(
                "set exactly one of threshold and preset_pf".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub statistic: f64,
    pub threshold: f64,
    pub occupied: bool,
    pub window_index: usize,
    /// The snapped cyclic frequency the statistic was taken at, in Hz.
    pub alpha0_hz: f64,
}

/// Occupancy rule: strictly above the threshold. Ties are unoccupied.
pub fn decide(statistic: f64, threshold: f64) -> bool {
    statistic > threshold
}

/// `P(T > threshold | H0)` under the noise model.
pub fn theoretical_pf(threshold: f64, noise_model: &GevParams) -> f64 {
    noise_model.sf(threshold)
}

/// Computes only the `alpha0` column of the SCD.
#[derive(Debug)]
pub struct StatisticEstimator {
    estimator: ScdEstimator,
    alpha0_bins: i64,
}

impl StatisticEstimator {
    pub fn new(scd_cfg: &ScdConfig, alpha0_bins: i64) -> Result<Self> {
        let cfg = ScdConfig {
            alpha_grid: vec![alpha0_bins],
            ..scd_cfg.clone()
        };
        let estimator = ScdEstimator::new(cfg)?;
        Ok(StatisticEstimator {
            estimator,
            alpha0_bins,
        })
    }

    pub fn alpha0_bins(&self) -> i64 {
        self.alpha0_bins
    }

    pub fn window_length(&self) -> usize {
        self.estimator.config().window_length
    }

    /// `max_f |S^{α0}(f)|` for one window.
    pub fn statistic(&self, window: &SampleBuffer) -> Result<f64> {
        let scd = self.estimator.estimate(window)?;
        let profile = crate::scd::alpha_profile(&scd)?;
        Ok(profile.maxima[0])
    }
}

#[derive(Debug)]
pub struct Detector {
    statistic: StatisticEstimator,
    threshold: f64,
}

impl Detector {
    pub fn new(cfg: &DetectorConfig) -> Result<Self> {
        let threshold = cfg.resolve_threshold()?;
        Ok(Detector {
            statistic: StatisticEstimator::new(&cfg.scd_cfg, cfg.alpha0_bins)?,
            threshold,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn detect(&self, window: &SampleBuffer, window_index: usize) -> Result<Decision> {
        let statistic = self.statistic.statistic(window)?;
        let bin_hz = window.sample_rate_hz() / self.statistic.window_length() as f64;
        Ok(Decision {
            statistic,
            threshold: self.threshold,
            occupied: decide(statistic, self.threshold),
            window_index,
            alpha0_hz: self.statistic.alpha0_bins() as f64 * bin_hz,
        })
    }
}

pub fn detect(window: &SampleBuffer, cfg: &DetectorConfig) -> Result<Decision> {
    Detector::new(cfg)?.detect(window, 0)
}

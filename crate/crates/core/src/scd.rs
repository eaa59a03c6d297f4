//! Spectral correlation density by the frequency-smoothing method, and its
//! reduction to the α-axis profile.
//!
//! For a window `x` of length `K` with taper `w`, let `X` be the DFT of `w·x`
//! reordered so that index `j` holds frequency bin `j - K/2` (DC sits in the
//! middle). For an even cyclic offset `a` bins (`h = a/2`) the cyclic
//! periodogram is
//!
//! ```text
//! I_a(j) = X(j + h) · conj(X(j - h)) / (K · U),     U = mean(w²)
//! ```
//!
//! defined wherever both `j ± h` stay inside `[0, K)`, i.e. inside the Nyquist
//! band without wrapping. The estimate `S_a(j)` is the moving average of
//! `I_a` over `smoothing_length` neighbouring bins. Near the ends of the
//! support the average is truncated and divided by the number of cells that
//! actually contributed. A cell is marked valid only when its whole
//! smoothing aperture lies inside the support, so every valid cell averages
//! the same number of periodogram products.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::siggen::SampleBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taper {
    Hamming,
    Rectangular,
}

impl Taper {
    /// Symmetric taper coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Taper::Rectangular => vec![1.0; n],
            Taper::Hamming if n == 1 => vec![1.0],
            Taper::Hamming => {
                let m = (n - 1) as f64;
                (0..n)
                    .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / m).cos())
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScdConfig {
    /// Analysis window length `K`; a power of two.
    pub window_length: usize,
    pub taper: Taper,
    /// Moving-average length in frequency bins; even values are bumped to
    /// the next odd number so the aperture is centred.
    pub smoothing_length: usize,
    /// Cyclic frequencies as signed, even DFT-bin offsets.
    pub alpha_grid: Vec<i64>,
}

impl ScdConfig {
    /// Hamming taper, K = 4096, smoothing over 1300 bins.
    pub fn table1(alpha_grid: Vec<i64>) -> Self {
        ScdConfig {
            window_length: 4096,
            taper: Taper::Hamming,
            smoothing_length: 1300,
            alpha_grid,
        }
    }

    pub fn effective_smoothing_length(&self) -> usize {
        self.smoothing_length | 1
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.window_length;
        if k < 2 || !k.is_power_of_two() {
            return Err(Error::InvalidScdConfig(format!(
                "window length {k} is not a power of two >= 2"
            )));
        }
        if self.smoothing_length == 0 || self.effective_smoothing_length() >= k {
            return Err(Error::InvalidScdConfig(format!(
                "smoothing length {} must be positive and below the window length {k}",
                self.smoothing_length
            )));
        }
        if self.alpha_grid.is_empty() {
            return Err(Error::InvalidScdConfig("alpha grid is empty".into()));
        }
        for &a in &self.alpha_grid {
            if a % 2 != 0 || a.unsigned_abs() as usize >= k {
                return Err(Error::AlphaOffGrid(a));
            }
        }
        Ok(())
    }

    /// Cyclic-frequency bin width in Hz for a given sample rate.
    pub fn bin_hz(&self, sample_rate_hz: f64) -> f64 {
        sample_rate_hz / self.window_length as f64
    }
}

/// Nearest even bin offset to `alpha_hz` for a `window_length`-point DFT.
pub fn snap_alpha(alpha_hz: f64, sample_rate_hz: f64, window_length: usize) -> i64 {
    let bins = alpha_hz * window_length as f64 / sample_rate_hz;
    2 * (bins / 2.0).round() as i64
}

/// Splits `buffer` into `⌊len / K⌋` disjoint consecutive windows; the tail
/// that does not fill a window is dropped.
pub fn segment_windows(buffer: &SampleBuffer, k: usize) -> Result<Vec<SampleBuffer>> {
    if k == 0 || k > buffer.len() {
        return Err(Error::InvalidBuffer(format!(
            "cannot cut {k}-sample windows from {} samples",
            buffer.len()
        )));
    }
    (0..buffer.len() / k)
        .map(|i| buffer.slice(i * k, k))
        .collect()
}

/// `S^α(f)` on a grid of centred frequency bins (rows) and configured cyclic
/// offsets (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ScdMatrix {
    values: Vec<Complex64>,
    valid: Vec<bool>,
    f_axis: Vec<f64>,
    alpha_bins: Vec<i64>,
    alpha_axis: Vec<f64>,
    window_index: usize,
}

impl ScdMatrix {
    pub fn rows(&self) -> usize {
        self.f_axis.len()
    }

    pub fn cols(&self) -> usize {
        self.alpha_bins.len()
    }

    pub fn f_axis(&self) -> &[f64] {
        &self.f_axis
    }

    pub fn alpha_axis(&self) -> &[f64] {
        &self.alpha_axis
    }

    pub fn alpha_bins(&self) -> &[i64] {
        &self.alpha_bins
    }

    pub fn window_index(&self) -> usize {
        self.window_index
    }

    pub fn with_window_index(mut self, window_index: usize) -> Self {
        self.window_index = window_index;
        self
    }

    /// Row-major values, `rows() × cols()`.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.values[row * self.cols() + col]
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.valid[row * self.cols() + col]
    }

    pub fn column_of(&self, alpha_bin: i64) -> Option<usize> {
        self.alpha_bins.iter().position(|&a| a == alpha_bin)
    }

    /// Row index of the zero-frequency bin.
    pub fn dc_row(&self) -> usize {
        self.rows() / 2
    }
}

/// Reusable estimator: owns the FFT plan and taper for one config.
pub struct ScdEstimator {
    cfg: ScdConfig,
    taper: Vec<f64>,
    norm: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ScdEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScdEstimator")
            .field("cfg", &self.cfg)
            .finish()
    }
}

impl ScdEstimator {
    pub fn new(cfg: ScdConfig) -> Result<Self> {
        cfg.validate()?;
        let k = cfg.window_length;
        let taper = cfg.taper.coefficients(k);
        let u = taper.iter().map(|w| w * w).sum::<f64>() / k as f64;
        let fft = FftPlanner::new().plan_fft_forward(k);
        Ok(ScdEstimator {
            norm: 1.0 / (k as f64 * u),
            cfg,
            taper,
            fft,
        })
    }

    pub fn config(&self) -> &ScdConfig {
        &self.cfg
    }

    /// Tapered DFT with DC moved to index `K/2`.
    pub fn centred_spectrum(&self, window: &SampleBuffer) -> Result<Vec<Complex64>> {
        let k = self.cfg.window_length;
        if window.len() != k {
            return Err(Error::WindowLength {
                expected: k,
                got: window.len(),
            });
        }
        let mut buf: Vec<Complex64> = window
            .samples()
            .iter()
            .zip(&self.taper)
            .map(|(x, w)| Complex64::new(x * w, 0.0))
            .collect();
        self.fft.process(&mut buf);
        buf.rotate_right(k / 2);
        Ok(buf)
    }

    pub fn estimate(&self, window: &SampleBuffer) -> Result<ScdMatrix> {
        let spectrum = self.centred_spectrum(window)?;
        let k = self.cfg.window_length;
        let cols = self.cfg.alpha_grid.len();
        let half_aperture = self.cfg.effective_smoothing_length() / 2;

        let mut values = vec![Complex64::new(0.0, 0.0); k * cols];
        let mut valid = vec![false; k * cols];
        let mut column = vec![Complex64::new(0.0, 0.0); k];
        for (c, &a) in self.cfg.alpha_grid.iter().enumerate() {
            let Some((lo, hi)) = self.smoothed_column(&spectrum, a, &mut column) else {
                continue;
            };
            for j in lo..=hi {
                values[j * cols + c] = column[j];
            }
            if hi >= lo + 2 * half_aperture {
                for j in lo + half_aperture..=hi - half_aperture {
                    valid[j * cols + c] = true;
                }
            }
        }

        let fs = window.sample_rate_hz();
        let bin = fs / k as f64;
        Ok(ScdMatrix {
            values,
            valid,
            f_axis: (0..k).map(|j| (j as f64 - (k / 2) as f64) * bin).collect(),
            alpha_axis: self
                .cfg
                .alpha_grid
                .iter()
                .map(|&a| a as f64 * bin)
                .collect(),
            alpha_bins: self.cfg.alpha_grid.clone(),
            window_index: 0,
        })
    }

    /// Smoothed cyclic periodogram for offset `a`, written into
    /// `out[lo..=hi]` where `[lo, hi]` is the in-band support.
    fn smoothed_column(
        &self,
        x: &[Complex64],
        a: i64,
        out: &mut [Complex64],
    ) -> Option<(usize, usize)> {
        let k = x.len();
        let h = (a / 2).unsigned_abs() as usize;
        if 2 * h >= k {
            return None;
        }
        let (lo, hi) = (h, k - 1 - h);
        let shift = a / 2;
        let periodogram: Vec<Complex64> = (lo..=hi)
            .map(|j| {
                let up = (j as i64 + shift) as usize;
                let down = (j as i64 - shift) as usize;
                x[up] * x[down].conj() * self.norm
            })
            .collect();

        let w = self.cfg.effective_smoothing_length() / 2;
        let n = periodogram.len();
        let mut acc = CompensatedSum::default();
        let mut right = 0;
        for _ in 0..=w.min(n - 1) {
            acc.add(periodogram[right]);
            right += 1;
        }
        for i in 0..n {
            let first = i.saturating_sub(w);
            let count = right - first;
            out[lo + i] = acc.value() / count as f64;
            if right < n {
                acc.add(periodogram[right]);
                right += 1;
            }
            if i >= w {
                acc.add(-periodogram[i - w]);
            }
        }
        Some((lo, hi))
    }
}

/// Neumaier-compensated complex running sum.
#[derive(Default)]
struct CompensatedSum {
    re: (f64, f64),
    im: (f64, f64),
}

impl CompensatedSum {
    fn add(&mut self, z: Complex64) {
        fn step(acc: &mut (f64, f64), v: f64) {
            let t = acc.0 + v;
            if acc.0.abs() >= v.abs() {
                acc.1 += (acc.0 - t) + v;
            } else {
                acc.1 += (v - t) + acc.0;
            }
            acc.0 = t;
        }
        step(&mut self.re, z.re);
        step(&mut self.im, z.im);
    }

    fn value(&self) -> Complex64 {
        Complex64::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

/// One-shot convenience over [`ScdEstimator`].
pub fn estimate_scd(window: &SampleBuffer, cfg: &ScdConfig) -> Result<ScdMatrix> {
    ScdEstimator::new(cfg.clone())?.estimate(window)
}

/// `N(α) = max_f |S^α(f)|` over valid cells, one value per cyclic frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaProfile {
    pub alphas: Vec<f64>,
    pub alpha_bins: Vec<i64>,
    pub maxima: Vec<f64>,
    pub window_index: usize,
}

impl AlphaProfile {
    pub fn value_at(&self, alpha_bin: i64) -> Option<f64> {
        self.alpha_bins
            .iter()
            .position(|&a| a == alpha_bin)
            .map(|i| self.maxima[i])
    }
}

pub fn alpha_profile(scd: &ScdMatrix) -> Result<AlphaProfile> {
    let cols = scd.cols();
    let mut maxima = Vec::with_capacity(cols);
    for c in 0..cols {
        let best = (0..scd.rows())
            .filter(|&r| scd.is_valid(r, c))
            .map(|r| scd.get(r, c).norm())
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
        maxima.push(best.ok_or(Error::EmptySupport(scd.alpha_bins[c]))?);
    }
    Ok(AlphaProfile {
        alphas: scd.alpha_axis.clone(),
        alpha_bins: scd.alpha_bins.clone(),
        maxima,
        window_index: scd.window_index,
    })
}

//! Seeded test signals: AM waveforms, white Gaussian noise and their mixture
//! at a requested SNR.
//!
//! SNR is always measured over the full sampling bandwidth: the ratio of the
//! mean squared amplitudes of the two buffers being mixed.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Tag written next to exported signals so readers know how SNR was measured.
pub const SNR_CONVENTION: &str = "full-band";

pub const DEFAULT_MODULATION_INDEX: f64 = 0.5;

fn default_index() -> f64 {
    DEFAULT_MODULATION_INDEX
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Modulation {
    /// Double-sideband AM with carrier, `(1 + index * m(t)) cos(2π f_c t)`,
    /// where `m` is a band-limited Gaussian message normalised to unit peak.
    Am {
        #[serde(default = "default_index")]
        index: f64,
    },
}

impl Default for Modulation {
    fn default() -> Self {
        Modulation::Am {
            index: DEFAULT_MODULATION_INDEX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub carrier_freq_hz: f64,
    pub baseband_bandwidth_hz: f64,
    pub sample_rate_hz: f64,
    pub duration_samples: usize,
    #[serde(default)]
    pub modulation: Modulation,
}

impl SignalSpec {
    /// 1 MHz carrier, 10 kHz message bandwidth, 3 MHz sampling and 4096
    /// samples (1.365 ms).
    pub fn table1() -> Self {
        SignalSpec {
            carrier_freq_hz: 1.0e6,
            baseband_bandwidth_hz: 10.0e3,
            sample_rate_hz: 3.0e6,
            duration_samples: 4096,
            modulation: Modulation::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSignal(msg));
        for (name, v) in [
            ("carrier_freq_hz", self.carrier_freq_hz),
            ("baseband_bandwidth_hz", self.baseband_bandwidth_hz),
            ("sample_rate_hz", self.sample_rate_hz),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.carrier_freq_hz >= self.sample_rate_hz / 2.0 {
            return bad(format!(
                "carrier {} Hz violates Nyquist for {} Hz sampling",
                self.carrier_freq_hz, self.sample_rate_hz
            ));
        }
        if self.baseband_bandwidth_hz >= self.carrier_freq_hz {
            return bad(format!(
                "bandwidth {} Hz must be below the carrier {} Hz",
                self.baseband_bandwidth_hz, self.carrier_freq_hz
            ));
        }
        if self.duration_samples == 0 {
            return bad("duration_samples must be positive".into());
        }
        let Modulation::Am { index } = self.modulation;
        if !(0.0..=1.0).contains(&index) {
            return bad(format!("AM modulation index {index} outside [0, 1]"));
        }
        Ok(())
    }

    /// Checks that one analysis window of `window_len` samples fits.
    pub fn validate_for_window(&self, window_len: usize) -> Result<()> {
        self.validate()?;
        if self.duration_samples < window_len {
            return Err(Error::InvalidSignal(format!(
                "duration {} samples is shorter than the {window_len}-sample analysis window",
                self.duration_samples
            )));
        }
        Ok(())
    }
}

/// Real-valued samples with their sample rate. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBuffer {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl SampleBuffer {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidBuffer("no samples".into()));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidBuffer(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if let Some(pos) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidBuffer(format!(
                "sample {pos} is not finite ({})",
                samples[pos]
            )));
        }
        Ok(SampleBuffer {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean squared amplitude.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64
    }

    /// Contiguous sub-range `[start, start + len)` as a new buffer.
    pub fn slice(&self, start: usize, len: usize) -> Result<SampleBuffer> {
        let end = start
            .checked_add(len)
            .filter(|&e| e <= self.samples.len() && len > 0)
            .ok_or_else(|| {
                Error::InvalidBuffer(format!(
                    "slice [{start}, {start}+{len}) outside buffer of {}",
                    self.samples.len()
                ))
            })?;
        Ok(SampleBuffer {
            samples: self.samples[start..end].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
        })
    }

    pub fn scaled(&self, gain: f64) -> SampleBuffer {
        SampleBuffer {
            samples: self.samples.iter().map(|x| x * gain).collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub variance: f64,
    pub seed: u64,
}

/// Zero-mean Gaussian message limited to `|f| <= bandwidth_hz`, scaled to
/// unit peak magnitude. All-zero when no nonzero DFT bin fits in the band.
fn band_limited_message(n: usize, fs: f64, bandwidth_hz: f64, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    let mut spectrum: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();

    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut spectrum);
    let df = fs / n as f64;
    for (k, bin) in spectrum.iter_mut().enumerate() {
        let signed = if k <= n / 2 {
            k as f64
        } else {
            k as f64 - n as f64
        };
        if k == 0 || signed.abs() * df > bandwidth_hz {
            *bin = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut spectrum);

    let mut message: Vec<f64> = spectrum.iter().map(|c| c.re).collect();
    let peak = message.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        message.iter_mut().for_each(|x| *x /= peak);
    } else {
        message.iter_mut().for_each(|x| *x = 0.0);
    }
    message
}

/// Real AM waveform for `spec`. A zero modulation index yields the bare
/// carrier `cos(2π f_c k / f_s)` without consuming any randomness.
pub fn generate_am(spec: &SignalSpec, seed: u64) -> Result<SampleBuffer> {
    spec.validate()?;
    let n = spec.duration_samples;
    let fs = spec.sample_rate_hz;
    let fc = spec.carrier_freq_hz;
    let Modulation::Am { index } = spec.modulation;

    let carrier = |k: usize| (2.0 * PI * fc * k as f64 / fs).cos();
    let samples = if index == 0.0 {
        (0..n).map(carrier).collect()
    } else {
        let message = band_limited_message(n, fs, spec.baseband_bandwidth_hz, seed);
        message
            .iter()
            .enumerate()
            .map(|(k, m)| (1.0 + index * m) * carrier(k))
            .collect()
    };
    SampleBuffer::new(samples, fs)
}

/// i.i.d. zero-mean Gaussian samples. The buffer carries a nominal unit
/// sample rate; use [`generate_awgn_at`] to attach a real one.
pub fn generate_awgn(length: usize, noise: &NoiseSpec) -> Result<SampleBuffer> {
    generate_awgn_at(length, noise, 1.0)
}

pub fn generate_awgn_at(
    length: usize,
    noise: &NoiseSpec,
    sample_rate_hz: f64,
) -> Result<SampleBuffer> {
    if length == 0 {
        return Err(Error::InvalidBuffer(
            "noise length must be at least 1".into(),
        ));
    }
    if !(noise.variance.is_finite() && noise.variance > 0.0) {
        return Err(Error::InvalidBuffer(format!(
            "noise variance must be positive, got {}",
            noise.variance
        )));
    }
    let sd = noise.variance.sqrt();
    let mut rng = seed::rng(noise.seed);
    let samples = (0..length)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            sd * g
        })
        .collect::<Vec<f64>>();
    SampleBuffer::new(samples, sample_rate_hz)
}

/// Amplitude gain that brings `signal` to `snr_db` relative to `noise`,
/// both powers measured from the buffers.
pub fn snr_gain(signal: &SampleBuffer, noise: &SampleBuffer, snr_db: f64) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidSignal(format!(
            "snr_db must be finite, got {snr_db}"
        )));
    }
    let ps = signal.power();
    let pn = noise.power();
    if ps <= 0.0 {
        return Err(Error::InvalidSignal("signal has zero power".into()));
    }
    if pn <= 0.0 {
        return Err(Error::InvalidSignal("noise has zero power".into()));
    }
    Ok((pn * 10f64.powf(snr_db / 10.0) / ps).sqrt())
}

/// `g * signal + noise` with `g` from [`snr_gain`].
pub fn mix_at_snr(
    signal: &SampleBuffer,
    noise: &SampleBuffer,
    snr_db: f64,
) -> Result<SampleBuffer> {
    if signal.len() != noise.len() {
        return Err(Error::InvalidBuffer(format!(
            "length mismatch: signal {} vs noise {}",
            signal.len(),
            noise.len()
        )));
    }
    if signal.sample_rate_hz() != noise.sample_rate_hz() {
        return Err(Error::InvalidBuffer(format!(
            "sample rate mismatch: signal {} Hz vs noise {} Hz",
            signal.sample_rate_hz(),
            noise.sample_rate_hz()
        )));
    }
    let g = snr_gain(signal, noise, snr_db)?;
    let samples = signal
        .samples()
        .iter()
        .zip(noise.samples())
        .map(|(s, n)| g * s + n)
        .collect();
    SampleBuffer::new(samples, signal.sample_rate_hz())
}

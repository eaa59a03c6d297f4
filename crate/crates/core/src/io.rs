//! File formats. CSV numbers carry 9 significant digits; JSON numbers are
//! written in shortest round-trip form, so they read back bit-exact.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::detector::Decision;
use crate::error::{Error, Result};
use crate::gev::FitReport;
use crate::harness::{HistogramReport, RocResult};
use crate::scd::{AlphaProfile, ScdConfig, ScdMatrix};
use crate::siggen::{SampleBuffer, SignalSpec, SNR_CONVENTION};

/// `x` rounded to 9 significant digits, in the shortest form that reads
/// back to the rounded value.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    let a = rounded.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::format(path, format!("{other:?}")),
    }
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::format(path, e))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}

pub fn write_fit(path: &Path, fit: &FitReport) -> Result<()> {
    write_json(path, fit)
}

pub fn read_fit(path: &Path) -> Result<FitReport> {
    read_json(path)
}

/// Sidecar describing a raw `.f64` signal file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalHeader {
    pub sample_rate_hz: f64,
    pub seed: u64,
    pub spec: SignalSpec,
    pub snr_convention: String,
    pub samples: usize,
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes samples as little-endian `f64` to `path` and the header to the
/// same path with a `.json` extension.
pub fn write_signal(
    path: &Path,
    buffer: &SampleBuffer,
    spec: &SignalSpec,
    seed: u64,
) -> Result<()> {
    let mut w = create(path)?;
    for x in buffer.samples() {
        w.write_all(&x.to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let header = SignalHeader {
        sample_rate_hz: buffer.sample_rate_hz(),
        seed,
        spec: spec.clone(),
        snr_convention: SNR_CONVENTION.into(),
        samples: buffer.len(),
    };
    write_json(&sidecar(path), &header)
}

pub fn read_signal(path: &Path) -> Result<(SampleBuffer, SignalHeader)> {
    let header: SignalHeader = read_json(&sidecar(path))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != header.samples * 8 {
        return Err(Error::format(
            path,
            format!(
                "{} bytes, header promises {} samples",
                bytes.len(),
                header.samples
            ),
        ));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let buffer =
        SampleBuffer::new(samples, header.sample_rate_hz).map_err(|e| Error::format(path, e))?;
    Ok((buffer, header))
}

/// In-band rows `[first, last]` of one column; `None` when the column has
/// no valid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidRows {
    pub first: usize,
    pub last: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScdHeader {
    pub rows: usize,
    pub cols: usize,
    /// Always `"complex64"`: interleaved little-endian `f32` (re, im) pairs,
    /// row-major with frequency as the row index.
    pub dtype: String,
    pub window_index: usize,
    pub f_axis_hz: Vec<f64>,
    pub alpha_bins: Vec<i64>,
    pub alpha_axis_hz: Vec<f64>,
    pub valid_rows: Vec<Option<ValidRows>>,
    pub config: ScdConfig,
}

impl ScdHeader {
    pub fn new(m: &ScdMatrix, config: &ScdConfig) -> Self {
        let valid_rows = (0..m.cols())
            .map(|c| {
                let mut rows = (0..m.rows()).filter(|&r| m.is_valid(r, c));
                let first = rows.next()?;
                let last = rows.next_back().unwrap_or(first);
                Some(ValidRows { first, last })
            })
            .collect();
        ScdHeader {
            rows: m.rows(),
            cols: m.cols(),
            dtype: "complex64".into(),
            window_index: m.window_index(),
            f_axis_hz: m.f_axis().to_vec(),
            alpha_bins: m.alpha_bins().to_vec(),
            alpha_axis_hz: m.alpha_axis().to_vec(),
            valid_rows,
            config: config.clone(),
        }
    }
}

/// Writes the matrix to `path` and its header next to it as `.json`.
pub fn write_scd(path: &Path, m: &ScdMatrix, config: &ScdConfig) -> Result<()> {
    let mut w = create(path)?;
    for v in m.values() {
        w.write_all(&(v.re as f32).to_le_bytes())
            .and_then(|_| w.write_all(&(v.im as f32).to_le_bytes()))
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    write_json(&sidecar(path), &ScdHeader::new(m, config))
}

pub const PROFILE_HEADER: [&str; 3] = ["alpha_hz", "max_magnitude", "window_index"];

/// One row per (profile, α) pair.
pub fn write_profiles(path: &Path, profiles: &[AlphaProfile]) -> Result<()> {
    let rows = profiles.iter().flat_map(|p| {
        p.alphas
            .iter()
            .zip(&p.maxima)
            .map(move |(a, m)| vec![fmt_sig(*a), fmt_sig(*m), p.window_index.to_string()])
    });
    write_rows(path, &PROFILE_HEADER, rows)
}

/// Sample values from a profile CSV: the `max_magnitude` column, or the
/// only column of a one-column file.
pub fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut records = r.records();
    let first = match records.next() {
        Some(rec) => rec.map_err(|e| csv_err(path, e))?,
        None => return Ok(Vec::new()),
    };
    let named = first.iter().position(|h| h == "max_magnitude");
    let column = match (named, first.len()) {
        (Some(i), _) => i,
        (None, 1) => 0,
        _ => {
            return Err(Error::format(
                path,
                "expected a max_magnitude column or a single column",
            ))
        }
    };
    let parse = |s: &str, line: usize| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::format(path, format!("line {line}: '{s}' is not a number")))
    };
    let mut out = Vec::new();
    if named.is_none() {
        out.push(parse(&first[0], 1)?);
    }
    for (i, rec) in records.enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let field = rec
            .get(column)
            .ok_or_else(|| Error::format(path, format!("line {}: missing column", i + 2)))?;
        out.push(parse(field, i + 2)?);
    }
    Ok(out)
}

pub fn write_decisions(path: &Path, decisions: &[Decision]) -> Result<()> {
    let rows = decisions.iter().map(|d| {
        vec![
            d.window_index.to_string(),
            fmt_sig(d.statistic),
            fmt_sig(d.threshold),
            d.occupied.to_string(),
        ]
    });
    write_rows(
        path,
        &["window_index", "statistic", "threshold", "occupied"],
        rows,
    )
}

pub fn roc_file_name(snr_db: f64) -> String {
    format!("roc_{snr_db}.csv")
}

/// `trials` is the number of H1 windows behind each detection rate.
pub fn write_roc(path: &Path, roc: &RocResult) -> Result<()> {
    let rows = roc.rows.iter().map(|r| {
        vec![
            fmt_sig(r.pf_preset),
            fmt_sig(r.pf_empirical),
            fmt_sig(r.pd_theoretical_curve),
            fmt_sig(r.pd_empirical),
            fmt_sig(r.threshold),
            r.h1_trials.to_string(),
        ]
    });
    write_rows(
        path,
        &[
            "pf_preset",
            "pf_empirical",
            "pd_theoretical_curve",
            "pd_empirical",
            "threshold",
            "trials",
        ],
        rows,
    )
}

pub fn write_histogram(path: &Path, h: &HistogramReport) -> Result<()> {
    let model = h.fitted();
    let rows = h
        .bin_edges
        .windows(2)
        .zip(&h.bin_counts)
        .zip(h.densities())
        .map(|((e, &count), density)| {
            let centre = 0.5 * (e[0] + e[1]);
            vec![
                fmt_sig(e[0]),
                fmt_sig(e[1]),
                count.to_string(),
                fmt_sig(density),
                fmt_sig(model.pdf(centre).unwrap_or(0.0)),
            ]
        });
    write_rows(
        path,
        &["bin_left", "bin_right", "count", "density", "fitted_pdf"],
        rows,
    )
}

//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use cyclo_gev::gev::{
    fit_gev_with, fit_gumbel_mle, sample_gev, threshold_for_pf, FitOptions, GevParams,
};
use cyclo_gev::harness::{self, ExperimentPlan};
use cyclo_gev::scd::{alpha_profile, estimate_scd, ScdConfig, Taper};
use cyclo_gev::siggen::{
    generate_am, generate_awgn_at, mix_at_snr, NoiseSpec, SampleBuffer, SignalSpec,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn desk_plan() -> ExperimentPlan {
    ExperimentPlan::desk()
}

fn gev_adequacy() -> Outcome {
    let plan = desk_plan();
    let samples = harness::collect_noise_profile(&plan).unwrap();
    let report = harness::fit_and_histogram(&samples, None, &plan.fit).unwrap();
    let critical = 1.63 / (samples.len() as f64).sqrt();
    let p = report.fitted();
    outcome(
        report.fit.converged && report.ks_statistic < critical,
        format!(
            "L={} KS={:.4} < {:.4}; fit kappa={:.4} mu={:.5} sigma={:.5}",
            samples.len(),
            report.ks_statistic,
            critical,
            p.kappa,
            p.mu,
            p.sigma
        ),
    )
}

fn roc_agreement() -> Outcome {
    let mut plan = desk_plan();
    plan.snr_db_list = vec![-10.0];
    let samples = harness::collect_noise_profile(&plan).unwrap();
    let model = harness::fit_and_histogram(&samples, None, &plan.fit)
        .unwrap()
        .fit
        .params;
    let roc = harness::run_roc(&plan, &model).unwrap().remove(0);
    let gap = roc.max_abs_pd_gap();
    let mut worst_z: f64 = 0.0;
    for r in &roc.rows {
        let se = (r.pf_preset * (1.0 - r.pf_preset) / r.h0_trials as f64).sqrt();
        worst_z = worst_z.max((r.pf_empirical - r.pf_preset).abs() / se);
    }
    outcome(
        gap <= 0.05 && worst_z <= 3.0,
        format!(
            "SNR -10 dB, M={}: max |dPd|={gap:.4}, worst |Pf_emp - Pf|={worst_z:.2} SE",
            plan.signal_windows
        ),
    )
}

fn threshold_closed_form() -> Outcome {
    let pfs = [1e-3, 0.01, 0.05, 0.1, 0.5];
    let kappas = [-0.3, 0.0, 1e-7, 0.3];
    let mut worst: f64 = 0.0;
    for &pf in &pfs {
        for &k in &kappas {
            let p = GevParams::new(k, 0.0, 1.0).unwrap();
            let t = threshold_for_pf(pf, &p).unwrap();
            worst = worst.max((1.0 - p.cdf(t) - pf).abs());
        }
    }
    let mut runner = TestRunner::new(Config {
        cases: 2000,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (
        prop::sample::select(pfs.to_vec()),
        prop::sample::select(kappas.to_vec()),
        -50.0..50.0f64,
        0.01..20.0f64,
    );
    let prop = runner.run(&strategy, |(pf, k, mu, sigma)| {
        let p = GevParams::new(k, mu, sigma).unwrap();
        let t = threshold_for_pf(pf, &p).unwrap();
        let err = (1.0 - p.cdf(t) - pf).abs();
        prop_assert!(
            err <= 1e-10,
            "pf={} kappa={} mu={} sigma={} err={}",
            pf,
            k,
            mu,
            sigma,
            err
        );
        Ok(())
    });
    let pass = worst <= 1e-10 && prop.is_ok();
    let note = match prop {
        Ok(()) => "2000 random (mu, sigma) cases ok".to_string(),
        Err(e) => format!("{e}"),
    };
    outcome(pass, format!("grid max error {worst:.2e}; {note}"))
}

/// Independent GEV log-likelihood.
fn loglik(x: &[f64], kappa: f64, mu: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return f64::NEG_INFINITY;
    }
    x.iter()
        .map(|&v| {
            let z = (v - mu) / sigma;
            if kappa == 0.0 {
                -sigma.ln() - z - (-z).exp()
            } else {
                let t = 1.0 + kappa * z;
                if t <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -sigma.ln() - (1.0 + 1.0 / kappa) * t.ln() - t.powf(-1.0 / kappa)
                }
            }
        })
        .sum()
}

fn invert(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))
            .unwrap();
        a.swap(c, p);
        inv.swap(c, p);
        let d = a[c][c];
        for j in 0..n {
            a[c][j] /= d;
            inv[c][j] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                for j in 0..n {
                    a[r][j] -= f * a[c][j];
                    inv[r][j] -= f * inv[c][j];
                }
            }
        }
    }
    inv
}

/// Asymptotic standard errors from the observed information.
fn standard_errors(f: &dyn Fn(&[f64]) -> f64, at: &[f64]) -> Vec<f64> {
    let n = at.len();
    let h = 1e-4;
    let mut info = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let eval = |si: f64, sj: f64| {
                let mut p = at.to_vec();
                p[i] += si * h;
                p[j] += sj * h;
                f(&p)
            };
            info[i][j] = -(eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * h * h);
        }
    }
    let cov = invert(info);
    (0..n).map(|i| cov[i][i].sqrt()).collect()
}

/// Arg-max of a regular grid spanning `centre ± span`.
fn grid_argmax(f: &dyn Fn(&[f64]) -> f64, centre: &[f64], span: &[f64], steps: usize) -> Vec<f64> {
    let n = centre.len();
    let mut best = (f64::NEG_INFINITY, centre.to_vec());
    for idx in 0..(steps + 1).pow(n as u32) {
        let mut rem = idx;
        let p: Vec<f64> = (0..n)
            .map(|d| {
                let i = rem % (steps + 1);
                rem /= steps + 1;
                centre[d] - span[d] + 2.0 * span[d] * i as f64 / steps as f64
            })
            .collect();
        let v = f(&p);
        if v > best.0 {
            best = (v, p);
        }
    }
    best.1
}

/// Fit within 3 SE of truth and within one grid cell of the grid optimum.
fn recovery_check(
    name: &str,
    truth: &[f64],
    est: &[f64],
    ll: &dyn Fn(&[f64]) -> f64,
) -> (bool, String) {
    let se = standard_errors(ll, est);
    let steps = if truth.len() == 2 { 40 } else { 24 };
    let span: Vec<f64> = se.iter().map(|s| 4.0 * s).collect();
    let grid = grid_argmax(ll, truth, &span, steps);
    let mut pass = true;
    let mut parts = Vec::new();
    for d in 0..truth.len() {
        let z = (est[d] - truth[d]).abs() / se[d];
        let cell = 2.0 * span[d] / steps as f64;
        let on_grid = (grid[d] - est[d]).abs() <= cell;
        pass &= z <= 3.0 && on_grid;
        parts.push(format!(
            "{:.4} ({z:.2} SE{})",
            est[d],
            if on_grid { "" } else { ", off grid optimum" }
        ));
    }
    (pass, format!("{name}: [{}]", parts.join(", ")))
}

fn mle_recovery() -> Outcome {
    let g = sample_gev(&GevParams::gumbel(5.0, 2.0).unwrap(), 10_000, 2024).unwrap();
    let gf = fit_gumbel_mle(&g, 1e-10, 200).unwrap();
    let gll = |p: &[f64]| loglik(&g, 0.0, p[0], p[1]);
    let (gp, gd) = recovery_check(
        "Gumbel(5,2) mu,sigma",
        &[5.0, 2.0],
        &[gf.params.mu, gf.params.sigma],
        &gll,
    );

    let truth = [0.1, 3.0, 0.5];
    let x = sample_gev(
        &GevParams::new(truth[0], truth[1], truth[2]).unwrap(),
        10_000,
        77,
    )
    .unwrap();
    let opts = FitOptions {
        joint_refinement: true,
        ..FitOptions::default()
    };
    let xf = fit_gev_with(&x, &opts).unwrap();
    let xll = |p: &[f64]| loglik(&x, p[0], p[1], p[2]);
    let est = [xf.params.kappa, xf.params.mu, xf.params.sigma];
    let (xp, xd) = recovery_check("GEV(0.1,3,0.5) kappa,mu,sigma", &truth, &est, &xll);
    outcome(
        gp && xp && gf.converged && xf.converged,
        format!("{gd}; {xd}"),
    )
}

fn naive_smoothed_periodogram(x: &[f64], smoothing: usize) -> Vec<f64> {
    let k = x.len();
    let w: Vec<f64> = (0..k)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (k - 1) as f64).cos())
        .collect();
    let u = w.iter().map(|v| v * v).sum::<f64>() / k as f64;
    let power: Vec<f64> = (0..k)
        .map(|j| {
            let bin = j as f64 - (k / 2) as f64;
            let (mut re, mut im) = (0.0, 0.0);
            for n in 0..k {
                let ph = -2.0 * PI * bin * n as f64 / k as f64;
                re += w[n] * x[n] * ph.cos();
                im += w[n] * x[n] * ph.sin();
            }
            (re * re + im * im) / (k as f64 * u)
        })
        .collect();
    let half = (smoothing | 1) / 2;
    (0..k)
        .map(|j| {
            let lo = j.saturating_sub(half);
            let hi = (j + half).min(k - 1);
            power[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn scd_oracles() -> Outcome {
    let noise = |k: usize, seed: u64| -> SampleBuffer {
        generate_awgn_at(
            k,
            &NoiseSpec {
                variance: 1.0,
                seed,
            },
            1.0,
        )
        .unwrap()
    };

    // α = 0 against a direct DFT
    let k = 512;
    let cfg = ScdConfig {
        window_length: k,
        taper: Taper::Hamming,
        smoothing_length: 40,
        alpha_grid: vec![0],
    };
    let w = noise(k, 77);
    let m = estimate_scd(&w, &cfg).unwrap();
    let oracle = naive_smoothed_periodogram(w.samples(), 40);
    let psd_err = oracle
        .iter()
        .enumerate()
        .map(|(r, e)| (m.get(r, 0) - e).norm() / e.abs())
        .fold(0.0, f64::max);

    // conjugate symmetry and quadratic scaling
    let cfg = ScdConfig {
        window_length: 1024,
        taper: Taper::Hamming,
        smoothing_length: 31,
        alpha_grid: vec![-200, 200],
    };
    let w = noise(1024, 5);
    let a = estimate_scd(&w, &cfg).unwrap();
    let conj_err = (0..a.rows())
        .map(|r| (a.get(r, 0) - a.get(r, 1).conj()).norm() / a.get(r, 1).norm())
        .fold(0.0, f64::max);
    let c = 2.5;
    let b = estimate_scd(&w.scaled(c), &cfg).unwrap();
    let scale_err = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (y - x * c * c).norm() / (x * c * c).norm())
        .fold(0.0, f64::max);

    // AM feature against the median of nearby cyclic frequencies
    let plan = desk_plan();
    let alpha0 = plan.alpha0_bins();
    let mut grid: Vec<i64> = (-64..=64i64)
        .step_by(2)
        .filter(|d| d.abs() > 8)
        .map(|d| alpha0 + d)
        .collect();
    grid.push(alpha0);
    let cfg = ScdConfig::table1(grid);
    let spec = SignalSpec::table1();
    let mut features = Vec::new();
    let mut background = Vec::new();
    for trial in 0..50u64 {
        let am = generate_am(&spec, 1000 + trial).unwrap();
        let n = generate_awgn_at(
            4096,
            &NoiseSpec {
                variance: 1.0,
                seed: 2000 + trial,
            },
            spec.sample_rate_hz,
        )
        .unwrap();
        let p = alpha_profile(&estimate_scd(&mix_at_snr(&am, &n, -10.0).unwrap(), &cfg).unwrap())
            .unwrap();
        for (bin, v) in p.alpha_bins.iter().zip(&p.maxima) {
            if *bin == alpha0 {
                features.push(*v);
            } else {
                background.push(*v);
            }
        }
    }
    let feature = median(features);
    let ratio = feature / median(background);
    // same feature against noise-only windows, for reference
    let h0: Vec<f64> = (0..50u64)
        .flat_map(|trial| {
            let n = generate_awgn_at(
                4096,
                &NoiseSpec {
                    variance: 1.0,
                    seed: 3000 + trial,
                },
                spec.sample_rate_hz,
            )
            .unwrap();
            alpha_profile(&estimate_scd(&n, &cfg).unwrap())
                .unwrap()
                .maxima
        })
        .collect();
    let h0_ratio = feature / median(h0);

    let pass = psd_err <= 1e-12 && conj_err <= 1e-10 && scale_err <= 1e-10 && ratio >= 3.0;
    outcome(
        pass,
        format!(
            "alpha=0 vs direct DFT {psd_err:.1e}; conjugate {conj_err:.1e}; c^2 scaling {scale_err:.1e}; \
             AM feature / noise-alpha median at -10 dB = {ratio:.3} (need >= 3; {h0_ratio:.3} against noise-only windows)"
        ),
    )
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let plan = tmp.path().join("plan.json");
    cyclo_gev::io::write_json(&plan, &desk_plan()).unwrap();
    let mut outputs = Vec::new();
    for jobs in ["1", "4", "4"] {
        let out = tmp.path().join(format!("out{}", outputs.len()));
        let code = cyclo_gev_cli::run([
            "cyclo-gev",
            "roc",
            "--plan",
            plan.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--jobs",
            jobs,
        ]);
        if code != 0 {
            return outcome(false, format!("roc exited with {code}"));
        }
        outputs.push(read_dir(&out));
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    let files: Vec<&String> = outputs[0].keys().collect();
    outcome(
        same && files.len() == 7,
        format!(
            "3 runs (jobs 1, 4, 4) over {} files: {}",
            files.len(),
            if same { "byte-identical" } else { "differ" }
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 6] = [
        ("1 GEV model adequacy", gev_adequacy),
        ("2 ROC agreement", roc_agreement),
        ("3 threshold closed form", threshold_closed_form),
        ("4 MLE recovery", mle_recovery),
        ("5 SCD correctness oracles", scd_oracles),
        ("6 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!(
            "criterion {name}: {} | {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of 6 criteria passed", 6 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cyclo-gev"))
}

fn plans_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../plans")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_gumbel_fit(path: &Path) {
    fs::write(
        path,
        r#"{"kappa":0.0,"mu":0.0,"sigma":1.0,"log_likelihood":0.0,"converged":true,
            "sample_count":1000,"solver":{"tol":1e-9,"iterations":1}}"#,
    )
    .unwrap();
}

#[test]
fn threshold_prints_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let fit = dir.path().join("fit.json");
    write_gumbel_fit(&fit);
    let out = run(&["threshold", "--pf", "0.05", "--fit", s(&fit)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "2.97020\n");

    let out = run(&["threshold", "--pf", "1.5", "--fit", s(&fit)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_on_constant_samples_names_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("samples.csv");
    fs::write(&csv, "0.5\n".repeat(200)).unwrap();
    let out = run(&[
        "fit",
        "--samples",
        s(&csv),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("degenerate"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn exit_codes_by_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let missing = dir.path().join("missing.csv");
    assert_eq!(
        run(&["fit", "--samples", s(&missing), "--out", s(&out_dir)])
            .status
            .code(),
        Some(4)
    );
    assert_eq!(
        run(&["threshold", "--pf", "0.1", "--fit", s(&missing)])
            .status
            .code(),
        Some(4)
    );
    assert_eq!(
        run(&["collect", "--set", "pf_grid=[]", "--out", s(&out_dir)])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["collect", "--set", "bogus=1", "--out", s(&out_dir)])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["roc", "--set", "noise_windows_L=10", "--out", s(&out_dir)])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));

    let garbage = dir.path().join("plan.json");
    fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(
        run(&["collect", "--plan", s(&garbage), "--out", s(&out_dir)])
            .status
            .code(),
        Some(4)
    );
}

#[test]
fn gen_then_scd_on_the_written_signal() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("gen");
    let out = run(&["gen", "--snr", "-10", "--out", s(&g)]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(fs::metadata(g.join("signal.f64")).unwrap().len(), 4096 * 8);
    assert!(g.join("signal.json").exists() && g.join("plan.json").exists());

    let sc = dir.path().join("scd");
    let out = run(&["scd", "--input", s(&g.join("signal.f64")), "--out", s(&sc)]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    // desk plan: 33 cyclic frequencies, 4096 rows, two f32 per cell
    assert_eq!(
        fs::metadata(sc.join("scd.bin")).unwrap().len(),
        4096 * 33 * 8
    );
    assert!(sc.join("scd.json").exists() && sc.join("plan.json").exists());
    let profile = fs::read_to_string(sc.join("profile.csv")).unwrap();
    assert_eq!(profile.lines().count(), 34);
    assert!(profile.starts_with("alpha_hz,max_magnitude,window_index\n"));

    let out = run(&[
        "scd",
        "--input",
        s(&g.join("signal.f64")),
        "--window",
        "1",
        "--out",
        s(&sc),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn collect_then_fit_matches_fit_from_plan() {
    let dir = tempfile::tempdir().unwrap();
    let set = ["--set", "noise_windows_L=150"];
    let c = dir.path().join("collect");
    assert_eq!(
        run(&[&["collect", "--out", s(&c)][..], &set].concat())
            .status
            .code(),
        Some(0)
    );
    let profile = fs::read_to_string(c.join("profile.csv")).unwrap();
    assert_eq!(profile.lines().count(), 151);

    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let samples = c.join("profile.csv");
    assert_eq!(
        run(&[&["fit", "--samples", s(&samples), "--out", s(&a)][..], &set].concat())
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        run(&[&["fit", "--out", s(&b)][..], &set].concat())
            .status
            .code(),
        Some(0)
    );
    // samples in the CSV carry 9 digits, so compare the fit loosely
    let fa: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("fit.json")).unwrap()).unwrap();
    let fb: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(b.join("fit.json")).unwrap()).unwrap();
    for key in ["kappa", "mu", "sigma"] {
        let (x, y) = (fa[key].as_f64().unwrap(), fb[key].as_f64().unwrap());
        assert!((x - y).abs() < 1e-6, "{key}: {x} vs {y}");
    }
    assert!(a.join("histogram.csv").exists() && a.join("plan.json").exists());

    let again = dir.path().join("again");
    assert_eq!(
        run(&[&["collect", "--out", s(&again)][..], &set].concat())
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        fs::read(again.join("profile.csv")).unwrap(),
        profile.into_bytes()
    );
}

#[test]
fn roc_with_the_paper_plan() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("roc");
    let plan = plans_dir().join("paper.json");
    let o = run(&["roc", "--plan", s(&plan), "--out", s(&out)]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for snr in ["-15", "-10", "-5", "0"] {
        let text = fs::read_to_string(out.join(format!("roc_{snr}.csv"))).unwrap();
        assert!(text.starts_with(
            "pf_preset,pf_empirical,pd_theoretical_curve,pd_empirical,threshold,trials\n"
        ));
        assert_eq!(text.lines().count(), 8);
    }
    let resolved = fs::read_to_string(out.join("plan.json")).unwrap();
    assert_eq!(resolved, fs::read_to_string(&plan).unwrap());
    assert!(resolved.contains("\"noise_windows_L\": 10000"));
    assert!(out.join("fit.json").exists() && out.join("histogram.csv").exists());
}

#[test]
fn roc_can_reuse_a_fit() {
    let dir = tempfile::tempdir().unwrap();
    let fit = dir.path().join("fit.json");
    write_gumbel_fit(&fit);
    let out = dir.path().join("roc");
    let o = run(&[
        "roc",
        "--fit",
        s(&fit),
        "--set",
        "noise_windows_L=100",
        "--set",
        "signal_windows_M=100",
        "--set",
        "snr_db_list=[20]",
        "--out",
        s(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = fs::read_to_string(out.join("roc_20.csv")).unwrap();
    // a Gumbel(0, 1) model puts every threshold far above the real noise,
    // yet a +20 dB carrier still clears it
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[1], "0");
        assert_eq!(cols[2], "1");
    }
    assert!(!out.join("histogram.csv").exists());
}

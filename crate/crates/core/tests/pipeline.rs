mod common;

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;

use vbt_tem::analysis::check_local_condition;
use vbt_tem::encoder::{encode_vbt, encoding_from_firings, Scheme, VbtMode, VbtParams};
use vbt_tem::experiment::{report_json, run_experiment, ExperimentConfig, ExperimentReport};
use vbt_tem::io;
use vbt_tem::reconstruction::{iterative_reconstruct, ReconstructionConfig};
use vbt_tem::signal::{
    from_uniform_samples, make_sos, Atom, BandlimitedSignal, SincAtom, Window,
};
use vbt_tem::Error;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vbt-tem"))
}

fn write_rows(path: &Path, rows: &[(f64, f64)]) {
    let mut s = String::from("t,value\n");
    for (t, v) in rows {
        s.push_str(&format!("{t:.17e},{v:.17e}\n"));
    }
    fs::write(path, s).unwrap();
}

#[test]
fn all_zero_csv_fires_at_constant_rate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zeros.csv");
    let rows: Vec<_> = (0..400).map(|k| (k as f64 / 2000.0, 0.0)).collect();
    write_rows(&path, &rows);
    let s = io::ingest_csv(&path, 2000.0, Some(100.0)).unwrap();
    let enc = encode_vbt(&s, VbtParams::shifted(0.15, 5600.0, 3.2, 1.0), VbtMode::Shifted).unwrap();
    let tau = common::constant_interval(0.0, 0.15, 5600.0, 3.2, 1.0);
    assert!(enc.intervals.len() > 5);
    for d in &enc.intervals {
        assert!((d.length - tau).abs() < 1e-8);
    }
}

#[test]
fn jittered_timestamp_names_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("jitter.csv");
    let mut rows: Vec<_> = (0..40).map(|k| (k as f64 / 1000.0, (k as f64).sin())).collect();
    rows[12].0 += 2e-5;
    write_rows(&path, &rows);
    match io::ingest_csv(&path, 1000.0, None) {
        // header is line 1, so row 12 sits on line 14
        Err(Error::Ingestion(msg)) => assert!(msg.contains(":14:"), "{msg}"),
        other => panic!("expected an ingestion error, got {other:?}"),
    }
}

#[test]
fn malformed_csv_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "t,value\n0,1\n0.001,2\n0.002,abc\n").unwrap();
    match io::ingest_csv(&path, 1000.0, None) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn too_few_samples_rejected() {
    let rows: Vec<_> = (0..7).map(|k| (k as f64 / 1000.0, 0.5)).collect();
    assert!(matches!(from_uniform_samples(&rows, 1000.0, None), Err(Error::Ingestion(_))));
}

#[test]
fn ingest_recovers_known_generator() {
    // 100 Hz-band generator; atoms well inside the sampled span
    let atoms: Vec<Atom> = [(-0.05, 0.8), (0.0, -0.5), (0.013, 0.3), (0.06, 0.6)]
        .iter()
        .map(|&(center, amplitude)| Atom::Sinc(SincAtom { amplitude, center, rate: 100.0 }))
        .collect();
    let window = Window::new(-1.0, 1.0).unwrap();
    let gen = BandlimitedSignal::new("gen", atoms, 0.0, 2.0 * PI * 100.0, 1.0, window).unwrap();
    let fs = 2000.0;
    let rows: Vec<_> = (0..=4000).map(|k| {
        let t = -1.0 + k as f64 / fs;
        (t, gen.eval(t))
    }).collect();
    let s = from_uniform_samples(&rows, fs, Some(100.0)).unwrap();
    // the model is normalized to unit peak; undo that with one sample
    let (tm, vm) = rows[2000];
    let k = vm / s.eval(tm);
    for &(t, v) in rows.iter().step_by(97) {
        assert!((s.eval(t) * k - v).abs() < 1e-9, "sample at {t}");
    }
    let peak = gen.peak_abs();
    let mut worst: f64 = 0.0;
    for j in 0..200 {
        let t = -0.1 + 0.2 * (j as f64 + 0.37) / 200.0;
        worst = worst.max((s.eval(t) * k - gen.eval(t)).abs() / peak);
    }
    assert!(worst < 1e-6, "off-grid relative error {worst:e}");
}

#[test]
fn encoding_and_signal_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = make_sos(3);
    let enc = encode_vbt(&s, VbtParams::shifted(0.45, 2400.0, 3.0, 1.0), VbtMode::Shifted).unwrap();
    let ep = dir.path().join("enc.csv");
    let sp = dir.path().join("sig.json");
    io::write_encoding_csv(&ep, &enc).unwrap();
    io::save_signal(&sp, &s).unwrap();
    assert_eq!(io::read_encoding_csv(&ep).unwrap(), enc);
    assert_eq!(io::load_signal(&sp).unwrap(), s);
}

#[test]
fn zero_signal_reconstructs_to_zero() {
    let z = BandlimitedSignal::new("zero", vec![], 0.0, 2.0 * PI * 50.0, 1.0, Window::new(-0.45, 0.45).unwrap())
        .unwrap();
    let enc = encode_vbt(&z, VbtParams::shifted(0.45, 2400.0, 3.0, 1.0), VbtMode::Shifted).unwrap();
    let cfg = ReconstructionConfig::for_encoding(&enc);
    let r = iterative_reconstruct(&enc, &cfg, None).unwrap();
    assert!(r.f_hat.iter().all(|v| v.abs() < 1e-9));
}

#[test]
fn undersampled_fast_region_violates_local_condition() {
    let s = make_sos(7);
    let step = 1.5 * s.nyquist_interval();
    let firings: Vec<f64> = (0..)
        .map(|k| -0.45 + k as f64 * step)
        .take_while(|t| *t <= 0.45)
        .collect();
    let p = VbtParams::shifted(0.45, 2400.0, 3.0, 1.0);
    let scheme = Scheme::Vbt { mode: VbtMode::Unshifted, params: p };
    let enc = encoding_from_firings(&s, firings, scheme, 0.0).unwrap();
    let rep = check_local_condition(&s, &enc).unwrap();
    assert!(!rep.all_pass());
}

fn run(preset: &str, dir: &Path, tweak: impl Fn(&mut ExperimentConfig)) -> ExperimentReport {
    let mut cfg = ExperimentConfig::new(preset, 7);
    tweak(&mut cfg);
    run_experiment(&cfg, dir).unwrap().report
}

#[test]
fn chirp_comparison_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let rep = run("chirp-comparison", dir.path(), |_| {});
    let svgs: Vec<_> = rep.manifest.iter().filter(|f| f.ends_with(".svg")).collect();
    assert_eq!(svgs.len(), rep.records.len() + 1, "{svgs:?}");
    for r in &rep.records {
        assert!(svgs.iter().any(|f| f.contains(r.method.as_str())), "{}", r.method);
    }
    assert!(svgs.iter().any(|f| f.ends_with("-overlay.svg")));
    for f in &rep.manifest {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn report_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    run("iteration-trace", dir.path(), |_| {});
    let text = fs::read_to_string(dir.path().join("report.json")).unwrap();
    let back: ExperimentReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report_json(&back).unwrap(), text);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run("four-region-demo", a.path(), |_| {});
    run("four-region-demo", b.path(), |_| {});
    let ra = fs::read(a.path().join("report.json")).unwrap();
    assert_eq!(ra, fs::read(b.path().join("report.json")).unwrap());
}

#[test]
fn trial_results_do_not_depend_on_thread_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    pool(1).install(|| run("sos-table", a.path(), |c| c.trials = Some(3)));
    pool(3).install(|| run("sos-table", b.path(), |c| c.trials = Some(3)));
    let ra = fs::read(a.path().join("report.json")).unwrap();
    assert_eq!(ra, fs::read(b.path().join("report.json")).unwrap());
}

#[test]
fn ingest_preset_requires_input() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::new("ingest-csv", 7);
    assert!(matches!(run_experiment(&cfg, dir.path()), Err(Error::Parameter(_))));
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let code = |args: &[&str]| bin().arg("--outdir").arg(out).args(args).output().unwrap().status.code();

    assert_eq!(code(&["--no-such-flag"]), Some(1));
    assert_eq!(code(&["experiment", "no-such-preset"]), Some(1));
    assert_eq!(code(&["generate", "--signal", "chirp"]), Some(0));
    assert_eq!(code(&["encode", "--signal-file", out.join("signal.json").to_str().unwrap()]), Some(0));
    let enc = out.join("encoding.csv");
    let sig = out.join("signal.json");
    assert_eq!(code(&["verify", "--encoding", enc.to_str().unwrap(), "--signal-file", sig.to_str().unwrap()]), Some(0));
    assert_eq!(code(&["verify", "--encoding", "missing.csv", "--signal-file", sig.to_str().unwrap()]), Some(3));
    assert_eq!(code(&["encode", "--preset", "chirp", "--alpha", "1.5"]), Some(1));

    // a theorem-backed failure: uniform firings too sparse for the fast region
    let s = make_sos(7);
    let step = 1.5 * s.nyquist_interval();
    let firings: Vec<f64> = (0..).map(|k| -0.45 + k as f64 * step).take_while(|t| *t <= 0.45).collect();
    let p = VbtParams::shifted(0.45, 2400.0, 3.0, 1.0);
    let bad = encoding_from_firings(&s, firings, Scheme::Vbt { mode: VbtMode::Unshifted, params: p }, 0.0).unwrap();
    let bad_enc = out.join("bad.csv");
    let bad_sig = out.join("sos.json");
    io::write_encoding_csv(&bad_enc, &bad).unwrap();
    io::save_signal(&bad_sig, &s).unwrap();
    assert_eq!(code(&["verify", "--encoding", bad_enc.to_str().unwrap(), "--signal-file", bad_sig.to_str().unwrap()]), Some(2));
}

#[test]
fn cli_env_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("VBT_TEM_OUTDIR", dir.path())
        .env("VBT_TEM_JSON_ONLY", "true")
        .args(["encode", "--preset", "chirp"])
        .env("VBT_TEM_ALPHA", "0.3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let enc = io::read_encoding_csv(&dir.path().join("encoding.csv")).unwrap();
    assert_eq!(enc.meta.scheme.alpha(), Some(0.3));
    assert_eq!(v["samples"].as_u64(), Some(enc.sample_count() as u64));
}

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use vbt_tem::analysis::verify;
use vbt_tem::encoder::{
    encode_adaptive, encode_conventional, encode_vbt, AdaptiveParams, ConventionalParams,
    Encoding, VbtMode, VbtParams,
};
use vbt_tem::experiment::{run_experiment, ExperimentConfig, PRESETS};
use vbt_tem::io;
use vbt_tem::reconstruction::{iterative_reconstruct, OffsetRemoval, ReconstructionConfig};
use vbt_tem::signal::{
    make_chirp, make_ecg_surrogate, make_four_region, make_sos, make_tone, BandlimitedSignal,
    Grid, Window,
};
use vbt_tem::{Error, Result};

/// Variable-bias, variable-threshold time encoding and reconstruction of
/// bandlimited signals.
#[derive(Parser, Debug)]
#[command(name = "vbt-tem", version)]
struct Cli {
    /// Master seed for generated signals and trials.
    #[arg(long, global = true, env = "VBT_TEM_SEED", default_value_t = 7)]
    seed: u64,
    /// Encoder fine-grid cells per Nyquist interval.
    #[arg(long, global = true, env = "VBT_TEM_GRID_OVERSAMPLE", default_value_t = 64)]
    grid_oversample: usize,
    /// Output directory.
    #[arg(long, global = true, env = "VBT_TEM_OUTDIR", default_value = "out")]
    outdir: PathBuf,
    /// Print JSON on stdout and skip CSV/SVG artifacts where they are optional.
    #[arg(long, global = true, env = "VBT_TEM_JSON_ONLY")]
    json_only: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Write a preset signal (model JSON and sampled CSV), or surrogate data CSV.
    Generate(GenerateArgs),
    /// Encode a signal into firing times and averages.
    Encode(EncodeArgs),
    /// Reconstruct a signal from an encoding CSV.
    Reconstruct(ReconstructArgs),
    /// Check the sampling inequalities on an encoding; exits 2 on a failure.
    Verify(VerifyArgs),
    /// Run an experiment preset.
    Experiment(ExperimentArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SignalKind {
    Chirp,
    Sos,
    FourRegion,
    Tone,
    EcgSurrogate,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum, env = "VBT_TEM_SIGNAL", default_value = "chirp")]
    signal: SignalKind,
    /// Tone amplitude.
    #[arg(long, env = "VBT_TEM_TONE_AMPLITUDE", default_value_t = 1.0)]
    tone_amplitude: f64,
    /// Tone frequency in Hz.
    #[arg(long, env = "VBT_TEM_TONE_HZ", default_value_t = 10.0)]
    tone_hz: f64,
    /// Band limit in Hz (tone and ECG surrogate).
    #[arg(long, env = "VBT_TEM_BAND", default_value_t = 100.0)]
    band: f64,
    /// Duration in seconds (tone and ECG surrogate).
    #[arg(long, env = "VBT_TEM_DURATION", default_value_t = 2.0)]
    duration: f64,
    /// Sampling rate of the ECG surrogate in Hz.
    #[arg(long, env = "VBT_TEM_FS", default_value_t = 2000.0)]
    fs: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SchemeKind {
    Conventional,
    VbtShifted,
    VbtUnshifted,
    VbtRegularized,
    Adaptive,
}

#[derive(Args, Debug, Default)]
struct SourceArgs {
    /// Signal model JSON written by `generate` or `encode`.
    #[arg(long, env = "VBT_TEM_SIGNAL_FILE")]
    signal_file: Option<PathBuf>,
    /// Built-in signal instead of a file (sos uses --seed).
    #[arg(long, value_enum, env = "VBT_TEM_PRESET_SIGNAL")]
    preset: Option<SignalKind>,
    /// Uniformly sampled `t,value` CSV to ingest.
    #[arg(long, env = "VBT_TEM_INPUT")]
    input: Option<PathBuf>,
    /// Sampling rate of --input in Hz.
    #[arg(long, env = "VBT_TEM_FS")]
    fs: Option<f64>,
    /// Known band of --input in Hz.
    #[arg(long, env = "VBT_TEM_BAND")]
    band: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct ParamArgs {
    #[arg(long, env = "VBT_TEM_ALPHA")]
    alpha: Option<f64>,
    #[arg(long, env = "VBT_TEM_BETA")]
    beta: Option<f64>,
    /// Signal shift s.
    #[arg(long, env = "VBT_TEM_SHIFT")]
    shift: Option<f64>,
    /// Amplitude bound c.
    #[arg(long, env = "VBT_TEM_C")]
    c: Option<f64>,
    /// Conventional bias b.
    #[arg(long, env = "VBT_TEM_BIAS")]
    bias: Option<f64>,
    /// Conventional threshold.
    #[arg(long, env = "VBT_TEM_THRESHOLD")]
    threshold: Option<f64>,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    #[arg(long, env = "VBT_TEM_MAX_ITERS", default_value_t = vbt_tem::reconstruction::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    /// Stop once an iteration improves the trace by less than this (dB).
    #[arg(long, env = "VBT_TEM_STOP_DELTA_DB", default_value_t = vbt_tem::reconstruction::DEFAULT_STOP_DELTA_DB)]
    stop_delta_db: f64,
    /// Fraction of the window excluded at each edge when scoring NMSE.
    #[arg(long, env = "VBT_TEM_GUARD_BAND", default_value_t = 0.0)]
    guard_band: f64,
    /// Where the shift of a shifted encoding is removed: measurement or output.
    #[arg(long, env = "VBT_TEM_OFFSET_REMOVAL", default_value = "measurement")]
    offset_removal: OffsetRemoval,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, value_enum, env = "VBT_TEM_SCHEME", default_value = "vbt-shifted")]
    scheme: SchemeKind,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, env = "VBT_TEM_GAMMA1", default_value_t = 0.0)]
    gamma1: f64,
    #[arg(long, env = "VBT_TEM_GAMMA2", default_value_t = 0.0)]
    gamma2: f64,
    #[arg(long, env = "VBT_TEM_ALPHA_HIGH", default_value_t = 0.09)]
    alpha_high: f64,
    #[arg(long, env = "VBT_TEM_BETA_HIGH", default_value_t = 2300.0)]
    beta_high: f64,
    #[arg(long, env = "VBT_TEM_ALPHA_LOW", default_value_t = 0.9)]
    alpha_low: f64,
    #[arg(long, env = "VBT_TEM_BETA_LOW", default_value_t = 10.0)]
    beta_low: f64,
    /// Switching threshold on |f f'|.
    #[arg(long, env = "VBT_TEM_DELTA", default_value_t = 6e-6)]
    delta: f64,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    #[arg(long, env = "VBT_TEM_ENCODING")]
    encoding: PathBuf,
    /// Ground-truth signal model for NMSE.
    #[arg(long, env = "VBT_TEM_SIGNAL_FILE")]
    signal_file: Option<PathBuf>,
    #[command(flatten)]
    decode: DecodeArgs,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, env = "VBT_TEM_ENCODING")]
    encoding: PathBuf,
    #[arg(long, env = "VBT_TEM_SIGNAL_FILE")]
    signal_file: PathBuf,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// One of the preset names.
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: String,
    #[arg(long, env = "VBT_TEM_TRIALS")]
    trials: Option<usize>,
    #[arg(long, env = "VBT_TEM_INPUT")]
    input: Option<PathBuf>,
    #[arg(long, env = "VBT_TEM_FS")]
    fs: Option<f64>,
    #[arg(long, env = "VBT_TEM_BAND")]
    band: Option<f64>,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    decode: DecodeArgs,
}

// Writes to stdout, ignoring a closed pipe.
macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parameter(_) | Error::Domain { .. } | Error::MetadataMismatch(_) => 1,
        Error::Io { .. } | Error::Parse { .. } | Error::Ingestion(_) | Error::Json(_) => 3,
        Error::LowEnergy { .. }
        | Error::TooManyFirings(_)
        | Error::EmptyEncoding
        | Error::NonContraction { .. }
        | Error::ZeroReference => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    std::fs::create_dir_all(&cli.outdir).map_err(|e| Error::io(&cli.outdir, e))?;
    match &cli.cmd {
        Cmd::Generate(a) => generate(cli, a),
        Cmd::Encode(a) => encode(cli, a),
        Cmd::Reconstruct(a) => reconstruct(cli, a),
        Cmd::Verify(a) => verify_cmd(cli, a),
        Cmd::Experiment(a) => experiment(cli, a),
    }
}

fn emit_json<T: serde::Serialize>(v: &T) -> Result<()> {
    outln!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn preset_signal(kind: SignalKind, seed: u64, a: Option<&GenerateArgs>) -> Result<BandlimitedSignal> {
    Ok(match kind {
        SignalKind::Chirp => make_chirp(),
        SignalKind::Sos => make_sos(seed),
        SignalKind::FourRegion => make_four_region(),
        SignalKind::Tone => {
            let (amp, hz, band, dur) = a.map_or((1.0, 10.0, 100.0, 2.0), |a| {
                (a.tone_amplitude, a.tone_hz, a.band, a.duration)
            });
            make_tone(
                amp,
                2.0 * PI * hz,
                Window::new(-dur / 2.0, dur / 2.0)?,
                2.0 * PI * band,
                amp.abs().max(1e-12),
            )?
        }
        SignalKind::EcgSurrogate => {
            return Err(Error::Parameter(
                "ecg-surrogate is sampled data; write it with `generate` and pass it as --input"
                    .into(),
            ))
        }
    })
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<u8> {
    if a.signal == SignalKind::EcgSurrogate {
        let samples = make_ecg_surrogate(cli.seed, a.duration, a.fs, a.band);
        let path = cli.outdir.join("ecg-surrogate.csv");
        io::write_samples_csv(&path, &samples)?;
        if cli.json_only {
            emit_json(&serde_json::json!({ "samples": samples.len(), "fs": a.fs, "band_hz": a.band, "file": path }))?;
        } else {
            outln!("wrote {} samples at {} Hz to {}", samples.len(), a.fs, path.display());
        }
        return Ok(0);
    }
    let signal = preset_signal(a.signal, cli.seed, Some(a))?.with_oversample(cli.grid_oversample);
    let json = cli.outdir.join("signal.json");
    io::save_signal(&json, &signal)?;
    let grid = Grid::covering(signal.window, signal.nyquist_interval() / 16.0);
    let csv = cli.outdir.join("signal.csv");
    if !cli.json_only {
        io::write_signal_csv(&csv, &signal, &grid)?;
    }
    if cli.json_only {
        emit_json(&serde_json::json!({
            "name": signal.name, "omega0": signal.omega0, "window": [signal.window.start, signal.window.end],
            "nyquist_count": signal.nyquist_count(), "model": json,
        }))?;
    } else {
        outln!(
            "{}: window [{}, {}] s, band {} Hz, Nyquist count {}",
            signal.name,
            signal.window.start,
            signal.window.end,
            signal.omega0 / (2.0 * PI),
            signal.nyquist_count()
        );
        outln!("wrote {} and {}", json.display(), csv.display());
    }
    Ok(0)
}

fn load_source(cli: &Cli, s: &SourceArgs) -> Result<BandlimitedSignal> {
    let chosen = [s.signal_file.is_some(), s.preset.is_some(), s.input.is_some()]
        .iter()
        .filter(|b| **b)
        .count();
    if chosen != 1 {
        return Err(Error::Parameter(
            "give exactly one of --signal-file, --preset, --input".into(),
        ));
    }
    let signal = if let Some(p) = &s.signal_file {
        io::load_signal(p)?
    } else if let Some(k) = s.preset {
        preset_signal(k, cli.seed, None)?
    } else {
        let fs = s
            .fs
            .ok_or_else(|| Error::Parameter("--input requires --fs".into()))?;
        io::ingest_csv(s.input.as_deref().expect("checked"), fs, s.band)?
    };
    Ok(signal.with_oversample(cli.grid_oversample))
}

fn encode(cli: &Cli, a: &EncodeArgs) -> Result<u8> {
    let signal = load_source(cli, &a.source)?;
    let p = &a.params;
    let vbt = VbtParams {
        alpha: p.alpha.unwrap_or(0.5),
        beta: p.beta.unwrap_or(5600.0),
        shift: p.shift.unwrap_or(4.2),
        c: p.c.unwrap_or(signal.amp_bound),
        gamma1: a.gamma1,
        gamma2: a.gamma2,
    };
    let enc: Encoding = match a.scheme {
        SchemeKind::Conventional => encode_conventional(
            &signal,
            ConventionalParams {
                bias: p.bias.unwrap_or(1.3),
                threshold: p.threshold.unwrap_or(0.0015),
            },
        )?,
        SchemeKind::VbtShifted => encode_vbt(&signal, vbt, VbtMode::Shifted)?,
        SchemeKind::VbtUnshifted => encode_vbt(&signal, vbt, VbtMode::Unshifted)?,
        SchemeKind::VbtRegularized => encode_vbt(&signal, vbt, VbtMode::Regularized)?,
        SchemeKind::Adaptive => encode_adaptive(
            &signal,
            AdaptiveParams {
                alpha_high: a.alpha_high,
                beta_high: a.beta_high,
                alpha_low: a.alpha_low,
                beta_low: a.beta_low,
                delta: a.delta,
                shift: vbt.shift,
                c: vbt.c,
            },
        )?,
    };
    let path = cli.outdir.join("encoding.csv");
    io::write_encoding_csv(&path, &enc)?;
    let model = cli.outdir.join("signal.json");
    if a.source.signal_file.as_deref() != Some(model.as_path()) {
        io::save_signal(&model, &signal)?;
    }
    if cli.json_only {
        emit_json(&serde_json::json!({
            "scheme": enc.meta.scheme.name(), "samples": enc.sample_count(),
            "nyquist_count": signal.nyquist_count(), "max_interval_s": enc.max_interval(),
            "max_firing_residual": enc.meta.max_firing_residual,
            "warnings": enc.meta.warnings, "encoding": path, "signal": model,
        }))?;
    } else {
        outln!(
            "{} on {}: #S = {} (Nyquist count {}), max T_n = {:.6e} s",
            enc.meta.scheme.name(),
            signal.name,
            enc.sample_count(),
            signal.nyquist_count(),
            enc.max_interval()
        );
        for w in &enc.meta.warnings {
            outln!("warning: {w}");
        }
        outln!("wrote {} and {}", path.display(), model.display());
    }
    Ok(0)
}

fn recon_config(enc: &Encoding, d: &DecodeArgs) -> ReconstructionConfig {
    let mut rc = ReconstructionConfig::for_encoding(enc);
    rc.max_iters = d.max_iters;
    rc.stop_delta_db = d.stop_delta_db;
    rc.guard_band = d.guard_band;
    rc.offset_removal = d.offset_removal;
    rc
}

fn reconstruct(cli: &Cli, a: &ReconstructArgs) -> Result<u8> {
    let enc = io::read_encoding_csv(&a.encoding)?;
    let truth = a.signal_file.as_deref().map(io::load_signal).transpose()?;
    let rc = recon_config(&enc, &a.decode);
    let r = iterative_reconstruct(&enc, &rc, truth.as_ref())?;
    let out = cli.outdir.join("reconstruction.csv");
    let trace = cli.outdir.join("trace.csv");
    io::write_reconstruction_csv(&out, &rc, &r)?;
    io::write_trace_csv(&trace, &rc, &r)?;
    if cli.json_only {
        emit_json(&serde_json::json!({
            "iterations": r.iterations_run,
            "nmse_db": r.final_nmse().map(vbt_tem::experiment::Db),
            "empirical_contraction": r.empirical_contraction,
            "reconstruction": out, "trace": trace,
        }))?;
    } else {
        out!("{} iterations", r.iterations_run);
        if let Some(n) = r.final_nmse() {
            out!(", NMSE = {n:.3} dB");
        }
        outln!();
        outln!("wrote {} and {}", out.display(), trace.display());
    }
    Ok(0)
}

fn verify_cmd(cli: &Cli, a: &VerifyArgs) -> Result<u8> {
    let enc = io::read_encoding_csv(&a.encoding)?;
    let signal = io::load_signal(&a.signal_file)?;
    let v = verify(&signal, &enc)?;
    if cli.json_only {
        emit_json(&v)?;
    } else {
        outln!("{} encoding, #S = {}", v.scheme, v.sample_count);
        for l in &v.lines {
            outln!(
                "{:<5} {:<42} {:>6}/{:<6} {}{}",
                if l.ok() { "PASS" } else { "FAIL" },
                l.name,
                l.passed,
                l.total,
                l.detail,
                if l.theorem_backed { "" } else { " (diagnostic)" }
            );
        }
    }
    Ok(if v.theorem_failures() > 0 { 2 } else { 0 })
}

fn experiment(cli: &Cli, a: &ExperimentArgs) -> Result<u8> {
    let mut cfg = ExperimentConfig::new(&a.preset, cli.seed);
    cfg.grid_oversample = cli.grid_oversample;
    cfg.json_only = cli.json_only;
    cfg.trials = a.trials;
    cfg.input = a.input.clone();
    cfg.fs = a.fs;
    cfg.band_hz = a.band;
    cfg.alpha = a.params.alpha;
    cfg.beta = a.params.beta;
    cfg.shift = a.params.shift;
    cfg.c = a.params.c;
    cfg.bias = a.params.bias;
    cfg.threshold = a.params.threshold;
    cfg.max_iters = a.decode.max_iters;
    cfg.stop_delta_db = a.decode.stop_delta_db;
    cfg.guard_band = a.decode.guard_band;
    cfg.offset_removal = a.decode.offset_removal;
    let out = run_experiment(&cfg, &cli.outdir)?;
    let report = &out.report;
    if cli.json_only {
        out!("{}", vbt_tem::experiment::report_json(report)?);
        return Ok(0);
    }
    outln!("{} ({:.2} s)", report.preset, out.runtime.total_s);
    for r in &report.records {
        outln!(
            "  {:<24} #S = {:>6}  NMSE = {:>9}  iterations = {}",
            r.method,
            r.samples,
            fmt_db(r.nmse_db.0),
            r.iterations
        );
    }
    for s in &report.trials {
        outln!(
            "  {:<24} {:<24} mean {:>10.3}  std {:>8.3}  (n = {})",
            s.method, s.metric, s.mean, s.std, s.n
        );
    }
    for c in &report.checks {
        outln!("  [{}] {} - {}", if c.pass { "ok" } else { "no" }, c.name, c.detail);
    }
    outln!("report: {}", display(&cli.outdir.join("report.json")));
    Ok(0)
}

fn fmt_db(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.2} dB")
    } else {
        format!("{v}")
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

//! CSV and JSON files: signals, encodings, reconstructions and ingestion.
//!
//! Floats are written with 17 significant digits so every file read back
//! reproduces the written values bit for bit.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::encoder::{Encoding, EncodingMeta, IntervalDiag, Regime, Scheme};
use crate::error::{Error, Result};
use crate::reconstruction::{ReconstructionConfig, ReconstructionResult};
use crate::signal::{from_uniform_samples, BandlimitedSignal, Grid};

/// `x` with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))
}

pub fn save_signal(path: &Path, signal: &BandlimitedSignal) -> Result<()> {
    write_json(path, signal)
}

pub fn load_signal(path: &Path) -> Result<BandlimitedSignal> {
    let s: BandlimitedSignal = read_json(path)?;
    s.validate()?;
    Ok(s)
}

/// Samples of `signal` on `grid` as `t,f` rows under an
/// `# omega0=.. c=.. window=t0,t1` header.
pub fn signal_csv(signal: &BandlimitedSignal, grid: &Grid) -> String {
    let mut out = format!(
        "# omega0={} c={} window={},{}\nt,f\n",
        fmt17(signal.omega0),
        fmt17(signal.amp_bound),
        fmt17(signal.window.start),
        fmt17(signal.window.end)
    );
    for (k, v) in signal.sample(grid).into_iter().enumerate() {
        out.push_str(&format!("{},{}\n", fmt17(grid.at(k)), fmt17(v)));
    }
    out
}

pub fn write_signal_csv(path: &Path, signal: &BandlimitedSignal, grid: &Grid) -> Result<()> {
    write_text(path, &signal_csv(signal, grid))
}

/// Encoding as CSV text. One row per interval (`t_n,y_n,T_n,E_n,D_n,regime`)
/// followed by a closing row holding the last firing.
pub fn encoding_csv(enc: &Encoding) -> Result<String> {
    let m = &enc.meta;
    let mut out = format!(
        "# scheme={} params={} omega0={} shift={} t0={}\n# meta={}\nt_n,y_n,T_n,E_n,D_n,regime\n",
        m.scheme.name(),
        serde_json::to_string(&m.scheme)?,
        fmt17(m.omega0),
        fmt17(m.shift),
        fmt17(m.t0),
        serde_json::to_string(m)?
    );
    for (i, w) in enc.firings.windows(2).enumerate() {
        let d = &enc.intervals[i];
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt17(w[0]),
            fmt17(enc.averages[i]),
            fmt17(d.length),
            fmt17(d.energy),
            fmt17(d.deriv_energy),
            d.regime.as_str()
        ));
    }
    if let Some(last) = enc.firings.last() {
        out.push_str(&format!("{},,,,,end\n", fmt17(*last)));
    }
    Ok(out)
}

pub fn write_encoding_csv(path: &Path, enc: &Encoding) -> Result<()> {
    write_text(path, &encoding_csv(enc)?)
}

pub fn read_encoding_csv(path: &Path) -> Result<Encoding> {
    parse_encoding_csv(&read_text(path)?, path)
}

fn header_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    line.split_whitespace()
        .find_map(|tok| tok.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

/// Parses encoding CSV text; `path` is only used in error messages.
pub fn parse_encoding_csv(text: &str, path: &Path) -> Result<Encoding> {
    let mut scheme: Option<Scheme> = None;
    let mut meta: Option<EncodingMeta> = None;
    for (i, line) in text.lines().enumerate() {
        let Some(body) = line.strip_prefix('#') else {
            continue;
        };
        let body = body.trim();
        if let Some(json) = body.strip_prefix("meta=") {
            meta = Some(
                serde_json::from_str(json).map_err(|e| parse_err(path, i + 1, e.to_string()))?,
            );
        } else if body.starts_with("scheme=") {
            let params = header_value(body, "params")
                .ok_or_else(|| parse_err(path, i + 1, "header lacks params="))?;
            scheme = Some(
                serde_json::from_str(params)
                    .map_err(|e| parse_err(path, i + 1, format!("params: {e}")))?,
            );
        }
    }
    let meta = meta.ok_or_else(|| parse_err(path, 1, "missing `# meta=` header line"))?;
    if let Some(s) = scheme {
        if s != meta.scheme {
            return Err(Error::MetadataMismatch(
                "scheme header disagrees with meta line".into(),
            ));
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .flexible(false)
        .from_reader(text.as_bytes());
    let mut firings = Vec::new();
    let mut averages = Vec::new();
    let mut intervals = Vec::new();
    let mut closed = false;
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if closed {
            return Err(parse_err(path, line, "row after the closing `end` row"));
        }
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(path, line, format!("column {}: {e}", k + 1)))
        };
        firings.push(num(0)?);
        if rec[5].trim() == "end" {
            closed = true;
            continue;
        }
        averages.push(num(1)?);
        let regime = Regime::parse(rec[5].trim())
            .ok_or_else(|| parse_err(path, line, format!("unknown regime `{}`", &rec[5])))?;
        intervals.push(IntervalDiag {
            length: num(2)?,
            energy: num(3)?,
            deriv_energy: num(4)?,
            regime,
        });
    }
    if !closed && !firings.is_empty() {
        return Err(parse_err(path, 0, "missing closing `end` row"));
    }
    let enc = Encoding {
        firings,
        averages,
        intervals,
        meta,
    };
    enc.check_invariants()?;
    Ok(enc)
}

pub fn write_reconstruction_csv(
    path: &Path,
    config: &ReconstructionConfig,
    result: &ReconstructionResult,
) -> Result<()> {
    let mut out = format!("# config={}\nt,f_hat\n", serde_json::to_string(config)?);
    for (k, v) in result.f_hat.iter().enumerate() {
        out.push_str(&format!("{},{}\n", fmt17(result.grid.at(k)), fmt17(*v)));
    }
    write_text(path, &out)
}

/// Per-iteration trace; `nmse_db` is empty without a ground truth.
pub fn write_trace_csv(
    path: &Path,
    config: &ReconstructionConfig,
    result: &ReconstructionResult,
) -> Result<()> {
    let mut out = format!(
        "# config={}\niteration,nmse_db,residual_db\n",
        serde_json::to_string(config)?
    );
    for (l, r) in result.residual_trace.iter().enumerate() {
        let n = result.nmse_trace.get(l).map(|v| fmt17(*v)).unwrap_or_default();
        out.push_str(&format!("{l},{n},{}\n", fmt17(*r)));
    }
    write_text(path, &out)
}

/// Generic numeric table with a comment header.
pub fn write_table_csv(path: &Path, header: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    if !header.is_empty() {
        out.push_str(&format!("# {header}\n"));
    }
    out.push_str(&columns.join(","));
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| fmt17(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn write_samples_csv(path: &Path, samples: &[(f64, f64)]) -> Result<()> {
    let rows: Vec<Vec<f64>> = samples.iter().map(|&(t, v)| vec![t, v]).collect();
    write_table_csv(path, "", &["t", "value"], &rows)
}

/// Two-column `t,value` rows. Lines starting with `#` are skipped, and so
/// is a first non-numeric row (a column header).
pub fn read_samples_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(parse_err(
                path,
                line,
                format!("expected 2 columns, found {}", rec.len()),
            ));
        }
        let t = rec[0].parse::<f64>();
        let v = rec[1].parse::<f64>();
        match (t, v) {
            (Ok(t), Ok(v)) if t.is_finite() && v.is_finite() => out.push((t, v)),
            (Err(_), Err(_)) if i == 0 => continue,
            _ => {
                return Err(parse_err(
                    path,
                    line,
                    format!("cannot read `{},{}` as two finite numbers", &rec[0], &rec[1]),
                ))
            }
        }
    }
    Ok(out)
}

/// Reads uniformly sampled `t,value` data and models it as a bandlimited
/// signal. `band_hz` declares a known band below fs/2.
pub fn ingest_csv(path: &Path, fs: f64, band_hz: Option<f64>) -> Result<BandlimitedSignal> {
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::Ingestion(format!("sampling rate {fs} must be > 0")));
    }
    let samples = read_samples_csv(path)?;
    if samples.is_empty() {
        return Err(Error::Ingestion(format!("{}: no samples", path.display())));
    }
    // Re-read line numbers for a precise error on a jittered timestamp.
    let period = 1.0 / fs;
    let t0 = samples[0].0;
    for (i, &(t, _)) in samples.iter().enumerate() {
        let expect = t0 + i as f64 * period;
        if (t - expect).abs() > 1e-9 * period.max(expect.abs()) {
            return Err(Error::Ingestion(format!(
                "{}:{}: timestamp {t} is off the uniform grid (expected {expect} at fs = {fs} Hz)",
                path.display(),
                data_line(path, i)?
            )));
        }
    }
    let mut sig = from_uniform_samples(&samples, fs, band_hz)?;
    sig.name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "ingested".into());
    Ok(sig)
}

/// 1-based file line of the `index`-th data row.
fn data_line(path: &Path, index: usize) -> Result<usize> {
    let text = read_text(path)?;
    let mut seen = 0;
    let mut header_skipped = false;
    for (n, line) in text.lines().enumerate() {
        let l = line.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let numeric = l
            .split(',')
            .next()
            .is_some_and(|c| c.trim().parse::<f64>().is_ok());
        if !numeric && !header_skipped && seen == 0 {
            header_skipped = true;
            continue;
        }
        if seen == index {
            return Ok(n + 1);
        }
        seen += 1;
    }
    Ok(0)
}

//! Iterative reconstruction from time encodings and signal averages.
//!
//! The iterate is kept as coefficients on the kernel atoms `g(t − s_n)`
//! centred at interval midpoints, so averages of the iterate over every
//! firing interval are exact (sine-integral differences) instead of grid
//! quadratures. The dense grid is only used to emit the result and to score
//! NMSE against a ground truth.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::Encoding;
use crate::error::{Error, Result};
use crate::signal::{BandlimitedSignal, Grid, Window};
use crate::special::{sinc, sine_integral};

pub const DEFAULT_MAX_ITERS: usize = 500;
pub const DEFAULT_STOP_DELTA_DB: f64 = 1e-3;
/// Iterations always run before the stopping rule is consulted.
pub const MIN_ITERS: usize = 10;

/// Reconstruction kernel `sin(Ω₀t)/(πt)`, `Ω₀/π` at the origin.
#[inline]
pub fn kernel(omega0: f64, t: f64) -> f64 {
    if t == 0.0 {
        omega0 / PI
    } else {
        (omega0 * t).sin() / (PI * t)
    }
}

/// `∫_a^b g(t − s) dt`.
#[inline]
pub fn kernel_integral(omega0: f64, a: f64, b: f64, s: f64) -> f64 {
    (sine_integral(omega0 * (b - s)) - sine_integral(omega0 * (a - s))) / PI
}

/// Where the shift of a shifted encoding is taken out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffsetRemoval {
    /// The offset's averages `s·T_n` are known exactly, so they are removed
    /// from `ỹ_n` before iterating and the recursion runs on the averages of `f`.
    #[default]
    Measurement,
    /// Iterate on `f̃` from `ỹ_n` and subtract `s` from the converged iterate.
    /// A windowed constant is not in the span of the kernel atoms, so its
    /// ringing ends up in the estimate.
    Output,
}

impl OffsetRemoval {
    pub fn as_str(self) -> &'static str {
        match self {
            OffsetRemoval::Measurement => "measurement",
            OffsetRemoval::Output => "output",
        }
    }
}

impl std::str::FromStr for OffsetRemoval {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "measurement" => Ok(OffsetRemoval::Measurement),
            "output" => Ok(OffsetRemoval::Output),
            other => Err(Error::Parameter(format!(
                "unknown offset removal `{other}` (expected measurement or output)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    pub omega0: f64,
    pub grid_dt: f64,
    pub max_iters: usize,
    pub stop_delta_db: f64,
    /// Offset removed from the final iterate.
    pub shift: f64,
    /// Fraction of the window excluded at each edge when scoring NMSE.
    #[serde(default)]
    pub guard_band: f64,
    #[serde(default)]
    pub offset_removal: OffsetRemoval,
}

impl ReconstructionConfig {
    /// Defaults for `encoding`: grid at 1/16 of the Nyquist interval.
    pub fn for_encoding(encoding: &Encoding) -> Self {
        ReconstructionConfig {
            omega0: encoding.meta.omega0,
            grid_dt: PI / encoding.meta.omega0 / 16.0,
            max_iters: DEFAULT_MAX_ITERS,
            stop_delta_db: DEFAULT_STOP_DELTA_DB,
            shift: encoding.meta.shift,
            guard_band: 0.0,
            offset_removal: OffsetRemoval::Measurement,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0) {
            return Err(Error::Parameter("omega0 must be > 0".into()));
        }
        if !(self.grid_dt > 0.0 && self.grid_dt <= PI / self.omega0 / 8.0 * (1.0 + 1e-12)) {
            return Err(Error::Parameter(format!(
                "grid_dt = {} must be positive and at most a eighth of the Nyquist interval",
                self.grid_dt
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be >= 1".into()));
        }
        if !(0.0..0.5).contains(&self.guard_band) {
            return Err(Error::Parameter("guard_band must lie in [0, 0.5)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub grid: Grid,
    pub f_hat: Vec<f64>,
    /// NMSE in dB per iteration; empty without ground truth.
    pub nmse_trace: Vec<f64>,
    /// Relative residual-average energy in dB per iteration.
    pub residual_trace: Vec<f64>,
    pub iterations_run: usize,
    /// `‖f̃ − 𝒜f̃‖² / ‖f̃‖²` on the grid, when ground truth is known.
    pub empirical_contraction: Option<f64>,
}

impl ReconstructionResult {
    pub fn final_nmse(&self) -> Option<f64> {
        self.nmse_trace.last().copied()
    }
}

/// Dense matrix of kernel values, row-major `rows × cols`.
struct Matrix {
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    fn build(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let mut data = vec![0.0; rows * cols];
        data.par_chunks_mut(cols.max(1))
            .enumerate()
            .for_each(|(r, row)| {
                for (c, v) in row.iter_mut().enumerate() {
                    *v = f(r, c);
                }
            });
        Matrix { cols, data }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.data
            .par_chunks(self.cols.max(1))
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

fn synthesis_matrix(midpoints: &[f64], omega0: f64, grid: &Grid) -> Matrix {
    Matrix::build(grid.len, midpoints.len(), |r, c| {
        kernel(omega0, grid.at(r) - midpoints[c])
    })
}

/// Averages of each kernel atom over each firing interval.
fn averaging_matrix(firings: &[f64], midpoints: &[f64], omega0: f64) -> Matrix {
    let n = midpoints.len();
    // Si at every (firing, midpoint) pair, then differences along firings.
    let si = Matrix::build(firings.len(), n, |k, m| {
        sine_integral(omega0 * (firings[k] - midpoints[m]))
    });
    Matrix::build(n, n, |r, c| {
        (si.data[(r + 1) * n + c] - si.data[r * n + c]) / PI
    })
}

/// `Σ y_n g(t − s_n)` on `grid`.
pub fn synthesize(averages: &[f64], midpoints: &[f64], omega0: f64, grid: &Grid) -> Vec<f64> {
    assert_eq!(averages.len(), midpoints.len());
    synthesis_matrix(midpoints, omega0, grid).apply(averages)
}

/// The operator 𝒜 applied to the (offset-augmented) averages of `encoding`.
pub fn apply_operator_a(encoding: &Encoding, omega0: f64, grid: &Grid) -> Result<Vec<f64>> {
    if encoding.averages.is_empty() {
        return Err(Error::EmptyEncoding);
    }
    Ok(synthesize(
        &encoding.shifted_averages(),
        &encoding.midpoints(),
        omega0,
        grid,
    ))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Index range of `grid` kept after excluding `guard` of the window at each edge.
pub fn scored_range(grid: &Grid, guard: f64) -> std::ops::Range<usize> {
    if guard <= 0.0 {
        return 0..grid.len;
    }
    let skip = ((grid.len - 1) as f64 * guard).round() as usize;
    skip..grid.len - skip
}

/// Normalized mean-squared error in dB; `-∞` for an exact match.
pub fn nmse(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::Parameter(format!(
            "grid mismatch: {} vs {} points",
            reference.len(),
            estimate.len()
        )));
    }
    let den = norm2(reference);
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    let num: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if num == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(10.0 * (num / den).log10())
}

/// Grid value of `‖f̃ − 𝒜f̃‖² / ‖f̃‖²` with `f̃ = f + shift`.
pub fn empirical_contraction(
    signal: &BandlimitedSignal,
    encoding: &Encoding,
    grid: &Grid,
) -> Result<f64> {
    let shifted = signal.with_offset(signal.offset + encoding.meta.shift);
    let truth = shifted.sample(grid);
    let den = norm2(&truth);
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    let af = if encoding.averages.is_empty() {
        vec![0.0; grid.len]
    } else {
        apply_operator_a(encoding, encoding.meta.omega0, grid)?
    };
    let num: f64 = truth.iter().zip(&af).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(num / den)
}

/// Runs `f_{l+1} = f_l + 𝒜(f − f_l)` from `f_0 = 𝒜f`.
///
/// For shifted encodings the offset is handled according to
/// `config.offset_removal`; both variants use the same firing set and the
/// same operator, and differ only by the reconstruction of the constant.
pub fn iterative_reconstruct(
    encoding: &Encoding,
    config: &ReconstructionConfig,
    ground_truth: Option<&BandlimitedSignal>,
) -> Result<ReconstructionResult> {
    config.validate()?;
    if encoding.averages.is_empty() {
        return Err(Error::EmptyEncoding);
    }
    let window = Window::new(encoding.meta.t0, encoding.meta.window_end)?;
    let grid = Grid::covering(window, config.grid_dt);
    let omega0 = config.omega0;
    let (targets, post_shift) = match config.offset_removal {
        OffsetRemoval::Measurement => {
            // ỹ_n − s·T_n with the configured shift.
            let t: Vec<f64> = encoding
                .shifted_averages()
                .iter()
                .zip(encoding.lengths())
                .map(|(y, len)| y - config.shift * len)
                .collect();
            (t, 0.0)
        }
        OffsetRemoval::Output => (encoding.shifted_averages(), config.shift),
    };
    let mids = encoding.midpoints();
    let averaging = averaging_matrix(&encoding.firings, &mids, omega0);
    let synth = synthesis_matrix(&mids, omega0, &grid);

    let scored = scored_range(&grid, config.guard_band);
    let truth = ground_truth.map(|s| s.sample(&grid));
    let truth_scored = truth.as_ref().map(|t| t[scored.clone()].to_vec());
    let target_norm = norm2(&targets).max(f64::MIN_POSITIVE);

    let mut coeffs = targets.clone();
    let mut nmse_trace = Vec::new();
    let mut residual_trace = Vec::new();
    let mut norms: Vec<f64> = Vec::new();
    let mut iterations = 0;

    let score = |coeffs: &[f64]| -> Result<Option<f64>> {
        match &truth_scored {
            Some(t) => {
                let est = synth.apply(coeffs);
                let est: Vec<f64> = est[scored.clone()].iter().map(|v| v - post_shift).collect();
                nmse(t, &est).map(Some)
            }
            None => Ok(None),
        }
    };

    while iterations < config.max_iters {
        // Residual averages of f̃ − f_l over every firing interval.
        let fitted = averaging.apply(&coeffs);
        let residual: Vec<f64> = targets.iter().zip(&fitted).map(|(y, f)| y - f).collect();
        let res_db = 10.0 * (norm2(&residual) / target_norm).max(1e-300).log10();

        if let Some(db) = score(&coeffs)? {
            nmse_trace.push(db);
        }
        residual_trace.push(res_db);
        iterations += 1;

        let norm = norm2(&coeffs).sqrt();
        norms.push(norm);
        if norms.len() > 10 && norm > 10.0 * norms[norms.len() - 11] {
            let worst = residual
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .map(|(i, _)| i)
                .unwrap_or(0);
            return Err(Error::NonContraction { interval: worst });
        }

        if iterations >= MIN_ITERS {
            let trace = if nmse_trace.is_empty() {
                &residual_trace
            } else {
                &nmse_trace
            };
            let n = trace.len();
            if trace[n - 2] - trace[n - 1] < config.stop_delta_db {
                break;
            }
        }
        if iterations == config.max_iters {
            break;
        }
        for (a, r) in coeffs.iter_mut().zip(&residual) {
            *a += r;
        }
    }

    let f_hat: Vec<f64> = synth.apply(&coeffs).iter().map(|v| v - post_shift).collect();
    let empirical = match ground_truth {
        Some(sig) => Some(empirical_contraction(sig, encoding, &grid)?),
        None => None,
    };
    Ok(ReconstructionResult {
        grid,
        f_hat,
        nmse_trace,
        residual_trace,
        iterations_run: iterations,
        empirical_contraction: empirical,
    })
}

/// Classical sinc interpolation of uniform samples onto `grid`.
pub fn sinc_interpolate_uniform(samples: &[(f64, f64)], fs: f64, grid: &Grid) -> Result<Vec<f64>> {
    if !(fs > 0.0) {
        return Err(Error::Parameter(format!("sampling rate {fs} must be > 0")));
    }
    if let Some(&(t0, _)) = samples.first() {
        let period = 1.0 / fs;
        for (i, &(t, _)) in samples.iter().enumerate() {
            let expect = t0 + i as f64 * period;
            if (t - expect).abs() > 1e-9 * period.max(expect.abs()) {
                return Err(Error::Parameter(format!(
                    "sample {i} at t = {t} is not uniformly spaced (expected {expect})"
                )));
            }
        }
    }
    Ok((0..grid.len)
        .into_par_iter()
        .map(|k| {
            let t = grid.at(k);
            samples.iter().map(|&(tk, v)| v * sinc(fs * (t - tk))).sum()
        })
        .collect())
}

/// Nyquist-rate samples of `signal` over its window, `nyquist_count` of them.
pub fn uniform_samples(signal: &BandlimitedSignal) -> (Vec<(f64, f64)>, f64) {
    let period = signal.nyquist_interval();
    let samples = (0..signal.nyquist_count())
        .map(|k| {
            let t = signal.window.start + k as f64 * period;
            (t, signal.eval(t))
        })
        .collect();
    (samples, 1.0 / period)
}

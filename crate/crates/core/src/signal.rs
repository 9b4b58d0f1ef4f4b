//! Analytic bandlimited signal model.
//!
//! A signal is a constant offset plus a list of weighted sinc and cosine
//! atoms, so value and derivative are available in closed form anywhere on
//! the real line. The observation window and the declared band limit travel
//! with the signal because every downstream stage (encoder grid, Nyquist
//! interval, reconstruction kernel) is defined relative to them.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::GaussLegendre;
use crate::special::sinc_and_derivative;

/// Default number of fine-grid cells per Nyquist interval.
pub const DEFAULT_OVERSAMPLE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SincAtom {
    pub amplitude: f64,
    pub center: f64,
    /// Half-bandwidth F in Hz; the atom is `amplitude · sinc(2F(t − center))`.
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineAtom {
    pub amplitude: f64,
    pub angular_frequency: f64,
    pub phase: f64,
}

/// Sinc atoms of one rate on a uniform lattice `start + k/(2·rate)`.
/// Equivalent to one `SincAtom` per amplitude, but evaluated with a single
/// sine per point since `sin(π(x − k)) = (−1)^k sin(πx)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SincSeries {
    pub start: f64,
    pub rate: f64,
    pub amplitudes: Vec<f64>,
}

impl SincSeries {
    fn value_and_derivative(&self, t: f64) -> (f64, f64) {
        let scale = 2.0 * self.rate;
        let x = scale * (t - self.start);
        let (s, c) = (PI * x).sin_cos();
        let (mut v, mut d) = (0.0, 0.0);
        for (k, &a) in self.amplitudes.iter().enumerate() {
            let u = x - k as f64;
            if u.abs() < 1e-4 {
                let (sv, sd) = sinc_and_derivative(u);
                v += a * sv;
                d += a * sd;
            } else {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let w = a * sign / (PI * u);
                v += w * s;
                d += w * (PI * c - s / u);
            }
        }
        (v, scale * d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Atom {
    Sinc(SincAtom),
    Cosine(CosineAtom),
    SincSeries(SincSeries),
}

impl Atom {
    #[inline]
    fn value_and_derivative(&self, t: f64) -> (f64, f64) {
        match *self {
            Atom::Sinc(SincAtom {
                amplitude,
                center,
                rate,
            }) => {
                let scale = 2.0 * rate;
                let (v, d) = sinc_and_derivative(scale * (t - center));
                (amplitude * v, amplitude * scale * d)
            }
            Atom::Cosine(CosineAtom {
                amplitude,
                angular_frequency,
                phase,
            }) => {
                let (s, c) = (angular_frequency * t + phase).sin_cos();
                (amplitude * c, -amplitude * angular_frequency * s)
            }
            Atom::SincSeries(ref series) => series.value_and_derivative(t),
        }
    }

    fn scaled(&self, k: f64) -> Atom {
        match *self {
            Atom::Sinc(a) => Atom::Sinc(SincAtom {
                amplitude: a.amplitude * k,
                ..a
            }),
            Atom::Cosine(a) => Atom::Cosine(CosineAtom {
                amplitude: a.amplitude * k,
                ..a
            }),
            Atom::SincSeries(ref a) => Atom::SincSeries(SincSeries {
                amplitudes: a.amplitudes.iter().map(|v| v * k).collect(),
                ..*a
            }),
        }
    }

    fn angular_bandwidth(&self) -> f64 {
        match *self {
            Atom::Sinc(a) => 2.0 * PI * a.rate,
            Atom::Cosine(a) => a.angular_frequency,
            Atom::SincSeries(ref a) => 2.0 * PI * a.rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && start < end) {
            return Err(Error::Parameter(format!(
                "window [{start}, {end}] must satisfy start < end"
            )));
        }
        Ok(Window { start, end })
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }
}

/// Uniform evaluation grid `t0 + k·dt`, `k = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub t0: f64,
    pub dt: f64,
    pub len: usize,
}

impl Grid {
    /// Grid covering `window` inclusive of both ends with spacing at most `dt`.
    pub fn covering(window: Window, dt: f64) -> Self {
        let cells = (window.len() / dt).ceil().max(1.0) as usize;
        Grid {
            t0: window.start,
            dt: window.len() / cells as f64,
            len: cells + 1,
        }
    }

    #[inline]
    pub fn at(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |k| self.at(k))
    }
}

/// Signal and derivative energy over an interval.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyPair {
    pub e: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandlimitedSignal {
    pub name: String,
    pub atoms: Vec<Atom>,
    pub offset: f64,
    /// Declared band limit Ω₀ in rad/s.
    pub omega0: f64,
    /// Amplitude bound c.
    pub amp_bound: f64,
    pub window: Window,
    /// Fine-grid cells per Nyquist interval.
    pub oversample: usize,
    /// Ingested signals may carry atoms wider than a declared band; the
    /// caller vouches for the band in that case.
    #[serde(default)]
    pub declared_band: bool,
}

impl BandlimitedSignal {
    pub fn new(
        name: impl Into<String>,
        atoms: Vec<Atom>,
        offset: f64,
        omega0: f64,
        amp_bound: f64,
        window: Window,
    ) -> Result<Self> {
        let s = BandlimitedSignal {
            name: name.into(),
            atoms,
            offset,
            omega0,
            amp_bound,
            window,
            oversample: DEFAULT_OVERSAMPLE,
            declared_band: false,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::Parameter(format!("omega0 = {} must be > 0", self.omega0)));
        }
        if !(self.amp_bound > 0.0 && self.amp_bound.is_finite()) {
            return Err(Error::Parameter(format!(
                "amplitude bound c = {} must be > 0",
                self.amp_bound
            )));
        }
        Window::new(self.window.start, self.window.end)?;
        for a in &self.atoms {
            match a {
                Atom::Sinc(s) if !(s.rate > 0.0 && s.amplitude.is_finite()) => {
                    return Err(Error::Parameter(format!("invalid sinc atom {s:?}")));
                }
                Atom::Cosine(c) if !(c.angular_frequency >= 0.0 && c.amplitude.is_finite()) => {
                    return Err(Error::Parameter(format!("invalid cosine atom {c:?}")));
                }
                Atom::SincSeries(a)
                    if !(a.rate > 0.0 && a.amplitudes.iter().all(|v| v.is_finite())) =>
                {
                    return Err(Error::Parameter(format!(
                        "invalid sinc series at {} ({} Hz)",
                        a.start, a.rate
                    )));
                }
                _ => {}
            }
            if !self.declared_band && a.angular_bandwidth() > self.omega0 * (1.0 + 1e-12) {
                return Err(Error::Parameter(format!(
                    "atom bandwidth {} rad/s exceeds omega0 = {}",
                    a.angular_bandwidth(),
                    self.omega0
                )));
            }
        }
        Ok(())
    }

    pub fn with_oversample(mut self, oversample: usize) -> Self {
        self.oversample = oversample.max(1);
        self
    }

    /// Nyquist interval π/Ω₀.
    pub fn nyquist_interval(&self) -> f64 {
        PI / self.omega0
    }

    /// Fine-grid spacing used by quadrature and crossing detection.
    pub fn fine_dt(&self) -> f64 {
        self.nyquist_interval() / self.oversample as f64
    }

    /// Number of uniform Nyquist-rate samples that fit in the window.
    pub fn nyquist_count(&self) -> usize {
        (self.window.len() / self.nyquist_interval() + 1e-9).floor() as usize
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.offset
            + self
                .atoms
                .iter()
                .map(|a| a.value_and_derivative(t).0)
                .sum::<f64>()
    }

    #[inline]
    pub fn eval_derivative(&self, t: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.value_and_derivative(t).1)
            .sum()
    }

    /// Value and derivative in one pass over the atoms.
    #[inline]
    pub fn eval_both(&self, t: f64) -> (f64, f64) {
        let mut v = self.offset;
        let mut d = 0.0;
        for a in &self.atoms {
            let (av, ad) = a.value_and_derivative(t);
            v += av;
            d += ad;
        }
        (v, d)
    }

    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        grid.points().map(|t| self.eval(t)).collect()
    }

    fn check_interval(&self, t_a: f64, t_b: f64) -> Result<()> {
        let tol = 1e-12 * self.window.len();
        if t_a > t_b
            || t_a < self.window.start - tol
            || t_b > self.window.end + tol
            || !t_a.is_finite()
            || !t_b.is_finite()
        {
            return Err(Error::Domain {
                t_a,
                t_b,
                w0: self.window.start,
                w1: self.window.end,
            });
        }
        Ok(())
    }

    /// Applies `f` to every fine-grid cell of [t_a, t_b] (cells aligned to
    /// the window start; partial end cells integrated on their own extent).
    fn for_each_cell(&self, t_a: f64, t_b: f64, mut f: impl FnMut(f64, f64)) {
        if t_b <= t_a {
            return;
        }
        let dt = self.fine_dt();
        let t0 = self.window.start;
        let k_a = ((t_a - t0) / dt).floor() as i64;
        let k_b = ((t_b - t0) / dt).ceil() as i64;
        for k in k_a..k_b {
            let lo = (t0 + k as f64 * dt).max(t_a);
            let hi = (t0 + (k + 1) as f64 * dt).min(t_b);
            if hi > lo {
                f(lo, hi);
            }
        }
    }

    /// `e = ∫|f + shift|²`, `d = ∫|f′|²` over [t_a, t_b].
    pub fn energy_integrals(&self, t_a: f64, t_b: f64, shift: f64) -> Result<EnergyPair> {
        self.check_interval(t_a, t_b)?;
        let rule = GaussLegendre::get();
        let mut out = EnergyPair::default();
        self.for_each_cell(t_a, t_b, |lo, hi| {
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for k in 0..rule.nodes.len() {
                let (v, d) = self.eval_both(mid + half * rule.nodes[k]);
                let w = rule.weights[k] * half;
                out.e += w * (v + shift) * (v + shift);
                out.d += w * d * d;
            }
        });
        Ok(out)
    }

    /// `∫ f` over [t_a, t_b].
    pub fn integral(&self, t_a: f64, t_b: f64) -> Result<f64> {
        self.check_interval(t_a, t_b)?;
        let rule = GaussLegendre::get();
        let mut acc = 0.0;
        self.for_each_cell(t_a, t_b, |lo, hi| {
            acc += rule.integrate(lo, hi, |t| self.eval(t));
        });
        Ok(acc)
    }

    /// Largest |f − offset| over the window, located on the fine grid and
    /// refined by golden-section search around the best grid candidates.
    pub fn peak_abs(&self) -> f64 {
        let grid = Grid::covering(self.window, self.fine_dt());
        let vals: Vec<f64> = grid.points().map(|t| (self.eval(t) - self.offset).abs()).collect();
        let mut best = vals.iter().cloned().fold(0.0, f64::max);
        let mut cands: Vec<usize> = (0..vals.len())
            .filter(|&k| {
                let l = if k > 0 { vals[k - 1] } else { f64::NEG_INFINITY };
                let r = if k + 1 < vals.len() { vals[k + 1] } else { f64::NEG_INFINITY };
                vals[k] >= l && vals[k] >= r
            })
            .collect();
        cands.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
        for &k in cands.iter().take(4) {
            let lo = grid.at(k.saturating_sub(1)).max(self.window.start);
            let hi = grid.at((k + 1).min(grid.len - 1)).min(self.window.end);
            let v = golden_max(lo, hi, |t| (self.eval(t) - self.offset).abs());
            best = best.max(v);
        }
        best
    }

    /// Rescales the atoms so the peak amplitude is 1 and sets c = 1.
    pub fn normalized(mut self) -> Self {
        let peak = self.peak_abs();
        if peak > 0.0 {
            self.atoms = self.atoms.iter().map(|a| a.scaled(1.0 / peak)).collect();
        }
        self.amp_bound = 1.0;
        self
    }

    /// Copy with every atom scaled by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut s = self.clone();
        s.atoms = s.atoms.iter().map(|a| a.scaled(k)).collect();
        s.offset *= k;
        s
    }

    pub fn with_offset(&self, offset: f64) -> Self {
        let mut s = self.clone();
        s.offset = offset;
        s
    }

    /// Grid estimates of (∫|f′|², Ω₀²∫|f − offset|²) over the window.
    pub fn bernstein_sides(&self) -> (f64, f64) {
        let shifted = -self.offset;
        let en = self
            .energy_integrals(self.window.start, self.window.end, shifted)
            .expect("window is always in range");
        (en.d, self.omega0 * self.omega0 * en.e)
    }
}

fn golden_max(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    fc.max(fd).max(f(0.5 * (a + b)))
}

/// Chirp-modulated sinc series: 130 atoms of 100 Hz half-bandwidth at
/// Nyquist spacing over a 0.9 s window.
pub fn make_chirp() -> BandlimitedSignal {
    const F0: f64 = 100.0;
    const M: usize = 130;
    let ts = 1.0 / (2.0 * F0);
    let atoms = (1..=M)
        .map(|m| {
            let mf = m as f64;
            let coeff = (2.0 * PI * 0.005 * mf).sin()
                * (2.0 * PI * 0.081 * mf.powf(2.1) / (2.0 * M as f64)).sin();
            Atom::Sinc(SincAtom {
                amplitude: coeff,
                center: mf * ts - (M as f64 / 2.0) * ts,
                rate: F0,
            })
        })
        .collect();
    let window = Window {
        start: -0.45,
        end: 0.45,
    };
    BandlimitedSignal::new("chirp", atoms, 0.0, 2.0 * PI * F0, 1.0, window)
        .expect("chirp parameters are valid")
        .normalized()
}

/// Layout of the sum-of-sincs generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SosLayout {
    pub f1: f64,
    pub f2: f64,
    pub t1: f64,
    pub t2: f64,
    pub n1: usize,
    pub n2: usize,
    pub tau: f64,
}

impl Default for SosLayout {
    fn default() -> Self {
        SosLayout {
            f1: 50.0,
            f2: 20.0,
            t1: 0.6e-3,
            t2: 0.4e-3,
            n1: 50,
            n2: 100,
            tau: 0.15,
        }
    }
}

/// Three-region sum of sincs: a fast 50 Hz cluster in the middle flanked by
/// two copies of a slow 20 Hz cluster at ±τ.
pub fn make_sos(seed: u64) -> BandlimitedSignal {
    make_sos_with(seed, SosLayout::default())
}

pub fn make_sos_with(seed: u64, layout: SosLayout) -> BandlimitedSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c1: Vec<f64> = (0..2 * layout.n1 + 1).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let c2: Vec<f64> = (0..2 * layout.n2 + 1).map(|_| rng.gen_range(-0.5..0.5)).collect();

    let mut atoms = Vec::with_capacity(c1.len() + 2 * c2.len());
    let n1 = layout.n1 as i64;
    for (i, &c) in c1.iter().enumerate() {
        let n = i as i64 - n1;
        atoms.push(Atom::Sinc(SincAtom {
            amplitude: c,
            center: n as f64 * layout.t1,
            rate: layout.f1,
        }));
    }
    let n2 = layout.n2 as i64;
    for side in [-1.0, 1.0] {
        for (i, &c) in c2.iter().enumerate() {
            let n = i as i64 - n2;
            atoms.push(Atom::Sinc(SincAtom {
                amplitude: c,
                center: n as f64 * layout.t2 + side * layout.tau,
                rate: layout.f2,
            }));
        }
    }
    let window = Window {
        start: -0.45,
        end: 0.45,
    };
    let omega0 = 2.0 * PI * layout.f1.max(layout.f2);
    BandlimitedSignal::new(format!("sos-{seed}"), atoms, 0.0, omega0, 1.0, window)
        .expect("sos parameters are valid")
        .normalized()
}

/// Single tone `A0 cos(Ω_m t)` on a caller-chosen window.
pub fn make_tone(
    a0: f64,
    omega_m: f64,
    window: Window,
    omega0: f64,
    amp_bound: f64,
) -> Result<BandlimitedSignal> {
    if a0.abs() > amp_bound {
        return Err(Error::Parameter(format!("tone amplitude {a0} exceeds c = {amp_bound}")));
    }
    if !(0.0..=omega0).contains(&omega_m) {
        return Err(Error::Parameter(format!(
            "tone frequency {omega_m} rad/s outside [0, omega0 = {omega0}]"
        )));
    }
    BandlimitedSignal::new(
        "tone",
        vec![Atom::Cosine(CosineAtom {
            amplitude: a0,
            angular_frequency: omega_m,
            phase: 0.0,
        })],
        0.0,
        omega0,
        amp_bound,
        window,
    )
}

/// Demonstration signal with four consecutive regions of increasing
/// amplitude × bandwidth. Used only by the `four-region-demo` preset.
pub fn make_four_region() -> BandlimitedSignal {
    let window = Window {
        start: -0.45,
        end: 0.45,
    };
    let bands = [(10.0, 0.15), (20.0, 0.35), (35.0, 0.6), (50.0, 1.0)];
    let seg = window.len() / bands.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(0x4f52);
    let mut atoms = Vec::new();
    for (i, &(rate, amp)) in bands.iter().enumerate() {
        let lo = window.start + i as f64 * seg + 0.2 * seg;
        let hi = lo + 0.6 * seg;
        let step = 1.0 / (2.0 * rate);
        let mut t = lo;
        while t <= hi {
            atoms.push(Atom::Sinc(SincAtom {
                amplitude: amp * rng.gen_range(-1.0..1.0),
                center: t,
                rate,
            }));
            t += step;
        }
    }
    BandlimitedSignal::new("four-region", atoms, 0.0, 2.0 * PI * 50.0, 1.0, window)
        .expect("four-region parameters are valid")
        .normalized()
}

/// Uniform samples at `fs` of an ECG-like trace band-limited to `band_hz`:
/// Gaussian P/QRS/T bumps, sampled on the band's Nyquist lattice and
/// sinc-interpolated, so the trace is exactly in the band. Beats are
/// roughly 0.8 s apart with seeded jitter; the trace is flat between them.
pub fn make_ecg_surrogate(seed: u64, duration: f64, fs: f64, band_hz: f64) -> Vec<(f64, f64)> {
    // (amplitude, offset from R peak in s, width in s)
    const WAVES: [(f64, f64, f64); 5] = [
        (0.15, -0.20, 0.025),
        (-0.10, -0.035, 0.010),
        (1.00, 0.0, 0.012),
        (-0.25, 0.035, 0.010),
        (0.30, 0.28, 0.040),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut peaks = Vec::new();
    let mut t = 0.35 + 0.1 * rng.gen::<f64>();
    while t + 0.4 < duration {
        peaks.push((t, 0.85 + 0.3 * rng.gen::<f64>()));
        t += 0.8 + rng.gen_range(-0.08..0.08);
    }
    let template = |u: f64| -> f64 {
        peaks
            .iter()
            .map(|&(p, gain)| {
                WAVES
                    .iter()
                    .map(|&(a, off, w)| gain * a * (-0.5 * ((u - p - off) / w).powi(2)).exp())
                    .sum::<f64>()
            })
            .sum()
    };
    let lattice = 1.0 / (2.0 * band_hz);
    let n_lat = (duration / lattice).round() as usize + 1;
    let series = SincSeries {
        start: 0.0,
        rate: band_hz,
        amplitudes: (0..n_lat).map(|k| template(k as f64 * lattice)).collect(),
    };
    let n = (duration * fs).round() as usize + 1;
    (0..n)
        .map(|k| {
            let t = k as f64 / fs;
            (t, series.value_and_derivative(t).0)
        })
        .collect()
}

/// Sinc-interpolated model of uniformly sampled data.
///
/// `band_hz` declares a tighter known band than fs/2; atoms keep the
/// sampling-rate kernel so the model still reproduces every sample.
pub fn from_uniform_samples(
    samples: &[(f64, f64)],
    fs: f64,
    band_hz: Option<f64>,
) -> Result<BandlimitedSignal> {
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::Ingestion(format!("sampling rate {fs} must be > 0")));
    }
    if samples.len() < 8 {
        return Err(Error::Ingestion(format!(
            "need at least 8 samples, got {}",
            samples.len()
        )));
    }
    let period = 1.0 / fs;
    let t0 = samples[0].0;
    for (i, &(t, v)) in samples.iter().enumerate() {
        let expect = t0 + i as f64 * period;
        if (t - expect).abs() > 1e-9 * period.max(expect.abs()) || !v.is_finite() {
            return Err(Error::Ingestion(format!(
                "sample {i} at t = {t} is not on the uniform grid (expected {expect})"
            )));
        }
    }
    let atoms = vec![Atom::SincSeries(SincSeries {
        start: t0,
        rate: fs / 2.0,
        amplitudes: samples.iter().map(|&(_, v)| v).collect(),
    })];
    let window = Window::new(t0, t0 + (samples.len() - 1) as f64 * period)?;
    let (omega0, declared) = match band_hz {
        Some(b) if b > 0.0 && 2.0 * b < fs => (2.0 * PI * b, true),
        Some(b) if b > 0.0 => (PI * fs, false),
        Some(b) => return Err(Error::Ingestion(format!("band {b} Hz must be > 0"))),
        None => (PI * fs, false),
    };
    let sig = BandlimitedSignal {
        name: "ingested".into(),
        atoms,
        offset: 0.0,
        omega0,
        amp_bound: 1.0,
        window,
        oversample: DEFAULT_OVERSAMPLE,
        declared_band: declared,
    };
    sig.validate()?;
    Ok(sig.normalized())
}

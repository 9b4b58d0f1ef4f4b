//! Inequality checks and diagnostic profiles for concrete encodings.

use std::f64::consts::PI;

use serde::{Serialize, Serializer};

use crate::encoder::{Encoding, Regime, Scheme, VbtParams};
use crate::error::{Error, Result};
use crate::quad::GaussLegendre;
use crate::reconstruction::empirical_contraction;
use crate::signal::{BandlimitedSignal, Grid};

/// Relative slack for inequalities that hold exactly in theory.
pub const THEOREM_SLACK: f64 = 1e-6;
/// Relative slack for quantities affected by finite-window truncation.
pub const TRUNCATION_SLACK: f64 = 0.05;
/// Slack on the global low-variation interval bound.
pub const LOW_BOUND_SLACK: f64 = 1e-9;

/// A bound that may be infinite. Serialized as a number or the string `"+inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Finite(f64),
    Infinite,
}

impl Bound {
    pub fn exceeds(&self, t: f64) -> bool {
        match *self {
            Bound::Finite(b) => t < b,
            Bound::Infinite => true,
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Bound::Finite(b) => b,
            Bound::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bound::Finite(b) => s.serialize_f64(*b),
            Bound::Infinite => s.serialize_str("+inf"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IntervalCheck {
    pub index: usize,
    pub length: f64,
    pub energy: f64,
    pub deriv_energy: f64,
    /// `π√(Ẽ/D̃)`.
    pub bound_rhs: Bound,
    /// `π√(αẼ/(D̃ + βẼ))` for energy-driven schemes.
    pub theorem_bound: Option<f64>,
    pub local_pass: bool,
    pub theorem_pass: bool,
    pub regime: Regime,
}

impl IntervalCheck {
    pub fn pass(&self) -> bool {
        self.local_pass && self.theorem_pass
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IntervalReport {
    pub intervals: Vec<IntervalCheck>,
    /// `Σ (T_n²/π²) D̃_n`.
    pub aggregate_lhs: f64,
    /// `Σ α_n Ẽ_n`, with `α_n` the level in force on each interval.
    pub aggregate_rhs: Option<f64>,
    pub aggregate_pass: bool,
}

impl IntervalReport {
    pub fn pass_fraction(&self) -> f64 {
        if self.intervals.is_empty() {
            return 1.0;
        }
        let n = self.intervals.iter().filter(|c| c.pass()).count();
        n as f64 / self.intervals.len() as f64
    }

    pub fn all_pass(&self) -> bool {
        self.aggregate_pass && self.intervals.iter().all(IntervalCheck::pass)
    }
}

/// Errors unless `encoding` was produced from `signal`.
pub fn check_metadata(signal: &BandlimitedSignal, encoding: &Encoding) -> Result<()> {
    let m = &encoding.meta;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    if m.source != signal.name {
        return Err(Error::MetadataMismatch(format!(
            "encoding source `{}` vs signal `{}`",
            m.source, signal.name
        )));
    }
    if !close(m.omega0, signal.omega0) {
        return Err(Error::MetadataMismatch(format!(
            "omega0 {} vs {}",
            m.omega0, signal.omega0
        )));
    }
    if !close(m.t0, signal.window.start) || !close(m.window_end, signal.window.end) {
        return Err(Error::MetadataMismatch(format!(
            "window [{}, {}] vs [{}, {}]",
            m.t0, m.window_end, signal.window.start, signal.window.end
        )));
    }
    encoding.check_invariants()
}

/// (α, β) in force on an interval, if the scheme is energy driven.
fn level(scheme: &Scheme, regime: Regime) -> Option<(f64, f64)> {
    match scheme {
        Scheme::Conventional(_) => None,
        Scheme::Vbt { params, .. } => Some((params.alpha, params.beta)),
        Scheme::Adaptive(p) => match regime {
            Regime::Low => Some((p.alpha_low, p.beta_low)),
            _ => Some((p.alpha_high, p.beta_high)),
        },
    }
}

/// Per-interval local condition `T_n < π√(Ẽ_n/D̃_n)`, the bound the encoder
/// is designed to enforce, and the aggregate inequality. Energies are
/// recomputed from `signal` rather than taken from the encoder.
pub fn check_local_condition(
    signal: &BandlimitedSignal,
    encoding: &Encoding,
) -> Result<IntervalReport> {
    check_metadata(signal, encoding)?;
    let shift = encoding.meta.shift;
    let scheme = encoding.meta.scheme;
    let mut intervals = Vec::with_capacity(encoding.averages.len());
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for (i, w) in encoding.firings.windows(2).enumerate() {
        let t = w[1] - w[0];
        let en = signal.energy_integrals(w[0], w[1], shift)?;
        let regime = encoding.intervals[i].regime;
        let bound_rhs = if en.d > 0.0 {
            Bound::Finite(PI * (en.e / en.d).sqrt())
        } else {
            Bound::Infinite
        };
        let lv = level(&scheme, regime);
        let theorem_bound = lv.map(|(a, b)| PI * (a * en.e / (en.d + b * en.e)).sqrt());
        let theorem_pass = theorem_bound.is_none_or(|b| t <= b * (1.0 + THEOREM_SLACK));
        lhs += t * t / (PI * PI) * en.d;
        if let Some((a, _)) = lv {
            rhs += a * en.e;
        }
        intervals.push(IntervalCheck {
            index: i,
            length: t,
            energy: en.e,
            deriv_energy: en.d,
            bound_rhs,
            theorem_bound,
            local_pass: bound_rhs.exceeds(t),
            theorem_pass,
            regime,
        });
    }
    let aggregate_rhs = scheme.alpha().map(|_| rhs);
    let aggregate_pass = aggregate_rhs.is_none_or(|r| lhs <= r * (1.0 + THEOREM_SLACK));
    Ok(IntervalReport {
        intervals,
        aggregate_lhs: lhs,
        aggregate_rhs,
        aggregate_pass,
    })
}

/// `(π√(α/β), π√(α(s+c)²/(β(s+c)² + (cΩ₀)²)))`: the interval cap in slowly
/// varying regions and the tighter cap in regions of high variation.
pub fn interval_bounds(params: &VbtParams, omega0: f64) -> (f64, f64) {
    let (a, b) = (params.alpha, params.beta);
    let sc = (params.shift + params.c).powi(2);
    let co = (params.c * omega0).powi(2);
    (PI * (a / b).sqrt(), PI * (a * sc / (b * sc + co)).sqrt())
}

/// Largest `π√(α/β)` over the levels a scheme can use.
pub fn low_variation_cap(scheme: &Scheme) -> Option<f64> {
    match scheme {
        Scheme::Conventional(_) => None,
        Scheme::Vbt { params, .. } => Some(PI * (params.alpha / params.beta).sqrt()),
        Scheme::Adaptive(p) => {
            let hi = PI * (p.alpha_high / p.beta_high).sqrt();
            let lo = PI * (p.alpha_low / p.beta_low).sqrt();
            Some(hi.max(lo))
        }
    }
}

/// Every interval against the cap of the level in force on it.
pub fn check_low_variation_bound(encoding: &Encoding) -> Vec<bool> {
    encoding
        .intervals
        .iter()
        .map(|d| match level(&encoding.meta.scheme, d.regime) {
            Some((a, b)) => d.length <= PI * (a / b).sqrt() * (1.0 + LOW_BOUND_SLACK),
            None => true,
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FiringRateProfile {
    /// (midpoint, 1/T_n).
    pub points: Vec<(f64, f64)>,
    pub nyquist_rate: f64,
    /// Fraction of intervals whose rate is below Ω₀/π.
    pub sub_nyquist_fraction: f64,
}

pub fn firing_rate_profile(encoding: &Encoding) -> Result<FiringRateProfile> {
    if encoding.firings.len() < 2 {
        return Err(Error::Parameter(format!(
            "firing-rate profile needs at least 2 firings, got {}",
            encoding.firings.len()
        )));
    }
    let nyquist_rate = encoding.meta.omega0 / PI;
    let points: Vec<(f64, f64)> = encoding
        .firings
        .windows(2)
        .map(|w| (0.5 * (w[0] + w[1]), 1.0 / (w[1] - w[0])))
        .collect();
    let below = points.iter().filter(|p| p.1 < nyquist_rate).count();
    Ok(FiringRateProfile {
        sub_nyquist_fraction: below as f64 / points.len() as f64,
        points,
        nyquist_rate,
    })
}

/// Grid value of `‖f̃ − 𝒜f̃‖²/‖f̃‖²` on a grid at 1/16 of the Nyquist interval.
pub fn estimate_contraction(
    signal: &BandlimitedSignal,
    encoding: &Encoding,
    omega0: f64,
) -> Result<f64> {
    check_metadata(signal, encoding)?;
    if (omega0 - encoding.meta.omega0).abs() > 1e-12 * omega0.abs() {
        return Err(Error::MetadataMismatch(format!(
            "omega0 {} vs encoding {}",
            omega0, encoding.meta.omega0
        )));
    }
    let grid = Grid::covering(signal.window, PI / omega0 / 16.0);
    empirical_contraction(signal, encoding, &grid)
}

/// Finite-window stand-in for the lower Beurling density: the smallest
/// firing count per second in any window of `window_len`, slid over the
/// encoding span at 1/64 of the Nyquist interval.
pub fn windowed_density(encoding: &Encoding, window_len: f64) -> Result<f64> {
    let (&first, &last) = match (encoding.firings.first(), encoding.firings.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::EmptyEncoding),
    };
    let span = last - first;
    if !(window_len > 0.0) || window_len > span {
        return Err(Error::Parameter(format!(
            "window length {window_len} s must lie in (0, {span}] (encoding span)"
        )));
    }
    let step = PI / encoding.meta.omega0 / 64.0;
    let f = &encoding.firings;
    let steps = ((span - window_len) / step).floor() as usize;
    let mut best = usize::MAX;
    let (mut lo, mut hi) = (0usize, 0usize);
    for k in 0..=steps {
        let a = first + k as f64 * step;
        let b = a + window_len;
        while lo < f.len() && f[lo] < a {
            lo += 1;
        }
        while hi < f.len() && f[hi] <= b {
            hi += 1;
        }
        best = best.min(hi - lo);
    }
    Ok(best as f64 / window_len)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WirtingerCheck {
    /// `∫|f̃ − f̃(s_n)|²`.
    pub lhs: f64,
    /// `(T_n²/π²)∫|f̃′|²`.
    pub rhs: f64,
    pub pass: bool,
}

impl WirtingerCheck {
    /// lhs/rhs, 0 when both sides vanish.
    pub fn ratio(&self) -> f64 {
        if self.rhs > 0.0 {
            self.lhs / self.rhs
        } else {
            0.0
        }
    }
}

/// Per-interval Wirtinger inequality about the interval midpoint. The shift
/// cancels on the left and has no derivative, so `f` is used directly.
pub fn wirtinger_check(
    signal: &BandlimitedSignal,
    encoding: &Encoding,
) -> Result<Vec<WirtingerCheck>> {
    check_metadata(signal, encoding)?;
    let rule = GaussLegendre::get();
    let dt = signal.fine_dt();
    Ok(encoding
        .firings
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let t = b - a;
            let fm = signal.eval(0.5 * (a + b));
            // Split at the midpoint so each half is a smooth panel set.
            let cells = ((0.5 * t / dt).ceil() as usize).max(2);
            let mut lhs = 0.0;
            let mut d = 0.0;
            for (lo, hi) in [(a, 0.5 * (a + b)), (0.5 * (a + b), b)] {
                lhs += rule.integrate_composite(lo, hi, cells, |u| (signal.eval(u) - fm).powi(2));
                d += rule.integrate_composite(lo, hi, cells, |u| signal.eval_derivative(u).powi(2));
            }
            let rhs = t * t / (PI * PI) * d;
            WirtingerCheck {
                lhs,
                rhs,
                pass: lhs <= rhs * (1.0 + THEOREM_SLACK) + 1e-300,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BernsteinCheck {
    /// `∫|f′|²`.
    pub lhs: f64,
    /// `Ω₀²∫|f|²`.
    pub rhs: f64,
    pub pass: bool,
}

/// `‖f′‖² ≤ Ω₀²‖f‖²` on the signal window. Windowing breaks the exact
/// inequality near the edges, hence the truncation slack.
pub fn bernstein_check(signal: &BandlimitedSignal) -> BernsteinCheck {
    let (lhs, rhs) = signal.bernstein_sides();
    BernsteinCheck {
        lhs,
        rhs,
        pass: lhs <= rhs * (1.0 + TRUNCATION_SLACK),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometricFit {
    pub contraction: f64,
    /// Largest `trace[l] − (trace[0] + l·10log₁₀α)` over the checked prefix.
    pub worst_excess_db: f64,
    pub iterations_checked: usize,
    pub pass: bool,
}

/// Checks that the first `count` entries of a dB trace stay within
/// `tol_db` of the geometric envelope `α^(l+1)` anchored at entry 0.
pub fn geometric_fit(trace: &[f64], contraction: f64, count: usize, tol_db: f64) -> GeometricFit {
    let rate = 10.0 * contraction.log10();
    let n = trace.len().min(count);
    let worst = (0..n)
        .map(|l| trace[l] - (trace[0] + l as f64 * rate))
        .fold(f64::NEG_INFINITY, f64::max);
    GeometricFit {
        contraction,
        worst_excess_db: worst,
        iterations_checked: n,
        pass: n > 0 && worst <= tol_db,
    }
}

/// Largest step-to-step increase of a dB trace from index `from` on.
pub fn max_increase_after(trace: &[f64], from: usize) -> f64 {
    trace
        .windows(2)
        .skip(from)
        .map(|w| w[1] - w[0])
        .filter(|d| d.is_finite())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// One named pass/fail line of a verification run.
#[derive(Debug, Clone, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: usize,
    pub total: usize,
    /// Failures here are mathematical errors rather than truncation effects.
    pub theorem_backed: bool,
    pub detail: String,
}

impl CheckLine {
    pub fn ok(&self) -> bool {
        self.passed == self.total
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verification {
    pub scheme: String,
    pub sample_count: usize,
    pub lines: Vec<CheckLine>,
    pub intervals: IntervalReport,
    pub empirical_contraction: f64,
}

impl Verification {
    pub fn theorem_failures(&self) -> usize {
        self.lines.iter().filter(|l| l.theorem_backed && !l.ok()).count()
    }
}

fn line(name: &str, flags: impl Iterator<Item = bool>, theorem: bool, detail: String) -> CheckLine {
    let (mut passed, mut total) = (0, 0);
    for f in flags {
        total += 1;
        passed += f as usize;
    }
    CheckLine {
        name: name.into(),
        passed,
        total,
        theorem_backed: theorem,
        detail,
    }
}

/// Runs every applicable check on an encoding of `signal`.
pub fn verify(signal: &BandlimitedSignal, encoding: &Encoding) -> Result<Verification> {
    let report = check_local_condition(signal, encoding)?;
    let energy_driven = encoding.meta.scheme.alpha().is_some();
    let mut lines = Vec::new();

    lines.push(line(
        "local condition T_n < pi*sqrt(E/D)",
        report.intervals.iter().map(|c| c.local_pass),
        energy_driven,
        format!("{} intervals", report.intervals.len()),
    ));
    if energy_driven {
        lines.push(line(
            "theorem bound T_n <= pi*sqrt(aE/(D+bE))",
            report.intervals.iter().map(|c| c.theorem_pass),
            true,
            String::new(),
        ));
        lines.push(line(
            "aggregate sum(T^2/pi^2 D) <= sum(a E)",
            std::iter::once(report.aggregate_pass),
            true,
            format!(
                "{:.6e} vs {:.6e}",
                report.aggregate_lhs,
                report.aggregate_rhs.unwrap_or(f64::NAN)
            ),
        ));
        let low = check_low_variation_bound(encoding);
        lines.push(line(
            "low-variation cap T_n <= pi*sqrt(a/b)",
            low.into_iter(),
            true,
            format!("cap {:.6e} s", low_variation_cap(&encoding.meta.scheme).unwrap_or(0.0)),
        ));
    } else {
        // Conventional encodings converge when T_max Ω₀/π < 1.
        let x = encoding.max_interval() * encoding.meta.omega0 / PI;
        lines.push(line(
            "global rate T_max*omega0/pi < 1",
            std::iter::once(x < 1.0),
            false,
            format!("{x:.6}"),
        ));
    }
    let wirt = wirtinger_check(signal, encoding)?;
    let worst = wirt.iter().map(WirtingerCheck::ratio).fold(0.0, f64::max);
    lines.push(line(
        "wirtinger per interval",
        wirt.iter().map(|w| w.pass),
        true,
        format!("max lhs/rhs {worst:.6}"),
    ));
    let bern = bernstein_check(signal);
    lines.push(line(
        "bernstein on window",
        std::iter::once(bern.pass),
        false,
        format!("{:.6e} vs {:.6e}", bern.lhs, bern.rhs),
    ));
    let contraction = estimate_contraction(signal, encoding, encoding.meta.omega0)?;
    let bound = match encoding.meta.scheme.alpha() {
        Some(a) => a,
        None => (encoding.max_interval() * encoding.meta.omega0 / PI).powi(2),
    };
    lines.push(line(
        "empirical contraction",
        std::iter::once(contraction <= bound * (1.0 + TRUNCATION_SLACK)),
        false,
        format!("{contraction:.6e} vs bound {bound:.6e}"),
    ));
    Ok(Verification {
        scheme: encoding.meta.scheme.name().into(),
        sample_count: encoding.sample_count(),
        lines,
        intervals: report,
        empirical_contraction: contraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{encode_vbt, VbtMode};
    use crate::signal::{make_chirp, Window};

    #[test]
    fn low_bound_example_value() {
        let p = VbtParams::shifted(0.5, 2450.0, 3.0, 1.0);
        let (lo, hi) = interval_bounds(&p, 2.0 * PI * 50.0);
        assert!((lo - PI * (0.5f64 / 2450.0).sqrt()).abs() < 1e-15);
        assert!((lo - 4.488e-2).abs() < 1e-5);
        assert!(hi < lo);
    }

    #[test]
    fn bounds_shrink_with_beta() {
        let mut prev = f64::INFINITY;
        for &b in &[1.0, 1e2, 1e4, 1e6, 1e9] {
            let (lo, _) = interval_bounds(&VbtParams::shifted(0.5, b, 3.0, 1.0), 100.0);
            assert!(lo < prev);
            prev = lo;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn bound_serializes_infinite_marker() {
        assert_eq!(serde_json::to_string(&Bound::Infinite).unwrap(), "\"+inf\"");
        assert_eq!(serde_json::to_string(&Bound::Finite(2.5)).unwrap(), "2.5");
        assert!(Bound::Infinite.exceeds(1e300));
    }

    #[test]
    fn geometric_fit_on_exact_decay() {
        let trace: Vec<f64> = (0..20).map(|l| -3.0 * (l + 1) as f64).collect();
        let fit = geometric_fit(&trace, 10f64.powf(-0.3), 10, 3.0);
        assert!(fit.pass);
        assert!(fit.worst_excess_db.abs() < 1e-9);
        let slow: Vec<f64> = (0..20).map(|l| -(l as f64)).collect();
        assert!(!geometric_fit(&slow, 0.1, 10, 3.0).pass);
    }

    #[test]
    fn monotone_helper() {
        assert_eq!(max_increase_after(&[0.0, -1.0, -2.0, -1.5], 0), 0.5);
        assert!(max_increase_after(&[0.0, 5.0, -1.0, -2.0], 1) < 0.0);
    }

    #[test]
    fn metadata_mismatch_is_rejected() {
        let s = make_chirp();
        let e = encode_vbt(&s, VbtParams::shifted(0.5, 5600.0, 4.2, 1.0), VbtMode::Shifted).unwrap();
        let mut other = s.clone();
        other.name = "other".into();
        assert!(matches!(
            check_local_condition(&other, &e),
            Err(Error::MetadataMismatch(_))
        ));
        let mut moved = s.clone();
        moved.window = Window::new(-0.4, 0.45).unwrap();
        assert!(check_metadata(&moved, &e).is_err());
    }
}

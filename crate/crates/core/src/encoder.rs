//! Integrate-and-fire time encoders.
//!
//! All schemes share one firing engine: after a firing at `t_n` the
//! accumulators reset, the biased signal is integrated cell by cell on the
//! fine grid, and the next firing is the first instant at which the running
//! integral reaches the (possibly time-varying) threshold. The running
//! integral is strictly increasing and the threshold non-increasing, so the
//! crossing is unique and bracketing by cells followed by bisection finds it.
//!
//! Energy-driven laws have an inverse-square-root singularity right after
//! each reset. The first cell is therefore integrated in the variable
//! `v = √(t − t_n)`, where every integrand becomes smooth.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{GaussLegendre, ORDER};
use crate::signal::BandlimitedSignal;

/// Energies below this are treated as zero by the bias law.
pub const ENERGY_FLOOR: f64 = 1e-300;

/// Hard cap on firings per encoding.
pub const MAX_FIRINGS: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConventionalParams {
    pub bias: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VbtParams {
    pub alpha: f64,
    pub beta: f64,
    pub shift: f64,
    pub c: f64,
    #[serde(default)]
    pub gamma1: f64,
    #[serde(default)]
    pub gamma2: f64,
}

impl VbtParams {
    pub fn shifted(alpha: f64, beta: f64, shift: f64, c: f64) -> Self {
        VbtParams {
            alpha,
            beta,
            shift,
            c,
            gamma1: 0.0,
            gamma2: 0.0,
        }
    }

    fn validate(&self, mode: VbtMode) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Parameter(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Parameter(format!("beta = {} must be > 0", self.beta)));
        }
        if !(self.c > 0.0) {
            return Err(Error::Parameter(format!("c = {} must be > 0", self.c)));
        }
        match mode {
            VbtMode::Shifted if !(self.shift > self.c) => Err(Error::Parameter(format!(
                "shifted mode requires s > c (s = {}, c = {})",
                self.shift, self.c
            ))),
            VbtMode::Regularized if !(self.gamma1 > 0.0 && self.gamma2 > 0.0) => {
                Err(Error::Parameter(format!(
                    "regularized mode requires gamma1, gamma2 > 0 (got {}, {})",
                    self.gamma1, self.gamma2
                )))
            }
            _ => Ok(()),
        }
    }

    /// Shift actually applied to the energies in `mode`.
    pub fn effective_shift(&self, mode: VbtMode) -> f64 {
        match mode {
            VbtMode::Shifted => self.shift,
            VbtMode::Unshifted | VbtMode::Regularized => 0.0,
        }
    }

    fn law(&self, mode: VbtMode) -> FiringLaw {
        let (g1, g2) = match mode {
            VbtMode::Regularized => (self.gamma1, self.gamma2),
            _ => (0.0, 0.0),
        };
        FiringLaw::Energy {
            alpha: self.alpha,
            beta: self.beta,
            c: self.c,
            shift: self.effective_shift(mode),
            gamma1: g1,
            gamma2: g2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VbtMode {
    Unshifted,
    Shifted,
    Regularized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveParams {
    pub alpha_high: f64,
    pub beta_high: f64,
    pub alpha_low: f64,
    pub beta_low: f64,
    /// Switching threshold on |f·f′| (signal²/s).
    pub delta: f64,
    pub shift: f64,
    pub c: f64,
}

impl AdaptiveParams {
    pub fn high(&self) -> VbtParams {
        VbtParams::shifted(self.alpha_high, self.beta_high, self.shift, self.c)
    }

    pub fn low(&self) -> VbtParams {
        VbtParams::shifted(self.alpha_low, self.beta_low, self.shift, self.c)
    }

    fn validate(&self) -> Result<()> {
        self.high().validate(VbtMode::Shifted)?;
        self.low().validate(VbtMode::Shifted)?;
        if !(self.alpha_high < self.alpha_low && self.beta_high > self.beta_low) {
            return Err(Error::Parameter(
                "adaptive levels need alpha_high < alpha_low and beta_high > beta_low".into(),
            ));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::Parameter(format!("delta = {} must be >= 0", self.delta)));
        }
        Ok(())
    }
}

/// Scheme and parameters that produced an encoding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Scheme {
    Conventional(ConventionalParams),
    Vbt { mode: VbtMode, params: VbtParams },
    Adaptive(AdaptiveParams),
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Conventional(_) => "conventional",
            Scheme::Vbt {
                mode: VbtMode::Unshifted,
                ..
            } => "vbt-unshifted",
            Scheme::Vbt {
                mode: VbtMode::Shifted,
                ..
            } => "vbt-shifted",
            Scheme::Vbt {
                mode: VbtMode::Regularized,
                ..
            } => "vbt-regularized",
            Scheme::Adaptive(_) => "adaptive",
        }
    }

    /// Contraction parameter α the scheme targets, if any. For the
    /// two-level scheme this is the larger of the two levels.
    pub fn alpha(&self) -> Option<f64> {
        match self {
            Scheme::Conventional(_) => None,
            Scheme::Vbt { params, .. } => Some(params.alpha),
            Scheme::Adaptive(p) => Some(p.alpha_high.max(p.alpha_low)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Fixed,
    High,
    Low,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Fixed => "fixed",
            Regime::High => "high",
            Regime::Low => "low",
        }
    }

    pub fn parse(s: &str) -> Option<Regime> {
        match s {
            "fixed" => Some(Regime::Fixed),
            "high" => Some(Regime::High),
            "low" => Some(Regime::Low),
            _ => None,
        }
    }
}

/// Per-interval diagnostics: length, (shifted) signal and derivative
/// energies over the interval, and the parameter regime in force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalDiag {
    pub length: f64,
    pub energy: f64,
    pub deriv_energy: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingMeta {
    pub scheme: Scheme,
    pub source: String,
    pub omega0: f64,
    /// Shift applied to the energies (0 outside shifted modes).
    pub shift: f64,
    /// First firing, pinned to the window start.
    pub t0: f64,
    pub window_end: f64,
    /// Length of the trailing partial interval that never fired.
    pub discarded_tail: f64,
    /// Largest |∫(f + b_n) − Δ_n| / Δ_n over all intervals.
    pub max_firing_residual: f64,
    /// Largest relative mismatch between the stored average and the value
    /// implied by the firing equation.
    pub max_identity_residual: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub firings: Vec<f64>,
    pub averages: Vec<f64>,
    pub intervals: Vec<IntervalDiag>,
    pub meta: EncodingMeta,
}

impl Encoding {
    /// Reported sample count: firings excluding the pinned `t0`.
    pub fn sample_count(&self) -> usize {
        self.firings.len().saturating_sub(1)
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.firings.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.firings.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Averages of `f + shift`, the quantity the reconstruction acts on.
    pub fn shifted_averages(&self) -> Vec<f64> {
        self.averages
            .iter()
            .zip(self.firings.windows(2))
            .map(|(y, w)| y + self.meta.shift * (w[1] - w[0]))
            .collect()
    }

    pub fn max_interval(&self) -> f64 {
        self.intervals.iter().map(|d| d.length).fold(0.0, f64::max)
    }

    pub fn check_invariants(&self) -> Result<()> {
        if self.averages.len() + 1 != self.firings.len() && !self.firings.is_empty() {
            return Err(Error::MetadataMismatch(format!(
                "{} averages for {} firings",
                self.averages.len(),
                self.firings.len()
            )));
        }
        if self.intervals.len() != self.averages.len() {
            return Err(Error::MetadataMismatch("diagnostics length".into()));
        }
        if self.firings.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::MetadataMismatch("firings not strictly increasing".into()));
        }
        Ok(())
    }
}

/// Bias/threshold law driving the firing engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FiringLaw {
    /// Conventional IF-TEM: `∫(f + b) = Δ`.
    Constant { bias: f64, threshold: f64 },
    /// Energy-driven law applied to the shifted input `f̃ = f + shift`. The
    /// integrand is `f̃ + c + 1/(π√(αẽ + γ₁²))` and the threshold
    /// `1/√(d̃ + βẽ + γ₂²)`, with `ẽ = ∫f̃²` and `d̃ = ∫f′²` accumulated since
    /// the last firing.
    Energy {
        alpha: f64,
        beta: f64,
        c: f64,
        shift: f64,
        gamma1: f64,
        gamma2: f64,
    },
}

impl FiringLaw {
    fn shift(&self) -> f64 {
        match *self {
            FiringLaw::Constant { .. } => 0.0,
            FiringLaw::Energy { shift, .. } => shift,
        }
    }

    #[inline]
    fn bias_variable(&self, e: f64) -> f64 {
        match *self {
            FiringLaw::Constant { .. } => 0.0,
            FiringLaw::Energy { alpha, gamma1, .. } => {
                1.0 / (PI * (alpha * e.max(ENERGY_FLOOR) + gamma1 * gamma1).sqrt())
            }
        }
    }

    /// Running integral `I` and threshold `Δ` after `elapsed` seconds.
    #[inline]
    pub fn running(&self, acc: &Accum, elapsed: f64) -> (f64, f64) {
        match *self {
            FiringLaw::Constant { bias, threshold } => (acc.int_f + bias * elapsed, threshold),
            FiringLaw::Energy {
                beta,
                c,
                shift,
                gamma2,
                ..
            } => (
                acc.int_f + (c + shift) * elapsed + acc.bias_var,
                1.0 / (acc.d + beta * acc.e + gamma2 * gamma2).sqrt(),
            ),
        }
    }

    fn singular_at_reset(&self) -> bool {
        matches!(self, FiringLaw::Energy { gamma1, .. } if *gamma1 == 0.0)
    }
}

/// Integrals accumulated since the last firing.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Accum {
    /// ∫ f
    pub int_f: f64,
    /// ∫ (f + shift)²
    pub e: f64,
    /// ∫ f′²
    pub d: f64,
    /// ∫ of the energy-dependent part of the bias.
    pub bias_var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Firing {
    pub t: f64,
    pub acc: Accum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NextFiring {
    At(Firing),
    /// No crossing before the window end; carries the partial accumulators.
    EndOfWindow(Accum),
}

/// Accumulators over [a, b] given their values at `a`, for an interval
/// that started at `t_n`.
fn segment(
    signal: &BandlimitedSignal,
    law: &FiringLaw,
    t_n: f64,
    a: f64,
    b: f64,
    start: &Accum,
) -> Accum {
    let rule = GaussLegendre::get();
    let shift = law.shift();
    let substitute = a == t_n && law.singular_at_reset();
    let (pa, pb) = if substitute {
        (0.0, (b - t_n).sqrt())
    } else {
        (a, b)
    };
    let half = 0.5 * (pb - pa);
    let mid = 0.5 * (pb + pa);

    let mut f = [0.0; ORDER];
    let mut fp2 = [0.0; ORDER];
    let mut ft2 = [0.0; ORDER];
    for k in 0..ORDER {
        let p = mid + half * rule.nodes[k];
        let (t, jac) = if substitute {
            (t_n + p * p, 2.0 * p)
        } else {
            (p, 1.0)
        };
        let (v, d) = signal.eval_both(t);
        f[k] = v * jac;
        fp2[k] = d * d * jac;
        ft2[k] = (v + shift) * (v + shift) * jac;
    }

    let mut out = *start;
    for k in 0..ORDER {
        let w = rule.weights[k] * half;
        out.int_f += w * f[k];
        out.e += w * ft2[k];
        out.d += w * fp2[k];
    }
    if let FiringLaw::Energy { .. } = law {
        let mut var = 0.0;
        for i in 0..ORDER {
            let p = mid + half * rule.nodes[i];
            let jac = if substitute { 2.0 * p } else { 1.0 };
            let e_i = start.e + half * (0..ORDER).map(|j| rule.partial[i][j] * ft2[j]).sum::<f64>();
            var += rule.weights[i] * jac * law.bias_variable(e_i);
        }
        out.bias_var += half * var;
    }
    out
}

/// Locates the next firing after `t_n` under `law`.
pub fn solve_next_firing(signal: &BandlimitedSignal, t_n: f64, law: &FiringLaw) -> NextFiring {
    let h = signal.fine_dt();
    let t_end = signal.window.end;
    let tol = 1e-12 * signal.window.len();
    let excess = |t: f64, acc: &Accum| {
        let (i, delta) = law.running(acc, t - t_n);
        i - delta
    };

    let mut a = t_n;
    let mut acc_a = Accum::default();
    let mut k = 0usize;
    loop {
        k += 1;
        let b = (t_n + k as f64 * h).min(t_end);
        if b <= a {
            return NextFiring::EndOfWindow(acc_a);
        }
        let acc_b = segment(signal, law, t_n, a, b, &acc_a);
        if excess(b, &acc_b) >= 0.0 {
            let (mut lo, mut hi, mut acc_hi) = (a, b, acc_b);
            while hi - lo > tol {
                let m = 0.5 * (lo + hi);
                if m <= lo || m >= hi {
                    break;
                }
                let acc_m = segment(signal, law, t_n, a, m, &acc_a);
                if excess(m, &acc_m) >= 0.0 {
                    hi = m;
                    acc_hi = acc_m;
                } else {
                    lo = m;
                }
            }
            return NextFiring::At(Firing { t: hi, acc: acc_hi });
        }
        if b >= t_end {
            return NextFiring::EndOfWindow(acc_b);
        }
        a = b;
        acc_a = acc_b;
    }
}

struct Builder {
    firings: Vec<f64>,
    averages: Vec<f64>,
    intervals: Vec<IntervalDiag>,
    max_firing_residual: f64,
    max_identity_residual: f64,
}

impl Builder {
    fn new(t0: f64) -> Self {
        Builder {
            firings: vec![t0],
            averages: Vec::new(),
            intervals: Vec::new(),
            max_firing_residual: 0.0,
            max_identity_residual: 0.0,
        }
    }

    fn push(&mut self, law: &FiringLaw, t_n: f64, firing: Firing, regime: Regime) {
        let len = firing.t - t_n;
        let (i, delta) = law.running(&firing.acc, len);
        self.max_firing_residual = self.max_firing_residual.max((i - delta).abs() / delta);
        // Average implied by the firing equation, Δ − ∫ b_n over the interval.
        let implied = match *law {
            FiringLaw::Constant { bias, threshold } => threshold - bias * len,
            FiringLaw::Energy { c, shift, .. } => delta - (c + shift) * len - firing.acc.bias_var,
        };
        let y = firing.acc.int_f;
        let scale = y.abs().max(delta);
        self.max_identity_residual = self.max_identity_residual.max((implied - y).abs() / scale);

        self.firings.push(firing.t);
        self.averages.push(y);
        self.intervals.push(IntervalDiag {
            length: len,
            energy: firing.acc.e,
            deriv_energy: firing.acc.d,
            regime,
        });
    }

    fn finish(
        self,
        signal: &BandlimitedSignal,
        scheme: Scheme,
        shift: f64,
        warnings: Vec<String>,
    ) -> Encoding {
        let last = *self.firings.last().expect("t0 always present");
        Encoding {
            meta: EncodingMeta {
                scheme,
                source: signal.name.clone(),
                omega0: signal.omega0,
                shift,
                t0: signal.window.start,
                window_end: signal.window.end,
                discarded_tail: signal.window.end - last,
                max_firing_residual: self.max_firing_residual,
                max_identity_residual: self.max_identity_residual,
                warnings,
            },
            firings: self.firings,
            averages: self.averages,
            intervals: self.intervals,
        }
    }
}

/// Runs the engine over the whole window, choosing a law per interval.
fn run(
    signal: &BandlimitedSignal,
    mut choose: impl FnMut(f64) -> (FiringLaw, Regime),
    low_energy_guard: bool,
) -> Result<Builder> {
    let mut out = Builder::new(signal.window.start);
    let mut t_n = signal.window.start;
    loop {
        let (law, regime) = choose(t_n);
        match solve_next_firing(signal, t_n, &law) {
            NextFiring::At(firing) => {
                out.push(&law, t_n, firing, regime);
                t_n = firing.t;
                if out.averages.len() > MAX_FIRINGS {
                    return Err(Error::TooManyFirings(MAX_FIRINGS));
                }
            }
            NextFiring::EndOfWindow(acc) => {
                let open = signal.window.end - t_n > 1e-9 * signal.window.len();
                if low_energy_guard && open && acc.e <= ENERGY_FLOOR {
                    return Err(Error::LowEnergy {
                        index: out.averages.len(),
                        t_start: t_n,
                    });
                }
                return Ok(out);
            }
        }
    }
}

pub fn encode_conventional(
    signal: &BandlimitedSignal,
    params: ConventionalParams,
) -> Result<Encoding> {
    if !(params.bias > signal.amp_bound) {
        return Err(Error::Parameter(format!(
            "bias b = {} must exceed the amplitude bound c = {}",
            params.bias, signal.amp_bound
        )));
    }
    if !(params.threshold > 0.0) {
        return Err(Error::Parameter(format!(
            "threshold = {} must be > 0",
            params.threshold
        )));
    }
    let law = FiringLaw::Constant {
        bias: params.bias,
        threshold: params.threshold,
    };
    let b = run(signal, |_| (law, Regime::Fixed), false)?;
    Ok(b.finish(signal, Scheme::Conventional(params), 0.0, Vec::new()))
}

pub fn encode_vbt(
    signal: &BandlimitedSignal,
    params: VbtParams,
    mode: VbtMode,
) -> Result<Encoding> {
    params.validate(mode)?;
    let law = params.law(mode);
    let mut warnings = Vec::new();
    if mode == VbtMode::Regularized {
        warnings.push(
            "regularized bias/threshold: reconstruction guarantee is not established for this mode"
                .to_string(),
        );
    }
    let guard = mode == VbtMode::Unshifted;
    let b = run(signal, |_| (law, Regime::Fixed), guard)?;
    Ok(b.finish(
        signal,
        Scheme::Vbt { mode, params },
        params.effective_shift(mode),
        warnings,
    ))
}

pub fn encode_adaptive(signal: &BandlimitedSignal, params: AdaptiveParams) -> Result<Encoding> {
    params.validate()?;
    let high = params.high().law(VbtMode::Shifted);
    let low = params.low().law(VbtMode::Shifted);
    let b = run(
        signal,
        |t| {
            let (v, d) = signal.eval_both(t);
            if (v * d).abs() >= params.delta {
                (high, Regime::High)
            } else {
                (low, Regime::Low)
            }
        },
        false,
    )?;
    Ok(b.finish(signal, Scheme::Adaptive(params), params.shift, Vec::new()))
}

/// Wraps externally chosen firing times of `signal` as an encoding so the
/// reconstruction and analysis code can be applied to them. Averages and
/// interval energies are computed from the signal; the firing residuals are
/// not meaningful and are recorded as zero.
pub fn encoding_from_firings(
    signal: &BandlimitedSignal,
    firings: Vec<f64>,
    scheme: Scheme,
    shift: f64,
) -> Result<Encoding> {
    if firings.len() < 2 {
        return Err(Error::EmptyEncoding);
    }
    let mut averages = Vec::with_capacity(firings.len() - 1);
    let mut intervals = Vec::with_capacity(firings.len() - 1);
    for w in firings.windows(2) {
        averages.push(compute_average(signal, w[0], w[1])?);
        let en = signal.energy_integrals(w[0], w[1], shift)?;
        intervals.push(IntervalDiag {
            length: w[1] - w[0],
            energy: en.e,
            deriv_energy: en.d,
            regime: Regime::Fixed,
        });
    }
    let last = *firings.last().expect("checked above");
    let enc = Encoding {
        meta: EncodingMeta {
            scheme,
            source: signal.name.clone(),
            omega0: signal.omega0,
            shift,
            t0: signal.window.start,
            window_end: signal.window.end,
            discarded_tail: signal.window.end - last,
            max_firing_residual: 0.0,
            max_identity_residual: 0.0,
            warnings: vec!["firing times supplied externally".into()],
        },
        firings,
        averages,
        intervals,
    };
    enc.check_invariants()?;
    Ok(enc)
}

/// `∫ f` over [t_a, t_b].
pub fn compute_average(signal: &BandlimitedSignal, t_a: f64, t_b: f64) -> Result<f64> {
    if !(t_a < t_b) {
        return Err(Error::Domain {
            t_a,
            t_b,
            w0: signal.window.start,
            w1: signal.window.end,
        });
    }
    signal.integral(t_a, t_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{make_tone, Window};

    fn zero_signal() -> BandlimitedSignal {
        BandlimitedSignal::new(
            "zero",
            vec![],
            0.0,
            2.0 * PI * 100.0,
            1.0,
            Window::new(-0.45, 0.45).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn conventional_on_zero_signal_is_uniform() {
        let enc = encode_conventional(
            &zero_signal(),
            ConventionalParams {
                bias: 1.3,
                threshold: 0.0015,
            },
        )
        .unwrap();
        let want = 0.0015 / 1.3;
        assert!(enc.intervals.iter().all(|d| (d.length - want).abs() < 1e-12));
        assert_eq!(enc.firings[0], -0.45);
        enc.check_invariants().unwrap();
        assert!(enc.meta.discarded_tail < want);
    }

    #[test]
    fn conventional_rejects_small_bias() {
        let err = encode_conventional(
            &zero_signal(),
            ConventionalParams {
                bias: 1.0,
                threshold: 0.01,
            },
        );
        assert!(matches!(err, Err(Error::Parameter(_))));
    }

    #[test]
    fn vbt_parameter_validation() {
        let s = zero_signal();
        let bad_alpha = VbtParams::shifted(1.0, 10.0, 3.0, 1.0);
        assert!(encode_vbt(&s, bad_alpha, VbtMode::Shifted).is_err());
        let small_shift = VbtParams::shifted(0.5, 10.0, 0.5, 1.0);
        assert!(encode_vbt(&s, small_shift, VbtMode::Shifted).is_err());
        assert!(encode_vbt(&s, small_shift, VbtMode::Regularized).is_err());
    }

    #[test]
    fn unshifted_zero_signal_reports_low_energy() {
        let p = VbtParams::shifted(0.5, 2450.0, 0.0, 1.0);
        let err = encode_vbt(&zero_signal(), p, VbtMode::Unshifted).unwrap_err();
        assert!(matches!(err, Error::LowEnergy { index: 0, .. }), "{err}");
    }

    #[test]
    fn regularized_mode_warns() {
        let mut p = VbtParams::shifted(0.5, 2450.0, 0.0, 1.0);
        p.gamma1 = 0.5;
        p.gamma2 = 0.2;
        let enc = encode_vbt(&zero_signal(), p, VbtMode::Regularized).unwrap();
        assert_eq!(enc.meta.warnings.len(), 1);
        // Zero signal: bias c + 1/γ₁ and threshold 1/γ₂ are constant.
        let want = (1.0 / 0.2) / (1.0 + 1.0 / (PI * 0.5));
        assert!(enc.intervals.iter().all(|d| (d.length - want).abs() < 1e-9));
    }

    #[test]
    fn compute_average_of_constants() {
        assert_eq!(compute_average(&zero_signal(), -0.1, 0.2).unwrap(), 0.0);
        let k = zero_signal().with_offset(0.7);
        assert!((compute_average(&k, -0.1, 0.2).unwrap() - 0.7 * 0.3).abs() < 1e-12);
        assert!(compute_average(&k, 0.2, 0.1).is_err());
        assert!(compute_average(&k, 0.2, 0.5).is_err());
    }

    #[test]
    fn end_of_window_without_crossing() {
        let s = make_tone(0.0, 1.0, Window::new(0.0, 0.01).unwrap(), 10.0, 1.0).unwrap();
        let law = FiringLaw::Constant {
            bias: 2.0,
            threshold: 1.0,
        };
        assert!(matches!(
            solve_next_firing(&s, 0.0, &law),
            NextFiring::EndOfWindow(_)
        ));
    }
}

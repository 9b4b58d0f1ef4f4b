#![allow(dead_code)]

use std::f64::consts::PI;

use vbt_tem::encoder::{Encoding, Regime, Scheme, VbtMode, VbtParams};
use vbt_tem::signal::BandlimitedSignal;

/// Firing law restated for the brute-force scan.
#[derive(Debug, Clone, Copy)]
pub enum Law {
    Constant { bias: f64, threshold: f64 },
    Energy { alpha: f64, beta: f64, c: f64, shift: f64, g1: f64, g2: f64 },
}

impl Law {
    fn from_vbt(p: &VbtParams, mode: VbtMode) -> Law {
        let (shift, g1, g2) = match mode {
            VbtMode::Shifted => (p.shift, 0.0, 0.0),
            VbtMode::Unshifted => (0.0, 0.0, 0.0),
            VbtMode::Regularized => (0.0, p.gamma1, p.gamma2),
        };
        Law::Energy { alpha: p.alpha, beta: p.beta, c: p.c, shift, g1, g2 }
    }

    /// Law in force on interval `n` of `enc`.
    pub fn for_interval(enc: &Encoding, n: usize) -> Law {
        match enc.meta.scheme {
            Scheme::Conventional(p) => Law::Constant { bias: p.bias, threshold: p.threshold },
            Scheme::Vbt { mode, params } => Law::from_vbt(&params, mode),
            Scheme::Adaptive(a) => {
                let p = match enc.intervals[n].regime {
                    Regime::High => a.high(),
                    _ => a.low(),
                };
                Law::from_vbt(&p, VbtMode::Shifted)
            }
        }
    }
}

/// First crossing after `t_n` found by accumulating every integral with the
/// trapezoid rule on a grid of step `h` and interpolating linearly inside
/// the crossing cell. For an unregularized energy law the `u^{-1/2}` part
/// of the bias integral is taken out analytically. Crossings inside the
/// first cell are rescanned with a finer step.
pub fn brute_next_firing(signal: &BandlimitedSignal, t_n: f64, law: Law, h: f64) -> Option<f64> {
    let mut h = h;
    loop {
        match scan(signal, t_n, law, h) {
            Scan::FirstCell if h > 1e-13 => h /= 16.0,
            Scan::FirstCell => return Some(t_n + h),
            Scan::At(t) => return Some(t),
            Scan::None => return None,
        }
    }
}

enum Scan {
    At(f64),
    FirstCell,
    None,
}

fn scan(signal: &BandlimitedSignal, t_n: f64, law: Law, h: f64) -> Scan {
    let end = signal.window.end;
    let (mut f_prev, mut d_prev) = signal.eval_both(t_n);
    let (mut int_f, mut e, mut d, mut b) = (0.0, 0.0, 0.0, 0.0);
    let mut prev_excess = f64::NEG_INFINITY;
    let mut r_prev = 0.0;
    let mut k = 1usize;
    loop {
        let t = t_n + k as f64 * h;
        if t > end {
            return Scan::None;
        }
        let u = t - t_n;
        let (f, fd) = signal.eval_both(t);
        int_f += 0.5 * h * (f_prev + f);
        d += 0.5 * h * (d_prev * d_prev + fd * fd);
        let excess = match law {
            Law::Constant { bias, threshold } => int_f + bias * u - threshold,
            Law::Energy { alpha, beta, c, shift, g1, g2 } => {
                let (a, z) = (f_prev + shift, f + shift);
                e += 0.5 * h * (a * a + z * z);
                let g = |e: f64| 1.0 / (PI * (alpha * e + g1 * g1).sqrt());
                if g1 == 0.0 {
                    let c0 = 1.0 / (PI * alpha.sqrt() * (signal.eval(t_n) + shift).abs());
                    let r = g(e) - c0 / u.sqrt();
                    b += 0.5 * h * (r_prev + r);
                    r_prev = r;
                    let var = b + 2.0 * c0 * u.sqrt();
                    int_f + (c + shift) * u + var - 1.0 / (d + beta * e + g2 * g2).sqrt()
                } else {
                    let e_prev = e - 0.5 * h * (a * a + z * z);
                    b += 0.5 * h * (g(e_prev) + g(e));
                    int_f + (c + shift) * u + b - 1.0 / (d + beta * e + g2 * g2).sqrt()
                }
            }
        };
        if excess >= 0.0 {
            if !prev_excess.is_finite() {
                return Scan::FirstCell;
            }
            return Scan::At(t - h * excess / (excess - prev_excess));
        }
        prev_excess = excess;
        f_prev = f;
        d_prev = fd;
        k += 1;
    }
}

/// Root of `(a + s + c)τ + 2√τ/(π√α·|a + s|) = 1/(|a + s|√(βτ))`, the
/// firing equation for the constant input `a` under the shifted law.
pub fn constant_interval(a: f64, alpha: f64, beta: f64, shift: f64, c: f64) -> f64 {
    let at = (a + shift).abs();
    let g = |tau: f64| {
        (a + shift + c) * tau + 2.0 * tau.sqrt() / (PI * alpha.sqrt() * at)
            - 1.0 / (at * (beta * tau).sqrt())
    };
    let (mut lo, mut hi) = (1e-15, 1.0);
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if g(m) < 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

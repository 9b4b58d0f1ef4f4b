//! Sinc helpers and the sine integral.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

/// Normalized sinc, `sin(πx)/(πx)`.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Value and derivative (w.r.t. `x`) of the normalized sinc.
#[inline]
pub fn sinc_and_derivative(x: f64) -> (f64, f64) {
    let px = PI * x;
    if px.abs() < 1e-4 {
        // Taylor: 1 - (πx)²/6 + (πx)⁴/120 ; d/dx = π(-(πx)/3 + (πx)³/30)
        let p2 = px * px;
        (1.0 - p2 / 6.0 + p2 * p2 / 120.0, PI * px * (-1.0 / 3.0 + p2 / 30.0))
    } else {
        let (s, c) = px.sin_cos();
        (s / px, (px * c - s) / (px * x))
    }
}

/// Sine integral `Si(x) = ∫_0^x sin(t)/t dt`.
///
/// Power series below |x| = 2, otherwise the continued fraction for
/// `E1(ix)` evaluated with the modified Lentz method.
pub fn sine_integral(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax == 0.0 {
        0.0
    } else if ax <= 2.0 {
        si_series(ax)
    } else {
        si_continued_fraction(ax)
    };
    v.copysign(x)
}

fn si_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x; // x^(2k+1)/(2k+1)! with alternating sign
    let mut sum = x;
    let mut k = 0usize;
    loop {
        k += 1;
        let a = (2 * k) as f64;
        let b = (2 * k + 1) as f64;
        term *= -x2 / (a * b);
        let add = term / b;
        sum += add;
        if add.abs() < 1e-18 * sum.abs() || k > 60 {
            break;
        }
    }
    sum
}

fn si_continued_fraction(x: f64) -> f64 {
    const FPMIN: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let mut b = Complex64::new(1.0, x);
    let mut c = Complex64::new(1.0 / FPMIN, 0.0);
    let mut d = Complex64::new(1.0, 0.0) / b;
    let mut h = d;
    for i in 2..1000 {
        let a = -(((i - 1) * (i - 1)) as f64);
        b += Complex64::new(2.0, 0.0);
        d = Complex64::new(1.0, 0.0) / (d * a + b);
        c = b + Complex64::new(a, 0.0) / c;
        let del = c * d;
        h *= del;
        if (del.re - 1.0).abs() + del.im.abs() < EPS {
            break;
        }
    }
    let (s, co) = x.sin_cos();
    h *= Complex64::new(co, -s);
    FRAC_PI_2 + h.im
}

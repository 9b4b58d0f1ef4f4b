mod common;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_next_firing, constant_interval, Law};
use vbt_tem::encoder::{
    compute_average, encode_adaptive, encode_conventional, encode_vbt, AdaptiveParams,
    ConventionalParams, Encoding, VbtMode, VbtParams,
};
use vbt_tem::reconstruction::kernel_integral;
use vbt_tem::signal::{make_chirp, make_sos, BandlimitedSignal, Window};
use vbt_tem::special::sine_integral;

const INTERVALS_PER_SCHEME: usize = 24;

fn chirp_adaptive() -> AdaptiveParams {
    AdaptiveParams {
        alpha_high: 0.09,
        beta_high: 2300.0,
        alpha_low: 0.9,
        beta_low: 10.0,
        delta: 6e-6,
        shift: 4.2,
        c: 1.0,
    }
}

/// Worst disagreement between the encoder and the brute-force scan over
/// randomly drawn intervals.
fn worst_firing_error(signal: &BandlimitedSignal, enc: &Encoding, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_int = enc.intervals.len();
    assert!(n_int >= INTERVALS_PER_SCHEME, "only {n_int} intervals");
    let h = signal.fine_dt() / 10.0;
    let mut worst: f64 = 0.0;
    for _ in 0..INTERVALS_PER_SCHEME {
        let n = rng.gen_range(0..n_int);
        let law = Law::for_interval(enc, n);
        let t = brute_next_firing(signal, enc.firings[n], law, h).expect("oracle finds a crossing");
        worst = worst.max((t - enc.firings[n + 1]).abs());
    }
    worst
}

#[test]
fn conventional_firings_match_brute_force() {
    let s = make_chirp();
    let enc = encode_conventional(&s, ConventionalParams { bias: 1.3, threshold: 0.0015 }).unwrap();
    let err = worst_firing_error(&s, &enc, 1);
    assert!(err <= 1e-6, "worst {err:e} s");
}

#[test]
fn shifted_firings_match_brute_force() {
    let s = make_chirp();
    let enc = encode_vbt(&s, VbtParams::shifted(0.5, 5600.0, 4.2, 1.0), VbtMode::Shifted).unwrap();
    let err = worst_firing_error(&s, &enc, 2);
    assert!(err <= 1e-6, "worst {err:e} s");
}

#[test]
fn shifted_sos_firings_match_brute_force() {
    let s = make_sos(11);
    let enc = encode_vbt(&s, VbtParams::shifted(0.45, 2400.0, 3.0, 1.0), VbtMode::Shifted).unwrap();
    let err = worst_firing_error(&s, &enc, 3);
    assert!(err <= 1e-6, "worst {err:e} s");
}

#[test]
fn unshifted_firings_match_brute_force() {
    let s = make_chirp();
    let enc =
        encode_vbt(&s, VbtParams::shifted(0.5, 5600.0, 4.2, 1.0), VbtMode::Unshifted).unwrap();
    let err = worst_firing_error(&s, &enc, 4);
    assert!(err <= 1e-6, "worst {err:e} s");
}

#[test]
fn regularized_firings_match_brute_force() {
    let s = make_chirp();
    let p = VbtParams { gamma1: 0.02, gamma2: 0.02, ..VbtParams::shifted(0.5, 5600.0, 4.2, 1.0) };
    let enc = encode_vbt(&s, p, VbtMode::Regularized).unwrap();
    let err = worst_firing_error(&s, &enc, 5);
    assert!(err <= 1e-6, "worst {err:e} s");
}

#[test]
fn adaptive_firings_match_brute_force() {
    let s = make_chirp();
    let enc = encode_adaptive(&s, chirp_adaptive()).unwrap();
    let err = worst_firing_error(&s, &enc, 6);
    assert!(err <= 1e-6, "worst {err:e} s");
}

fn constant(a: f64) -> BandlimitedSignal {
    BandlimitedSignal::new("const", vec![], a, 2.0 * PI * 100.0, 1.0, Window::new(-0.45, 0.45).unwrap())
        .unwrap()
}

#[test]
fn constant_signal_matches_root_find() {
    for &(a, alpha, beta, shift) in &[
        (0.0, 0.5, 2450.0, 3.0),
        (0.3, 0.5, 5600.0, 4.2),
        (-0.6, 0.45, 2400.0, 3.0),
        (0.9, 0.2, 300.0, 1.5),
    ] {
        let s = constant(a);
        let enc = encode_vbt(&s, VbtParams::shifted(alpha, beta, shift, 1.0), VbtMode::Shifted).unwrap();
        let tau = constant_interval(a, alpha, beta, shift, 1.0);
        for d in &enc.intervals {
            assert!((d.length - tau).abs() <= 1e-8, "a={a}: {} vs {tau}", d.length);
        }
    }
}

#[test]
fn constant_signal_conventional_spacing() {
    let s = constant(0.25);
    let p = ConventionalParams { bias: 1.3, threshold: 0.0015 };
    let enc = encode_conventional(&s, p).unwrap();
    let tau = p.threshold / (0.25 + p.bias);
    for d in &enc.intervals {
        assert!((d.length - tau).abs() <= 1e-10);
    }
}

fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn sine_integral_reference_values() {
    // Abramowitz & Stegun table 5.1
    for &(x, v) in &[
        (0.5, 0.493_107_418_043_067),
        (1.0, 0.946_083_070_367_183),
        (2.0, 1.605_412_976_802_695),
        (5.0, 1.549_931_244_944_674),
        (10.0, 1.658_347_594_218_874),
        (20.0, 1.548_241_701_043_44),
    ] {
        assert!((sine_integral(x) - v).abs() < 1e-13, "Si({x})");
        assert!((sine_integral(-x) + v).abs() < 1e-13);
    }
    assert!((sine_integral(1e6) - PI / 2.0).abs() < 1e-5);
}

#[test]
fn kernel_integral_matches_quadrature() {
    let w = 2.0 * PI * 100.0;
    let g = |t: f64| if t == 0.0 { w / PI } else { (w * t).sin() / (PI * t) };
    for &(a, b, s) in &[(0.0, 0.004, 0.001), (-0.02, 0.03, 0.0), (0.1, 0.1013, 0.4), (-0.3, -0.29, 0.05)] {
        let q = simpson(a, b, 20_000, |t| g(t - s));
        assert!((kernel_integral(w, a, b, s) - q).abs() < 1e-11, "[{a}, {b}] s={s}");
    }
}

#[test]
fn chirp_average_matches_quadrature() {
    let s = make_chirp();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let a = rng.gen_range(-0.45..0.4);
        let b = a + rng.gen_range(1e-4..0.05);
        let q = simpson(a, b, 40_000, |t| s.eval(t));
        assert!((compute_average(&s, a, b).unwrap() - q).abs() < 1e-10);
    }
}

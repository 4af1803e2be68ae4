//! Scalar building blocks checked against independent references.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use idexp::mlf::{gamma, mlf, mlf_oracle, MlfParams};
use idexp::quadrature::adaptive_gk15;
use idexp::resolvent::{phi_quadrature, scalar_resolvent, KernelSpec, ModeResolvent, Resolvent};
use idexp::tableau::erk2_coefficients;
use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;

fn mode(kernel: KernelSpec, lambda: f64) -> ModeResolvent {
    ModeResolvent::new(Resolvent::new(kernel).unwrap(), lambda).unwrap()
}

#[test]
fn mlf_fixtures_match_high_precision() {
    for (alpha, beta, x) in [
        (1.75, 1.0, -1.0),
        (1.5, 3.0, -10.0),
        (1.25, 2.0, -37.5),
        (1.5, 1.0, -50.0),
    ] {
        let p = MlfParams::new(alpha, beta).unwrap();
        let want = mlf_oracle(p, x, 200).unwrap();
        assert_relative_eq!(mlf(p, x).unwrap(), want, max_relative = 1e-10);
    }
}

#[test]
fn mlf_at_zero_is_reciprocal_gamma() {
    for beta in [1.0, 2.0, 3.0, 4.0] {
        let p = MlfParams::new(1.5, beta).unwrap();
        assert_relative_eq!(
            mlf(p, 0.0).unwrap(),
            1.0 / gamma(beta),
            max_relative = 1e-15
        );
    }
}

#[test]
fn mlf_alpha_two_is_cosine() {
    let p = MlfParams::new(2.0, 1.0).unwrap();
    for x in [-0.5f64, -4.0, -30.0, -200.0] {
        let want = (-x).sqrt().cos();
        assert!((mlf(p, x).unwrap() - want).abs() < 1e-11, "x = {x}");
    }
}

#[test]
fn exponential_resolvent_matches_extended_precision() {
    // s'' + a s' + lambda s = 0, s(0) = 1, s'(0) = 0
    let (a, lambda, t) = (2.0, PI * PI, 1.0);
    let prec = 200;
    let fa = Float::with_val(prec, a);
    let pi = Float::with_val(prec, Constant::Pi);
    let lam = Float::with_val(prec, pi.clone().pow(2u32));
    let omega = (lam - fa.clone().pow(2u32) / 4u32).sqrt();
    let half = Float::with_val(prec, &fa / 2u32);
    let ot = Float::with_val(prec, &omega * t);
    let want = Float::with_val(prec, -(Float::with_val(prec, &half * t))).exp()
        * (ot.clone().cos() + half / omega * ot.sin());
    let kernel = KernelSpec::exponential(a).unwrap();
    assert_relative_eq!(
        scalar_resolvent(&mode(kernel, lambda), t).unwrap(),
        want.to_f64(),
        max_relative = 1e-13
    );
}

#[test]
fn riesz_resolvent_is_mittag_leffler() {
    let kernel = KernelSpec::riesz(1.5).unwrap();
    for t in [0.1, 0.5, 1.0, 2.0] {
        let x = -PI * PI * f64::powf(t, 1.5);
        let want = mlf_oracle(MlfParams::new(1.5, 1.0).unwrap(), x, 60).unwrap();
        assert_relative_eq!(
            scalar_resolvent(&mode(kernel, PI * PI), t).unwrap(),
            want,
            max_relative = 1e-11
        );
    }
}

#[test]
fn phi_fixtures_match_quadrature() {
    let cases = [
        (KernelSpec::riesz(1.75).unwrap(), PI * PI, 1, 0.1, 0.3),
        (
            KernelSpec::exponential(2.0).unwrap(),
            4.0 * PI * PI,
            2,
            0.05,
            0.2,
        ),
        (
            KernelSpec::riesz(1.25).unwrap(),
            16.0 * PI * PI,
            3,
            0.01,
            0.01,
        ),
    ];
    for (kernel, lambda, k, h, t) in cases {
        let mr = mode(kernel, lambda);
        let want = phi_quadrature(&mr, k, h, t, 1e-15).unwrap();
        assert_relative_eq!(mr.phi(k, h, t).unwrap(), want, max_relative = 1e-10);
    }
}

#[test]
fn erk2_stage_coefficient_is_partial_step_integral() {
    let (lambda, h, t, c2) = (PI * PI, 0.125, 0.5, 0.5);
    let kernel = KernelSpec::riesz(1.5).unwrap();
    let mr = mode(kernel, lambda);
    let w = erk2_coefficients(c2, &mr, h, t).unwrap();
    let stage = w.stage.unwrap();
    // a21 = int_0^{c2 h} s(sigma) d sigma / h, independent of t
    let q = adaptive_gk15(|r| mr.s(c2 * h - r).unwrap(), &[0.0, c2 * h], 1e-15, 1000).unwrap();
    assert_relative_eq!(stage.a21, q.value / h, max_relative = 1e-11);
}

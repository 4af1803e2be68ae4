//! Scalar resolvents s(t) of the per-mode problems
//! s'(t) + lambda * int_0^t b(t - r) s(r) dr = 0, s(0) = 1,
//! and the phi scalars built from them.
//!
//! Two kernels are supported: the Riesz kernel b(t) = t^(rho-2)/Gamma(rho-1)
//! with s(t) = E_rho(-lambda t^rho), and the exponential kernel b(t) = e^(-a t)
//! whose resolvent is a damped oscillation.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mlf::{rgamma, MittagLeffler, MlfParams};
use crate::quadrature::{adaptive_gk15, GaussLegendre};

/// Highest phi index supported.
pub const MAX_PHI: usize = 3;

/// Memory kernel selector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelSpec {
    /// b(t) = t^(rho-2) / Gamma(rho-1), 1 < rho < 2.
    Riesz { rho: f64 },
    /// b(t) = exp(-rate t), 0 < rate <= 2.
    Exponential { rate: f64 },
}

impl KernelSpec {
    pub fn riesz(rho: f64) -> Result<Self> {
        if !(rho > 1.0 && rho < 2.0) {
            return Err(Error::invalid(format!(
                "Riesz kernel needs 1 < rho < 2, got {rho}"
            )));
        }
        Ok(Self::Riesz { rho })
    }

    /// Like [`KernelSpec::riesz`] but also admits the wave-like limit rho = 2.
    /// Test use only.
    pub fn riesz_allow_limit(rho: f64) -> Result<Self> {
        if rho == 2.0 {
            return Ok(Self::Riesz { rho });
        }
        Self::riesz(rho)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate <= 2.0) {
            return Err(Error::invalid(format!(
                "exponential kernel needs 0 < a <= 2, got {rate}"
            )));
        }
        Ok(Self::Exponential { rate })
    }

    /// Kernel value b(t) for t > 0.
    pub fn kernel(&self, t: f64) -> f64 {
        match *self {
            Self::Riesz { rho } => t.powf(rho - 2.0) * rgamma(rho - 1.0),
            Self::Exponential { rate } => (-rate * t).exp(),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Self::Riesz { rho } => format!("riesz(rho={rho})"),
            Self::Exponential { rate } => format!("exp(a={rate})"),
        }
    }
}

/// Kernel-level data shared by all modes: for the Riesz kernel, the
/// Mittag-Leffler evaluators E_{rho, j+1}, j = 0..=3.
pub struct Resolvent {
    spec: KernelSpec,
    ml: Vec<MittagLeffler>,
}

impl Resolvent {
    pub fn new(spec: KernelSpec) -> Result<Arc<Self>> {
        let ml = match spec {
            KernelSpec::Riesz { rho } => (0..=MAX_PHI)
                .map(|j| MlfParams::new(rho, (j + 1) as f64).map(MittagLeffler::new))
                .collect::<Result<Vec<_>>>()?,
            KernelSpec::Exponential { .. } => Vec::new(),
        };
        Ok(Arc::new(Self { spec, ml }))
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }
}

#[derive(Clone, Copy, Debug)]
struct Damped {
    mu: Complex64,
    c: Complex64,
}

/// Scalar resolvent for one eigenvalue.
#[derive(Clone)]
pub struct ModeResolvent {
    kernel: Arc<Resolvent>,
    lambda: f64,
    damped: Option<Damped>,
    // Riesz: lambda^(1/rho), the time scale of the oscillatory part
    freq: f64,
}

impl std::fmt::Debug for ModeResolvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModeResolvent")
            .field("kernel", &self.kernel.spec)
            .field("lambda", &self.lambda)
            .finish()
    }
}

impl ModeResolvent {
    pub fn new(kernel: Arc<Resolvent>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "eigenvalue must be positive, got {lambda}"
            )));
        }
        Self::build(kernel, lambda)
    }

    /// The degenerate lambda = 0 case (s identically 1). Test use only.
    pub fn degenerate(kernel: Arc<Resolvent>) -> Self {
        Self::build(kernel, 0.0).expect("lambda = 0 is always admissible here")
    }

    fn build(kernel: Arc<Resolvent>, lambda: f64) -> Result<Self> {
        let mut damped = None;
        let mut freq = 0.0;
        if lambda > 0.0 {
            match kernel.spec {
                KernelSpec::Exponential { rate } => {
                    let disc = 4.0 * lambda - rate * rate;
                    if disc <= 0.0 {
                        return Err(Error::invalid(format!(
                            "over-damped mode (4 lambda - a^2 = {disc}) is not supported"
                        )));
                    }
                    let omega = 0.5 * disc.sqrt();
                    damped = Some(Damped {
                        mu: Complex64::new(-0.5 * rate, omega),
                        c: Complex64::new(1.0, -0.5 * rate / omega),
                    });
                }
                KernelSpec::Riesz { rho } => freq = lambda.powf(1.0 / rho),
            }
        }
        Ok(Self {
            kernel,
            lambda,
            damped,
            freq,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn spec(&self) -> KernelSpec {
        self.kernel.spec
    }

    pub fn is_degenerate(&self) -> bool {
        self.lambda == 0.0
    }

    /// s(t).
    pub fn s(&self, t: f64) -> Result<f64> {
        self.antiderivative(0, t)
    }

    /// F_j(t) = int_0^t s(r) (t - r)^(j-1)/(j-1)! dr, with F_0 = s.
    pub fn antiderivative(&self, j: usize, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::OutOfDomain {
                x: t,
                reason: "resolvent needs t >= 0",
            });
        }
        if j > MAX_PHI {
            return Err(Error::invalid(format!(
                "antiderivative order {j} exceeds {MAX_PHI}"
            )));
        }
        if self.is_degenerate() {
            return Ok(t.powi(j as i32) * rgamma(j as f64 + 1.0));
        }
        if let Some(d) = self.damped {
            let z = d.mu * t;
            let v = if j == 0 {
                z.exp()
            } else {
                phi_classic(z)[j - 1] * t.powi(j as i32)
            };
            return Ok((d.c * v).re);
        }
        let KernelSpec::Riesz { rho } = self.kernel.spec else {
            unreachable!()
        };
        if t == 0.0 {
            return Ok(if j == 0 { 1.0 } else { 0.0 });
        }
        let e = self.kernel.ml[j].eval(-self.lambda * t.powf(rho))?;
        Ok(t.powi(j as i32) * e)
    }

    /// phi_{k,h}(t) for k = 1..=3, evaluated together.
    pub fn phi_all(&self, h: f64, t: f64) -> Result<[f64; MAX_PHI]> {
        check_phi_domain(h, t)?;
        if self.is_degenerate() {
            return Ok([1.0, 0.5, 1.0 / 6.0]);
        }
        if let Some(d) = self.damped {
            let p = phi_classic(d.mu * h);
            let pre = d.c * (d.mu * (t - h)).exp();
            return Ok([(pre * p[0]).re, (pre * p[1]).re, (pre * p[2]).re]);
        }
        let (vals, kappa) = self.phi_differences(h, t)?;
        // the difference formulas lose about log10(kappa) digits once t >> h;
        // away from the origin s is analytic on [t-h, t] and Gauss-Legendre is exact
        if kappa > CANCELLATION_LIMIT && t >= 2.0 * h {
            return self.phi_gauss(h, t);
        }
        Ok(vals)
    }

    /// phi_{k,h}(t) = h^-k int_0^h s(t - r) r^(k-1)/(k-1)! dr.
    pub fn phi(&self, k: usize, h: f64, t: f64) -> Result<f64> {
        check_phi_index(k)?;
        Ok(self.phi_all(h, t)?[k - 1])
    }

    /// The phi values from differences of antiderivatives at t and t - h,
    /// without any stabilisation, together with the worst cancellation factor.
    pub fn phi_closed_form(&self, k: usize, h: f64, t: f64) -> Result<f64> {
        check_phi_index(k)?;
        check_phi_domain(h, t)?;
        Ok(self.phi_differences(h, t)?.0[k - 1])
    }

    fn phi_differences(&self, h: f64, t: f64) -> Result<([f64; MAX_PHI], f64)> {
        let back = (t - h).max(0.0);
        let mut now = [0.0; MAX_PHI + 1];
        let mut before = [0.0; MAX_PHI + 1];
        for j in 1..=MAX_PHI {
            now[j] = self.antiderivative(j, t)?;
            before[j] = self.antiderivative(j, back)?;
        }
        let p1 = now[1] - before[1];
        let p2 = now[2] - before[2] - h * before[1];
        let p3 = now[3] - before[3] - h * before[2] - 0.5 * h * h * before[1];
        let k1 = now[1].abs().max(before[1].abs()) / p1.abs();
        let k2 = [now[2], before[2], h * before[1]]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            / p2.abs();
        let k3 = [now[3], before[3], h * before[2], 0.5 * h * h * before[1]]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            / p3.abs();
        let kappa = k1.max(k2).max(k3);
        let kappa = if kappa.is_nan() { f64::INFINITY } else { kappa };
        Ok(([p1 / h, p2 / (h * h), p3 / (h * h * h)], kappa))
    }

    fn phi_gauss(&self, h: f64, t: f64) -> Result<[f64; MAX_PHI]> {
        let KernelSpec::Riesz { rho } = self.kernel.spec else {
            unreachable!()
        };
        let theta = PI / rho;
        // oscillatory component ~ exp(freq r cos(theta)) cos(freq r sin(theta))
        let amplitude = (self.freq * (t - h) * theta.cos()).exp();
        let phase = self.freq * h * theta.sin().abs();
        let panels = if amplitude < 1e-18 {
            1
        } else {
            ((phase / 12.0).ceil() as usize).clamp(1, 64)
        };
        let gl = gauss_legendre_20();
        let width = 1.0 / panels as f64;
        let mut acc = [0.0; MAX_PHI];
        for p in 0..panels {
            let lo = p as f64 * width;
            for (x, w) in gl.nodes.iter().zip(&gl.weights) {
                let u = lo + 0.5 * width * (x + 1.0);
                let s = self.s(t - h * u)?;
                let ws = 0.5 * width * w * s;
                acc[0] += ws;
                acc[1] += ws * u;
                acc[2] += ws * 0.5 * u * u;
            }
        }
        Ok(acc)
    }
}

const CANCELLATION_LIMIT: f64 = 1e4;

fn gauss_legendre_20() -> &'static GaussLegendre {
    static GL: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    GL.get_or_init(|| GaussLegendre::new(20))
}

fn check_phi_index(k: usize) -> Result<()> {
    if k == 0 || k > MAX_PHI {
        return Err(Error::invalid(format!(
            "phi index must be in 1..={MAX_PHI}, got {k}"
        )));
    }
    Ok(())
}

fn check_phi_domain(h: f64, t: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("step must be positive, got {h}")));
    }
    // grid times are multiples of h; allow rounding noise
    if !(t >= h * (1.0 - 1e-12)) || !t.is_finite() {
        return Err(Error::OutOfDomain {
            x: t,
            reason: "phi needs t >= h",
        });
    }
    Ok(())
}

/// Classic phi_1..phi_3 of a complex argument,
/// phi_k(z) = int_0^1 e^((1-r) z) r^(k-1)/(k-1)! dr.
pub fn phi_classic(z: Complex64) -> [Complex64; MAX_PHI] {
    if z.norm() < 1.0 {
        // phi_k(z) = sum_n z^n / (n + k)!
        let mut out = [Complex64::new(0.0, 0.0); MAX_PHI];
        for (k, slot) in out.iter_mut().enumerate() {
            let k = k + 1;
            let mut term = Complex64::new(rgamma(k as f64 + 1.0), 0.0);
            let mut sum = term;
            for n in 1..30 {
                term = term * z / (n + k) as f64;
                sum += term;
            }
            *slot = sum;
        }
        return out;
    }
    let p0 = z.exp();
    let p1 = (p0 - 1.0) / z;
    let p2 = (p1 - 1.0) / z;
    let p3 = (p2 - 0.5) / z;
    [p1, p2, p3]
}

/// s(t) for one mode.
pub fn scalar_resolvent(mr: &ModeResolvent, t: f64) -> Result<f64> {
    mr.s(t)
}

/// phi_{k,h}(t) for one mode.
pub fn phi_scalar(mr: &ModeResolvent, k: usize, h: f64, t: f64) -> Result<f64> {
    mr.phi(k, h, t)
}

/// Adaptive-quadrature value of phi_{k,h}(t) to absolute tolerance `tol`,
/// integrating s directly. Independent of the closed forms.
pub fn phi_quadrature(mr: &ModeResolvent, k: usize, h: f64, t: f64, tol: f64) -> Result<f64> {
    check_phi_index(k)?;
    check_phi_domain(h, t)?;
    let t = t.max(h);
    let fact = rgamma(k as f64);
    // in r = sigma / h on [0, 1]; s(t - h r) is least smooth near t - h r = 0
    let mut breaks = vec![0.0];
    let gap = (t - h) / h;
    if gap < 1.0 {
        // graded toward r = 1
        let mut d = 0.5;
        while d > 1e-12 && d > gap {
            breaks.push(1.0 - d);
            d *= 0.5;
        }
    }
    // resolve oscillations of the damped modes
    let wiggles = match mr.spec() {
        KernelSpec::Exponential { rate } if !mr.is_degenerate() => {
            (0.5 * (4.0 * mr.lambda() - rate * rate).max(0.0).sqrt() * h / PI).ceil() as usize
        }
        KernelSpec::Riesz { .. } => (mr.freq * h / PI).ceil() as usize,
        _ => 0,
    };
    let uniform = wiggles.clamp(1, 512);
    let mut grid: Vec<f64> = (1..uniform).map(|i| i as f64 / uniform as f64).collect();
    breaks.append(&mut grid);
    breaks.push(1.0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut failure = None;
    let integral = adaptive_gk15(
        |r| {
            let s = match mr.s(t - h * r) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            };
            s * r.powi(k as i32 - 1) * fact
        },
        &breaks,
        tol,
        20_000,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(integral.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlf::mlf_oracle;

    fn riesz(rho: f64) -> Arc<Resolvent> {
        Resolvent::new(KernelSpec::riesz(rho).unwrap()).unwrap()
    }

    fn expo(a: f64) -> Arc<Resolvent> {
        Resolvent::new(KernelSpec::exponential(a).unwrap()).unwrap()
    }

    const PI2: f64 = PI * PI;

    #[test]
    fn kernel_parameter_ranges() {
        assert!(KernelSpec::riesz(1.0).is_err());
        assert!(KernelSpec::riesz(2.0).is_err());
        assert!(KernelSpec::riesz_allow_limit(2.0).is_ok());
        assert!(KernelSpec::exponential(0.0).is_err());
        assert!(KernelSpec::exponential(2.5).is_err());
        assert!(KernelSpec::exponential(2.0).is_ok());
    }

    #[test]
    fn starts_at_one() {
        for k in [riesz(1.5), expo(2.0)] {
            let mr = ModeResolvent::new(k, 7.0 * PI2).unwrap();
            assert_eq!(mr.s(0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let mr = ModeResolvent::new(riesz(1.5), PI2).unwrap();
        assert!(mr.s(-0.1).is_err());
        assert!(mr.phi(0, 0.1, 0.2).is_err());
        assert!(mr.phi(4, 0.1, 0.2).is_err());
        assert!(mr.phi(1, 0.1, 0.05).is_err());
        assert!(ModeResolvent::new(expo(2.0), 0.5).is_err());
    }

    #[test]
    fn riesz_matches_series_oracle() {
        let mr = ModeResolvent::new(riesz(1.75), PI2).unwrap();
        let x = -PI2 * 0.5f64.powf(1.75);
        let expected = mlf_oracle(MlfParams::new(1.75, 1.0).unwrap(), x, 60).unwrap();
        assert!((mr.s(0.5).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn exponential_closed_form() {
        let lambda = PI2;
        let mr = ModeResolvent::new(expo(2.0), lambda).unwrap();
        let w = (4.0 * lambda - 4.0f64).sqrt() / 2.0;
        let expected = (-1.0f64).exp() * (w.cos() + 2.0 / (4.0 * lambda - 4.0).sqrt() * w.sin());
        assert!((mr.s(1.0).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn exponential_ode_residual() {
        let a = 2.0;
        let step = 1e-4;
        for k in [1.0, 3.0, 8.0] {
            let lambda = k * k * PI2;
            let mr = ModeResolvent::new(expo(a), lambda).unwrap();
            let s = |t: f64| mr.s(t).unwrap();
            for &t in &[0.1, 0.37, 0.8] {
                let d1 = (-s(t + 2.0 * step) + 8.0 * s(t + step) - 8.0 * s(t - step)
                    + s(t - 2.0 * step))
                    / (12.0 * step);
                let d2 = (-s(t + 2.0 * step) + 16.0 * s(t + step) - 30.0 * s(t)
                    + 16.0 * s(t - step)
                    - s(t - 2.0 * step))
                    / (12.0 * step * step);
                let residual = d2 + a * d1 + lambda * s(t);
                assert!(
                    residual.abs() <= 1e-5 * (1.0 + lambda),
                    "k={k} t={t} residual={residual}"
                );
            }
            // s'(0) = 0 from the one-sided limit
            let d0 = (-3.0 * s(0.0) + 4.0 * s(step) - s(2.0 * step)) / (2.0 * step);
            assert!(d0.abs() < 1e-5 * (1.0 + lambda));
        }
    }

    #[test]
    fn bounded_by_one() {
        for kernel in [riesz(1.25), riesz(1.5), riesz(1.75), expo(2.0), expo(0.5)] {
            for k in 1..=64 {
                let mr = ModeResolvent::new(kernel.clone(), (k * k) as f64 * PI2).unwrap();
                for i in 1..=100 {
                    let v = mr.s(i as f64 / 100.0).unwrap();
                    assert!(v.abs() <= 1.0 + 1e-9, "k={k} t={} s={v}", i as f64 / 100.0);
                }
            }
        }
    }

    #[test]
    fn degenerate_mode_phis() {
        for kernel in [riesz(1.5), expo(1.0)] {
            let mr = ModeResolvent::degenerate(kernel);
            let p = mr.phi_all(0.1, 0.3).unwrap();
            assert_eq!(p, [1.0, 0.5, 1.0 / 6.0]);
            assert!((phi_quadrature(&mr, 1, 0.1, 0.3, 1e-14).unwrap() - 1.0).abs() < 1e-13);
            assert!((phi_quadrature(&mr, 2, 0.1, 0.3, 1e-14).unwrap() - 0.5).abs() < 1e-13);
            assert!((mr.antiderivative(2, 0.3).unwrap() - 0.045).abs() < 1e-15);
        }
    }

    #[test]
    fn phi_agrees_with_quadrature() {
        let cases = [
            (riesz(1.75), PI2, 0.1, 0.3),
            (riesz(1.25), 25.0 * PI2, 0.05, 0.05),
            (expo(2.0), 4.0 * PI2, 0.05, 0.2),
        ];
        for (kernel, lambda, h, t) in cases {
            let mr = ModeResolvent::new(kernel, lambda).unwrap();
            for k in 1..=3 {
                let a = mr.phi(k, h, t).unwrap();
                let b = phi_quadrature(&mr, k, h, t, 1e-13 * a.abs().max(1e-3)).unwrap();
                assert!((a - b).abs() <= 1e-8 * b.abs(), "k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn stabilised_phi_matches_raw_form_where_both_are_accurate() {
        let mr = ModeResolvent::new(riesz(1.5), 4.0 * PI2).unwrap();
        let h = 1.0 / 64.0;
        let t = 40.0 * h;
        let raw = mr.phi_closed_form(1, h, t).unwrap();
        let stable = mr.phi(1, h, t).unwrap();
        assert!((raw - stable).abs() < 1e-11 * stable.abs());
        // phi_3 far from the origin is where the raw form degrades
        let t = 60.0;
        let h = 1.0 / 512.0;
        let q = phi_quadrature(&mr, 3, h, t, 1e-18).unwrap();
        let stable = mr.phi(3, h, t).unwrap();
        assert!((stable - q).abs() < 1e-9 * q.abs());
    }

    #[test]
    fn phi_bounded_by_resolvent_maximum() {
        for kernel in [riesz(1.5), expo(2.0)] {
            for k in [1usize, 4, 16, 64] {
                let mr = ModeResolvent::new(kernel.clone(), (k * k) as f64 * PI2).unwrap();
                let h = 1.0 / 32.0;
                for l in 1..=32 {
                    let t = l as f64 * h;
                    let smax = (0..=50)
                        .map(|i| mr.s(t - h + h * i as f64 / 50.0).unwrap().abs())
                        .fold(0.0, f64::max);
                    let p = mr.phi_all(h, t).unwrap();
                    for (i, v) in p.iter().enumerate() {
                        let fact = [1.0, 2.0, 6.0][i];
                        assert!(v.abs() <= (1.0 + 1e-9) / fact);
                        // sampled max may miss the true max slightly
                        assert!(v.abs() <= (1.0 + 1e-2) * smax / fact + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn classic_phi_branches_agree() {
        for z in [
            Complex64::new(0.9, 0.3),
            Complex64::new(-0.99, 0.0),
            Complex64::new(0.0, 0.999),
        ] {
            let series = phi_classic(z);
            let p0 = z.exp();
            let p1 = (p0 - 1.0) / z;
            let p2 = (p1 - 1.0) / z;
            let p3 = (p2 - 0.5) / z;
            for (a, b) in series.iter().zip([p1, p2, p3]) {
                assert!((a - b).norm() < 1e-13);
            }
        }
    }
}

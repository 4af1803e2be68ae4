//! Brute-force reference solvers for u' + lambda (b * u) = f(t, u) on a fine
//! uniform grid. Meant for tests and fixtures, not for speed.
//!
//! `ProductTrapezoidal` applies the trapezoidal rule to u' and integrates
//! the kernel exactly against the piecewise-linear interpolant of u, which
//! copes with the weak singularity of the Riesz kernel. `ResolventEuler` is
//! exponential Euler on the fine grid.

use crate::error::{Error, Result};
use crate::mlf::rgamma;
use crate::quadrature::GaussLegendre;
use crate::resolvent::{KernelSpec, ModeResolvent, Resolvent};
use crate::solvers::{solve_euler, Forcing, ProblemSpec};
use crate::spectral::SpectralField;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleScheme {
    ProductTrapezoidal,
    ResolventEuler,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    /// Fine steps per coarse step; a power of two, at least 64.
    pub substeps: usize,
    pub scheme: OracleScheme,
    /// Largest accepted difference between the run and the run at half
    /// the resolution.
    pub max_refinement_difference: f64,
}

impl OracleConfig {
    pub fn new(substeps: usize, scheme: OracleScheme) -> Result<Self> {
        if substeps < 64 || !substeps.is_power_of_two() {
            return Err(Error::invalid(format!(
                "substeps must be a power of two >= 64, got {substeps}"
            )));
        }
        Ok(Self {
            substeps,
            scheme,
            max_refinement_difference: 1e-2,
        })
    }

    pub fn with_limit(mut self, limit: f64) -> Self {
        self.max_refinement_difference = limit;
        self
    }
}

/// Values at the coarse times t_m = m T / M, m = 0..=M.
#[derive(Clone, Debug)]
pub struct ScalarOracle {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// max |u_fine - u_half| over the coarse times.
    pub refinement_difference: f64,
}

/// Coarse-time states of a spectral problem.
#[derive(Clone, Debug)]
pub struct FieldOracle {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub refinement_difference: f64,
}

/// Panel moments of the kernel on [p d, (p+1) d]: m0 = int b, and m1 = int b y
/// with y = (p + 1) - r / d the hat function weight of the newer node.
struct Moments {
    m0: Vec<f64>,
    m1: Vec<f64>,
}

impl Moments {
    fn new(kernel: KernelSpec, delta: f64, panels: usize) -> Self {
        let gl = GaussLegendre::new(16);
        let mut m0 = Vec::with_capacity(panels);
        let mut m1 = Vec::with_capacity(panels);
        for p in 0..panels {
            let pf = p as f64;
            match kernel {
                KernelSpec::Riesz { rho } if p < 4 => {
                    // exact moments of r^(rho-2)/Gamma(rho-1)
                    let a = delta.powf(rho - 1.0)
                        * ((pf + 1.0).powf(rho - 1.0) - pf.powf(rho - 1.0))
                        * rgamma(rho);
                    let b = delta.powf(rho - 1.0)
                        * ((pf + 1.0).powf(rho) - pf.powf(rho))
                        * (rho - 1.0)
                        * rgamma(rho + 1.0);
                    m0.push(a);
                    m1.push((pf + 1.0) * a - b);
                }
                _ => {
                    // smooth on the panel: Gauss-Legendre in y
                    let (mut a, mut b) = (0.0, 0.0);
                    for (x, w) in gl.nodes.iter().zip(&gl.weights) {
                        let y = 0.5 * (x + 1.0);
                        let v = 0.5 * w * kernel.kernel(delta * (pf + 1.0 - y));
                        a += v;
                        b += v * y;
                    }
                    m0.push(delta * a);
                    m1.push(delta * b);
                }
            }
        }
        Self { m0, m1 }
    }
}

/// Scalar reference solution with right-hand side f(t, u).
pub fn ode_oracle_scalar<F>(
    kernel: KernelSpec,
    lambda: f64,
    u0: f64,
    f: F,
    config: &OracleConfig,
    horizon: f64,
    coarse_steps: usize,
) -> Result<ScalarOracle>
where
    F: Fn(f64, f64) -> f64,
{
    if coarse_steps == 0 || !(horizon > 0.0) {
        return Err(Error::invalid(
            "oracle needs at least one coarse step and a positive horizon",
        ));
    }
    let run = |sub: usize| -> Result<Vec<f64>> {
        let fine = coarse_steps * sub;
        let path = match config.scheme {
            OracleScheme::ProductTrapezoidal => {
                product_trapezoidal(kernel, lambda, u0, &f, horizon, fine)?
            }
            OracleScheme::ResolventEuler => resolvent_euler(kernel, lambda, u0, &f, horizon, fine)?,
        };
        Ok((0..=coarse_steps).map(|m| path[m * sub]).collect())
    };
    let values = run(config.substeps)?;
    let coarser = run(config.substeps / 2)?;
    let diff = values
        .iter()
        .zip(&coarser)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if !(diff <= config.max_refinement_difference) {
        return Err(Error::OracleNotConverged {
            difference: diff,
            limit: config.max_refinement_difference,
        });
    }
    Ok(ScalarOracle {
        times: (0..=coarse_steps)
            .map(|m| m as f64 * horizon / coarse_steps as f64)
            .collect(),
        values,
        refinement_difference: diff,
    })
}

fn product_trapezoidal<F: Fn(f64, f64) -> f64>(
    kernel: KernelSpec,
    lambda: f64,
    u0: f64,
    f: &F,
    horizon: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    let d = horizon / steps as f64;
    let mo = Moments::new(kernel, d, steps);
    let mut u = Vec::with_capacity(steps + 1);
    u.push(u0);
    // g_n = f(t_n, u_n) - lambda C_n, C_0 = 0
    let mut g_prev = f(0.0, u0);
    for n in 0..steps {
        let t_next = (n + 1) as f64 * d;
        // C_{n+1} without the u_{n+1} term
        let mut conv = 0.0;
        for p in 0..=n {
            let j = n - p;
            conv += u[j] * (mo.m0[p] - mo.m1[p]);
            if p > 0 {
                conv += u[j + 1] * mo.m1[p];
            }
        }
        let denom = 1.0 + 0.5 * d * lambda * mo.m1[0];
        let base = u[n] + 0.5 * d * (g_prev - lambda * conv);
        // fixed point for the implicit forcing term
        let mut next = u[n];
        for _ in 0..100 {
            let cand = (base + 0.5 * d * f(t_next, next)) / denom;
            let done = (cand - next).abs() <= 1e-15 * cand.abs().max(1e-300);
            next = cand;
            if done {
                break;
            }
        }
        if !next.is_finite() {
            return Err(Error::NonFiniteState {
                context: "oracle",
                step: n + 1,
            });
        }
        g_prev = f(t_next, next) - lambda * (conv + mo.m1[0] * next);
        u.push(next);
    }
    Ok(u)
}

fn resolvent_euler<F: Fn(f64, f64) -> f64>(
    kernel: KernelSpec,
    lambda: f64,
    u0: f64,
    f: &F,
    horizon: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    let family = Resolvent::new(kernel)?;
    let mr = if lambda == 0.0 {
        ModeResolvent::degenerate(family)
    } else {
        ModeResolvent::new(family, lambda)?
    };
    let d = horizon / steps as f64;
    let phi1 = (1..=steps)
        .map(|l| mr.phi(1, d, l as f64 * d))
        .collect::<Result<Vec<_>>>()?;
    let mut u = vec![u0];
    let mut g = Vec::with_capacity(steps);
    for m in 1..=steps {
        g.push(f((m - 1) as f64 * d, u[m - 1]));
        let hist: f64 = (0..m).map(|j| phi1[m - j - 1] * g[j]).sum();
        let v = mr.s(m as f64 * d)? * u0 + d * hist;
        if !v.is_finite() {
            return Err(Error::NonFiniteState {
                context: "oracle",
                step: m,
            });
        }
        u.push(v);
    }
    Ok(u)
}

/// Reference solution of a spectral problem at the coarse times.
///
/// Linear problems are solved mode by mode with the scalar oracle. For
/// semilinear problems `ResolventEuler` runs exponential Euler on the fine
/// grid, and `ProductTrapezoidal` couples the modes through the
/// nonlinearity in each implicit step.
pub fn ode_oracle(
    problem: &ProblemSpec,
    config: &OracleConfig,
    coarse_steps: usize,
) -> Result<FieldOracle> {
    if coarse_steps == 0 {
        return Err(Error::invalid("oracle needs at least one coarse step"));
    }
    let n = problem.n_modes();
    let lambdas = problem.eigenvalues();
    let times: Vec<f64> = (0..=coarse_steps)
        .map(|m| m as f64 * problem.horizon / coarse_steps as f64)
        .collect();
    match &problem.forcing {
        Forcing::Zero | Forcing::Time(_) => {
            let mut states = vec![SpectralField::zeros(n); coarse_steps + 1];
            let mut worst: f64 = 0.0;
            // cache the forcing on the finest grid used
            let fine = coarse_steps * config.substeps;
            let d = problem.horizon / fine as f64;
            let table: Option<Vec<SpectralField>> = match &problem.forcing {
                Forcing::Time(g) => Some((0..=fine).map(|i| g(i as f64 * d)).collect()),
                _ => None,
            };
            for (k, &lambda) in lambdas.iter().enumerate().take(n) {
                let rhs = |t: f64, _u: f64| -> f64 {
                    match &table {
                        None => 0.0,
                        Some(tab) => {
                            // fine and half-fine times both fall on the table
                            let i = (t / d).round() as usize;
                            tab[i.min(fine)].coeffs[k]
                        }
                    }
                };
                let sol = ode_oracle_scalar(
                    problem.kernel,
                    lambda,
                    problem.u0.coeffs[k],
                    rhs,
                    config,
                    problem.horizon,
                    coarse_steps,
                )?;
                worst = worst.max(sol.refinement_difference);
                for (m, v) in sol.values.into_iter().enumerate() {
                    states[m].coeffs[k] = v;
                }
            }
            Ok(FieldOracle {
                times,
                states,
                refinement_difference: worst,
            })
        }
        Forcing::Semilinear(_) => {
            let run = |sub: usize| -> Result<Vec<SpectralField>> {
                let fine = coarse_steps * sub;
                let path = match config.scheme {
                    OracleScheme::ResolventEuler => solve_euler(problem, fine)?.states,
                    OracleScheme::ProductTrapezoidal => field_product_trapezoidal(problem, fine)?,
                };
                Ok((0..=coarse_steps).map(|m| path[m * sub].clone()).collect())
            };
            let states = run(config.substeps)?;
            let coarser = run(config.substeps / 2)?;
            let diff = states
                .iter()
                .zip(&coarser)
                .map(|(a, b)| a.distance(b))
                .fold(0.0, f64::max);
            if !(diff <= config.max_refinement_difference) {
                return Err(Error::OracleNotConverged {
                    difference: diff,
                    limit: config.max_refinement_difference,
                });
            }
            Ok(FieldOracle {
                times,
                states,
                refinement_difference: diff,
            })
        }
    }
}

fn field_product_trapezoidal(problem: &ProblemSpec, steps: usize) -> Result<Vec<SpectralField>> {
    let Forcing::Semilinear(f) = &problem.forcing else {
        unreachable!()
    };
    let n = problem.n_modes();
    let lambdas = problem.eigenvalues();
    let d = problem.horizon / steps as f64;
    let mo = Moments::new(problem.kernel, d, steps);
    let rhs = |t: f64, u: &SpectralField, step: usize| -> Result<SpectralField> {
        problem
            .space
            .apply_nonlinearity(u, |t, x, u| f(t, x, u), t)
            .map_err(|_| Error::NonFiniteState {
                context: "oracle",
                step,
            })
    };
    let mut u = vec![problem.u0.clone()];
    let mut g_prev = rhs(0.0, &problem.u0, 0)?;
    for n_step in 0..steps {
        let t_next = (n_step + 1) as f64 * d;
        let mut base = vec![0.0; n];
        let mut conv = vec![0.0; n];
        for k in 0..n {
            let mut c = 0.0;
            for p in 0..=n_step {
                let j = n_step - p;
                c += u[j].coeffs[k] * (mo.m0[p] - mo.m1[p]);
                if p > 0 {
                    c += u[j + 1].coeffs[k] * mo.m1[p];
                }
            }
            conv[k] = c;
            base[k] = u[n_step].coeffs[k] + 0.5 * d * (g_prev.coeffs[k] - lambdas[k] * c);
        }
        let mut next = u[n_step].clone();
        for _ in 0..100 {
            let fx = rhs(t_next, &next, n_step + 1)?;
            let cand = SpectralField::new(
                (0..n)
                    .map(|k| {
                        (base[k] + 0.5 * d * fx.coeffs[k]) / (1.0 + 0.5 * d * lambdas[k] * mo.m1[0])
                    })
                    .collect(),
            );
            let change = cand.distance(&next);
            next = cand;
            if change <= 1e-15 * next.norm().max(1e-300) {
                break;
            }
        }
        if !next.is_finite() {
            return Err(Error::NonFiniteState {
                context: "oracle",
                step: n_step + 1,
            });
        }
        let fx = rhs(t_next, &next, n_step + 1)?;
        g_prev = SpectralField::new(
            (0..n)
                .map(|k| fx.coeffs[k] - lambdas[k] * (conv[k] + mo.m1[0] * next.coeffs[k]))
                .collect(),
        );
        u.push(next);
    }
    Ok(u)
}

/// Residual of s'(t) + lambda int_0^t b(t - r) s(r) dr at t, with the
/// derivative taken by central differences of step `step` and the
/// convolution by product integration on `panels` panels.
pub fn integro_residual(mr: &ModeResolvent, t: f64, step: f64, panels: usize) -> Result<f64> {
    let d = t / panels as f64;
    let mo = Moments::new(mr.spec(), d, panels);
    let mut conv = 0.0;
    for p in 0..panels {
        let j = panels - p - 1;
        conv += mr.s(j as f64 * d)? * (mo.m0[p] - mo.m1[p]) + mr.s((j + 1) as f64 * d)? * mo.m1[p];
    }
    let ds = (mr.s(t + step)? - mr.s(t - step)?) / (2.0 * step);
    Ok(ds + mr.lambda() * conv)
}

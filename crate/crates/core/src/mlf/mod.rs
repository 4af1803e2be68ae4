//! Two-parameter Mittag-Leffler function E_{alpha,beta}(x) on the real line.
//!
//! E_{alpha,beta}(x) = sum_{n>=0} x^n / Gamma(alpha n + beta).
//!
//! Evaluation is split by the scale `T = |x|^(1/alpha)`, which controls both
//! the cancellation in the Taylor series (about `e^T`) and the truncation
//! error of the large-argument expansion (about `e^-T`):
//!
//! * `|x| <= x_switch` and `T <= 5`: compensated Taylor series in f64.
//! * `T < t_asym` on the negative axis: Taylor series evaluated by Horner's
//!   rule in double-double arithmetic, with coefficients rounded from
//!   192-bit MPFR values.
//! * otherwise, on the negative axis: the algebraic expansion
//!   `-sum_n x^-n / Gamma(beta - alpha n)` plus the residue terms
//!   `(1/alpha) zeta^(1-beta) exp(zeta)` at the roots `zeta^alpha = x` that lie in
//!   the principal sheet. For 1 < alpha < 2 these oscillating terms decay
//!   only like `exp(T cos(pi/alpha))` and cannot be dropped.
//! * positive x: compensated series (all terms positive).

mod dd;
pub mod gamma;
pub mod oracle;

use std::f64::consts::PI;
use std::sync::OnceLock;

use dd::DoubleDouble;
pub use gamma::{gamma, ln_gamma, rgamma, sin_pi};
pub use oracle::{mlf_oracle, mlf_oracle_with_cap, MlfOracle};

use crate::error::{Error, Result};

/// Default |x| bound for the plain f64 series.
pub const DEFAULT_X_SWITCH: f64 = 5.0;
/// Default `|x|^(1/alpha)` beyond which the large-argument expansion is used.
pub const DEFAULT_T_ASYM: f64 = 33.0;

const SMALL_T: f64 = 5.0;
const F64_TERM_CAP: usize = 10_000;
const ASYM_TABLE_LEN: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MlfParams {
    pub alpha: f64,
    pub beta: f64,
}

impl MlfParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::invalid(format!(
                "alpha must lie in (0, 2], got {alpha}"
            )));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { alpha, beta })
    }
}

struct MidRange {
    radius: f64,
    coeffs: Vec<DoubleDouble>,
}

/// Evaluator for one (alpha, beta) pair. Coefficient tables are built on
/// first use and are read-only afterwards, so one instance can be shared
/// between threads.
pub struct MittagLeffler {
    params: MlfParams,
    x_switch: f64,
    t_asym: f64,
    rgamma0: f64,
    asym: Vec<f64>,
    mid: OnceLock<MidRange>,
}

impl MittagLeffler {
    pub fn new(params: MlfParams) -> Self {
        Self::with_thresholds(params, DEFAULT_X_SWITCH, DEFAULT_T_ASYM)
    }

    pub fn with_thresholds(params: MlfParams, x_switch: f64, t_asym: f64) -> Self {
        let asym = (1..=ASYM_TABLE_LEN)
            .map(|n| {
                let arg = params.beta - params.alpha * n as f64;
                if 1.0 - arg > 170.0 {
                    f64::NAN
                } else {
                    rgamma(arg)
                }
            })
            .collect();
        Self {
            params,
            x_switch,
            t_asym,
            rgamma0: rgamma(params.beta),
            asym,
            mid: OnceLock::new(),
        }
    }

    pub fn params(&self) -> MlfParams {
        self.params
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFiniteArgument(x));
        }
        if x == 0.0 {
            return Ok(self.rgamma0);
        }
        if x > 0.0 {
            return self.series_positive(x);
        }
        let t = (-x).powf(1.0 / self.params.alpha);
        if -x <= self.x_switch && t <= SMALL_T {
            self.series_f64(x)
        } else if t < self.t_asym {
            Ok(self.series_dd(x))
        } else {
            Ok(self.asymptotic(x))
        }
    }

    fn series_f64(&self, x: f64) -> Result<f64> {
        let MlfParams { alpha, beta } = self.params;
        let mut sum = 0.0;
        let mut comp = 0.0;
        let mut power = 1.0;
        let mut max_term: f64 = 0.0;
        let mut prev = f64::INFINITY;
        for n in 0..F64_TERM_CAP {
            let term = power * rgamma(alpha * n as f64 + beta);
            // Kahan
            let y = term - comp;
            let s = sum + y;
            comp = (s - sum) - y;
            sum = s;
            let a = term.abs();
            max_term = max_term.max(a);
            if a <= 1e-18 * max_term && a <= prev && n > 0 {
                return Ok(sum);
            }
            prev = a;
            power *= x;
        }
        Err(Error::SeriesNotConverged {
            terms: F64_TERM_CAP,
        })
    }

    fn series_positive(&self, x: f64) -> Result<f64> {
        let MlfParams { alpha, beta } = self.params;
        let ln_x = x.ln();
        let mut sum = 0.0;
        let mut comp = 0.0;
        let mut prev = f64::INFINITY;
        for n in 0..F64_TERM_CAP {
            let arg = alpha * n as f64 + beta;
            let term = if n == 0 {
                self.rgamma0
            } else {
                (n as f64 * ln_x - ln_gamma(arg)).exp()
            };
            let y = term - comp;
            let s = sum + y;
            comp = (s - sum) - y;
            sum = s;
            if !sum.is_finite() {
                return Err(Error::OutOfDomain {
                    x,
                    reason: "E_{alpha,beta}(x) overflows double precision",
                });
            }
            if term <= 1e-17 * sum && term <= prev {
                return Ok(sum);
            }
            prev = term;
        }
        Err(Error::SeriesNotConverged {
            terms: F64_TERM_CAP,
        })
    }

    fn mid_range(&self) -> &MidRange {
        self.mid.get_or_init(|| {
            let radius = self.t_asym.powf(self.params.alpha);
            let table = oracle::scaled_rgamma_table(self.params, radius, 1e-40, 100_000);
            MidRange {
                radius,
                coeffs: table
                    .into_iter()
                    .map(|(hi, lo)| DoubleDouble::new(hi, lo))
                    .collect(),
            }
        })
    }

    fn series_dd(&self, x: f64) -> f64 {
        let mid = self.mid_range();
        let y = x / mid.radius;
        let mut acc = DoubleDouble::ZERO;
        for c in mid.coeffs.iter().rev() {
            acc = acc.mul_f64(y) + *c;
        }
        acc.to_f64()
    }

    fn asymptotic(&self, x: f64) -> f64 {
        let MlfParams { alpha, beta } = self.params;
        let r = -x;
        let t = r.powf(1.0 / alpha);

        // algebraic part, truncated near the smallest term (n ~ T / alpha)
        let n_opt = ((t / alpha).floor() as usize).clamp(1, self.asym.len());
        let inv = 1.0 / x;
        let mut power = 1.0;
        let mut sum = 0.0;
        for &c in &self.asym[..n_opt] {
            power *= inv;
            if c.is_nan() {
                break;
            }
            if c == 0.0 {
                continue;
            }
            let term = power * c;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        let algebraic = -sum;

        // residues at zeta = T exp(i theta), theta = +-pi/alpha
        let theta = PI / alpha;
        let weight = if (theta - PI).abs() < 1e-12 {
            0.5
        } else if theta < PI {
            1.0
        } else {
            0.0
        };
        let mut oscillatory = 0.0;
        if weight > 0.0 {
            let decay = t * theta.cos();
            if decay > -745.0 {
                let phase = (1.0 - beta) * theta + t * theta.sin();
                // the conjugate root contributes the complex conjugate
                oscillatory = 2.0 * weight / alpha * t.powf(1.0 - beta) * decay.exp() * phase.cos();
            }
        }
        algebraic + oscillatory
    }
}

/// E_{alpha,beta}(x). Builds a fresh evaluator; prefer [`MittagLeffler`] for
/// repeated evaluation with the same parameters.
pub fn mlf(params: MlfParams, x: f64) -> Result<f64> {
    MittagLeffler::new(params).eval(x)
}

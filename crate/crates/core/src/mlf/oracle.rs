//! Extended-precision reference values of E_{alpha,beta}(x) by direct Taylor
//! summation. Test and fixture infrastructure; not tuned for speed.

use rug::ops::Pow;
use rug::Float;

use super::MlfParams;
use crate::error::{Error, Result};

/// Largest |x| accepted by the oracle.
pub const ORACLE_MAX_ABS_X: f64 = 100.0;
/// Default cap on the number of series terms.
pub const DEFAULT_TERM_CAP: usize = 20_000;

/// Series oracle with reciprocal Gamma values cached for one (alpha, beta)
/// pair, so that sweeps over many arguments do not recompute them.
pub struct MlfOracle {
    params: MlfParams,
    digits: u32,
    prec: u32,
    x_max: f64,
    term_cap: usize,
    rgammas: Vec<Float>,
    threshold: Float,
}

impl MlfOracle {
    /// Oracle valid for |x| <= x_max, stopping once terms drop below 10^-digits.
    pub fn new(params: MlfParams, digits: u32, x_max: f64) -> Result<Self> {
        Self::with_term_cap(params, digits, x_max, DEFAULT_TERM_CAP)
    }

    pub fn with_term_cap(
        params: MlfParams,
        digits: u32,
        x_max: f64,
        term_cap: usize,
    ) -> Result<Self> {
        if digits < 50 {
            return Err(Error::invalid(format!(
                "oracle needs at least 50 digits, got {digits}"
            )));
        }
        if !x_max.is_finite() || x_max.abs() > ORACLE_MAX_ABS_X {
            return Err(Error::OutOfDomain {
                x: x_max,
                reason: "oracle supports |x| <= 100",
            });
        }
        let x_max = x_max.abs();
        // sum of |terms| is about E_{alpha,beta}(|x|) ~ exp(|x|^(1/alpha)); that many
        // extra digits are lost to cancellation on the negative axis
        let growth_digits = x_max.powf(1.0 / params.alpha) / std::f64::consts::LN_10;
        let total_digits = f64::from(digits) + growth_digits + 20.0;
        let prec = (total_digits * std::f64::consts::LOG2_10).ceil() as u32;
        let threshold = Float::with_val(prec, 10).pow(-(digits as i32));
        Ok(Self {
            params,
            digits,
            prec,
            x_max,
            term_cap,
            rgammas: Vec::new(),
            threshold,
        })
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn precision_bits(&self) -> u32 {
        self.prec
    }

    fn rgamma(&mut self, n: usize) -> &Float {
        while self.rgammas.len() <= n {
            let k = self.rgammas.len();
            let arg = Float::with_val(self.prec, self.params.alpha) * k as u32 + self.params.beta;
            let g = arg.gamma();
            self.rgammas.push(g.recip());
        }
        &self.rgammas[n]
    }

    /// E_{alpha,beta}(x) in extended precision, rounded to nearest f64.
    pub fn eval(&mut self, x: f64) -> Result<f64> {
        self.eval_float(x).map(|v| v.to_f64())
    }

    /// Full-precision value.
    pub fn eval_float(&mut self, x: f64) -> Result<Float> {
        if !x.is_finite() {
            return Err(Error::NonFiniteArgument(x));
        }
        if x.abs() > self.x_max {
            return Err(Error::OutOfDomain {
                x,
                reason: "argument exceeds the oracle's configured range",
            });
        }
        let prec = self.prec;
        let xf = Float::with_val(prec, x);
        let mut power = Float::with_val(prec, 1);
        let mut sum = Float::with_val(prec, 0);
        let mut prev_abs = Float::with_val(prec, f64::INFINITY);
        for n in 0..self.term_cap {
            let term = Float::with_val(prec, &power * self.rgamma(n));
            let abs = Float::with_val(prec, term.abs_ref());
            sum += &term;
            // stop on the decreasing tail only
            if abs < self.threshold && abs <= prev_abs {
                return Ok(sum);
            }
            prev_abs = abs;
            power *= &xf;
        }
        Err(Error::SeriesNotConverged {
            terms: self.term_cap,
        })
    }
}

/// One-off oracle evaluation of E_{alpha,beta}(x) at the given number of digits.
pub fn mlf_oracle(params: MlfParams, x: f64, digits: u32) -> Result<f64> {
    MlfOracle::new(params, digits, x.abs())?.eval(x)
}

/// Same as [`mlf_oracle`] with an explicit term cap.
pub fn mlf_oracle_with_cap(params: MlfParams, x: f64, digits: u32, term_cap: usize) -> Result<f64> {
    MlfOracle::with_term_cap(params, digits, x.abs(), term_cap)?.eval(x)
}

/// Reciprocal Gamma values `radius^n / Gamma(alpha n + beta)` split into
/// double-double pairs, for the mid-range evaluator.
pub(crate) fn scaled_rgamma_table(
    params: MlfParams,
    radius: f64,
    floor: f64,
    max_len: usize,
) -> Vec<(f64, f64)> {
    let prec = 192;
    let mut out = Vec::new();
    let mut peaked = false;
    let mut prev = f64::INFINITY;
    for n in 0..max_len {
        let arg = Float::with_val(prec, params.alpha) * n as u32 + params.beta;
        let ln_g = arg.ln_gamma();
        let ln_r = Float::with_val(prec, radius).ln() * n as u32;
        let v = (ln_r - ln_g).exp();
        let hi = v.to_f64();
        let lo = Float::with_val(prec, &v - hi).to_f64();
        out.push((hi, lo));
        if hi < prev {
            peaked = true;
        }
        prev = hi;
        if peaked && hi < floor {
            break;
        }
    }
    out
}

//! Sine-basis Galerkin space for A = -d^2/dx^2 on (0, 1) with homogeneous
//! Dirichlet conditions: psi_k(x) = sqrt(2) sin(k pi x), lambda_k = k^2 pi^2.
//!
//! Coefficients are moved to and from the uniform interior grid
//! x_j = j / (G + 1), j = 1..G, with the type-I discrete sine transform.
//! The transform is a direct O(N G) sum over a sine table of length 2(G+1).

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct SpectralSpace {
    n_modes: usize,
    n_grid: usize,
    // sin(pi q / (G + 1)) for q = 0..2(G+1)
    table: Vec<f64>,
}

impl SpectralSpace {
    pub fn new(n_modes: usize, n_grid: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::invalid("need at least one mode"));
        }
        if n_grid < 2 * n_modes + 1 {
            return Err(Error::invalid(format!(
                "grid of {n_grid} points is too coarse for {n_modes} modes (need >= {})",
                2 * n_modes + 1
            )));
        }
        let period = 2 * (n_grid + 1);
        let table = (0..period)
            .map(|q| sin_pi_rational(q, n_grid + 1))
            .collect();
        Ok(Self {
            n_modes,
            n_grid,
            table,
        })
    }

    /// Space with the default 4N collocation points.
    pub fn with_modes(n_modes: usize) -> Result<Self> {
        Self::new(n_modes, 4 * n_modes.max(1))
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    /// lambda_k for k = 1..
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let k = k as f64;
        k * k * PI * PI
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        (1..=self.n_modes).map(|k| self.eigenvalue(k)).collect()
    }

    pub fn grid(&self) -> Vec<f64> {
        let d = (self.n_grid + 1) as f64;
        (1..=self.n_grid).map(|j| j as f64 / d).collect()
    }

    #[inline]
    fn sin_kj(&self, k: usize, j: usize) -> f64 {
        self.table[(k * j) % self.table.len()]
    }

    /// Grid samples to coefficients: a_k = sqrt(2)/(G+1) sum_j v_j sin(k pi x_j).
    pub fn project(&self, samples: &[f64]) -> Result<SpectralField> {
        if samples.len() != self.n_grid {
            return Err(Error::ShapeMismatch {
                expected: self.n_grid,
                actual: samples.len(),
            });
        }
        let scale = SQRT_2 / (self.n_grid + 1) as f64;
        let mut coeffs = vec![0.0; self.n_modes];
        for (k0, c) in coeffs.iter_mut().enumerate() {
            let k = k0 + 1;
            let mut acc = 0.0;
            for (j0, v) in samples.iter().enumerate() {
                acc += v * self.sin_kj(k, j0 + 1);
            }
            *c = scale * acc;
        }
        Ok(SpectralField { coeffs })
    }

    /// Coefficients to grid values: v_j = sum_k a_k sqrt(2) sin(k pi x_j).
    pub fn synthesize(&self, field: &SpectralField) -> Result<Vec<f64>> {
        self.check(field)?;
        let mut out = vec![0.0; self.n_grid];
        for (j0, v) in out.iter_mut().enumerate() {
            let j = j0 + 1;
            let mut acc = 0.0;
            for (k0, a) in field.coeffs.iter().enumerate() {
                acc += a * self.sin_kj(k0 + 1, j);
            }
            *v = SQRT_2 * acc;
        }
        Ok(out)
    }

    /// P_N f(t, x, u) in coefficients: synthesize, apply f on the grid, project.
    pub fn apply_nonlinearity<F>(
        &self,
        field: &SpectralField,
        f: F,
        t: f64,
    ) -> Result<SpectralField>
    where
        F: Fn(f64, f64, f64) -> f64,
    {
        let values = self.synthesize(field)?;
        let d = (self.n_grid + 1) as f64;
        let mapped: Vec<f64> = values
            .iter()
            .enumerate()
            .map(|(j0, &u)| f(t, (j0 + 1) as f64 / d, u))
            .collect();
        if let Some(bad) = mapped.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState {
                context: "nonlinearity",
                step: bad,
            });
        }
        self.project(&mapped)
    }

    /// lambda_{N+1}^(-nu), the norm of A^(-nu)(I - P_N).
    pub fn tail_bound_check(&self, nu: f64) -> f64 {
        self.eigenvalue(self.n_modes + 1).powf(-nu)
    }

    /// Samples of a function on the interior grid.
    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.grid().into_iter().map(f).collect()
    }

    fn check(&self, field: &SpectralField) -> Result<()> {
        if field.coeffs.len() != self.n_modes {
            return Err(Error::ShapeMismatch {
                expected: self.n_modes,
                actual: field.coeffs.len(),
            });
        }
        Ok(())
    }
}

// sin(pi q / d) with the argument folded into [0, pi/2]
fn sin_pi_rational(q: usize, d: usize) -> f64 {
    let period = 2 * d;
    let q = q % period;
    let (q, sign) = if q >= d { (q - d, -1.0) } else { (q, 1.0) };
    let q = if 2 * q > d { d - q } else { q };
    sign * (PI * q as f64 / d as f64).sin()
}

/// Coordinates with respect to psi_1..psi_N.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    pub coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            coeffs: vec![0.0; n],
        }
    }

    /// e_k (1-based).
    pub fn unit(n: usize, k: usize) -> Self {
        let mut f = Self::zeros(n);
        f.coeffs[k - 1] = 1.0;
        f
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// L2 norm (Parseval).
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// ||A^nu v|| = (sum lambda_k^(2 nu) c_k^2)^(1/2).
    pub fn v_norm(&self, nu: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k0, c)| {
                let k = (k0 + 1) as f64;
                (k * k * PI * PI).powf(2.0 * nu) * c * c
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (y, x) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *y += a * x;
        }
    }
}

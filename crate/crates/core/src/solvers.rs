//! Time stepping on the spectral space: exponential quadrature for linear
//! problems, exponential Euler and the two-stage explicit method for
//! semilinear ones.
//!
//! The resolvent has no semigroup property, so every step sums over the
//! whole history with weights depending on the elapsed time. This costs
//! O(M^2 N) per run and is done directly.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::resolvent::{KernelSpec, ModeResolvent, Resolvent};
use crate::spectral::{SpectralField, SpectralSpace};
use crate::tableau::{check_c2, LinearQuadratureRule, WeightTable};

pub type TimeForcing = Arc<dyn Fn(f64) -> SpectralField + Send + Sync>;
pub type PointwiseMap = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Right-hand side of the evolution equation.
#[derive(Clone)]
pub enum Forcing {
    /// f = 0.
    Zero,
    /// f(t), given directly in coefficients (linear problems).
    Time(TimeForcing),
    /// f(t, x, u) applied pointwise on the collocation grid.
    Semilinear(PointwiseMap),
}

impl Forcing {
    pub fn time<F: Fn(f64) -> SpectralField + Send + Sync + 'static>(f: F) -> Self {
        Self::Time(Arc::new(f))
    }

    pub fn semilinear<F: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Self::Semilinear(Arc::new(f))
    }
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Time(_) => write!(f, "Time(..)"),
            Self::Semilinear(_) => write!(f, "Semilinear(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub kernel: KernelSpec,
    pub space: SpectralSpace,
    pub u0: SpectralField,
    pub forcing: Forcing,
    pub horizon: f64,
    eigenvalues: Option<Vec<f64>>,
}

impl ProblemSpec {
    pub fn new(
        kernel: KernelSpec,
        space: SpectralSpace,
        u0: SpectralField,
        forcing: Forcing,
        horizon: f64,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if u0.len() != space.n_modes() {
            return Err(Error::ShapeMismatch {
                expected: space.n_modes(),
                actual: u0.len(),
            });
        }
        Ok(Self {
            kernel,
            space,
            u0,
            forcing,
            horizon,
            eigenvalues: None,
        })
    }

    /// Replaces lambda_k by the given values; zero selects the degenerate
    /// resolvent s = 1. Test use only.
    pub fn with_eigenvalues(mut self, lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.len() != self.space.n_modes() {
            return Err(Error::ShapeMismatch {
                expected: self.space.n_modes(),
                actual: lambdas.len(),
            });
        }
        if lambdas.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::invalid("eigenvalues must be nonnegative"));
        }
        self.eigenvalues = Some(lambdas);
        Ok(self)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues
            .clone()
            .unwrap_or_else(|| self.space.eigenvalues())
    }

    pub fn mode_resolvents(&self) -> Result<Vec<ModeResolvent>> {
        let kernel = Resolvent::new(self.kernel)?;
        self.eigenvalues()
            .into_iter()
            .map(|l| {
                if l == 0.0 {
                    Ok(ModeResolvent::degenerate(kernel.clone()))
                } else {
                    ModeResolvent::new(kernel.clone(), l)
                }
            })
            .collect()
    }

    pub fn n_modes(&self) -> usize {
        self.space.n_modes()
    }
}

/// Built-in problems of the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    /// u0 = sin(pi x)/sqrt(2), f(u) = sin(u).
    Sine,
    /// u0 = sin(pi x)/sqrt(2), f = 0.
    Zero,
    /// u0 = sin(pi x)/sqrt(2), f(t) = psi_1.
    LinearConst,
}

impl std::str::FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("builtin:").unwrap_or(s) {
            "sine" => Ok(Self::Sine),
            "zero" => Ok(Self::Zero),
            "linear-const" => Ok(Self::LinearConst),
            other => Err(Error::Parse(format!("unknown problem '{other}'"))),
        }
    }
}

impl Builtin {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sine => "builtin:sine",
            Self::Zero => "builtin:zero",
            Self::LinearConst => "builtin:linear-const",
        }
    }

    pub fn build(
        &self,
        kernel: KernelSpec,
        space: SpectralSpace,
        horizon: f64,
    ) -> Result<ProblemSpec> {
        let n = space.n_modes();
        let u0 = space.project(&space.sample(|x| (PI * x).sin() / SQRT_2))?;
        let forcing = match self {
            Self::Sine => Forcing::semilinear(|_, _, u: f64| u.sin()),
            Self::Zero => Forcing::Zero,
            Self::LinearConst => Forcing::time(move |_| SpectralField::unit(n, 1)),
        };
        ProblemSpec::new(kernel, space, u0, forcing, horizon)
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    /// Stage values P_N f(t_j + c_i h, U_{j,i}) for j = 0..M-1.
    pub stage_history: Vec<Vec<SpectralField>>,
}

impl Trajectory {
    pub fn terminal(&self) -> &SpectralField {
        self.states
            .last()
            .expect("trajectory holds at least the initial state")
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }
}

// Weights laid out as data[((l - 1) * stages + i) * n + k] so the inner
// loop over modes is contiguous.
struct FlatWeights {
    n: usize,
    stages: usize,
    data: Vec<f64>,
}

impl FlatWeights {
    fn new(tables: &[Vec<Vec<f64>>], stages: usize) -> Self {
        let n = tables.len();
        let steps = tables.first().map_or(0, Vec::len);
        let mut data = vec![0.0; steps * stages * n];
        for (k, tab) in tables.iter().enumerate() {
            for (l0, row) in tab.iter().enumerate() {
                for (i, b) in row.iter().enumerate() {
                    data[(l0 * stages + i) * n + k] = *b;
                }
            }
        }
        Self { n, stages, data }
    }

    #[inline]
    fn get(&self, l: usize, i: usize) -> &[f64] {
        let start = ((l - 1) * self.stages + i) * self.n;
        &self.data[start..start + self.n]
    }
}

fn resolvent_values(modes: &[ModeResolvent], t: f64) -> Result<Vec<f64>> {
    modes.iter().map(|m| m.s(t)).collect()
}

fn homogeneous(modes: &[ModeResolvent], u0: &SpectralField, t: f64) -> Result<Vec<f64>> {
    let s = resolvent_values(modes, t)?;
    Ok(s.iter().zip(&u0.coeffs).map(|(s, u)| s * u).collect())
}

// acc += h * sum_{j < m} sum_i w(m - j, i) * g[j][i]
fn add_history(acc: &mut [f64], h: f64, w: &FlatWeights, history: &[Vec<SpectralField>], m: usize) {
    let mut sum = vec![0.0; acc.len()];
    for (j, stages) in history.iter().enumerate().take(m) {
        for (i, g) in stages.iter().enumerate() {
            let wk = w.get(m - j, i);
            for ((s, b), v) in sum.iter_mut().zip(wk).zip(&g.coeffs) {
                *s += b * v;
            }
        }
    }
    for (a, s) in acc.iter_mut().zip(sum) {
        *a += h * s;
    }
}

fn check_state(u: &[f64], step: usize) -> Result<()> {
    if u.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteState {
            context: "solution",
            step,
        })
    }
}

fn check_steps(problem: &ProblemSpec, steps: usize) -> Result<f64> {
    if steps == 0 {
        return Ok(problem.horizon);
    }
    Ok(problem.horizon / steps as f64)
}

fn eval_forcing(
    problem: &ProblemSpec,
    t: f64,
    u: &SpectralField,
    step: usize,
) -> Result<SpectralField> {
    let n = problem.n_modes();
    let g = match &problem.forcing {
        Forcing::Zero => SpectralField::zeros(n),
        Forcing::Time(f) => f(t),
        Forcing::Semilinear(f) => problem
            .space
            .apply_nonlinearity(u, |t, x, u| f(t, x, u), t)
            .map_err(|e| match e {
                Error::NonFiniteState { .. } => Error::NonFiniteState {
                    context: "nonlinearity",
                    step,
                },
                other => other,
            })?,
    };
    if g.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            actual: g.len(),
        });
    }
    if !g.is_finite() {
        return Err(Error::NonFiniteState {
            context: "forcing",
            step,
        });
    }
    Ok(g)
}

fn initial_trajectory(problem: &ProblemSpec, steps: usize, h: f64) -> Trajectory {
    Trajectory {
        times: (0..=steps).map(|m| m as f64 * h).collect(),
        states: vec![problem.u0.clone()],
        stage_history: Vec::with_capacity(steps),
    }
}

/// Exponential quadrature for a linear problem (f depends on t only).
pub fn solve_linear(
    problem: &ProblemSpec,
    rule: &LinearQuadratureRule,
    steps: usize,
) -> Result<Trajectory> {
    if matches!(problem.forcing, Forcing::Semilinear(_)) {
        return Err(Error::invalid(
            "the quadrature rules need a forcing that depends on t only",
        ));
    }
    let h = check_steps(problem, steps)?;
    let mut traj = initial_trajectory(problem, steps, h);
    if steps == 0 {
        return Ok(traj);
    }
    let modes = problem.mode_resolvents()?;
    let tables = modes
        .iter()
        .map(|m| WeightTable::linear(rule, m, h, steps).map(|t| t.b))
        .collect::<Result<Vec<_>>>()?;
    let w = FlatWeights::new(&tables, rule.stages());
    for j in 0..steps {
        let t = j as f64 * h;
        let stages = rule
            .nodes()
            .iter()
            .map(|c| eval_forcing(problem, t + c * h, &problem.u0, j))
            .collect::<Result<Vec<_>>>()?;
        traj.stage_history.push(stages);
    }
    for m in 1..=steps {
        let mut u = homogeneous(&modes, &problem.u0, m as f64 * h)?;
        add_history(&mut u, h, &w, &traj.stage_history, m);
        check_state(&u, m)?;
        traj.states.push(SpectralField::new(u));
    }
    Ok(traj)
}

/// Exponential Euler: U_m = S(t_m) u0 + h sum_j phi_1(t_{m-j}) P_N f(t_j, U_j).
pub fn solve_euler(problem: &ProblemSpec, steps: usize) -> Result<Trajectory> {
    let h = check_steps(problem, steps)?;
    let mut traj = initial_trajectory(problem, steps, h);
    if steps == 0 {
        return Ok(traj);
    }
    let modes = problem.mode_resolvents()?;
    let rule = LinearQuadratureRule::standard(1)?;
    let tables = modes
        .iter()
        .map(|m| WeightTable::linear(&rule, m, h, steps).map(|t| t.b))
        .collect::<Result<Vec<_>>>()?;
    let w = FlatWeights::new(&tables, 1);
    for m in 1..=steps {
        let prev = traj.states.last().expect("non-empty");
        let g = eval_forcing(problem, (m - 1) as f64 * h, prev, m - 1)?;
        traj.stage_history.push(vec![g]);
        let mut u = homogeneous(&modes, &problem.u0, m as f64 * h)?;
        add_history(&mut u, h, &w, &traj.stage_history, m);
        check_state(&u, m)?;
        traj.states.push(SpectralField::new(u));
    }
    Ok(traj)
}

/// Two-stage explicit exponential Runge-Kutta method with nodes (0, c2).
///
/// For m = 1 the history sum in the internal stage is empty, so U_{0,2} is
/// built from u0 and the a_21 term alone.
pub fn solve_erk2(problem: &ProblemSpec, steps: usize, c2: f64) -> Result<Trajectory> {
    check_c2(c2)?;
    let h = check_steps(problem, steps)?;
    let mut traj = initial_trajectory(problem, steps, h);
    if steps == 0 {
        return Ok(traj);
    }
    let modes = problem.mode_resolvents()?;
    let tables = modes
        .iter()
        .map(|m| WeightTable::erk2(c2, m, h, steps))
        .collect::<Result<Vec<_>>>()?;
    let main: Vec<_> = tables.iter().map(|t| t.b.clone()).collect();
    let sup: Vec<Vec<Vec<f64>>> = tables
        .iter()
        .map(|t| {
            t.stage
                .as_ref()
                .expect("two-stage table")
                .b_sup
                .iter()
                .map(|b| b.to_vec())
                .collect()
        })
        .collect();
    let a21: Vec<f64> = tables
        .iter()
        .map(|t| t.stage.as_ref().expect("two-stage table").a21)
        .collect();
    let w = FlatWeights::new(&main, 2);
    let w_sup = FlatWeights::new(&sup, 2);

    for m in 1..=steps {
        let t_prev = (m - 1) as f64 * h;
        let prev = traj.states.last().expect("non-empty").clone();
        let g1 = eval_forcing(problem, t_prev, &prev, m - 1)?;

        let mut stage = homogeneous(&modes, &problem.u0, t_prev + c2 * h)?;
        for ((s, a), g) in stage.iter_mut().zip(&a21).zip(&g1.coeffs) {
            *s += h * a * g;
        }
        // history l = 0..m-2 with weights at t_{m-l-1}
        add_history(&mut stage, h, &w_sup, &traj.stage_history, m - 1);
        check_state(&stage, m)?;
        let stage = SpectralField::new(stage);
        let g2 = eval_forcing(problem, t_prev + c2 * h, &stage, m - 1)?;
        traj.stage_history.push(vec![g1, g2]);

        let mut u = homogeneous(&modes, &problem.u0, m as f64 * h)?;
        add_history(&mut u, h, &w, &traj.stage_history, m);
        check_state(&u, m)?;
        traj.states.push(SpectralField::new(u));
    }
    Ok(traj)
}

/// Time-stepping method selector.
#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    Euler,
    Erk2 { c2: f64 },
    Quadrature(LinearQuadratureRule),
}

impl Method {
    pub fn solve(&self, problem: &ProblemSpec, steps: usize) -> Result<Trajectory> {
        match self {
            Self::Euler => solve_euler(problem, steps),
            Self::Erk2 { c2 } => solve_erk2(problem, steps, *c2),
            Self::Quadrature(rule) => solve_linear(problem, rule, steps),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Euler => "euler".into(),
            Self::Erk2 { .. } => "erk2".into(),
            Self::Quadrature(rule) => format!("quad{}", rule.stages()),
        }
    }

    /// Nominal convergence order.
    pub fn order(&self) -> usize {
        match self {
            Self::Euler => 1,
            Self::Erk2 { .. } => 2,
            Self::Quadrature(rule) => rule.order(),
        }
    }

    pub fn parse(name: &str, c2: f64) -> Result<Self> {
        match name {
            "euler" => Ok(Self::Euler),
            "erk2" => {
                check_c2(c2)?;
                Ok(Self::Erk2 { c2 })
            }
            "quad1" => Ok(Self::Quadrature(LinearQuadratureRule::standard(1)?)),
            "quad2" => Ok(Self::Quadrature(LinearQuadratureRule::new(vec![0.0, c2])?)),
            "quad3" => Ok(Self::Quadrature(LinearQuadratureRule::standard(3)?)),
            other => Err(Error::Parse(format!("unknown method '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(n: usize) -> SpectralSpace {
        SpectralSpace::with_modes(n).unwrap()
    }

    fn riesz() -> KernelSpec {
        KernelSpec::riesz(1.5).unwrap()
    }

    fn smooth_u0(n: usize) -> SpectralField {
        SpectralField::new((1..=n).map(|k| 1.0 / (k * k) as f64).collect())
    }

    #[test]
    fn zero_steps_returns_initial_state() {
        let p = ProblemSpec::new(riesz(), space(4), smooth_u0(4), Forcing::Zero, 1.0).unwrap();
        let tr = solve_linear(&p, &LinearQuadratureRule::standard(2).unwrap(), 0).unwrap();
        assert_eq!(tr.states.len(), 1);
        assert_eq!(tr.states[0], p.u0);
    }

    #[test]
    fn homogeneous_problems_are_exact() {
        for kernel in [riesz(), KernelSpec::exponential(2.0).unwrap()] {
            let p = ProblemSpec::new(kernel, space(8), smooth_u0(8), Forcing::Zero, 1.0).unwrap();
            let modes = p.mode_resolvents().unwrap();
            for method in [
                Method::Euler,
                Method::Erk2 { c2: 0.5 },
                Method::parse("quad3", 0.5).unwrap(),
            ] {
                let tr = method.solve(&p, 8).unwrap();
                for (m, u) in tr.states.iter().enumerate() {
                    for (k, c) in u.coeffs.iter().enumerate() {
                        let exact = modes[k].s(m as f64 / 8.0).unwrap() * p.u0.coeffs[k];
                        assert!((c - exact).abs() <= 1e-12 * exact.abs().max(1e-300));
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_semilinear_forcing_in_linear_solver() {
        let p = ProblemSpec::new(
            riesz(),
            space(2),
            smooth_u0(2),
            Forcing::semilinear(|_, _, u| u),
            1.0,
        )
        .unwrap();
        assert!(solve_linear(&p, &LinearQuadratureRule::standard(1).unwrap(), 4).is_err());
        assert!(ProblemSpec::new(riesz(), space(2), smooth_u0(3), Forcing::Zero, 1.0).is_err());
        assert!(ProblemSpec::new(riesz(), space(2), smooth_u0(2), Forcing::Zero, 0.0).is_err());
    }

    #[test]
    fn scheme_identities_for_time_forcing() {
        let n = 6;
        let f = Forcing::time(move |t| {
            SpectralField::new((1..=n).map(|k| (t * k as f64).cos()).collect())
        });
        let p = ProblemSpec::new(riesz(), space(n), smooth_u0(n), f, 1.0).unwrap();
        let e = solve_euler(&p, 16).unwrap();
        let q1 = solve_linear(&p, &LinearQuadratureRule::standard(1).unwrap(), 16).unwrap();
        assert!(e.terminal().distance(q1.terminal()) <= 1e-12);
        let r = solve_erk2(&p, 16, 0.5).unwrap();
        let q2 = solve_linear(&p, &LinearQuadratureRule::new(vec![0.0, 0.5]).unwrap(), 16).unwrap();
        for (a, b) in r.states.iter().zip(&q2.states) {
            assert!(a.distance(b) <= 1e-12);
        }
    }

    #[test]
    fn degenerate_single_step_is_explicit_midpoint() {
        let p = ProblemSpec::new(
            riesz(),
            space(1),
            SpectralField::new(vec![0.7]),
            Forcing::semilinear(|t, _, u| (1.0 + t) * u),
            1.0,
        )
        .unwrap()
        .with_eigenvalues(vec![0.0])
        .unwrap();
        let h = 0.25;
        let p = ProblemSpec { horizon: h, ..p };
        let tr = solve_erk2(&p, 1, 0.5).unwrap();
        let u0 = 0.7;
        let stage = u0 + 0.5 * h * u0;
        let expected = u0 + h * (1.0 + 0.5 * h) * stage;
        assert!((tr.terminal().coeffs[0] - expected).abs() < 1e-13);
    }

    #[test]
    fn modes_decouple() {
        let n = 5;
        let f = Forcing::time(move |t| {
            SpectralField::new((1..=n).map(|k| (1.0 + t) / k as f64).collect())
        });
        let p = ProblemSpec::new(riesz(), space(n), smooth_u0(n), f, 1.0).unwrap();
        let rule = LinearQuadratureRule::standard(2).unwrap();
        let joint = solve_linear(&p, &rule, 12).unwrap();
        for k in 1..=n {
            let single = ProblemSpec::new(
                riesz(),
                space(1),
                SpectralField::new(vec![p.u0.coeffs[k - 1]]),
                Forcing::time(move |t| SpectralField::new(vec![(1.0 + t) / k as f64])),
                1.0,
            )
            .unwrap()
            .with_eigenvalues(vec![p.space.eigenvalue(k)])
            .unwrap();
            let tr = solve_linear(&single, &rule, 12).unwrap();
            assert_eq!(tr.terminal().coeffs[0], joint.terminal().coeffs[k - 1]);
        }
    }

    #[test]
    fn deterministic() {
        let p = Builtin::Sine.build(riesz(), space(8), 1.0).unwrap();
        let a = solve_erk2(&p, 10, 0.5).unwrap();
        let b = solve_erk2(&p, 10, 0.5).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn non_finite_forcing_is_reported() {
        let p = ProblemSpec::new(
            riesz(),
            space(2),
            smooth_u0(2),
            Forcing::semilinear(|t, _, u| if t > 0.3 { f64::NAN } else { u }),
            1.0,
        )
        .unwrap();
        let err = solve_euler(&p, 8).unwrap_err();
        assert!(
            matches!(err, Error::NonFiniteState { step: 3, .. }),
            "{err}"
        );
    }

    #[test]
    fn builtin_parsing() {
        assert_eq!("builtin:sine".parse::<Builtin>().unwrap(), Builtin::Sine);
        assert_eq!("zero".parse::<Builtin>().unwrap(), Builtin::Zero);
        assert!("builtin:cosine".parse::<Builtin>().is_err());
        assert!(Method::parse("rk4", 0.5).is_err());
        assert!(Method::parse("erk2", 0.0).is_err());
    }
}

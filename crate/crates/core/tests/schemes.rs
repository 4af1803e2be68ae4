//! Time-stepping schemes against the fine-grid oracle and each other.

use std::f64::consts::{PI, SQRT_2};

use idexp::harness::{run_convergence, snapshot_solution, ExperimentPlan};
use idexp::oracle::{ode_oracle, OracleConfig, OracleScheme};
use idexp::resolvent::{KernelSpec, ModeResolvent, Resolvent};
use idexp::solvers::{solve_linear, Builtin, Forcing, Method, ProblemSpec};
use idexp::spectral::{SpectralField, SpectralSpace};
use idexp::tableau::LinearQuadratureRule;

fn single_mode(kernel: KernelSpec, forcing: Forcing) -> ProblemSpec {
    let space = SpectralSpace::with_modes(1).unwrap();
    ProblemSpec::new(kernel, space, SpectralField::new(vec![0.5]), forcing, 1.0).unwrap()
}

fn cos_forcing() -> Forcing {
    Forcing::time(|t| SpectralField::new(vec![(3.0 * t).cos()]))
}

#[test]
fn linear_rules_converge_to_oracle() {
    let kernel = KernelSpec::riesz(1.5).unwrap();
    let p = single_mode(kernel, cos_forcing());
    let oracle = ode_oracle(
        &p,
        &OracleConfig::new(4096, OracleScheme::ProductTrapezoidal).unwrap(),
        8,
    )
    .unwrap();
    let exact = oracle.states.last().unwrap().coeffs[0];
    for s in 1..=2 {
        let rule = LinearQuadratureRule::standard(s).unwrap();
        // the first-order error changes sign near M = 24, so stay well above it
        let err = |m| (solve_linear(&p, &rule, m).unwrap().terminal().coeffs[0] - exact).abs();
        let ratio = err(256) / err(512);
        let want = f64::powi(2.0, s as i32);
        assert!((ratio / want - 1.0).abs() < 0.2, "s = {s}: ratio {ratio}");
    }
}

#[test]
fn error_ratio_under_step_halving() {
    // self-referenced: the reference sits far below the compared levels
    for kernel in [
        KernelSpec::riesz(1.25).unwrap(),
        KernelSpec::exponential(2.0).unwrap(),
    ] {
        let p = Builtin::Sine
            .build(kernel, SpectralSpace::with_modes(16).unwrap(), 1.0)
            .unwrap();
        for (method, order) in [(Method::Euler, 1), (Method::Erk2 { c2: 0.5 }, 2)] {
            let reference = method.solve(&p, 1024).unwrap();
            let err = |m| {
                method
                    .solve(&p, m)
                    .unwrap()
                    .terminal()
                    .distance(reference.terminal())
            };
            let ratio = err(32) / err(64);
            let want = f64::powi(2.0, order);
            assert!(
                (ratio / want - 1.0).abs() < 0.2,
                "{} {}: ratio {ratio}",
                kernel.label(),
                method.name()
            );
        }
    }
}

#[test]
fn reference_divisor_barely_moves_coarse_errors() {
    let kernel = KernelSpec::exponential(2.0).unwrap();
    let p = Builtin::Sine
        .build(kernel, SpectralSpace::with_modes(16).unwrap(), 1.0)
        .unwrap();
    let steps = vec![8, 16, 32];
    let half = run_convergence(
        &ExperimentPlan::new(p.clone(), Method::Erk2 { c2: 0.5 }, steps.clone()).unwrap(),
    )
    .unwrap();
    let quarter = run_convergence(
        &ExperimentPlan::new(p, Method::Erk2 { c2: 0.5 }, steps)
            .unwrap()
            .with_reference_divisor(4)
            .unwrap(),
    )
    .unwrap();
    for (a, b) in half.rows.iter().zip(&quarter.rows).take(2) {
        assert!(
            (a.error / b.error - 1.0).abs() < 0.05,
            "{} vs {}",
            a.error,
            b.error
        );
    }
}

#[test]
fn semilinear_oracle_agrees_with_exponential_euler() {
    let kernel = KernelSpec::riesz(1.5).unwrap();
    let p = Builtin::Sine
        .build(kernel, SpectralSpace::with_modes(8).unwrap(), 1.0)
        .unwrap();
    let oracle = ode_oracle(
        &p,
        &OracleConfig::new(2048, OracleScheme::ProductTrapezoidal).unwrap(),
        4,
    )
    .unwrap();
    let euler = Method::Euler.solve(&p, 512).unwrap();
    let gap = euler.terminal().distance(oracle.states.last().unwrap());
    assert!(gap < 5e-3, "gap {gap}");
}

#[test]
fn homogeneous_snapshot_is_scaled_first_mode() {
    let kernel = KernelSpec::exponential(2.0).unwrap();
    let space = SpectralSpace::with_modes(8).unwrap();
    let u0 = space
        .project(&space.sample(|x| 0.5 * (PI * x).sin() / SQRT_2))
        .unwrap();
    let p = ProblemSpec::new(kernel, space.clone(), u0, Forcing::Zero, 1.0).unwrap();
    let mut out = Vec::new();
    snapshot_solution(&p, &Method::Euler, 8, &[1.0], &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let s1 = ModeResolvent::new(Resolvent::new(kernel).unwrap(), PI * PI)
        .unwrap()
        .s(1.0)
        .unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let want = 0.5 * s1 * (PI * cols[1]).sin() / SQRT_2;
        assert!((cols[2] - want).abs() < 1e-12, "{line}");
        rows += 1;
    }
    assert_eq!(rows, space.grid().len());
}

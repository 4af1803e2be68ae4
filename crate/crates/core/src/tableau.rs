//! Method coefficients per mode and per elapsed time, and the residuals of
//! the order conditions they are built to satisfy.

use crate::error::{Error, Result};
use crate::resolvent::ModeResolvent;

/// Interpolatory exponential quadrature rule with nodes 0 = c_1 < ... < c_s <= 1
/// and order s (s <= 3).
#[derive(Clone, Debug, PartialEq)]
pub struct LinearQuadratureRule {
    nodes: Vec<f64>,
}

impl LinearQuadratureRule {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() > 3 {
            return Err(Error::invalid(format!(
                "rules with {} stages are not supported",
                nodes.len()
            )));
        }
        if nodes[0] != 0.0 {
            return Err(Error::invalid("first node must be 0"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|c| !(*c <= 1.0)) {
            return Err(Error::invalid(format!(
                "nodes must increase strictly within [0, 1]: {nodes:?}"
            )));
        }
        Ok(Self { nodes })
    }

    /// Equispaced nodes on [0, 1/2] (s = 2) or [0, 1] (s = 3); s = 1 is the
    /// left rectangle.
    pub fn standard(stages: usize) -> Result<Self> {
        match stages {
            1 => Self::new(vec![0.0]),
            2 => Self::new(vec![0.0, 0.5]),
            3 => Self::new(vec![0.0, 0.5, 1.0]),
            s => Err(Error::invalid(format!(
                "rules with {s} stages are not supported"
            ))),
        }
    }

    pub fn stages(&self) -> usize {
        self.nodes.len()
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights b_i from phi_1..phi_s (closed-form inverse of the
    /// Vandermonde-type system).
    pub fn weights_from_phi(&self, phi: &[f64; 3]) -> Vec<f64> {
        let c = &self.nodes;
        match c.len() {
            1 => vec![phi[0]],
            2 => {
                let b2 = phi[1] / c[1];
                vec![phi[0] - b2, b2]
            }
            _ => {
                let (c2, c3) = (c[1], c[2]);
                let b2 = (c3 * phi[1] - 2.0 * phi[2]) / (c2 * (c3 - c2));
                let b3 = (2.0 * phi[2] - c2 * phi[1]) / (c3 * (c3 - c2));
                vec![phi[0] - b2 - b3, b2, b3]
            }
        }
    }
}

/// Stage data of the two-stage method.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageWeights {
    pub c2: f64,
    pub a21: f64,
    /// b_1^2, b_2^2 at elapsed time t (evaluated at t + c2 h).
    pub b_sup: [f64; 2],
}

/// Weights for one mode at one elapsed time.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeWeights {
    pub b: Vec<f64>,
    pub stage: Option<StageWeights>,
}

/// Weights b_i(t_l) of `rule` for one mode.
pub fn linear_weights(
    rule: &LinearQuadratureRule,
    mr: &ModeResolvent,
    h: f64,
    t: f64,
) -> Result<ModeWeights> {
    let phi = mr.phi_all(h, t)?;
    Ok(ModeWeights {
        b: rule.weights_from_phi(&phi),
        stage: None,
    })
}

/// Coefficients of the two-stage explicit method with node c2:
/// b_1 = phi_1 - phi_2/c2, b_2 = phi_2/c2 at t; the same at t + c2 h for the
/// stage weights; a_21 = c2 phi_{1, c2 h}(c2 h).
pub fn erk2_coefficients(c2: f64, mr: &ModeResolvent, h: f64, t: f64) -> Result<ModeWeights> {
    check_c2(c2)?;
    let p = mr.phi_all(h, t)?;
    let q = mr.phi_all(h, t + c2 * h)?;
    let a21 = c2 * mr.phi(1, c2 * h, c2 * h)?;
    Ok(ModeWeights {
        b: vec![p[0] - p[1] / c2, p[1] / c2],
        stage: Some(StageWeights {
            c2,
            a21,
            b_sup: [q[0] - q[1] / c2, q[1] / c2],
        }),
    })
}

pub(crate) fn check_c2(c2: f64) -> Result<()> {
    if !(c2 > 0.0 && c2 <= 1.0) {
        return Err(Error::invalid(format!("c2 must lie in (0, 1], got {c2}")));
    }
    Ok(())
}

/// Order-condition residuals.
///
/// Without stage data: M_k = sum_i b_i c_i^(k-1)/(k-1)! - phi_k for k = 1..p.
/// With stage data: the five conditions of the two-stage method
/// (b1 + b2 - phi_1, c2 b2 - phi_2, a21 - c2 phi_{1,c2h}(c2h), and the
/// first two again for the stage weights at t + c2 h).
pub fn order_condition_residuals(
    weights: &ModeWeights,
    nodes: &[f64],
    mr: &ModeResolvent,
    h: f64,
    t: f64,
    p: usize,
) -> Result<Vec<f64>> {
    if let Some(st) = weights.stage {
        let phi = mr.phi_all(h, t)?;
        let sup = mr.phi_all(h, t + st.c2 * h)?;
        let a21 = st.c2 * mr.phi(1, st.c2 * h, st.c2 * h)?;
        return Ok(vec![
            weights.b[0] + weights.b[1] - phi[0],
            st.c2 * weights.b[1] - phi[1],
            st.a21 - a21,
            st.b_sup[0] + st.b_sup[1] - sup[0],
            st.c2 * st.b_sup[1] - sup[1],
        ]);
    }
    if weights.b.len() != nodes.len() {
        return Err(Error::ShapeMismatch {
            expected: nodes.len(),
            actual: weights.b.len(),
        });
    }
    if p == 0 || p > 3 {
        return Err(Error::invalid(format!("order {p} is not supported")));
    }
    let phi = mr.phi_all(h, t)?;
    Ok((1..=p)
        .map(|k| {
            let fact = [1.0, 1.0, 2.0][k - 1];
            let sum: f64 = weights
                .b
                .iter()
                .zip(nodes)
                .map(|(b, c)| b * c.powi(k as i32 - 1) / fact)
                .sum();
            sum - phi[k - 1]
        })
        .collect())
}

/// Weight table for one mode: `b[l - 1][i]` holds b_i(t_l), l = 1..=M.
#[derive(Clone, Debug)]
pub struct WeightTable {
    pub b: Vec<Vec<f64>>,
    pub stage: Option<StageTable>,
}

/// Stage weights of the two-stage method for one mode:
/// `b_sup[l - 1]` holds (b_1^2, b_2^2)(t_l), l = 1..=M.
#[derive(Clone, Debug)]
pub struct StageTable {
    pub a21: f64,
    pub b_sup: Vec<[f64; 2]>,
}

impl WeightTable {
    pub fn linear(
        rule: &LinearQuadratureRule,
        mr: &ModeResolvent,
        h: f64,
        steps: usize,
    ) -> Result<Self> {
        let b = (1..=steps)
            .map(|l| Ok(rule.weights_from_phi(&mr.phi_all(h, l as f64 * h)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { b, stage: None })
    }

    pub fn erk2(c2: f64, mr: &ModeResolvent, h: f64, steps: usize) -> Result<Self> {
        check_c2(c2)?;
        let mut b = Vec::with_capacity(steps);
        let mut b_sup = Vec::with_capacity(steps);
        for l in 1..=steps {
            let t = l as f64 * h;
            let p = mr.phi_all(h, t)?;
            let q = mr.phi_all(h, t + c2 * h)?;
            b.push(vec![p[0] - p[1] / c2, p[1] / c2]);
            b_sup.push([q[0] - q[1] / c2, q[1] / c2]);
        }
        let a21 = c2 * mr.phi(1, c2 * h, c2 * h)?;
        Ok(Self {
            b,
            stage: Some(StageTable { a21, b_sup }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resolvent::{phi_quadrature, KernelSpec, Resolvent};
    use std::f64::consts::PI;

    fn mode(spec: KernelSpec, lambda: f64) -> ModeResolvent {
        ModeResolvent::new(Resolvent::new(spec).unwrap(), lambda).unwrap()
    }

    fn degenerate() -> ModeResolvent {
        ModeResolvent::degenerate(Resolvent::new(KernelSpec::riesz(1.5).unwrap()).unwrap())
    }

    #[test]
    fn rule_validation() {
        assert!(LinearQuadratureRule::new(vec![]).is_err());
        assert!(LinearQuadratureRule::new(vec![0.1]).is_err());
        assert!(LinearQuadratureRule::new(vec![0.0, 0.5, 0.5]).is_err());
        assert!(LinearQuadratureRule::new(vec![0.0, 1.5]).is_err());
        assert!(LinearQuadratureRule::new(vec![0.0, 0.2, 0.4, 0.6]).is_err());
        assert_eq!(LinearQuadratureRule::standard(3).unwrap().order(), 3);
    }

    #[test]
    fn small_rules_from_phi() {
        let mr = mode(KernelSpec::riesz(1.75).unwrap(), PI * PI);
        let phi = mr.phi_all(0.1, 0.3).unwrap();
        let one =
            linear_weights(&LinearQuadratureRule::standard(1).unwrap(), &mr, 0.1, 0.3).unwrap();
        assert_eq!(one.b, vec![phi[0]]);
        let two =
            linear_weights(&LinearQuadratureRule::standard(2).unwrap(), &mr, 0.1, 0.3).unwrap();
        assert_eq!(two.b[1], 2.0 * phi[1]);
        assert_eq!(two.b[0], phi[0] - 2.0 * phi[1]);
    }

    #[test]
    fn degenerate_mode_gives_classical_quadrature() {
        let mr = degenerate();
        let w = |s| {
            linear_weights(&LinearQuadratureRule::standard(s).unwrap(), &mr, 0.1, 0.2)
                .unwrap()
                .b
        };
        assert_eq!(w(1), vec![1.0]);
        assert_eq!(w(2), vec![0.0, 1.0]);
        // Simpson on [0, 1] with nodes 0, 1/2, 1
        let s3 = w(3);
        for (a, b) in s3.iter().zip([1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        // trapezoid-like rule on nodes 0 and 1
        let r = LinearQuadratureRule::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(linear_weights(&r, &mr, 0.1, 0.2).unwrap().b, vec![0.5, 0.5]);
    }

    #[test]
    fn erk2_degenerate_values() {
        let mr = degenerate();
        for c2 in [0.25, 0.5, 1.0] {
            let w = erk2_coefficients(c2, &mr, 0.1, 0.1).unwrap();
            assert!((w.b[0] - (1.0 - 0.5 / c2)).abs() < 1e-15);
            assert!((w.b[1] - 0.5 / c2).abs() < 1e-15);
            assert!((w.stage.unwrap().a21 - c2).abs() < 1e-15);
        }
        let w = erk2_coefficients(0.5, &mr, 0.1, 0.1).unwrap();
        assert_eq!(w.b, vec![0.0, 1.0]);
        assert!(erk2_coefficients(0.0, &mr, 0.1, 0.1).is_err());
        assert!(erk2_coefficients(1.1, &mr, 0.1, 0.1).is_err());
    }

    #[test]
    fn erk2_against_quadrature_composition() {
        let (h, t, c2) = (0.1, 0.2, 0.5);
        let mr = mode(KernelSpec::riesz(1.75).unwrap(), PI * PI);
        let w = erk2_coefficients(c2, &mr, h, t).unwrap();
        let q = |k, h, t| phi_quadrature(&mr, k, h, t, 1e-14).unwrap();
        let st = w.stage.unwrap();
        let expected = [
            q(1, h, t) - q(2, h, t) / c2,
            q(2, h, t) / c2,
            c2 * q(1, c2 * h, c2 * h),
            q(1, h, t + c2 * h) - q(2, h, t + c2 * h) / c2,
            q(2, h, t + c2 * h) / c2,
        ];
        let got = [w.b[0], w.b[1], st.a21, st.b_sup[0], st.b_sup[1]];
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() < 1e-10 * e.abs().max(1e-3), "{g} vs {e}");
        }
        assert!((w.b[1] * c2 - mr.phi(2, h, t).unwrap()).abs() < 1e-16);
    }

    #[test]
    fn residuals_vanish_and_detect_perturbation() {
        let mr = mode(KernelSpec::exponential(2.0).unwrap(), 9.0 * PI * PI);
        let rule = LinearQuadratureRule::standard(3).unwrap();
        let (h, t) = (1.0 / 32.0, 5.0 / 32.0);
        let mut w = linear_weights(&rule, &mr, h, t).unwrap();
        let r = order_condition_residuals(&w, rule.nodes(), &mr, h, t, 3).unwrap();
        assert!(r.iter().all(|x| x.abs() <= 1e-14));
        w.b[0] += 1e-3;
        let r = order_condition_residuals(&w, rule.nodes(), &mr, h, t, 3).unwrap();
        assert!((r[0] - 1e-3).abs() < 1e-15);
        assert!(r[1].abs() < 1e-14 && r[2].abs() < 1e-14);
    }

    #[test]
    fn erk2_residuals_vanish() {
        let mr = mode(KernelSpec::riesz(1.25).unwrap(), 16.0 * PI * PI);
        let h = 1.0 / 16.0;
        for l in 1..=8 {
            let t = l as f64 * h;
            let w = erk2_coefficients(0.5, &mr, h, t).unwrap();
            let r = order_condition_residuals(&w, &[0.0, 0.5], &mr, h, t, 2).unwrap();
            assert_eq!(r.len(), 5);
            assert!(r.iter().all(|x| x.abs() <= 1e-10));
        }
    }

    #[test]
    fn tables_match_pointwise_construction() {
        let mr = mode(KernelSpec::riesz(1.5).unwrap(), 4.0 * PI * PI);
        let h = 0.125;
        let tab = WeightTable::erk2(0.5, &mr, h, 8).unwrap();
        for l in 1..=8 {
            let w = erk2_coefficients(0.5, &mr, h, l as f64 * h).unwrap();
            assert_eq!(tab.b[l - 1], w.b);
            assert_eq!(
                tab.stage.as_ref().unwrap().b_sup[l - 1],
                w.stage.unwrap().b_sup
            );
        }
    }

    #[test]
    fn weights_stay_bounded() {
        for spec in [
            KernelSpec::riesz(1.25).unwrap(),
            KernelSpec::riesz(1.75).unwrap(),
            KernelSpec::exponential(2.0).unwrap(),
        ] {
            let kernel = Resolvent::new(spec).unwrap();
            for k in [1usize, 3, 10, 32, 64] {
                let mr = ModeResolvent::new(kernel.clone(), (k * k) as f64 * PI * PI).unwrap();
                for h in [1e-3, 1.0 / 64.0, 0.25] {
                    for s in 1..=3 {
                        let tab = WeightTable::linear(
                            &LinearQuadratureRule::standard(s).unwrap(),
                            &mr,
                            h,
                            4,
                        )
                        .unwrap();
                        assert!(tab.b.iter().flatten().all(|b| b.abs() <= 10.0));
                    }
                    let tab = WeightTable::erk2(0.5, &mr, h, 4).unwrap();
                    assert!(tab.b.iter().flatten().all(|b| b.abs() <= 10.0));
                }
            }
        }
    }
}

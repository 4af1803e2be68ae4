//! Convergence experiments: a reference run at a fraction of the smallest
//! step, terminal-time L2 errors (coefficient 2-norm), empirical orders and
//! CSV output with `#` metadata lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::solvers::{Method, ProblemSpec, Trajectory};

/// Errors at or below this level are treated as exact.
pub const EXACT_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct ExperimentPlan {
    pub problem: ProblemSpec,
    pub method: Method,
    pub step_counts: Vec<usize>,
    /// Reference step = smallest step / reference_divisor.
    pub reference_divisor: usize,
}

impl ExperimentPlan {
    pub fn new(problem: ProblemSpec, method: Method, step_counts: Vec<usize>) -> Result<Self> {
        let plan = Self {
            problem,
            method,
            step_counts,
            reference_divisor: 2,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_reference_divisor(mut self, divisor: usize) -> Result<Self> {
        self.reference_divisor = divisor;
        self.validate()?;
        Ok(self)
    }

    pub fn reference_steps(&self) -> usize {
        self.step_counts.last().copied().unwrap_or(0) * self.reference_divisor
    }

    fn validate(&self) -> Result<()> {
        if self.step_counts.is_empty() || self.step_counts[0] == 0 {
            return Err(Error::invalid("step counts must be positive and non-empty"));
        }
        if self.step_counts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "step counts must increase strictly: {:?}",
                self.step_counts
            )));
        }
        if self.reference_divisor < 1 {
            return Err(Error::invalid("reference divisor must be at least 1"));
        }
        let r = self.reference_steps();
        if let Some(bad) = self.step_counts.iter().find(|m| !r.is_multiple_of(**m)) {
            return Err(Error::invalid(format!(
                "{bad} steps do not divide the reference count {r}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub steps: usize,
    pub h: f64,
    pub error: f64,
    /// log2(e_prev / e) against the previous (coarser) row.
    pub order: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ErrorReport {
    pub metadata: BTreeMap<String, String>,
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    /// True if every error is at round-off level; orders are then meaningless.
    pub fn is_exact(&self) -> bool {
        self.rows.iter().all(|r| r.error <= EXACT_THRESHOLD)
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    pub fn steps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.h).collect()
    }

    /// Least-squares order over all rows.
    pub fn fitted_order(&self) -> Result<f64> {
        estimate_order(&self.errors(), &self.steps())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str("steps,h,error,order,seconds\n");
        for r in &self.rows {
            let order = r.order.map(|o| o.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{:e},{},{}",
                r.steps, r.h, r.error, order, r.seconds
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut report = Self::default();
        let mut header_seen = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let (k, v) = meta.trim().split_once('=').ok_or_else(|| {
                    Error::Parse(format!("line {}: metadata needs key=value", lineno + 1))
                })?;
                report
                    .metadata
                    .insert(k.trim().to_string(), v.trim().to_string());
                continue;
            }
            if !header_seen {
                if line != "steps,h,error,order,seconds" {
                    return Err(Error::Parse(format!(
                        "line {}: unexpected header '{line}'",
                        lineno + 1
                    )));
                }
                header_seen = true;
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(Error::Parse(format!(
                    "line {}: expected 5 columns",
                    lineno + 1
                )));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: '{s}': {e}", lineno + 1)))
            };
            report.rows.push(ErrorRow {
                steps: cols[0]
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?,
                h: num(cols[1])?,
                error: num(cols[2])?,
                order: if cols[3].is_empty() {
                    None
                } else {
                    Some(num(cols[3])?)
                },
                seconds: num(cols[4])?,
            });
        }
        if !header_seen {
            return Err(Error::Parse("missing header line".into()));
        }
        Ok(report)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::Io {
            context: format!("writing {}", path.display()),
            source: e,
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            context: format!("reading {}", path.display()),
            source: e,
        })?;
        Self::from_csv(&text)
    }
}

fn solve_checked(plan: &ExperimentPlan, steps: usize) -> Result<(Trajectory, f64)> {
    let start = Instant::now();
    let tr = plan
        .method
        .solve(&plan.problem, steps)
        .map_err(|e| Error::Diverged {
            steps,
            source: Box::new(e),
        })?;
    Ok((tr, start.elapsed().as_secs_f64()))
}

/// Runs the plan: reference solution, then one run per step count.
pub fn run_convergence(plan: &ExperimentPlan) -> Result<ErrorReport> {
    plan.validate()?;
    let m_ref = plan.reference_steps();
    let (reference, _) = solve_checked(plan, m_ref)?;
    let target = reference.terminal();
    let mut rows: Vec<ErrorRow> = Vec::new();
    for &m in &plan.step_counts {
        let (tr, seconds) = solve_checked(plan, m)?;
        let error = tr.terminal().distance(target);
        let order = rows.last().map(|prev| (prev.error / error).log2());
        rows.push(ErrorRow {
            steps: m,
            h: plan.problem.horizon / m as f64,
            error,
            order,
            seconds,
        });
    }
    let mut metadata = BTreeMap::new();
    metadata.insert("kernel".into(), plan.problem.kernel.label());
    metadata.insert("modes".into(), plan.problem.n_modes().to_string());
    metadata.insert("grid".into(), plan.problem.space.n_grid().to_string());
    metadata.insert("tmax".into(), plan.problem.horizon.to_string());
    metadata.insert("method".into(), plan.method.name());
    if let Method::Erk2 { c2 } = plan.method {
        metadata.insert("c2".into(), c2.to_string());
    }
    metadata.insert("reference_steps".into(), m_ref.to_string());
    let mut report = ErrorReport { metadata, rows };
    if report.is_exact() {
        for r in &mut report.rows {
            r.order = None;
        }
        report.metadata.insert("exact".into(), "true".into());
    } else if let Ok(p) = report.fitted_order() {
        report
            .metadata
            .insert("fitted_order".into(), format!("{p:.4}"));
    }
    Ok(report)
}

/// Least-squares slope of log(error) against log(h).
pub fn estimate_order(errors: &[f64], hs: &[f64]) -> Result<f64> {
    if errors.len() != hs.len() {
        return Err(Error::ShapeMismatch {
            expected: hs.len(),
            actual: errors.len(),
        });
    }
    if errors.len() < 3 {
        return Err(Error::invalid("need at least three points"));
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::invalid(format!("errors must be positive, got {e}")));
    }
    if hs.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::invalid("step sizes must be positive"));
    }
    let n = errors.len() as f64;
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Writes samples (t, x, u(x, t)) of the solution at the grid times closest
/// to `times`, on the collocation grid.
pub fn snapshot_solution<W: Write>(
    problem: &ProblemSpec,
    method: &Method,
    steps: usize,
    times: &[f64],
    out: &mut W,
) -> Result<()> {
    let tr = method.solve(problem, steps)?;
    write_field_csv(problem, &tr, times, out)
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io {
        context: "writing CSV".into(),
        source: e,
    }
}

/// CSV `t,x,u` of the trajectory at the requested times (all times if empty).
pub fn write_field_csv<W: Write>(
    problem: &ProblemSpec,
    tr: &Trajectory,
    times: &[f64],
    out: &mut W,
) -> Result<()> {
    writeln!(out, "t,x,u").map_err(io_err)?;
    let grid = problem.space.grid();
    for m in select_steps(tr, times) {
        let values = problem.space.synthesize(&tr.states[m])?;
        for (x, u) in grid.iter().zip(&values) {
            writeln!(out, "{},{},{:e}", tr.times[m], x, u).map_err(io_err)?;
        }
    }
    Ok(())
}

/// CSV `t,k,coeff` of the trajectory at the requested times (all if empty).
pub fn write_coeff_csv<W: Write>(tr: &Trajectory, times: &[f64], out: &mut W) -> Result<()> {
    writeln!(out, "t,k,coeff").map_err(io_err)?;
    for m in select_steps(tr, times) {
        for (k, c) in tr.states[m].coeffs.iter().enumerate() {
            writeln!(out, "{},{},{:e}", tr.times[m], k + 1, c).map_err(io_err)?;
        }
    }
    Ok(())
}

fn select_steps(tr: &Trajectory, times: &[f64]) -> Vec<usize> {
    if times.is_empty() {
        return (0..tr.times.len()).collect();
    }
    let mut out: Vec<usize> = times
        .iter()
        .map(|t| {
            tr.times
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0)
        })
        .collect();
    out.dedup();
    out
}

/// Parses `key=value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!("line {}: expected key=value, got '{line}'", i + 1))
        })?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

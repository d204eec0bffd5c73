//! Coupled Monte Carlo estimates of P{sup d∞(xᵐ, x) > ε} and P{τᵐ ≤ T} over a mass ladder.
//!
//! Path i uses noise stream (master_seed, i) for every mass, so the estimates at
//! different masses are a coupled comparison. Results are a pure function of the
//! plan: paths are gathered in index order whatever the thread count.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::{coupled_outcome, CoupledSpec, PathOutcome};
use crate::linalg::Vector;
use crate::models::{AnyModel, Model, ModelSpec};

/// z for a two-sided 95% normal interval.
pub const Z95: f64 = 1.959964;

/// Share of aborted paths above which a run is reported as failed.
pub const QUARANTINE_LIMIT: f64 = 0.01;

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval_z(successes: u64, n: u64, z: f64) -> Result<(f64, f64)> {
    if n == 0 || successes > n || !(z > 0.0 && z.is_finite()) {
        return Err(Error::DomainError(format!(
            "Wilson interval needs 0 <= successes <= n, n >= 1 and z > 0 (got {successes}/{n}, z = {z})"
        )));
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let low = if successes == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let high = if successes == n { 1.0 } else { (center + half).clamp(p, 1.0) };
    Ok((low, high))
}

/// 95% Wilson score interval.
pub fn wilson_interval(successes: u64, n: u64) -> Result<(f64, f64)> {
    wilson_interval_z(successes, n, Z95)
}

/// Everything needed to reproduce an experiment bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub model: ModelSpec,
    /// Starting position; the model's default interior point when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    pub epsilons: Vec<f64>,
    /// Strictly decreasing.
    pub masses: Vec<f64>,
    pub n_paths: u64,
    pub master_seed: u64,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            model: ModelSpec::default_for("wall-gravity").expect("built-in"),
            x0: None,
            horizon: 1.0,
            dt: 1e-5,
            epsilons: vec![0.05],
            masses: vec![1e-1, 1e-2, 1e-3, 1e-4],
            n_paths: 400,
            master_seed: 0,
        }
    }
}

impl ExperimentPlan {
    pub fn resolved_x0(&self) -> Vec<f64> {
        self.x0.clone().unwrap_or_else(|| self.model.default_x0())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidPlan(msg));
        if self.n_paths == 0 {
            return bad("n_paths must be at least 1".into());
        }
        if self.masses.is_empty() {
            return bad("at least one mass is required".into());
        }
        if self.masses.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return bad(format!("masses must be finite and positive: {:?}", self.masses));
        }
        if self.masses.windows(2).any(|w| w[1] >= w[0]) {
            return bad(format!("masses must be strictly decreasing: {:?}", self.masses));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return bad(format!("epsilons must be finite and positive: {:?}", self.epsilons));
        }
        let mut sorted = self.epsilons.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return bad(format!("epsilons must be distinct: {:?}", self.epsilons));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be finite and positive, got {}", self.dt));
        }
        // T = 0 is the empty experiment; otherwise the grid needs dt <= T
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) || (self.horizon > 0.0 && self.dt > self.horizon) {
            return bad(format!("need 0 <= T and dt <= T (T = {}, dt = {})", self.horizon, self.dt));
        }
        let x0 = self.resolved_x0();
        if x0.len() != self.model.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.model.dim(),
                got: x0.len(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plan is serializable")
    }
}

/// How paths are scheduled. Results do not depend on the choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionPolicy {
    Sequential,
    /// `threads = 0` lets rayon pick.
    #[cfg(feature = "parallel")]
    Parallel { threads: usize },
}

impl Default for ExecutionPolicy {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        return Self::Parallel { threads: 0 };
        #[cfg(not(feature = "parallel"))]
        return Self::Sequential;
    }
}

impl ExecutionPolicy {
    /// `Parallel { threads }` when the feature is on, otherwise `Sequential`.
    pub fn with_threads(threads: usize) -> Self {
        #[cfg(feature = "parallel")]
        return Self::Parallel { threads };
        #[cfg(not(feature = "parallel"))]
        {
            let _ = threads;
            Self::Sequential
        }
    }

    fn map_paths<T, F>(&self, n: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        match *self {
            Self::Sequential => Ok((0..n).map(f).collect()),
            #[cfg(feature = "parallel")]
            Self::Parallel { threads } => {
                use rayon::prelude::*;
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
                Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
            }
        }
    }
}

/// One (m, ε) row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub m: f64,
    pub epsilon: f64,
    pub p_exceed: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Fraction of underdamped paths with τᵐ ≤ T.
    pub p_exit: f64,
    /// Paths on which the limiting process left X numerically.
    pub limit_exits: u64,
    pub exceed_count: u64,
    pub exit_count: u64,
    /// Paths counted (aborted ones excluded).
    pub n_valid: u64,
    pub aborted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub const CSV_HEADER: &'static str = "m,epsilon,p_exceed,ci_low,ci_high,p_exit,aborted";

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.m, r.epsilon, r.p_exceed, r.ci_low, r.ci_high, r.p_exit, r.aborted
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }

    /// Two columns `m p_exceed` per ε, blocks separated by two blank lines so that
    /// gnuplot's `index` selects an ε (plot with `set logscale x`).
    pub fn write_gnuplot<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut eps: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !eps.contains(&r.epsilon) {
                eps.push(r.epsilon);
            }
        }
        for (i, e) in eps.iter().enumerate() {
            if i > 0 {
                writeln!(out)?;
                writeln!(out)?;
            }
            writeln!(out, "# epsilon = {e}")?;
            writeln!(out, "# m p_exceed")?;
            for r in self.rows.iter().filter(|r| r.epsilon == *e) {
                writeln!(out, "{} {}", r.m, r.p_exceed)?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table is serializable")
    }

    pub fn rows_for_epsilon(&self, epsilon: f64) -> impl Iterator<Item = &ConvergenceRow> {
        self.rows.iter().filter(move |r| r.epsilon == epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitRow {
    pub m: f64,
    pub p_exit: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub exit_count: u64,
    pub n_valid: u64,
    pub aborted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitTable {
    pub rows: Vec<ExitRow>,
}

impl ExitTable {
    pub const CSV_HEADER: &'static str = "m,p_exit,ci_low,ci_high,aborted";

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{}", r.m, r.p_exit, r.ci_low, r.ci_high, r.aborted)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table is serializable")
    }
}

/// Both tables from a single pass over the paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub convergence: ConvergenceTable,
    pub exits: ExitTable,
    pub n_paths: u64,
}

impl ExperimentResult {
    pub fn max_abort_fraction(&self) -> f64 {
        self.exits
            .rows
            .iter()
            .map(|r| r.aborted as f64 / self.n_paths as f64)
            .fold(0.0, f64::max)
    }

    /// False when more than 1% of the paths at some mass were aborted.
    pub fn within_quarantine(&self) -> bool {
        self.max_abort_fraction() <= QUARANTINE_LIMIT
    }
}

/// Per-mass path outcomes, in path order.
fn collect_outcomes<const N: usize, const K: usize>(
    model: &Model<N, K>,
    plan: &ExperimentPlan,
    policy: ExecutionPolicy,
) -> Result<Vec<Vec<PathOutcome>>> {
    let x0 = plan.resolved_x0();
    let x0 = Vector::<N>::from_column_slice(&x0);
    plan.masses
        .iter()
        .map(|&m| {
            policy.map_paths(plan.n_paths, |i| {
                let spec = CoupledSpec::new(x0, m, plan.horizon, plan.dt, plan.master_seed, i);
                let outcome = coupled_outcome(model, &spec);
                if let Some(f) = &outcome.failure {
                    log::warn!("m = {m}, path {i} aborted: {f}");
                }
                outcome
            })
        })
        .collect()
}

fn tabulate(plan: &ExperimentPlan, per_mass: &[Vec<PathOutcome>]) -> Result<ExperimentResult> {
    let mut rows = Vec::new();
    let mut exit_rows = Vec::new();
    for (&m, outcomes) in plan.masses.iter().zip(per_mass) {
        let valid: Vec<&PathOutcome> = outcomes.iter().filter(|o| o.failure.is_none()).collect();
        let aborted = (outcomes.len() - valid.len()) as u64;
        let n_valid = valid.len() as u64;
        let exit_count = valid
            .iter()
            .filter(|o| o.exit_time_m.is_some_and(|t| t <= plan.horizon))
            .count() as u64;
        let limit_exits = valid.iter().filter(|o| o.exit_time_limit.is_some()).count() as u64;
        let proportion = |count: u64| -> Result<(f64, f64, f64)> {
            if n_valid == 0 {
                // nothing survived: report the least informative answer
                return Ok((1.0, 0.0, 1.0));
            }
            let (lo, hi) = wilson_interval(count, n_valid)?;
            Ok((count as f64 / n_valid as f64, lo, hi))
        };
        let (p_exit, exit_lo, exit_hi) = proportion(exit_count)?;
        exit_rows.push(ExitRow {
            m,
            p_exit,
            ci_low: exit_lo,
            ci_high: exit_hi,
            exit_count,
            n_valid,
            aborted,
        });
        for &epsilon in &plan.epsilons {
            let exceed_count = valid.iter().filter(|o| o.sup_distance > epsilon).count() as u64;
            let (p_exceed, ci_low, ci_high) = proportion(exceed_count)?;
            rows.push(ConvergenceRow {
                m,
                epsilon,
                p_exceed,
                ci_low,
                ci_high,
                p_exit,
                limit_exits,
                exceed_count,
                exit_count,
                n_valid,
                aborted,
            });
        }
    }
    Ok(ExperimentResult {
        convergence: ConvergenceTable { rows },
        exits: ExitTable { rows: exit_rows },
        n_paths: plan.n_paths,
    })
}

/// Runs an already-built model under `plan` (the plan's model spec is used only for
/// x0 defaults and the record).
pub fn run_with_model<const N: usize, const K: usize>(
    model: &Model<N, K>,
    plan: &ExperimentPlan,
    policy: ExecutionPolicy,
) -> Result<ExperimentResult> {
    plan.validate()?;
    let x0 = plan.resolved_x0();
    if x0.len() != N {
        return Err(Error::DimensionMismatch { expected: N, got: x0.len() });
    }
    if !model.domain().contains(&x0) {
        return Err(Error::InvalidPlan(format!("x0 = {x0:?} is not in the model domain")));
    }
    let outcomes = collect_outcomes(model, plan, policy)?;
    tabulate(plan, &outcomes)
}

pub fn run_experiment(plan: &ExperimentPlan, policy: ExecutionPolicy) -> Result<ExperimentResult> {
    plan.validate()?;
    match plan.model.build()? {
        AnyModel::One(m) => run_with_model(&m, plan, policy),
        AnyModel::Two(m) => run_with_model(&m, plan, policy),
    }
}

/// P̂{sup_{[0,T]} d∞(xᵐ, x) > ε} with Wilson intervals, per (m, ε).
pub fn estimate_exceedance(plan: &ExperimentPlan, policy: ExecutionPolicy) -> Result<ConvergenceTable> {
    Ok(run_experiment(plan, policy)?.convergence)
}

/// P̂{τᵐ ≤ T} with Wilson intervals, per m.
pub fn estimate_exit_probability(plan: &ExperimentPlan, policy: ExecutionPolicy) -> Result<ExitTable> {
    Ok(run_experiment(plan, policy)?.exits)
}

/// True when each successive (smaller-mass) estimate is no larger than its
/// predecessor, or the two Wilson intervals overlap.
pub fn non_increasing_within_ci(estimates: &[(f64, f64, f64)]) -> bool {
    estimates
        .windows(2)
        .all(|w| w[1].0 <= w[0].0 || w[1].1 <= w[0].2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ConstantBenchmark;

    #[test]
    fn wilson_reference_values() {
        let (lo, hi) = wilson_interval(50, 100).unwrap();
        // closed-form evaluation, computed independently
        assert!((lo - 0.40383152963549296).abs() < 1e-14);
        assert!((hi - 0.596168470364507).abs() < 1e-14);
        assert!(((lo + hi) / 2.0 - 0.5).abs() < 1e-15);
        assert_eq!(wilson_interval(0, 100).unwrap().0, 0.0);
        assert_eq!(wilson_interval(100, 100).unwrap().1, 1.0);
        assert!(wilson_interval(3, 2).is_err());
        assert!(wilson_interval(0, 0).is_err());
    }

    fn small_plan() -> ExperimentPlan {
        ExperimentPlan {
            model: ModelSpec::Constant(ConstantBenchmark::default()),
            x0: Some(vec![0.5]),
            horizon: 0.1,
            dt: 1e-3,
            epsilons: vec![0.01, 0.05],
            masses: vec![1e-1, 1e-2],
            n_paths: 16,
            master_seed: 11,
        }
    }

    #[test]
    fn plan_validation() {
        assert!(small_plan().validate().is_ok());
        let with = |f: fn(&mut ExperimentPlan)| {
            let mut p = small_plan();
            f(&mut p);
            p.validate()
        };
        assert!(with(|p| p.n_paths = 0).is_err());
        assert!(with(|p| p.masses = vec![1e-2, 1e-1]).is_err());
        assert!(with(|p| p.masses = vec![1e-1, 1e-1]).is_err());
        assert!(with(|p| p.masses = vec![0.0]).is_err());
        assert!(with(|p| p.dt = 1.0).is_err());
        assert!(with(|p| p.epsilons = vec![]).is_err());
        assert!(with(|p| p.epsilons = vec![0.1, 0.1]).is_err());
        assert!(with(|p| p.x0 = Some(vec![0.0, 0.0])).is_err());
        assert!(with(|p| p.horizon = 0.0).is_ok());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let plan = small_plan();
        let a = run_experiment(&plan, ExecutionPolicy::Sequential).unwrap();
        let b = run_experiment(&plan, ExecutionPolicy::with_threads(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.convergence.to_csv(), b.convergence.to_csv());
        assert_eq!(a.convergence.rows.len(), 4);
    }

    #[test]
    fn zero_horizon_has_no_exits() {
        let mut plan = small_plan();
        plan.horizon = 0.0;
        let t = estimate_exit_probability(&plan, ExecutionPolicy::Sequential).unwrap();
        assert!(t.rows.iter().all(|r| r.p_exit == 0.0));
    }

    #[test]
    fn table_outputs() {
        let r = run_experiment(&small_plan(), ExecutionPolicy::Sequential).unwrap();
        let csv = r.convergence.to_csv();
        assert_eq!(csv.lines().next().unwrap(), ConvergenceTable::CSV_HEADER);
        assert_eq!(csv.lines().count(), 5);
        let mut dat = Vec::new();
        r.convergence.write_gnuplot(&mut dat).unwrap();
        let dat = String::from_utf8(dat).unwrap();
        assert_eq!(dat.matches("# epsilon").count(), 2);
        let json: serde_json::Value = serde_json::from_str(&r.convergence.to_json()).unwrap();
        assert_eq!(json["rows"].as_array().unwrap().len(), 4);
        for row in &r.convergence.rows {
            assert!(row.ci_low <= row.p_exceed && row.p_exceed <= row.ci_high);
            assert!(row.p_exceed >= row.p_exit);
        }
    }

    #[test]
    fn monotone_helper() {
        assert!(non_increasing_within_ci(&[(0.5, 0.4, 0.6), (0.3, 0.2, 0.4)]));
        assert!(non_increasing_within_ci(&[(0.5, 0.4, 0.6), (0.55, 0.45, 0.65)]));
        assert!(!non_increasing_within_ci(&[(0.1, 0.05, 0.15), (0.5, 0.4, 0.6)]));
    }
}

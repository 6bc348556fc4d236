//! Policy evaluation, coverage statistics and sparse-policy inspection.

mod activations;
mod cosanostra;
mod equations;
mod receptive;
mod ttw;

use std::fmt::Write as _;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asnet::{AsnetError, ParameterStore, ProblemNet};
use crate::ppddl::GroundProblem;
use crate::training::{run_policy, ExecMode, RolloutRecord};

pub use activations::{export_activations, ActivationDump, ActivationRow, ActivationStep};
pub use cosanostra::{canonical_delivery_state, verify_cosanostra_inequality, BoothCheck, CosanostraProof, PUBLISHED_REDUCED_PREV};
pub use equations::{evaluate_dump, export_lifted_equations, DumpActivations, EquationTerm, LiftedEquation, LiftedEquationDump, ModuleKind};
pub use receptive::{receptive_field_experiment, ReceptiveFieldCell, ReceptiveFieldConfig, ReceptiveFieldTable};
pub use ttw::{spare_violations, verify_ttw_spare_policy, SpareCheck};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Network(#[from] AsnetError),
    #[error(transparent)]
    Training(#[from] crate::training::TrainError),
    #[error("check failed at booth b{k}: {detail}")]
    AssertionFailure { k: usize, detail: String },
}

/// How many rollouts to run per problem and how to pick actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// `None` picks 30 for probabilistic problems, and for deterministic ones 1 under
    /// argmax or 10 under sampling.
    pub rollouts: Option<usize>,
    pub mode: ExecMode,
    pub seed: u64,
    pub step_limit: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            rollouts: None,
            mode: ExecMode::Argmax,
            seed: 0,
            step_limit: 300,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.rollouts == Some(0) {
            return Err(EvalError::InvalidConfig("rollouts must be at least 1".into()));
        }
        if self.step_limit == 0 {
            return Err(EvalError::InvalidConfig("step_limit must be positive".into()));
        }
        Ok(())
    }

    pub fn rollouts_for(&self, gp: &GroundProblem) -> usize {
        match self.rollouts {
            Some(n) => n,
            None if !gp.is_deterministic() => 30,
            None if self.mode == ExecMode::Sample => 10,
            None => 1,
        }
    }
}

/// Random stream for one rollout, independent of scheduling order.
pub fn rollout_rng(seed: u64, problem: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((problem as u64) << 32) | index as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemCoverage {
    pub problem: String,
    pub attempts: usize,
    pub successes: usize,
    /// Mean cost over successful rollouts.
    pub mean_cost: Option<f64>,
    /// 95% normal-approximation half-width of `mean_cost`.
    pub ci_half_width: Option<f64>,
}

impl ProblemCoverage {
    /// Summarises rollouts given the costs of the successful ones.
    pub fn from_costs(problem: impl Into<String>, attempts: usize, success_costs: &[f64]) -> ProblemCoverage {
        let n = success_costs.len();
        let (mean_cost, ci_half_width) = if n == 0 {
            (None, None)
        } else {
            let mean = success_costs.iter().sum::<f64>() / n as f64;
            let half = if n < 2 {
                0.0
            } else {
                let var = success_costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                1.96 * var.sqrt() / (n as f64).sqrt()
            };
            (Some(mean), Some(half))
        };
        ProblemCoverage {
            problem: problem.into(),
            attempts,
            successes: n,
            mean_cost,
            ci_half_width,
        }
    }

    pub fn fraction(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.successes as f64 / self.attempts as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CoverageReport {
    pub problems: Vec<ProblemCoverage>,
}

impl CoverageReport {
    /// Sum of per-problem success fractions.
    pub fn cumulative_coverage(&self) -> f64 {
        self.problems.iter().map(ProblemCoverage::fraction).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn render_table(&self) -> String {
        let width = self.problems.iter().map(|p| p.problem.len()).max().unwrap_or(0).max(7);
        let mut out = String::new();
        writeln!(out, "{:<width$}  {:>9}  {:>10}  {:>8}", "problem", "coverage", "mean cost", "95% ci").unwrap();
        for p in &self.problems {
            let cost = p.mean_cost.map_or("-".to_string(), |c| format!("{c:.2}"));
            let ci = p.ci_half_width.map_or("-".to_string(), |c| format!("{c:.2}"));
            let cov = format!("{}/{}", p.successes, p.attempts);
            writeln!(out, "{:<width$}  {cov:>9}  {cost:>10}  {ci:>8}", p.problem).unwrap();
        }
        writeln!(out, "cumulative coverage {:.2} of {}", self.cumulative_coverage(), self.problems.len()).unwrap();
        out
    }
}

/// All rollouts of one problem, in rollout-index order.
pub fn problem_rollouts(store: &ParameterStore, net: &ProblemNet, problem: usize, n: usize, cfg: &EvalConfig) -> Result<Vec<RolloutRecord>, EvalError> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rollout_rng(cfg.seed, problem, i);
            Ok(run_policy(store, net, &net.gp.s0, &mut rng, cfg.step_limit, cfg.mode)?)
        })
        .collect()
}

/// Runs the policy on every problem and tallies goal-reaching rollouts.
pub fn evaluate(store: &ParameterStore, problems: &[Arc<GroundProblem>], cfg: &EvalConfig) -> Result<CoverageReport, EvalError> {
    cfg.validate()?;
    let nets = problems.iter().map(|gp| ProblemNet::new(gp.clone(), store)).collect::<Result<Vec<_>, _>>()?;
    let mut report = CoverageReport::default();
    for (p, net) in nets.iter().enumerate() {
        let n = cfg.rollouts_for(&net.gp);
        let recs = problem_rollouts(store, net, p, n, cfg)?;
        let costs: Vec<f64> = recs.iter().filter(|r| r.reached_goal()).map(|r| r.cost).collect();
        report.problems.push(ProblemCoverage::from_costs(net.gp.name.clone(), n, &costs));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains;
    use crate::fixtures;

    #[test]
    fn worked_coverage_example() {
        let mut report = CoverageReport::default();
        report.problems.push(ProblemCoverage::from_costs("a", 30, &[1.0; 30]));
        report.problems.push(ProblemCoverage::from_costs("b", 30, &[1.0; 15]));
        for name in ["c", "d", "e"] {
            report.problems.push(ProblemCoverage::from_costs(name, 30, &[]));
        }
        assert_eq!(report.cumulative_coverage(), 1.5);
        assert!(report.render_table().contains("15/30"));
    }

    #[test]
    fn confidence_interval() {
        let equal = ProblemCoverage::from_costs("p", 5, &[4.0, 4.0, 4.0]);
        assert_eq!(equal.ci_half_width, Some(0.0));
        let spread = ProblemCoverage::from_costs("p", 4, &[1.0, 3.0]);
        // Sample sd sqrt(2), n 2.
        assert!((spread.ci_half_width.unwrap() - 1.96).abs() < 1e-12);
        assert_eq!(spread.mean_cost, Some(2.0));
        assert_eq!(ProblemCoverage::from_costs("p", 3, &[]).mean_cost, None);
    }

    #[test]
    fn empty_problem_list() {
        let store = fixtures::ttw_sparse_store();
        let r = evaluate(&store, &[], &EvalConfig::default()).unwrap();
        assert_eq!(r.cumulative_coverage(), 0.0);
        assert!(r.problems.is_empty());
    }

    #[test]
    fn default_rollout_counts() {
        let ttw = domains::triangle_tireworld(1).ground().unwrap();
        let bw = domains::blocksworld(3, 1, false).ground().unwrap();
        let mut cfg = EvalConfig::default();
        assert_eq!(cfg.rollouts_for(&ttw), 30);
        assert_eq!(cfg.rollouts_for(&bw), 1);
        cfg.mode = ExecMode::Sample;
        assert_eq!(cfg.rollouts_for(&bw), 10);
        cfg.rollouts = Some(0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sparse_ttw_policy_covers_and_repeats() {
        let store = fixtures::ttw_sparse_store();
        let problems: Vec<_> = (1..=3).map(|n| Arc::new(domains::triangle_tireworld(n).ground().unwrap())).collect();
        let cfg = EvalConfig {
            seed: 5,
            ..EvalConfig::default()
        };
        let a = evaluate(&store, &problems, &cfg).unwrap();
        assert_eq!(a.cumulative_coverage(), 3.0);
        assert_eq!(a, evaluate(&store, &problems, &cfg).unwrap());
    }

    #[test]
    fn mismatched_store_is_rejected() {
        let store = fixtures::ttw_sparse_store();
        let cn = Arc::new(domains::cosanostra(2).ground().unwrap());
        assert!(matches!(evaluate(&store, &[cn], &EvalConfig::default()), Err(EvalError::Network(AsnetError::ShapeMismatch(_)))));
    }
}

//! Rollout check for Triangle Tireworld policies that should stay on spare locations.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::asnet::{ParameterStore, ProblemNet};
use crate::domains;
use crate::eval::{problem_rollouts, EvalConfig, EvalError};
use crate::ppddl::GroundProblem;
use crate::ssp::applicable_actions;
use crate::training::{ExecMode, RolloutRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpareCheck {
    pub size: usize,
    pub attempts: usize,
    pub successes: usize,
    /// `(rollout, step)` pairs where the policy skipped an available spare location.
    pub violations: Vec<(usize, usize)>,
}

impl SpareCheck {
    pub fn passed(&self) -> bool {
        self.successes == self.attempts && self.violations.is_empty()
    }
}

fn spare_at(gp: &GroundProblem, s: &crate::ssp::State, loc: &str) -> bool {
    gp.prop_index(&format!("spare-in({loc})")).is_some_and(|p| s.contains(p))
}

/// Steps of `rec` where a move went to a location without a spare although an
/// enabled move to one with a spare existed.
pub fn spare_violations(gp: &GroundProblem, rec: &RolloutRecord) -> Vec<usize> {
    let mut bad = Vec::new();
    for (i, (&a, s)) in rec.actions.iter().zip(&rec.states).enumerate() {
        if gp.actions[a].schema != "move-car" {
            continue;
        }
        let lands_on_spare = |a: usize| spare_at(gp, s, &gp.actions[a].binding[1]);
        let available = applicable_actions(gp, s).into_iter().any(|b| gp.actions[b].schema == "move-car" && lands_on_spare(b));
        if available && !lands_on_spare(a) {
            bad.push(i);
        }
    }
    bad
}

/// Runs `rollouts` argmax rollouts on each size in `1..=max_size`.
pub fn verify_ttw_spare_policy(store: &ParameterStore, max_size: usize, rollouts: usize, seed: u64) -> Result<Vec<SpareCheck>, EvalError> {
    let cfg = EvalConfig {
        rollouts: Some(rollouts),
        mode: ExecMode::Argmax,
        seed,
        ..EvalConfig::default()
    };
    cfg.validate()?;
    let mut out = Vec::new();
    for n in 1..=max_size {
        let gp = Arc::new(domains::triangle_tireworld(n).ground().expect("generator output grounds"));
        let net = ProblemNet::new(gp.clone(), store)?;
        let recs = problem_rollouts(store, &net, n, rollouts, &cfg)?;
        let violations = recs.iter().enumerate().flat_map(|(r, rec)| spare_violations(&gp, rec).into_iter().map(move |i| (r, i))).collect();
        out.push(SpareCheck {
            size: n,
            attempts: rollouts,
            successes: recs.iter().filter(|r| r.reached_goal()).count(),
            violations,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::training::RolloutOutcome;

    #[test]
    fn sparse_fixture_stays_on_spares() {
        let checks = verify_ttw_spare_policy(&fixtures::ttw_sparse_store(), 3, 10, 1).unwrap();
        assert!(checks.iter().all(SpareCheck::passed), "{checks:?}");
    }

    #[test]
    fn inside_edge_move_is_flagged() {
        let gp = domains::triangle_tireworld(1).ground().unwrap();
        // From the start corner, one road leads along the spare edge and one along the bare edge.
        let moves: Vec<usize> = applicable_actions(&gp, &gp.s0).into_iter().filter(|&a| gp.actions[a].schema == "move-car").collect();
        let bare = moves.iter().copied().find(|&a| !spare_at(&gp, &gp.s0, &gp.actions[a].binding[1])).expect("a move without a spare");
        let next = crate::ssp::successor_distribution(&gp, &gp.s0, bare).unwrap().0[0].0.clone();
        let rec = RolloutRecord {
            states: vec![gp.s0.clone(), next],
            counts: vec![vec![0; gp.num_actions()]; 2],
            actions: vec![bare],
            outcome: RolloutOutcome::StepLimit,
            cost: 1.0,
        };
        assert_eq!(spare_violations(&gp, &rec), [0]);
    }
}

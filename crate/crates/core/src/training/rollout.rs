use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::asnet::{AsnetError, ParameterStore, ProblemNet};
use crate::ssp::{sample_successor, State};

/// Probabilities this close to the maximum count as tied.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ExecMode {
    /// Draw each action from the policy distribution.
    #[serde(alias = "stochastic")]
    Sample,
    /// Most probable action, ties broken by action name.
    #[default]
    Argmax,
    /// Most probable action, ties broken uniformly at random.
    ArgmaxRandomTie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutOutcome {
    Goal,
    DeadEnd,
    StepLimit,
}

/// One policy execution: `actions[i]` leads from `states[i]` to `states[i + 1]`, and
/// `counts[i]` holds the per-action execution counts on arrival at `states[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutRecord {
    pub states: Vec<State>,
    pub counts: Vec<Vec<u32>>,
    pub actions: Vec<usize>,
    pub outcome: RolloutOutcome,
    pub cost: f64,
}

impl RolloutRecord {
    pub fn reached_goal(&self) -> bool {
        self.outcome == RolloutOutcome::Goal
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Picks an action from a masked policy; `None` when nothing is enabled.
pub fn choose_action<R: Rng + ?Sized>(net: &ProblemNet, pi: &[f64], enabled: &[bool], mode: ExecMode, rng: &mut R) -> Option<usize> {
    let best = pi.iter().zip(enabled).filter(|(_, &e)| e).map(|(&p, _)| p).fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return None;
    }
    let ties = || (0..pi.len()).filter(move |&a| enabled[a] && pi[a] >= best - TIE_TOL);
    match mode {
        ExecMode::Argmax => ties().min_by(|&a, &b| net.gp.actions[a].name.cmp(&net.gp.actions[b].name)),
        ExecMode::ArgmaxRandomTie => {
            let t: Vec<usize> = ties().collect();
            Some(t[rng.gen_range(0..t.len())])
        }
        ExecMode::Sample => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut last = None;
            for a in (0..pi.len()).filter(|&a| enabled[a]) {
                acc += pi[a];
                last = Some(a);
                if u < acc {
                    return Some(a);
                }
            }
            last
        }
    }
}

/// Executes the network policy from `s0` until the goal, a state without enabled
/// actions, or `step_limit` steps.
pub fn run_policy<R: Rng + ?Sized>(store: &ParameterStore, net: &ProblemNet, s0: &State, rng: &mut R, step_limit: usize, mode: ExecMode) -> Result<RolloutRecord, AsnetError> {
    let gp = &net.gp;
    let mut counts = vec![0u32; gp.num_actions()];
    let mut rec = RolloutRecord {
        states: vec![s0.clone()],
        counts: vec![counts.clone()],
        actions: Vec::new(),
        outcome: RolloutOutcome::StepLimit,
        cost: 0.0,
    };
    let mut cur = s0.clone();
    loop {
        if gp.is_goal(&cur) {
            rec.outcome = RolloutOutcome::Goal;
            break;
        }
        if rec.actions.len() >= step_limit {
            break;
        }
        let f = net.features(&cur, &counts);
        let pi = match net.policy_for(store, &f) {
            Ok(pi) => pi,
            Err(AsnetError::NoEnabledActions) => {
                rec.outcome = RolloutOutcome::DeadEnd;
                break;
            }
            Err(e) => return Err(e),
        };
        let a = choose_action(net, &pi, &f.enabled, mode, rng).expect("policy has an enabled action");
        cur = sample_successor(gp, &cur, a, rng).expect("chosen action is enabled");
        counts[a] += 1;
        rec.cost += gp.actions[a].cost;
        rec.actions.push(a);
        rec.states.push(cur.clone());
        rec.counts.push(counts.clone());
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asnet::{init_params, Hyper, InitScheme};
    use crate::domains;
    use crate::ppddl::{ground, parse_domain, parse_problem};
    use crate::relatedness::{schema_signature, FeatureFlags};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn net_for(gp: crate::ppddl::GroundProblem, seed: u64) -> (ParameterStore, ProblemNet) {
        let gp = Arc::new(gp);
        let hyper = Hyper {
            layers: 1,
            d_h: 4,
            flags: FeatureFlags::default(),
        };
        let store = init_params(&schema_signature(&gp.domain), hyper, &mut ChaCha8Rng::seed_from_u64(seed), InitScheme::GlorotUniform);
        let net = ProblemNet::new(gp, &store).unwrap();
        (store, net)
    }

    #[test]
    fn goal_start_is_zero_steps() {
        let gp = domains::two_chain(2, true).ground().unwrap();
        let goal = gp.state_from_names(&["at(shakey,l2)"]).unwrap();
        let (store, net) = net_for(gp, 1);
        let r = run_policy(&store, &net, &goal, &mut ChaCha8Rng::seed_from_u64(0), 300, ExecMode::Sample).unwrap();
        assert!(r.reached_goal());
        assert!(r.is_empty());
        assert_eq!(r.states.len(), 1);
    }

    const LINE: &str = "(define (domain line) (:predicates (at ?x) (next ?x ?y))
        (:action step :parameters (?x ?y) :precondition (and (at ?x) (next ?x ?y))
          :effect (and (not (at ?x)) (at ?y))))";

    #[test]
    fn forced_chain_trace() {
        let d = parse_domain(LINE).unwrap();
        let p = parse_problem(
            "(define (problem p) (:domain line) (:objects a b c d)
               (:init (at a) (next a b) (next b c) (next c d)) (:goal (at d)))",
        )
        .unwrap();
        let (store, net) = net_for(ground(&d, &p).unwrap(), 2);
        let s0 = net.gp.s0.clone();
        let r = run_policy(&store, &net, &s0, &mut ChaCha8Rng::seed_from_u64(3), 300, ExecMode::Sample).unwrap();
        let names: Vec<&str> = r.actions.iter().map(|&a| net.gp.actions[a].name.as_str()).collect();
        assert_eq!(names, ["step(a,b)", "step(b,c)", "step(c,d)"]);
        assert_eq!(r.cost, 3.0);
        assert_eq!(r.counts[3].iter().sum::<u32>(), 3);
        let truncated = run_policy(&store, &net, &s0, &mut ChaCha8Rng::seed_from_u64(3), 2, ExecMode::Argmax).unwrap();
        assert_eq!(truncated.outcome, RolloutOutcome::StepLimit);
        assert_eq!(truncated.len(), 2);
    }

    #[test]
    fn seeded_rollouts_repeat() {
        let (store, net) = net_for(domains::triangle_tireworld(2).ground().unwrap(), 4);
        let s0 = net.gp.s0.clone();
        let a = run_policy(&store, &net, &s0, &mut ChaCha8Rng::seed_from_u64(9), 300, ExecMode::Sample).unwrap();
        let b = run_policy(&store, &net, &s0, &mut ChaCha8Rng::seed_from_u64(9), 300, ExecMode::Sample).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn argmax_ties_break_by_name() {
        let (_, net) = net_for(domains::two_chain(1, true).ground().unwrap(), 5);
        let n = net.gp.num_actions();
        let pi = vec![1.0 / n as f64; n];
        let enabled = vec![true; n];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = choose_action(&net, &pi, &enabled, ExecMode::Argmax, &mut rng).unwrap();
        let first = net.gp.actions.iter().map(|x| x.name.as_str()).min().unwrap();
        assert_eq!(net.gp.actions[a].name, first);
        let picks: std::collections::HashSet<usize> = (0..50).map(|_| choose_action(&net, &pi, &enabled, ExecMode::ArgmaxRandomTie, &mut rng).unwrap()).collect();
        assert_eq!(picks.len(), n);
        assert_eq!(choose_action(&net, &pi, &vec![false; n], ExecMode::Sample, &mut rng), None);
    }
}

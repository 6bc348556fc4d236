//! Factored SSP semantics: transitions, determinisation, relaxation and exact oracles.

mod state;

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ppddl::{CondEffect, GroundAction, GroundProblem, Outcome};
pub use state::State;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FsspudeConfig {
    pub dead_end_penalty: f64,
    pub rollout_step_limit: usize,
}

impl Default for FsspudeConfig {
    fn default() -> Self {
        FsspudeConfig {
            dead_end_penalty: 500.0,
            rollout_step_limit: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SspError {
    #[error("action {action} is not applicable")]
    InapplicableAction { action: usize },
    #[error("state space exceeds cap of {cap} states")]
    CapExceeded { cap: usize },
}

/// Successor states with merged probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDistribution(pub Vec<(State, f64)>);

impl TransitionDistribution {
    pub fn total(&self) -> f64 {
        self.0.iter().map(|(_, p)| p).sum()
    }
}

pub fn applicable_actions(gp: &GroundProblem, s: &State) -> Vec<usize> {
    gp.actions
        .iter()
        .filter(|a| a.is_applicable(s))
        .map(|a| a.index)
        .collect()
}

pub(crate) fn apply_effects(effects: &[CondEffect], s: &State) -> State {
    let mut next = s.clone();
    let firing: Vec<&CondEffect> = effects.iter().filter(|e| e.fires(s)).collect();
    for e in &firing {
        for &d in &e.del {
            next.remove(d);
        }
    }
    for e in &firing {
        for &a in &e.add {
            next.insert(a);
        }
    }
    next
}

pub fn apply_outcome(gp: &GroundProblem, s: &State, action: usize, outcome: usize) -> Result<State, SspError> {
    let a = &gp.actions[action];
    if !a.is_applicable(s) {
        return Err(SspError::InapplicableAction { action });
    }
    Ok(apply_effects(&a.outcomes[outcome].effects, s))
}

pub fn successor_distribution(gp: &GroundProblem, s: &State, action: usize) -> Result<TransitionDistribution, SspError> {
    let a = &gp.actions[action];
    if !a.is_applicable(s) {
        return Err(SspError::InapplicableAction { action });
    }
    Ok(TransitionDistribution(successors_unchecked(a, s)))
}

pub(crate) fn successors_unchecked(a: &GroundAction, s: &State) -> Vec<(State, f64)> {
    let mut out: Vec<(State, f64)> = Vec::with_capacity(a.outcomes.len());
    for o in &a.outcomes {
        let next = apply_effects(&o.effects, s);
        match out.iter_mut().find(|(t, _)| *t == next) {
            Some(e) => e.1 += o.probability,
            None => out.push((next, o.probability)),
        }
    }
    out
}

/// Index of the outcome selected by a uniform draw `u` in [0,1).
pub(crate) fn pick_outcome(a: &GroundAction, u: f64) -> usize {
    let mut acc = 0.0;
    for (i, o) in a.outcomes.iter().enumerate() {
        acc += o.probability;
        if u < acc {
            return i;
        }
    }
    a.outcomes.len() - 1
}

pub fn sample_successor<R: Rng + ?Sized>(gp: &GroundProblem, s: &State, action: usize, rng: &mut R) -> Result<State, SspError> {
    let a = &gp.actions[action];
    if !a.is_applicable(s) {
        return Err(SspError::InapplicableAction { action });
    }
    if a.outcomes.len() == 1 {
        return Ok(apply_effects(&a.outcomes[0].effects, s));
    }
    let u: f64 = rng.gen();
    Ok(apply_effects(&a.outcomes[pick_outcome(a, u)].effects, s))
}

/// One deterministic action per non-no-op outcome, each pointing back at its source.
pub fn all_outcomes_determinise(gp: &GroundProblem) -> GroundProblem {
    let mut actions = Vec::new();
    for a in &gp.actions {
        let real: Vec<(usize, &Outcome)> = a.outcomes.iter().enumerate().filter(|(_, o)| !o.is_noop()).collect();
        let single = real.len() == 1 && a.outcomes.len() == 1;
        for (k, o) in real {
            let mut d = a.clone();
            if !single {
                d.name = format!("{}#{}", a.name, k);
            }
            d.outcomes = vec![Outcome {
                probability: 1.0,
                effects: o.effects.clone(),
            }];
            d.source = Some((a.index, k));
            actions.push(d);
        }
    }
    gp.with_actions(actions)
}

/// Drops delete effects and negative preconditions.
pub fn delete_relax(gp: &GroundProblem) -> GroundProblem {
    let actions = gp
        .actions
        .iter()
        .map(|a| {
            let mut r = a.clone();
            r.pre_neg.clear();
            r.pre_clauses.retain(|c| c.iter().all(|l| l.positive));
            for o in r.outcomes.iter_mut() {
                for e in o.effects.iter_mut() {
                    e.del.clear();
                    e.cond_neg.clear();
                }
                o.effects.retain(|e| !e.add.is_empty());
            }
            r.source = a.source.or(Some((a.index, 0)));
            r
        })
        .collect();
    gp.with_actions(actions)
}

/// Reachable states indexed in BFS discovery order.
#[derive(Debug, Clone)]
pub struct StateSpace {
    pub states: Vec<State>,
    pub index: HashMap<State, usize>,
}

impl StateSpace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// BFS over all outcomes from every initial state; goal states are not expanded when absorbing.
pub fn enumerate_reachable_states(gp: &GroundProblem, cap: usize, goal_absorbing: bool) -> Result<StateSpace, SspError> {
    let mut space = StateSpace {
        states: Vec::new(),
        index: HashMap::new(),
    };
    let push = |s: State, space: &mut StateSpace| -> Result<(), SspError> {
        if !space.index.contains_key(&s) {
            if space.states.len() >= cap {
                return Err(SspError::CapExceeded { cap });
            }
            space.index.insert(s.clone(), space.states.len());
            space.states.push(s);
        }
        Ok(())
    };
    push(gp.s0.clone(), &mut space)?;
    for (s, _) in &gp.initial_states {
        push(s.clone(), &mut space)?;
    }
    let mut head = 0;
    while head < space.states.len() {
        let s = space.states[head].clone();
        head += 1;
        if goal_absorbing && gp.is_goal(&s) {
            continue;
        }
        for a in &gp.actions {
            if !a.is_applicable(&s) {
                continue;
            }
            for o in &a.outcomes {
                push(apply_effects(&o.effects, &s), &mut space)?;
            }
        }
    }
    Ok(space)
}

#[derive(Debug, Clone)]
pub struct ValueTable {
    pub space: StateSpace,
    pub values: Vec<f64>,
    /// Greedy action per state; `None` at goals and dead ends.
    pub policy: Vec<Option<usize>>,
    pub dead_end_penalty: f64,
}

impl ValueTable {
    pub fn value(&self, s: &State) -> Option<f64> {
        self.space.index.get(s).map(|&i| self.values[i])
    }

    /// Q-values of every applicable action at a state of the table.
    pub fn q_values(&self, gp: &GroundProblem, s: &State) -> Vec<(usize, f64)> {
        gp.actions
            .iter()
            .filter(|a| a.is_applicable(s))
            .map(|a| (a.index, self.q(a, s)))
            .collect()
    }

    fn q(&self, a: &GroundAction, s: &State) -> f64 {
        let mut q = a.cost;
        for o in &a.outcomes {
            let next = apply_effects(&o.effects, s);
            q += o.probability * self.values[self.space.index[&next]];
        }
        q
    }
}

/// Gauss-Seidel value iteration with values capped at the dead-end penalty.
pub fn value_iteration(gp: &GroundProblem, cfg: &FsspudeConfig, tol: f64, cap: usize) -> Result<ValueTable, SspError> {
    let space = enumerate_reachable_states(gp, cap, true)?;
    let d = cfg.dead_end_penalty;
    let n = space.len();
    // Pre-expanded transitions: per state, per applicable action, (cost, [(succ, p)]).
    let mut trans: Vec<Vec<(usize, f64, Vec<(usize, f64)>)>> = Vec::with_capacity(n);
    let mut is_goal = Vec::with_capacity(n);
    for s in &space.states {
        let goal = gp.is_goal(s);
        is_goal.push(goal);
        let mut acts = Vec::new();
        if !goal {
            for a in &gp.actions {
                if a.is_applicable(s) {
                    let succ = successors_unchecked(a, s)
                        .into_iter()
                        .map(|(t, p)| (space.index[&t], p))
                        .collect();
                    acts.push((a.index, a.cost, succ));
                }
            }
        }
        trans.push(acts);
    }
    let mut values = vec![0.0; n];
    loop {
        let mut residual: f64 = 0.0;
        for i in 0..n {
            if is_goal[i] {
                continue;
            }
            let mut best = d;
            for (_, c, succ) in &trans[i] {
                let q = c + succ.iter().map(|(j, p)| p * values[*j]).sum::<f64>();
                best = best.min(q);
            }
            residual = residual.max((best - values[i]).abs());
            values[i] = best;
        }
        if residual < tol {
            break;
        }
    }
    let policy = (0..n)
        .map(|i| {
            let mut best: Option<(usize, f64)> = None;
            for (a, c, succ) in &trans[i] {
                let q = c + succ.iter().map(|(j, p)| p * values[*j]).sum::<f64>();
                if q < d && best.map_or(true, |(_, b)| q < b) {
                    best = Some((*a, q));
                }
            }
            best.map(|(a, _)| a)
        })
        .collect();
    Ok(ValueTable {
        space,
        values,
        policy,
        dead_end_penalty: d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn robot() -> GroundProblem {
        domains::unreliable_robot_errand().ground().unwrap()
    }

    #[test]
    fn robot_transitions() {
        let gp = robot();
        let apps = applicable_actions(&gp, &gp.s0);
        let names: Vec<&str> = apps.iter().map(|&a| gp.actions[a].name.as_str()).collect();
        assert_eq!(names, ["drive(shakey,kitchen,hall)"]);
        let a = apps[0];
        let d = successor_distribution(&gp, &gp.s0, a).unwrap();
        assert_eq!(d.0.len(), 2);
        assert!((d.0[0].1 - 0.9).abs() < 1e-12 && (d.0[1].1 - 0.1).abs() < 1e-12);
        assert_eq!(gp.state_names(&d.0[0].0), ["at(shakey,hall)", "path(hall,kitchen)", "path(hall,office)", "path(kitchen,hall)", "path(office,hall)"]);
        assert_eq!(d.0[1].0, gp.s0);
        let moved = apply_outcome(&gp, &gp.s0, a, 0).unwrap();
        assert!(moved.contains(gp.prop_index("at(shakey,hall)").unwrap()));
        assert!(!moved.contains(gp.prop_index("at(shakey,kitchen)").unwrap()));
        let other = gp.action_index("drive(shakey,hall,office)").unwrap();
        assert_eq!(apply_outcome(&gp, &gp.s0, other, 0), Err(SspError::InapplicableAction { action: other }));
    }

    #[test]
    fn sampling_follows_cumulative_order() {
        let gp = robot();
        let a = applicable_actions(&gp, &gp.s0)[0];
        assert_eq!(pick_outcome(&gp.actions[a], 0.5), 0);
        assert_eq!(pick_outcome(&gp.actions[a], 0.95), 1);
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            assert_eq!(sample_successor(&gp, &gp.s0, a, &mut r1), sample_successor(&gp, &gp.s0, a, &mut r2));
        }
    }

    #[test]
    fn determinisation_drops_noops() {
        let gp = robot();
        let det = all_outcomes_determinise(&gp);
        assert_eq!(det.num_actions(), gp.num_actions());
        assert!(det.actions.iter().all(|a| a.outcomes.len() == 1 && a.source.is_some()));
        let ttw = domains::triangle_tireworld(1).ground().unwrap();
        let det = all_outcomes_determinise(&ttw);
        let moves = ttw.actions.iter().filter(|a| a.schema == "move-car").count();
        let changes = ttw.actions.len() - moves;
        assert_eq!(det.num_actions(), 2 * moves + changes);
    }

    #[test]
    fn robot_state_count_and_values() {
        let gp = robot();
        let space = enumerate_reachable_states(&gp, 100, true).unwrap();
        assert_eq!(space.len(), 3);
        let vt = value_iteration(&gp, &FsspudeConfig::default(), 1e-12, 100).unwrap();
        // Two 90% moves: each takes 1/0.9 attempts in expectation.
        assert!((vt.value(&gp.s0).unwrap() - 2.0 / 0.9).abs() < 1e-9);
        assert!(matches!(enumerate_reachable_states(&gp, 2, true), Err(SspError::CapExceeded { cap: 2 })));
    }

    #[test]
    fn detonation_destroys_the_table() {
        let domain = crate::ppddl::parse_domain(
            "(define (domain ebw) (:requirements :probabilistic-effects :conditional-effects)
               (:predicates (holding ?b) (on-table ?b) (emptyhand) (no-detonated ?b) (no-destroyed-table))
               (:action put-down-on-table :parameters (?b)
                 :precondition (and (holding ?b) (no-destroyed-table))
                 :effect (and (emptyhand) (on-table ?b) (not (holding ?b))
                   (probabilistic 2/5 (when (no-detonated ?b)
                     (and (not (no-destroyed-table)) (not (no-detonated ?b))))))))",
        )
        .unwrap();
        let problem = crate::ppddl::parse_problem(
            "(define (problem two) (:domain ebw) (:objects b1 b2)
               (:init (holding b1) (on-table b2) (no-detonated b1) (no-detonated b2) (no-destroyed-table))
               (:goal (on-table b1)))",
        )
        .unwrap();
        let gp = crate::ppddl::ground(&domain, &problem).unwrap();
        let a = gp.action_index("put-down-on-table(b1)").unwrap();
        let boom = gp.actions[a].outcomes.iter().position(|o| (o.probability - 0.4).abs() < 1e-12).unwrap();
        let s = apply_outcome(&gp, &gp.s0, a, boom).unwrap();
        assert_eq!(gp.state_names(&s), ["emptyhand()", "no-detonated(b2)", "on-table(b1)", "on-table(b2)"]);
        // The calm outcome keeps the table and the charge.
        let calm = 1 - boom;
        let s = apply_outcome(&gp, &gp.s0, a, calm).unwrap();
        assert!(s.contains(gp.prop_index("no-destroyed-table()").unwrap()));
        assert!(s.contains(gp.prop_index("no-detonated(b1)").unwrap()));
    }

    #[test]
    fn relaxation_clears_deletes() {
        let gp = robot();
        let r = delete_relax(&all_outcomes_determinise(&gp));
        assert!(r.actions.iter().all(|a| a.outcomes[0].effects.iter().all(|e| e.del.is_empty())));
    }
}

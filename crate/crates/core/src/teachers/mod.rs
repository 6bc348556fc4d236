//! Teacher planners that label states for imitation learning.
//!
//! Deterministic searches (A*, GBFS) run on the all-outcomes determinisation; LRTDP
//! runs on the probabilistic problem itself. Every teacher yields Q-values for the
//! enabled actions of a state, and the minimum-cost actions are labelled optimal.

mod lrtdp;
mod search;

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::heuristics::{Heuristic, HeuristicKind};
use crate::ppddl::GroundProblem;
use crate::ssp::{all_outcomes_determinise, applicable_actions, sample_successor, successor_distribution, State};

pub use lrtdp::{lrtdp_solve, LrtdpTable};
pub use search::{astar_plan, gbfs_plan, Plan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchKind {
    /// LRTDP on probabilistic problems, A* on deterministic ones.
    Auto,
    Astar,
    Gbfs,
    Lrtdp,
}

impl SearchKind {
    pub fn parse(s: &str) -> Option<SearchKind> {
        Some(match s {
            "auto" => SearchKind::Auto,
            "astar" | "a*" => SearchKind::Astar,
            "gbfs" => SearchKind::Gbfs,
            "lrtdp" => SearchKind::Lrtdp,
            _ => return None,
        })
    }

    /// The concrete search used on `gp`.
    pub fn resolve(self, gp: &GroundProblem) -> SearchKind {
        match self {
            SearchKind::Auto if gp.is_deterministic() => SearchKind::Astar,
            SearchKind::Auto => SearchKind::Lrtdp,
            k => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TeacherConfig {
    pub search: SearchKind,
    pub heuristic: HeuristicKind,
    /// LRTDP convergence tolerance.
    pub epsilon: f64,
    /// Wall-clock seconds per teacher invocation.
    pub timeout: f64,
    pub dead_end_penalty: f64,
    /// Actions within this much of the best Q are all labelled optimal.
    pub label_tol: f64,
    pub step_limit: usize,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        TeacherConfig {
            search: SearchKind::Auto,
            heuristic: HeuristicKind::Hadd,
            epsilon: 1e-4,
            timeout: 10.0,
            dead_end_penalty: 500.0,
            label_tol: 1e-4,
            step_limit: 300,
        }
    }
}

impl TeacherConfig {
    pub fn validate(&self) -> Result<(), TeacherError> {
        if !(self.epsilon > 0.0) {
            return Err(TeacherError::InvalidConfig("epsilon must be positive".into()));
        }
        if !(self.timeout > 0.0) {
            return Err(TeacherError::InvalidConfig("timeout must be positive".into()));
        }
        if !(self.dead_end_penalty > 0.0) || !(self.label_tol >= 0.0) {
            return Err(TeacherError::InvalidConfig("dead-end penalty and label tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TeacherError {
    #[error("no plan exists")]
    Unsolvable,
    #[error("teacher timed out")]
    Timeout,
    #[error("state is a goal")]
    GoalState,
    #[error("invalid teacher config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherStatus {
    Ok,
    Timeout,
    DeadEnd,
}

/// Q-values and labels for the enabled actions of one state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TeacherVerdict {
    pub status: TeacherStatus,
    /// Enabled action indices, ascending.
    pub actions: Vec<usize>,
    pub q: Vec<f64>,
    pub labels: Vec<bool>,
}

impl TeacherVerdict {
    fn timeout() -> TeacherVerdict {
        TeacherVerdict {
            status: TeacherStatus::Timeout,
            actions: Vec::new(),
            q: Vec::new(),
            labels: Vec::new(),
        }
    }

    /// Labels every action within `tol` of the best Q; dead end when nothing beats `d`.
    pub fn from_q(actions: Vec<usize>, q: Vec<f64>, tol: f64, d: f64) -> TeacherVerdict {
        let best = q.iter().copied().fold(f64::INFINITY, f64::min);
        let dead = actions.is_empty() || best >= d - 1e-9;
        let labels = if dead {
            vec![false; q.len()]
        } else {
            q.iter().map(|&v| v <= best + tol).collect()
        };
        TeacherVerdict {
            status: if dead { TeacherStatus::DeadEnd } else { TeacherStatus::Ok },
            actions,
            q,
            labels,
        }
    }

    /// Lowest-index action labelled optimal.
    pub fn first_optimal(&self) -> Option<usize> {
        self.actions.iter().zip(&self.labels).find(|(_, &y)| y).map(|(&a, _)| a)
    }

    pub fn label_of(&self, action: usize) -> bool {
        self.actions
            .iter()
            .position(|&a| a == action)
            .map(|i| self.labels[i])
            .unwrap_or(false)
    }
}

/// Per-problem teacher results: verdicts, skip list of timed-out states, and memoised
/// cost-to-go of the deterministic planners.
#[derive(Debug, Default)]
pub struct TeacherCache {
    verdicts: Mutex<HashMap<State, Arc<TeacherVerdict>>>,
    skip: Mutex<HashSet<State>>,
    plan_costs: Mutex<HashMap<State, f64>>,
    invocations: AtomicUsize,
}

impl TeacherCache {
    pub fn get(&self, s: &State) -> Option<Arc<TeacherVerdict>> {
        self.verdicts.lock().unwrap().get(s).cloned()
    }

    pub fn is_skipped(&self, s: &State) -> bool {
        self.skip.lock().unwrap().contains(s)
    }

    pub fn len(&self) -> usize {
        self.verdicts.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of states the planner was actually invoked on.
    pub fn invocations(&self) -> usize {
        self.invocations.load(Ordering::Relaxed)
    }

    pub fn clear(&self) {
        self.verdicts.lock().unwrap().clear();
        self.skip.lock().unwrap().clear();
        self.plan_costs.lock().unwrap().clear();
    }
}

/// Trajectory followed by a teacher: `actions[i]` leads from `states[i]` to `states[i + 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TeacherTrajectory {
    pub states: Vec<State>,
    pub actions: Vec<usize>,
    pub reached_goal: bool,
}

/// A teacher bound to one ground problem.
#[derive(Debug)]
pub struct Teacher {
    pub gp: Arc<GroundProblem>,
    pub det: GroundProblem,
    pub heuristic: Heuristic,
    pub cfg: TeacherConfig,
    pub cache: TeacherCache,
    lrtdp: Mutex<LrtdpTable>,
}

impl Teacher {
    pub fn new(gp: Arc<GroundProblem>, mut cfg: TeacherConfig) -> Result<Teacher, TeacherError> {
        cfg.validate()?;
        cfg.search = cfg.search.resolve(&gp);
        let det = all_outcomes_determinise(&gp);
        let heuristic = Heuristic::new(cfg.heuristic, &det);
        Ok(Teacher {
            lrtdp: Mutex::new(LrtdpTable::new(cfg.dead_end_penalty)),
            gp,
            det,
            heuristic,
            cfg,
            cache: TeacherCache::default(),
        })
    }

    fn deadline(&self) -> Instant {
        Instant::now() + Duration::from_secs_f64(self.cfg.timeout)
    }

    fn admissible(&self) -> bool {
        matches!(self.heuristic.kind, HeuristicKind::Zero | HeuristicKind::Hmax | HeuristicKind::Lmcut)
    }

    /// Cost-to-go under the deterministic planner, capped at the dead-end penalty.
    fn plan_cost(&self, s: &State, deadline: Instant) -> Result<f64, TeacherError> {
        let d = self.cfg.dead_end_penalty;
        if self.gp.is_goal(s) {
            return Ok(0.0);
        }
        if let Some(&c) = self.cache.plan_costs.lock().unwrap().get(s) {
            return Ok(c);
        }
        let planned = match self.cfg.search {
            SearchKind::Gbfs => gbfs_plan(&self.det, &self.heuristic, s, Some(deadline)),
            _ => astar_plan(&self.det, &self.heuristic, s, Some(deadline)),
        };
        let mut costs = self.cache.plan_costs.lock().unwrap();
        match planned {
            Ok(plan) => {
                if self.cfg.search == SearchKind::Astar && self.admissible() {
                    // Suffixes of optimal plans are optimal.
                    let mut g = 0.0;
                    for (i, st) in plan.states.iter().enumerate() {
                        costs.entry(st.clone()).or_insert((plan.cost - g).min(d));
                        if i < plan.actions.len() {
                            g += self.det.actions[plan.actions[i]].cost;
                        }
                    }
                } else {
                    costs.insert(s.clone(), plan.cost.min(d));
                }
                Ok(plan.cost.min(d))
            }
            Err(TeacherError::Unsolvable) => {
                costs.insert(s.clone(), d);
                Ok(d)
            }
            Err(e) => Err(e),
        }
    }

    fn compute(&self, s: &State) -> Result<TeacherVerdict, TeacherError> {
        let deadline = self.deadline();
        let actions = applicable_actions(&self.gp, s);
        let d = self.cfg.dead_end_penalty;
        let mut q = Vec::with_capacity(actions.len());
        match self.cfg.search {
            SearchKind::Lrtdp => {
                let mut table = self.lrtdp.lock().unwrap();
                for &a in &actions {
                    for (next, _) in successor_distribution(&self.gp, s, a).expect("enabled").0 {
                        table.solve(&self.gp, &self.heuristic, &next, self.cfg.epsilon, Some(deadline))?;
                    }
                    q.push(table.q_value(&self.gp, &self.heuristic, s, a).min(d));
                }
            }
            SearchKind::Auto | SearchKind::Astar | SearchKind::Gbfs => {
                for &a in &actions {
                    let mut v = self.gp.actions[a].cost;
                    for (next, p) in successor_distribution(&self.gp, s, a).expect("enabled").0 {
                        v += p * self.plan_cost(&next, deadline)?;
                    }
                    q.push(v.min(d));
                }
            }
        }
        Ok(TeacherVerdict::from_q(actions, q, self.cfg.label_tol, d))
    }

    /// Cached verdict for a non-goal state; timed-out states are remembered and never retried.
    pub fn q_values(&self, s: &State) -> Result<Arc<TeacherVerdict>, TeacherError> {
        if self.gp.is_goal(s) {
            return Err(TeacherError::GoalState);
        }
        if let Some(v) = self.cache.get(s) {
            return Ok(v);
        }
        if self.cache.is_skipped(s) {
            return Ok(Arc::new(TeacherVerdict::timeout()));
        }
        self.cache.invocations.fetch_add(1, Ordering::Relaxed);
        match self.compute(s) {
            Ok(v) => {
                let v = Arc::new(v);
                self.cache.verdicts.lock().unwrap().insert(s.clone(), v.clone());
                Ok(v)
            }
            Err(TeacherError::Timeout) => {
                log::warn!("teacher timed out on a state of {}", self.gp.name);
                self.cache.skip.lock().unwrap().insert(s.clone());
                Ok(Arc::new(TeacherVerdict::timeout()))
            }
            Err(e) => Err(e),
        }
    }

    /// Follows the lowest-index optimal action until a goal, dead end, timeout or the step limit.
    pub fn rollout<R: Rng + ?Sized>(&self, s: &State, rng: &mut R) -> TeacherTrajectory {
        let mut traj = TeacherTrajectory {
            states: vec![s.clone()],
            ..Default::default()
        };
        let mut cur = s.clone();
        for _ in 0..self.cfg.step_limit {
            if self.gp.is_goal(&cur) {
                traj.reached_goal = true;
                return traj;
            }
            let a = match self.q_values(&cur).ok().and_then(|v| v.first_optimal()) {
                Some(a) => a,
                None => return traj,
            };
            cur = sample_successor(&self.gp, &cur, a, rng).expect("labelled actions are enabled");
            traj.actions.push(a);
            traj.states.push(cur.clone());
        }
        traj.reached_goal = self.gp.is_goal(&cur);
        traj
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains;
    use crate::ssp::{value_iteration, FsspudeConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn teacher(gp: GroundProblem, search: SearchKind, heuristic: HeuristicKind) -> Teacher {
        let cfg = TeacherConfig {
            search,
            heuristic,
            ..Default::default()
        };
        Teacher::new(Arc::new(gp), cfg).unwrap()
    }

    #[test]
    fn ttw_initial_labels_prefer_outside_edge() {
        for search in [SearchKind::Astar, SearchKind::Lrtdp] {
            let gp = domains::triangle_tireworld(1).ground().unwrap();
            let safe = gp.action_index("move-car(l-1-1,l-2-1)").unwrap();
            let risky = gp.action_index("move-car(l-1-1,l-1-2)").unwrap();
            let t = teacher(gp, search, HeuristicKind::Lmcut);
            let v = t.q_values(&t.gp.s0.clone()).unwrap();
            assert_eq!(v.status, TeacherStatus::Ok);
            assert!(v.label_of(safe), "{search:?}");
            assert!(!v.label_of(risky), "{search:?}");
        }
    }

    #[test]
    fn labels_match_value_iteration() {
        let gp = domains::triangle_tireworld(1).ground().unwrap();
        let vt = value_iteration(&gp, &FsspudeConfig::default(), 1e-10, 10_000).unwrap();
        let t = teacher(gp.clone(), SearchKind::Lrtdp, HeuristicKind::Lmcut);
        for s in &vt.space.states {
            if gp.is_goal(s) {
                continue;
            }
            let v = t.q_values(s).unwrap();
            let exact = vt.q_values(&gp, s);
            if v.status != TeacherStatus::Ok {
                continue;
            }
            let best = exact.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
            for (i, &a) in v.actions.iter().enumerate() {
                let qa = exact.iter().find(|x| x.0 == a).unwrap().1;
                assert_eq!(v.labels[i], qa <= best + 2e-4, "action {}", gp.actions[a].name);
            }
        }
    }

    #[test]
    fn chain_rollout_follows_plan() {
        let gp = domains::two_chain(3, true).ground().unwrap();
        let t = teacher(gp, SearchKind::Astar, HeuristicKind::Zero);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tr = t.rollout(&t.gp.s0.clone(), &mut rng);
        assert!(tr.reached_goal);
        let names: Vec<&str> = tr.actions.iter().map(|&a| t.gp.actions[a].name.as_str()).collect();
        // Failed drives repeat, but every drive heads down the goal chain.
        assert!(names.iter().all(|n| n.rsplit(',').next().unwrap().starts_with('l')), "{names:?}");
        assert!(tr.states.len() >= 4);
        // Every non-terminal visited state was labelled exactly once.
        assert_eq!(t.cache.invocations(), t.cache.len());
    }

    #[test]
    fn goal_state_rollout_is_trivial() {
        let gp = domains::two_chain(1, true).ground().unwrap();
        let t = teacher(gp, SearchKind::Gbfs, HeuristicKind::Hadd);
        let goal = t.gp.state_from_names(&["at(shakey,l1)"]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tr = t.rollout(&goal, &mut rng);
        assert_eq!(tr.states.len(), 1);
        assert!(tr.reached_goal);
        assert_eq!(t.q_values(&goal), Err(TeacherError::GoalState));
    }

    #[test]
    fn tie_and_single_action_labels() {
        let v = TeacherVerdict::from_q(vec![3], vec![7.0], 1e-4, 500.0);
        assert_eq!(v.labels, [true]);
        let v = TeacherVerdict::from_q(vec![1, 2, 5], vec![2.0, 2.00005, 3.0], 1e-4, 500.0);
        assert_eq!(v.labels, [true, true, false]);
        assert_eq!(v.first_optimal(), Some(1));
        let v = TeacherVerdict::from_q(vec![1], vec![500.0], 1e-4, 500.0);
        assert_eq!(v.status, TeacherStatus::DeadEnd);
    }

    #[test]
    fn cache_is_transparent() {
        let gp = domains::triangle_tireworld(1).ground().unwrap();
        let t = teacher(gp, SearchKind::Astar, HeuristicKind::Lmcut);
        let s0 = t.gp.s0.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tr = t.rollout(&s0, &mut rng);
        let first: Vec<_> = tr.states.iter().filter(|s| !t.gp.is_goal(s)).map(|s| t.q_values(s).unwrap()).collect();
        t.cache.clear();
        let second: Vec<_> = tr.states.iter().filter(|s| !t.gp.is_goal(s)).map(|s| t.q_values(s).unwrap()).collect();
        assert_eq!(first, second);
    }

    #[test]
    fn default_search_follows_problem_kind() {
        let t = Teacher::new(Arc::new(domains::triangle_tireworld(1).ground().unwrap()), TeacherConfig::default()).unwrap();
        assert_eq!(t.cfg.search, SearchKind::Lrtdp);
        let t = Teacher::new(Arc::new(domains::blocksworld(3, 0, false).ground().unwrap()), TeacherConfig::default()).unwrap();
        assert_eq!(t.cfg.search, SearchKind::Astar);
    }

    #[test]
    fn config_validation() {
        let cfg = TeacherConfig {
            epsilon: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg: TeacherConfig = serde_json::from_str(r#"{"search":"lrtdp","heuristic":"lmcut"}"#).unwrap();
        assert_eq!(cfg.search, SearchKind::Lrtdp);
        assert_eq!(cfg.timeout, 10.0);
    }
}

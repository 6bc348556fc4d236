use std::collections::{HashMap, HashSet};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TeacherError;
use crate::heuristics::Heuristic;
use crate::ppddl::GroundProblem;
use crate::ssp::{successors_unchecked, State};

const TRIAL_LIMIT: usize = 10_000;

/// Value estimates and solved labels that persist across LRTDP calls on one problem.
#[derive(Debug, Clone)]
pub struct LrtdpTable {
    pub values: HashMap<State, f64>,
    pub solved: HashSet<State>,
    pub dead_end_penalty: f64,
    rng: ChaCha8Rng,
}

impl LrtdpTable {
    pub fn new(dead_end_penalty: f64) -> LrtdpTable {
        LrtdpTable {
            values: HashMap::new(),
            solved: HashSet::new(),
            dead_end_penalty,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    pub fn value(&mut self, gp: &GroundProblem, h: &Heuristic, s: &State) -> f64 {
        if gp.is_goal(s) {
            return 0.0;
        }
        if let Some(&v) = self.values.get(s) {
            return v;
        }
        let v = h.eval(s).capped(self.dead_end_penalty);
        self.values.insert(s.clone(), v);
        v
    }

    pub fn q_value(&mut self, gp: &GroundProblem, h: &Heuristic, s: &State, a: usize) -> f64 {
        let act = &gp.actions[a];
        let mut q = act.cost;
        for (next, p) in successors_unchecked(act, s) {
            q += p * self.value(gp, h, &next);
        }
        q
    }

    /// Best action (lowest index on ties) and its Q; `None` without applicable actions.
    fn greedy(&mut self, gp: &GroundProblem, h: &Heuristic, s: &State) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for a in 0..gp.actions.len() {
            if !gp.actions[a].is_applicable(s) {
                continue;
            }
            let q = self.q_value(gp, h, s, a);
            if best.map_or(true, |(_, b)| q < b) {
                best = Some((a, q));
            }
        }
        best
    }

    fn update(&mut self, gp: &GroundProblem, h: &Heuristic, s: &State) -> (Option<usize>, f64) {
        let d = self.dead_end_penalty;
        let (a, q) = match self.greedy(gp, h, s) {
            Some((a, q)) => (Some(a), q.min(d)),
            None => (None, d),
        };
        let old = self.value(gp, h, s);
        self.values.insert(s.clone(), q);
        (a, (q - old).abs())
    }

    fn check_solved(&mut self, gp: &GroundProblem, h: &Heuristic, s: &State, eps: f64) -> bool {
        let mut rv = true;
        let mut open = Vec::new();
        let mut closed = Vec::new();
        let mut seen = HashSet::new();
        if !self.solved.contains(s) {
            open.push(s.clone());
            seen.insert(s.clone());
        }
        while let Some(cur) = open.pop() {
            closed.push(cur.clone());
            if gp.is_goal(&cur) {
                continue;
            }
            let d = self.dead_end_penalty;
            let old = self.value(gp, h, &cur);
            let Some((a, q)) = self.greedy(gp, h, &cur) else {
                if (d - old).abs() > eps {
                    rv = false;
                }
                continue;
            };
            if (q.min(d) - old).abs() > eps {
                rv = false;
                continue;
            }
            for (next, p) in successors_unchecked(&gp.actions[a], &cur) {
                if p > 0.0 && !self.solved.contains(&next) && !seen.contains(&next) {
                    seen.insert(next.clone());
                    open.push(next);
                }
            }
        }
        if rv {
            for c in closed {
                self.solved.insert(c);
            }
        } else {
            while let Some(c) = closed.pop() {
                if !gp.is_goal(&c) {
                    self.update(gp, h, &c);
                }
            }
        }
        rv
    }

    /// Runs labelled trials from `s` until it is solved with residual at most `eps`.
    pub fn solve(&mut self, gp: &GroundProblem, h: &Heuristic, s: &State, eps: f64, deadline: Option<Instant>) -> Result<(), TeacherError> {
        let d = self.dead_end_penalty;
        while !self.solved.contains(s) && !gp.is_goal(s) {
            if let Some(dl) = deadline {
                if Instant::now() >= dl {
                    return Err(TeacherError::Timeout);
                }
            }
            let mut visited = Vec::new();
            let mut cur = s.clone();
            while !self.solved.contains(&cur) {
                visited.push(cur.clone());
                if gp.is_goal(&cur) {
                    break;
                }
                let (a, _) = self.update(gp, h, &cur);
                let Some(a) = a else {
                    self.values.insert(cur.clone(), d);
                    self.solved.insert(cur.clone());
                    break;
                };
                if self.values[&cur] >= d || visited.len() > TRIAL_LIMIT {
                    break;
                }
                let act = &gp.actions[a];
                let u: f64 = self.rng.gen();
                let mut acc = 0.0;
                let mut next = None;
                let succ = successors_unchecked(act, &cur);
                for (t, p) in &succ {
                    acc += p;
                    if u < acc {
                        next = Some(t.clone());
                        break;
                    }
                }
                cur = next.unwrap_or_else(|| succ.last().expect("outcome").0.clone());
            }
            while let Some(v) = visited.pop() {
                if !self.check_solved(gp, h, &v, eps) {
                    break;
                }
            }
        }
        Ok(())
    }

    /// Greedy action at a state under the current estimates.
    pub fn policy(&mut self, gp: &GroundProblem, h: &Heuristic, s: &State) -> Option<usize> {
        self.greedy(gp, h, s).map(|(a, _)| a)
    }
}

/// Fresh LRTDP solve from `s`; returns the table whose greedy policy is the solution.
pub fn lrtdp_solve(gp: &GroundProblem, h: &Heuristic, s: &State, dead_end_penalty: f64, eps: f64, deadline: Option<Instant>) -> Result<LrtdpTable, TeacherError> {
    let mut t = LrtdpTable::new(dead_end_penalty);
    t.solve(gp, h, s, eps, deadline)?;
    Ok(t)
}

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use super::TeacherError;
use crate::heuristics::Heuristic;
use crate::ppddl::GroundProblem;
use crate::ssp::{apply_effects, State};

/// A plan with the states it visits (`states.len() == actions.len() + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub actions: Vec<usize>,
    pub states: Vec<State>,
    pub cost: f64,
}

#[derive(PartialEq)]
struct Node {
    f: f64,
    h: f64,
    order: usize,
    id: usize,
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Reversed for a min-heap: lowest f, then lowest h, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.order.cmp(&self.order))
    }
}

/// Optimal with an admissible heuristic (nodes are reopened on cheaper paths).
pub fn astar_plan(gp: &GroundProblem, h: &Heuristic, s: &State, deadline: Option<Instant>) -> Result<Plan, TeacherError> {
    best_first(gp, h, s, deadline, false)
}

/// Greedy best-first: priority is the heuristic alone, no reopening.
pub fn gbfs_plan(gp: &GroundProblem, h: &Heuristic, s: &State, deadline: Option<Instant>) -> Result<Plan, TeacherError> {
    best_first(gp, h, s, deadline, true)
}

fn best_first(gp: &GroundProblem, h: &Heuristic, start: &State, deadline: Option<Instant>, greedy: bool) -> Result<Plan, TeacherError> {
    assert!(gp.is_deterministic(), "search needs a deterministic problem");
    let mut states: Vec<State> = Vec::new();
    let mut index: HashMap<State, usize> = HashMap::new();
    let mut g: Vec<f64> = Vec::new();
    let mut hv: Vec<f64> = Vec::new();
    let mut parent: Vec<Option<(usize, usize)>> = Vec::new();
    let mut closed: Vec<bool> = Vec::new();
    let mut open = BinaryHeap::new();
    let mut order = 0;

    let h0 = match h.eval(start).finite() {
        Some(v) => v,
        None => return Err(TeacherError::Unsolvable),
    };
    states.push(start.clone());
    index.insert(start.clone(), 0);
    g.push(0.0);
    hv.push(h0);
    parent.push(None);
    closed.push(false);
    open.push(Node {
        f: h0,
        h: h0,
        order,
        id: 0,
    });

    let mut expansions = 0usize;
    while let Some(Node { f, id, .. }) = open.pop() {
        let key = if greedy { hv[id] } else { g[id] + hv[id] };
        if closed[id] || f > key {
            continue;
        }
        closed[id] = true;
        if gp.is_goal(&states[id]) {
            return Ok(extract(gp, &states, &parent, id));
        }
        expansions += 1;
        if expansions % 128 == 1 {
            if let Some(dl) = deadline {
                if Instant::now() >= dl {
                    return Err(TeacherError::Timeout);
                }
            }
        }
        let cur = states[id].clone();
        for a in &gp.actions {
            if !a.is_applicable(&cur) {
                continue;
            }
            let next = apply_effects(&a.outcomes[0].effects, &cur);
            let ng = g[id] + a.cost;
            match index.get(&next) {
                Some(&j) => {
                    if greedy || ng >= g[j] {
                        continue;
                    }
                    g[j] = ng;
                    parent[j] = Some((id, a.index));
                    closed[j] = false;
                    order += 1;
                    open.push(Node {
                        f: ng + hv[j],
                        h: hv[j],
                        order,
                        id: j,
                    });
                }
                None => {
                    let hn = match h.eval(&next).finite() {
                        Some(v) => v,
                        None => continue,
                    };
                    let j = states.len();
                    states.push(next.clone());
                    index.insert(next, j);
                    g.push(ng);
                    hv.push(hn);
                    parent.push(Some((id, a.index)));
                    closed.push(false);
                    order += 1;
                    open.push(Node {
                        f: if greedy { hn } else { ng + hn },
                        h: hn,
                        order,
                        id: j,
                    });
                }
            }
        }
    }
    Err(TeacherError::Unsolvable)
}

fn extract(gp: &GroundProblem, states: &[State], parent: &[Option<(usize, usize)>], goal: usize) -> Plan {
    let mut actions = Vec::new();
    let mut visited = vec![states[goal].clone()];
    let mut cur = goal;
    while let Some((p, a)) = parent[cur] {
        actions.push(a);
        visited.push(states[p].clone());
        cur = p;
    }
    actions.reverse();
    visited.reverse();
    let cost: f64 = actions.iter().map(|&a| gp.actions[a].cost).sum();
    Plan {
        actions,
        states: visited,
        cost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains;
    use crate::heuristics::HeuristicKind;
    use crate::ssp::all_outcomes_determinise;

    fn valid(gp: &GroundProblem, s: &State, plan: &Plan) -> bool {
        let mut cur = s.clone();
        for &a in &plan.actions {
            if !gp.actions[a].is_applicable(&cur) {
                return false;
            }
            cur = apply_effects(&gp.actions[a].outcomes[0].effects, &cur);
        }
        gp.is_goal(&cur)
    }

    #[test]
    fn goal_start_has_empty_plan() {
        let gp = all_outcomes_determinise(&domains::two_chain(2, true).ground().unwrap());
        let goal = gp.state_from_names(&["at(shakey,l2)"]).unwrap();
        let h = Heuristic::new(HeuristicKind::Hadd, &gp);
        let p = astar_plan(&gp, &h, &goal, None).unwrap();
        assert!(p.actions.is_empty() && p.cost == 0.0);
        assert_eq!(gbfs_plan(&gp, &h, &goal, None).unwrap().cost, 0.0);
    }

    #[test]
    fn chain_costs() {
        let gp = all_outcomes_determinise(&domains::two_chain(2, false).ground().unwrap());
        for kind in [HeuristicKind::Zero, HeuristicKind::Hadd, HeuristicKind::Lmcut] {
            let h = Heuristic::new(kind, &gp);
            let p = astar_plan(&gp, &h, &gp.s0, None).unwrap();
            assert_eq!(p.cost, 2.0);
            assert!(valid(&gp, &gp.s0, &p));
            let q = gbfs_plan(&gp, &h, &gp.s0, None).unwrap();
            assert!(valid(&gp, &gp.s0, &q));
        }
    }

    #[test]
    fn unsolvable_detected() {
        let gp = all_outcomes_determinise(&domains::two_chain(2, true).ground().unwrap());
        let stuck = gp.state_from_names(&["at(shakey,r2)"]).unwrap();
        let h = Heuristic::new(HeuristicKind::Zero, &gp);
        assert_eq!(astar_plan(&gp, &h, &stuck, None), Err(TeacherError::Unsolvable));
        assert_eq!(gbfs_plan(&gp, &h, &stuck, None), Err(TeacherError::Unsolvable));
    }

    #[test]
    fn blocksworld_optimal_matches_blind() {
        let gp = domains::blocksworld(3, 7, false).ground().unwrap();
        let blind = astar_plan(&gp, &Heuristic::new(HeuristicKind::Zero, &gp), &gp.s0, None).unwrap();
        let lm = astar_plan(&gp, &Heuristic::new(HeuristicKind::Lmcut, &gp), &gp.s0, None).unwrap();
        assert_eq!(blind.cost, lm.cost);
        assert!(valid(&gp, &gp.s0, &lm));
    }

    #[test]
    fn expired_deadline_times_out() {
        let gp = domains::blocksworld(5, 1, false).ground().unwrap();
        let h = Heuristic::new(HeuristicKind::Zero, &gp);
        let r = astar_plan(&gp, &h, &gp.s0, Some(Instant::now()));
        assert_eq!(r, Err(TeacherError::Timeout));
    }
}

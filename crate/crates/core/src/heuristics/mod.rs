//! Delete-relaxation heuristics, LM-cut and landmark input features.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::ppddl::GroundProblem;
use crate::ssp::State;

/// Non-negative cost estimate, or unreachable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeuristicValue {
    Finite(f64),
    Infinite,
}

impl HeuristicValue {
    pub fn is_infinite(&self) -> bool {
        matches!(self, HeuristicValue::Infinite)
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            HeuristicValue::Finite(v) => Some(*v),
            HeuristicValue::Infinite => None,
        }
    }

    /// Finite value, with unreachable mapped to `cap`; finite values are clipped at `cap` too.
    pub fn capped(&self, cap: f64) -> f64 {
        match self {
            HeuristicValue::Finite(v) => v.min(cap),
            HeuristicValue::Infinite => cap,
        }
    }
}

impl PartialOrd for HeuristicValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use HeuristicValue::*;
        match (self, other) {
            (Infinite, Infinite) => Some(Ordering::Equal),
            (Infinite, Finite(_)) => Some(Ordering::Greater),
            (Finite(_), Infinite) => Some(Ordering::Less),
            (Finite(a), Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for HeuristicValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeuristicValue::Finite(v) => write!(f, "{v}"),
            HeuristicValue::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for HeuristicValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            HeuristicValue::Finite(v) => s.serialize_f64(*v),
            HeuristicValue::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedOp {
    pub pre: Vec<usize>,
    pub add: Vec<usize>,
    pub cost: f64,
    /// Index of the ground action this operator was compiled from.
    pub action: usize,
}

/// Delete relaxation of a (possibly probabilistic) ground problem, with every
/// non-no-op outcome treated as a separate deterministic operator. Conditional
/// effects are compiled into one operator per consistent set of firing effects.
#[derive(Debug, Clone)]
pub struct RelaxedTask {
    pub num_props: usize,
    pub ops: Vec<RelaxedOp>,
    pub goal: Vec<usize>,
    /// Source ground action of each action of the problem the task was built from.
    pub source_of: Vec<usize>,
    pre_of: Vec<Vec<usize>>,
}

const MAX_CONDITIONAL_SUBSETS: usize = 10;

impl RelaxedTask {
    pub fn new(gp: &GroundProblem) -> RelaxedTask {
        let mut ops = Vec::new();
        for a in &gp.actions {
            // Positive disjunctive clauses expand into alternatives; clauses with a
            // negative literal are always satisfiable in the relaxation.
            let mut pre_alts: Vec<Vec<usize>> = vec![a.pre_pos.clone()];
            for c in &a.pre_clauses {
                if c.iter().any(|l| !l.positive) {
                    continue;
                }
                let mut next = Vec::new();
                for base in &pre_alts {
                    for l in c {
                        let mut b = base.clone();
                        b.push(l.prop);
                        next.push(b);
                    }
                }
                pre_alts = next;
            }
            for o in &a.outcomes {
                if o.is_noop() {
                    continue;
                }
                let mut base_add = Vec::new();
                let mut conditional = Vec::new();
                for e in &o.effects {
                    if e.is_unconditional() {
                        base_add.extend(e.add.iter().copied());
                    } else if !e.add.is_empty() {
                        conditional.push(e);
                    }
                }
                let subsets: Vec<Vec<usize>> = if conditional.len() <= MAX_CONDITIONAL_SUBSETS {
                    (0..1usize << conditional.len())
                        .map(|m| (0..conditional.len()).filter(|i| m >> i & 1 == 1).collect())
                        .collect()
                } else {
                    std::iter::once(Vec::new())
                        .chain((0..conditional.len()).map(|i| vec![i]))
                        .collect()
                };
                for subset in subsets {
                    let mut pos: Vec<usize> = Vec::new();
                    let mut neg: Vec<usize> = a.pre_neg.clone();
                    let mut add = base_add.clone();
                    for &i in &subset {
                        pos.extend(conditional[i].cond_pos.iter().copied());
                        neg.extend(conditional[i].cond_neg.iter().copied());
                        add.extend(conditional[i].add.iter().copied());
                    }
                    if pos.iter().any(|p| neg.contains(p)) || a.pre_pos.iter().any(|p| neg.contains(p)) {
                        continue;
                    }
                    add.sort_unstable();
                    add.dedup();
                    if add.is_empty() {
                        continue;
                    }
                    for alt in &pre_alts {
                        let mut pre = alt.clone();
                        pre.extend(pos.iter().copied());
                        pre.sort_unstable();
                        pre.dedup();
                        if pre.iter().any(|p| neg.contains(p)) {
                            continue;
                        }
                        ops.push(RelaxedOp {
                            pre,
                            add: add.clone(),
                            cost: a.cost,
                            action: a.index,
                        });
                    }
                }
            }
        }
        let mut pre_of = vec![Vec::new(); gp.num_props()];
        for (i, op) in ops.iter().enumerate() {
            for &p in &op.pre {
                pre_of[p].push(i);
            }
        }
        RelaxedTask {
            num_props: gp.num_props(),
            ops,
            goal: gp.goal.clone(),
            source_of: gp.actions.iter().map(|a| a.source_action()).collect(),
            pre_of,
        }
    }
}

#[derive(Clone, Copy)]
enum Combine {
    Max,
    Add,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Generalised Dijkstra over proposition costs; unreachable propositions stay infinite.
fn relaxed_costs(task: &RelaxedTask, state: &State, op_cost: &[f64], combine: Combine) -> Vec<f64> {
    let mut cost = vec![f64::INFINITY; task.num_props];
    let mut remaining: Vec<usize> = task.ops.iter().map(|o| o.pre.len()).collect();
    let mut acc = vec![0.0f64; task.ops.len()];
    let mut heap = BinaryHeap::new();
    for p in state.ones() {
        cost[p] = 0.0;
        heap.push(Entry(0.0, p));
    }
    let fire = |o: usize, acc: &[f64], cost: &mut [f64], heap: &mut BinaryHeap<Entry>| {
        let v = op_cost[o] + acc[o];
        for &q in &task.ops[o].add {
            if v < cost[q] {
                cost[q] = v;
                heap.push(Entry(v, q));
            }
        }
    };
    for (o, op) in task.ops.iter().enumerate() {
        if op.pre.is_empty() {
            fire(o, &acc, &mut cost, &mut heap);
        }
    }
    while let Some(Entry(c, p)) = heap.pop() {
        if c > cost[p] {
            continue;
        }
        for &o in &task.pre_of[p] {
            acc[o] = match combine {
                Combine::Max => acc[o].max(c),
                Combine::Add => acc[o] + c,
            };
            remaining[o] -= 1;
            if remaining[o] == 0 {
                fire(o, &acc, &mut cost, &mut heap);
            }
        }
    }
    cost
}

fn goal_value(task: &RelaxedTask, cost: &[f64], combine: Combine) -> HeuristicValue {
    let mut h: f64 = 0.0;
    for &g in &task.goal {
        if cost[g].is_infinite() {
            return HeuristicValue::Infinite;
        }
        h = match combine {
            Combine::Max => h.max(cost[g]),
            Combine::Add => h + cost[g],
        };
    }
    HeuristicValue::Finite(h)
}

pub fn h_zero(_state: &State) -> HeuristicValue {
    HeuristicValue::Finite(0.0)
}

pub fn h_add(task: &RelaxedTask, state: &State) -> HeuristicValue {
    let costs: Vec<f64> = task.ops.iter().map(|o| o.cost).collect();
    goal_value(task, &relaxed_costs(task, state, &costs, Combine::Add), Combine::Add)
}

pub fn h_max(task: &RelaxedTask, state: &State) -> HeuristicValue {
    let costs: Vec<f64> = task.ops.iter().map(|o| o.cost).collect();
    goal_value(task, &relaxed_costs(task, state, &costs, Combine::Max), Combine::Max)
}

/// Disjunctive action landmarks, as sorted source ground-action indices.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct LandmarkSet {
    pub landmarks: Vec<Vec<usize>>,
}

const ZERO_EPS: f64 = 1e-9;

pub fn lmcut(task: &RelaxedTask, state: &State) -> (HeuristicValue, LandmarkSet) {
    let mut costs: Vec<f64> = task.ops.iter().map(|o| o.cost).collect();
    let mut total = 0.0;
    let mut landmarks = Vec::new();
    let n = task.num_props;
    loop {
        let hmax = relaxed_costs(task, state, &costs, Combine::Max);
        let hg = match goal_value(task, &hmax, Combine::Max) {
            HeuristicValue::Infinite => {
                return (HeuristicValue::Infinite, LandmarkSet::default());
            }
            HeuristicValue::Finite(v) => v,
        };
        if hg <= ZERO_EPS {
            break;
        }
        // Precondition choice: costliest precondition, lowest index on ties; `n` stands
        // for the artificial start proposition of precondition-free operators.
        let pcf: Vec<usize> = task
            .ops
            .iter()
            .map(|o| {
                let mut best = n;
                let mut best_c = -1.0;
                for &p in &o.pre {
                    if hmax[p] > best_c {
                        best_c = hmax[p];
                        best = p;
                    }
                }
                best
            })
            .collect();
        let goal_pcf = {
            let mut best = n;
            let mut best_c = -1.0;
            for &g in &task.goal {
                if hmax[g] > best_c {
                    best_c = hmax[g];
                    best = g;
                }
            }
            best
        };
        // Goal zone: propositions reaching the goal through zero-cost justification edges.
        let mut zone = vec![false; n + 1];
        zone[goal_pcf] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for (o, op) in task.ops.iter().enumerate() {
                if costs[o] <= ZERO_EPS && !zone[pcf[o]] && op.add.iter().any(|&q| zone[q]) && hmax[pcf[o]].is_finite() {
                    zone[pcf[o]] = true;
                    changed = true;
                }
            }
        }
        // Forward closure from the state avoiding the goal zone.
        let mut reach = vec![false; n + 1];
        let mut stack: Vec<usize> = Vec::new();
        reach[n] = true;
        stack.push(n);
        for p in state.ones() {
            if !zone[p] && !reach[p] {
                reach[p] = true;
                stack.push(p);
            }
        }
        let mut by_pcf: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
        for (o, &p) in pcf.iter().enumerate() {
            if p == n || hmax[p].is_finite() {
                by_pcf[p].push(o);
            }
        }
        let mut cut = Vec::new();
        while let Some(p) = stack.pop() {
            for &o in &by_pcf[p] {
                let mut enters_zone = false;
                for &q in &task.ops[o].add {
                    if zone[q] {
                        enters_zone = true;
                    } else if !reach[q] {
                        reach[q] = true;
                        stack.push(q);
                    }
                }
                if enters_zone {
                    cut.push(o);
                }
            }
        }
        cut.sort_unstable();
        cut.dedup();
        let m = cut.iter().map(|&o| costs[o]).fold(f64::INFINITY, f64::min);
        if cut.is_empty() || !m.is_finite() || m <= ZERO_EPS {
            // Cannot happen for a well-formed justification graph; stop conservatively.
            break;
        }
        total += m;
        for &o in &cut {
            costs[o] -= m;
            if costs[o] < ZERO_EPS {
                costs[o] = 0.0;
            }
        }
        let mut lm: Vec<usize> = cut.iter().map(|&o| task.source_of[task.ops[o].action]).collect();
        lm.sort_unstable();
        lm.dedup();
        landmarks.push(lm);
    }
    (HeuristicValue::Finite(total), LandmarkSet { landmarks })
}

/// Per-action landmark indicator `c = (alone in some landmark, in some landmark with
/// others, in no landmark)`.
pub type LandmarkFeatures = Vec<[bool; 3]>;

pub fn landmark_features_from(landmarks: &LandmarkSet, num_actions: usize) -> LandmarkFeatures {
    let mut c = vec![[false, false, false]; num_actions];
    for lm in &landmarks.landmarks {
        for &a in lm {
            if lm.len() == 1 {
                c[a][0] = true;
            } else {
                c[a][1] = true;
            }
        }
    }
    for x in c.iter_mut() {
        x[2] = !x[0] && !x[1];
    }
    c
}

/// Landmark features of every ground action of `gp` at `state`, computed on the
/// all-outcomes delete relaxation held by `task` (built from `gp`).
pub fn landmark_features(task: &RelaxedTask, gp: &GroundProblem, state: &State) -> LandmarkFeatures {
    let (_, lms) = lmcut(task, state);
    landmark_features_from(&lms, gp.num_actions())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeuristicKind {
    Zero,
    Hmax,
    Hadd,
    Lmcut,
}

impl HeuristicKind {
    pub fn parse(s: &str) -> Option<HeuristicKind> {
        Some(match s {
            "zero" | "h0" => HeuristicKind::Zero,
            "hmax" | "h-max" => HeuristicKind::Hmax,
            "hadd" | "h-add" => HeuristicKind::Hadd,
            "lmcut" | "lm-cut" => HeuristicKind::Lmcut,
            _ => return None,
        })
    }
}

/// A heuristic bound to the relaxation of one problem.
#[derive(Debug, Clone)]
pub struct Heuristic {
    pub kind: HeuristicKind,
    pub task: RelaxedTask,
}

impl Heuristic {
    pub fn new(kind: HeuristicKind, gp: &GroundProblem) -> Heuristic {
        Heuristic {
            kind,
            task: RelaxedTask::new(gp),
        }
    }

    pub fn eval(&self, s: &State) -> HeuristicValue {
        match self.kind {
            HeuristicKind::Zero => h_zero(s),
            HeuristicKind::Hmax => h_max(&self.task, s),
            HeuristicKind::Hadd => h_add(&self.task, s),
            HeuristicKind::Lmcut => lmcut(&self.task, s).0,
        }
    }
}

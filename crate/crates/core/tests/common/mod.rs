//! Oracles shared by the integration tests.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use asnets_core::domains::Instance;
use asnets_core::ppddl::GroundProblem;
use asnets_core::ssp::{applicable_actions, enumerate_reachable_states, successor_distribution, State};
use rand::seq::SliceRandom;
use rand::Rng;

/// Renames objects by a random permutation within each declared type.
pub fn permute_objects<R: Rng>(inst: &Instance, rng: &mut R) -> (Instance, HashMap<String, String>) {
    let mut by_type: HashMap<&str, Vec<&str>> = HashMap::new();
    for o in &inst.problem.objects {
        by_type.entry(o.ty.as_str()).or_default().push(o.name.as_str());
    }
    let mut sigma = HashMap::new();
    for names in by_type.values() {
        let mut shuffled = names.clone();
        shuffled.shuffle(rng);
        for (a, b) in names.iter().zip(shuffled) {
            sigma.insert(a.to_string(), b.to_string());
        }
    }
    let mut text = String::new();
    let mut token = String::new();
    for ch in inst.problem_text.chars().chain(std::iter::once(' ')) {
        if ch.is_whitespace() || ch == '(' || ch == ')' {
            text.push_str(sigma.get(&token).map_or(&token, |s| s));
            token.clear();
            text.push(ch);
        } else {
            token.push(ch);
        }
    }
    text.pop();
    let permuted = Instance::from_text(inst.domain_text.clone(), text).expect("renamed problem parses");
    (permuted, sigma)
}

/// Applies an object renaming to a ground atom or action name such as `drive(a,b)`.
pub fn rename(name: &str, sigma: &HashMap<String, String>) -> String {
    let Some((head, rest)) = name.split_once('(') else { return name.to_string() };
    let args = rest.trim_end_matches(')');
    if args.is_empty() {
        return name.to_string();
    }
    let mapped: Vec<&str> = args.split(',').map(|a| sigma.get(a).map_or(a, String::as_str)).collect();
    format!("{head}({})", mapped.join(","))
}

/// Exact goal distances in a deterministic problem by Dijkstra over reversed edges.
pub struct DistanceOracle {
    pub states: Vec<State>,
    pub dist: Vec<f64>,
}

impl DistanceOracle {
    pub fn new(gp: &GroundProblem, cap: usize) -> DistanceOracle {
        let space = enumerate_reachable_states(gp, cap, true).expect("state space fits");
        let n = space.len();
        let mut rev: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, s) in space.states.iter().enumerate() {
            if gp.is_goal(s) {
                continue;
            }
            for a in applicable_actions(gp, s) {
                for (t, _) in successor_distribution(gp, s, a).unwrap().0 {
                    rev[space.index[&t]].push((i, gp.actions[a].cost));
                }
            }
        }
        let mut dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::new();
        for (i, s) in space.states.iter().enumerate() {
            if gp.is_goal(s) {
                dist[i] = 0.0;
                heap.push(Reverse((0u64, i)));
            }
        }
        // Integer-scaled keys keep the heap ordering total; costs here are small rationals.
        const SCALE: f64 = 1e6;
        while let Some(Reverse((d, i))) = heap.pop() {
            if d as f64 / SCALE > dist[i] + 1e-9 {
                continue;
            }
            for &(j, c) in &rev[i] {
                let nd = dist[i] + c;
                if nd < dist[j] - 1e-12 {
                    dist[j] = nd;
                    heap.push(Reverse(((nd * SCALE).round() as u64, j)));
                }
            }
        }
        DistanceOracle { states: space.states, dist }
    }
}

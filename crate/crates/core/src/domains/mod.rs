//! Built-in instance generators.
//!
//! Every generator emits PPDDL text and parses it back, so the files written by
//! `gen-domain` are exactly what the in-process instances are built from.

use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ppddl::{ground, parse_domain, parse_problem, DomainDef, GroundProblem, PpddlError, ProblemDef};

pub const UNRELIABLE_ROBOT: &str = "\
(define (domain unreliable-robot)
  (:requirements :typing :probabilistic-effects)
  (:types robot location)
  (:constants shakey - robot)
  (:predicates (at ?r - robot ?l - location) (path ?from - location ?to - location))
  (:action drive
    :parameters (?r - robot ?from - location ?to - location)
    :precondition (and (at ?r ?from) (path ?from ?to))
    :effect (probabilistic 0.9 (and (at ?r ?to) (not (at ?r ?from))))))
";

pub const TRIANGLE_TIREWORLD: &str = "\
(define (domain triangle-tire)
  (:requirements :typing :probabilistic-effects)
  (:types location)
  (:predicates (vehicle-at ?loc - location)
               (spare-in ?loc - location)
               (road ?from - location ?to - location)
               (not-flattire))
  (:action move-car
    :parameters (?from - location ?to - location)
    :precondition (and (vehicle-at ?from) (road ?from ?to) (not-flattire))
    :effect (and (vehicle-at ?to) (not (vehicle-at ?from))
                 (probabilistic 0.5 (not (not-flattire)))))
  (:action changetire
    :parameters (?loc - location)
    :precondition (and (spare-in ?loc) (vehicle-at ?loc))
    :effect (and (not (spare-in ?loc)) (not-flattire))))
";

/// Leaving a booth without paying angers its operator; leaving an angry booth
/// crushes the car (it ends up nowhere) with probability one half.
pub const COSANOSTRA: &str = "\
(define (domain cosanostra)
  (:requirements :typing :probabilistic-effects :conditional-effects :negative-preconditions)
  (:types toll-booth open-intersection - location)
  (:predicates (deliverator-at ?l - location)
               (pizza-at ?l - location)
               (have-pizza)
               (open ?b - toll-booth)
               (operator-angry ?b - toll-booth)
               (road ?from - location ?to - location))
  (:action load-pizza
    :parameters (?loc - location)
    :precondition (and (deliverator-at ?loc) (pizza-at ?loc))
    :effect (and (not (pizza-at ?loc)) (have-pizza)))
  (:action unload-pizza
    :parameters (?loc - location)
    :precondition (and (deliverator-at ?loc) (have-pizza))
    :effect (and (pizza-at ?loc) (not (have-pizza))))
  (:action pay-operator
    :parameters (?loc - toll-booth)
    :precondition (deliverator-at ?loc)
    :effect (open ?loc))
  (:action leave-toll-booth
    :parameters (?from - toll-booth ?to - location)
    :precondition (and (deliverator-at ?from) (road ?from ?to))
    :effect (and (not (deliverator-at ?from))
                 (when (not (operator-angry ?from)) (deliverator-at ?to))
                 (when (operator-angry ?from) (probabilistic 0.5 (deliverator-at ?to)))
                 (when (not (open ?from)) (operator-angry ?from))))
  (:action leave-open-intersection
    :parameters (?from - open-intersection ?to - location)
    :precondition (and (deliverator-at ?from) (road ?from ?to))
    :effect (and (not (deliverator-at ?from)) (deliverator-at ?to))))
";

const BLOCKS_HEAD: &str = "\
  (:types block)
  (:predicates (on ?b1 - block ?b2 - block) (on-table ?b - block) (clear ?b - block)
               (holding ?b - block) (handempty))
";

/// Deterministic and probabilistic variants share predicates; the latter drops a
/// manipulated block onto the table a quarter of the time.
pub fn blocksworld_domain_text(probabilistic: bool) -> String {
    let (pick, unstack, stack) = if probabilistic {
        (
            "(probabilistic 0.75 (and (holding ?b) (not (clear ?b)) (not (on-table ?b)) (not (handempty))))",
            "(probabilistic 0.75 (and (holding ?b1) (clear ?b2) (not (on ?b1 ?b2)) (not (clear ?b1)) (not (handempty)))
                              0.25 (and (on-table ?b1) (clear ?b2) (not (on ?b1 ?b2))))",
            "(probabilistic 0.75 (and (on ?b1 ?b2) (clear ?b1) (handempty) (not (holding ?b1)) (not (clear ?b2)))
                              0.25 (and (on-table ?b1) (clear ?b1) (handempty) (not (holding ?b1))))",
        )
    } else {
        (
            "(and (holding ?b) (not (clear ?b)) (not (on-table ?b)) (not (handempty)))",
            "(and (holding ?b1) (clear ?b2) (not (on ?b1 ?b2)) (not (clear ?b1)) (not (handempty)))",
            "(and (on ?b1 ?b2) (clear ?b1) (handempty) (not (holding ?b1)) (not (clear ?b2)))",
        )
    };
    let name = if probabilistic { "prob-blocksworld" } else { "blocksworld" };
    format!(
        "(define (domain {name})
  (:requirements :typing :equality{})
{BLOCKS_HEAD}  (:action pick-up
    :parameters (?b - block)
    :precondition (and (clear ?b) (on-table ?b) (handempty))
    :effect {pick})
  (:action put-down
    :parameters (?b - block)
    :precondition (holding ?b)
    :effect (and (clear ?b) (on-table ?b) (handempty) (not (holding ?b))))
  (:action stack
    :parameters (?b1 - block ?b2 - block)
    :precondition (and (holding ?b1) (clear ?b2) (not (= ?b1 ?b2)))
    :effect {stack})
  (:action unstack
    :parameters (?b1 - block ?b2 - block)
    :precondition (and (on ?b1 ?b2) (clear ?b1) (handempty) (not (= ?b1 ?b2)))
    :effect {unstack}))
",
        if probabilistic { " :probabilistic-effects" } else { "" }
    )
}

/// A generated domain/problem pair together with its source text.
#[derive(Debug, Clone)]
pub struct Instance {
    pub domain_text: String,
    pub problem_text: String,
    pub domain: DomainDef,
    pub problem: ProblemDef,
}

impl Instance {
    pub fn from_text(domain_text: impl Into<String>, problem_text: impl Into<String>) -> Result<Instance, PpddlError> {
        let domain_text = domain_text.into();
        let problem_text = problem_text.into();
        Ok(Instance {
            domain: parse_domain(&domain_text)?,
            problem: parse_problem(&problem_text)?,
            domain_text,
            problem_text,
        })
    }

    pub fn ground(&self) -> Result<GroundProblem, PpddlError> {
        ground(&self.domain, &self.problem)
    }

    pub fn into_defs(self) -> (DomainDef, ProblemDef) {
        (self.domain, self.problem)
    }
}

fn built(domain_text: &str, problem_text: String) -> Instance {
    Instance::from_text(domain_text, problem_text).expect("built-in generator emits valid PPDDL")
}

/// Three rooms in a line; the robot starts in the kitchen and must reach the office.
pub fn unreliable_robot_errand() -> Instance {
    built(
        UNRELIABLE_ROBOT,
        "(define (problem errand) (:domain unreliable-robot)
  (:objects kitchen hall office - location)
  (:init (at shakey kitchen) (path kitchen hall) (path hall kitchen) (path hall office) (path office hall))
  (:goal (at shakey office)))
"
        .to_string(),
    )
}

/// Start `m` with unidirectional chains `m -> l1 -> .. -> lK` and `m -> r1 -> .. -> rK`.
pub fn two_chain(k: usize, goal_left: bool) -> Instance {
    assert!(k >= 1, "chain length must be positive");
    let mut objs = vec!["m".to_string()];
    let mut paths = Vec::new();
    for side in ["l", "r"] {
        let mut prev = "m".to_string();
        for i in 1..=k {
            let cur = format!("{side}{i}");
            paths.push(format!("(path {prev} {cur})"));
            objs.push(cur.clone());
            prev = cur;
        }
    }
    let goal = format!("{}{k}", if goal_left { "l" } else { "r" });
    let side = if goal_left { "left" } else { "right" };
    built(
        UNRELIABLE_ROBOT,
        format!(
            "(define (problem two-chain-{k}-{side}) (:domain unreliable-robot)
  (:objects {} - location)
  (:init (at shakey m) {})
  (:goal (at shakey {goal})))
",
            objs.join(" "),
            paths.join(" ")
        ),
    )
}

/// Coordinates `(x, y)` of every location of the size-`n` triangle, side length `2n+1`.
pub fn ttw_locations(n: usize) -> Vec<(usize, usize)> {
    let side = 2 * n + 1;
    let mut out = Vec::new();
    for x in 1..=side {
        for y in 1..=side + 1 - x {
            out.push((x, y));
        }
    }
    out
}

pub fn ttw_location_name(x: usize, y: usize) -> String {
    format!("l-{x}-{y}")
}

pub fn ttw_has_spare(n: usize, x: usize, y: usize) -> bool {
    let side = 2 * n + 1;
    x >= 2 && (x % 2 == 0 || y == 1 || x + y == side + 1)
}

/// Directed roads of the size-`n` triangle.
pub fn ttw_roads(n: usize) -> Vec<((usize, usize), (usize, usize))> {
    let side = 2 * n + 1;
    let mut roads = Vec::new();
    for x in 1..=side {
        for y in 1..=side {
            if x + y > side {
                continue;
            }
            roads.push(((x, y), (x + 1, y)));
            roads.push(((x + 1, y), (x, y + 1)));
            if x % 2 == 1 {
                roads.push(((x, y), (x, y + 1)));
            }
        }
    }
    roads
}

pub fn triangle_tireworld(n: usize) -> Instance {
    assert!(n >= 1, "size must be positive");
    let side = 2 * n + 1;
    let locs: Vec<String> = ttw_locations(n).iter().map(|&(x, y)| ttw_location_name(x, y)).collect();
    let mut init = String::from("(vehicle-at l-1-1) (not-flattire)");
    for ((a, b), (c, d)) in ttw_roads(n) {
        write!(init, " (road {} {})", ttw_location_name(a, b), ttw_location_name(c, d)).unwrap();
    }
    for (x, y) in ttw_locations(n) {
        if ttw_has_spare(n, x, y) {
            write!(init, " (spare-in {})", ttw_location_name(x, y)).unwrap();
        }
    }
    built(
        TRIANGLE_TIREWORLD,
        format!(
            "(define (problem triangle-tire-{n}) (:domain triangle-tire)
  (:objects {} - location)
  (:init {init})
  (:goal (vehicle-at {})))
",
            locs.join(" "),
            ttw_location_name(1, side)
        ),
    )
}

/// Shop, booths `b0..b{K-1}` and the customer's home joined by two-way roads.
pub fn cosanostra(k: usize) -> Instance {
    assert!(k >= 1, "need at least one toll booth");
    let booths: Vec<String> = (0..k).map(|i| format!("b{i}")).collect();
    let mut chain = vec!["shop".to_string()];
    chain.extend(booths.iter().cloned());
    chain.push("home".into());
    let mut roads = String::new();
    for w in chain.windows(2) {
        write!(roads, " (road {} {}) (road {} {})", w[0], w[1], w[1], w[0]).unwrap();
    }
    built(
        COSANOSTRA,
        format!(
            "(define (problem cosanostra-{k}) (:domain cosanostra)
  (:objects shop home - open-intersection {} - toll-booth)
  (:init (deliverator-at shop) (pizza-at shop){roads})
  (:goal (and (pizza-at home) (deliverator-at shop))))
",
            booths.join(" ")
        ),
    )
}

fn random_towers(blocks: &[String], rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
    let mut order = blocks.to_vec();
    order.shuffle(rng);
    let mut towers: Vec<Vec<String>> = Vec::new();
    for b in order {
        if towers.is_empty() || rng.gen_bool(0.5) {
            towers.push(vec![b]);
        } else {
            let i = rng.gen_range(0..towers.len());
            towers[i].push(b);
        }
    }
    towers
}

fn tower_facts(towers: &[Vec<String>], with_clear: bool) -> Vec<String> {
    let mut facts = Vec::new();
    for t in towers {
        facts.push(format!("(on-table {})", t[0]));
        for w in t.windows(2) {
            facts.push(format!("(on {} {})", w[1], w[0]));
        }
        if with_clear {
            facts.push(format!("(clear {})", t[t.len() - 1]));
        }
    }
    facts
}

/// Random initial and goal towers over blocks `b1..bn`.
pub fn blocksworld(n: usize, seed: u64, probabilistic: bool) -> Instance {
    assert!(n >= 1, "need at least one block");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks: Vec<String> = (1..=n).map(|i| format!("b{i}")).collect();
    let init = tower_facts(&random_towers(&blocks, &mut rng), true);
    let mut goal_towers = random_towers(&blocks, &mut rng);
    if tower_facts(&goal_towers, false).iter().all(|f| init.contains(f)) && n > 1 {
        // Avoid trivial problems: swap the bottom two blocks of the goal.
        goal_towers = vec![blocks.iter().rev().cloned().collect()];
        if tower_facts(&goal_towers, false).iter().all(|f| init.contains(f)) {
            goal_towers = vec![blocks.clone()];
        }
    }
    let goal = tower_facts(&goal_towers, false);
    let dname = if probabilistic { "prob-blocksworld" } else { "blocksworld" };
    built(
        &blocksworld_domain_text(probabilistic),
        format!(
            "(define (problem {dname}-{n}-{seed}) (:domain {dname})
  (:objects {} - block)
  (:init (handempty) {})
  (:goal (and {})))
",
            blocks.join(" "),
            init.join(" "),
            goal.join(" ")
        ),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainId {
    Ttw,
    Cosanostra,
    TwoChain,
    Blocksworld,
    ProbBlocksworld,
}

impl DomainId {
    pub fn parse(s: &str) -> Option<DomainId> {
        Some(match s {
            "ttw" | "triangle-tireworld" | "triangle-tire" => DomainId::Ttw,
            "cosanostra" | "cn" => DomainId::Cosanostra,
            "two-chain" | "chain" => DomainId::TwoChain,
            "blocksworld" | "bw" => DomainId::Blocksworld,
            "prob-blocksworld" | "pbw" => DomainId::ProbBlocksworld,
            _ => return None,
        })
    }

    /// Short file stem used when writing the domain file.
    pub fn stem(&self) -> &'static str {
        match self {
            DomainId::Ttw => "ttw",
            DomainId::Cosanostra => "cosanostra",
            DomainId::TwoChain => "two-chain",
            DomainId::Blocksworld => "blocksworld",
            DomainId::ProbBlocksworld => "prob-blocksworld",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub domain: DomainId,
    pub size: usize,
    #[serde(default)]
    pub seed: u64,
    /// Two-chain only: goal at the end of the left chain.
    #[serde(default = "default_true")]
    pub goal_left: bool,
}

fn default_true() -> bool {
    true
}

impl GeneratorSpec {
    pub fn new(domain: DomainId, size: usize) -> Self {
        GeneratorSpec {
            domain,
            size,
            seed: 0,
            goal_left: true,
        }
    }

    pub fn generate(&self) -> Instance {
        match self.domain {
            DomainId::Ttw => triangle_tireworld(self.size),
            DomainId::Cosanostra => cosanostra(self.size),
            DomainId::TwoChain => two_chain(self.size, self.goal_left),
            DomainId::Blocksworld => blocksworld(self.size, self.seed, false),
            DomainId::ProbBlocksworld => blocksworld(self.size, self.seed, true),
        }
    }
}

pub fn gen_triangle_tireworld(n: usize) -> (DomainDef, ProblemDef) {
    triangle_tireworld(n).into_defs()
}

pub fn gen_cosanostra(k: usize) -> (DomainDef, ProblemDef) {
    cosanostra(k).into_defs()
}

pub fn gen_two_chain(k: usize, goal_left: bool) -> (DomainDef, ProblemDef) {
    two_chain(k, goal_left).into_defs()
}

pub fn gen_blocksworld(n_blocks: usize, seed: u64, probabilistic: bool) -> (DomainDef, ProblemDef) {
    blocksworld(n_blocks, seed, probabilistic).into_defs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssp::{self, FsspudeConfig};

    #[test]
    fn ttw_size_one_layout() {
        let gp = triangle_tireworld(1).ground().unwrap();
        assert_eq!(ttw_locations(1).len(), 6);
        assert_eq!(ttw_roads(1).len(), 8);
        let changes: Vec<&str> = gp
            .actions
            .iter()
            .filter(|a| a.schema == "changetire")
            .map(|a| a.name.as_str())
            .collect();
        assert_eq!(changes, ["changetire(l-2-1)", "changetire(l-2-2)", "changetire(l-3-1)"]);
    }

    #[test]
    fn ttw_size_two_spares() {
        let spares: Vec<(usize, usize)> = ttw_locations(2)
            .into_iter()
            .filter(|&(x, y)| ttw_has_spare(2, x, y))
            .collect();
        assert_eq!(ttw_locations(2).len(), 15);
        assert_eq!(spares, [(2, 1), (2, 2), (2, 3), (2, 4), (3, 1), (3, 3), (4, 1), (4, 2), (5, 1)]);
    }

    #[test]
    fn ttw_size_one_is_safely_solvable() {
        let gp = triangle_tireworld(1).ground().unwrap();
        let vt = ssp::value_iteration(&gp, &FsspudeConfig::default(), 1e-10, 10_000).unwrap();
        assert!((vt.value(&gp.s0).unwrap() - 5.5).abs() < 1e-6, "{:?}", vt.value(&gp.s0));
    }

    #[test]
    fn two_chain_counts() {
        let inst = two_chain(1, true);
        let gp = inst.ground().unwrap();
        assert_eq!(inst.problem.objects.len(), 3);
        assert_eq!(ssp::applicable_actions(&gp, &gp.s0).len(), 2);
        assert_eq!(gp.prop_names[gp.goal[0]], "at(shakey,l1)");
        let right = two_chain(1, false).ground().unwrap();
        assert_eq!(right.prop_names[right.goal[0]], "at(shakey,r1)");
    }

    #[test]
    fn cosanostra_grounds() {
        let gp = cosanostra(2).ground().unwrap();
        let names: Vec<&str> = gp.actions.iter().map(|a| a.name.as_str()).collect();
        assert!(names.contains(&"pay-operator(b1)"));
        assert!(names.contains(&"leave-toll-booth(b0,b1)"));
        assert!(names.contains(&"leave-open-intersection(home,b1)"));
        assert!(!names.contains(&"leave-open-intersection(b0,b1)"));
        assert!(!names.contains(&"pay-operator(shop)"));
    }

    #[test]
    fn blocksworld_is_seeded() {
        let a = blocksworld(4, 7, false);
        let b = blocksworld(4, 7, false);
        assert_eq!(a.problem_text, b.problem_text);
        let gp = a.ground().unwrap();
        assert!(!gp.is_goal(&gp.s0));
        assert!(gp.prop_index("on(b1,b1)").is_none());
        assert!(gp.action_index("stack(b1,b1)").is_none());
        let p = blocksworld(3, 1, true).ground().unwrap();
        assert!(!p.is_deterministic());
    }
}

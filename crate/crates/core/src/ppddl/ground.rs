//! Grounding with static filtering and delete-relaxed reachability pruning.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use super::ast::*;
use super::{PpddlError, Unsupported};
use crate::ssp::State;

pub const DEFAULT_ACTION_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Literal {
    pub prop: usize,
    pub positive: bool,
}

impl Literal {
    pub fn holds(&self, s: &State) -> bool {
        s.contains(self.prop) == self.positive
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct CondEffect {
    pub cond_pos: Vec<usize>,
    pub cond_neg: Vec<usize>,
    pub add: Vec<usize>,
    pub del: Vec<usize>,
}

impl CondEffect {
    pub fn is_unconditional(&self) -> bool {
        self.cond_pos.is_empty() && self.cond_neg.is_empty()
    }

    pub fn fires(&self, s: &State) -> bool {
        self.cond_pos.iter().all(|&p| s.contains(p)) && !self.cond_neg.iter().any(|&p| s.contains(p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub probability: f64,
    pub effects: Vec<CondEffect>,
}

impl Outcome {
    pub fn is_noop(&self) -> bool {
        self.effects.iter().all(|e| e.add.is_empty() && e.del.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundAction {
    pub index: usize,
    /// Canonical name `schema(obj1,obj2)`.
    pub name: String,
    pub schema: String,
    pub binding: Vec<String>,
    pub pre_pos: Vec<usize>,
    pub pre_neg: Vec<usize>,
    /// Non-unit CNF clauses left over from disjunctive preconditions.
    pub pre_clauses: Vec<Vec<Literal>>,
    /// Complete distribution; an explicit no-op outcome carries any residual mass.
    pub outcomes: Vec<Outcome>,
    pub cost: f64,
    /// Ground propositions filling the schema's unique lifted proposition slots, in slot order.
    pub slots: Vec<usize>,
    /// For determinised actions: (source action, source outcome).
    pub source: Option<(usize, usize)>,
}

impl GroundAction {
    pub fn is_applicable(&self, s: &State) -> bool {
        self.pre_pos.iter().all(|&p| s.contains(p))
            && !self.pre_neg.iter().any(|&p| s.contains(p))
            && self.pre_clauses.iter().all(|c| c.iter().any(|l| l.holds(s)))
    }

    pub fn is_deterministic(&self) -> bool {
        self.outcomes.len() == 1
    }

    /// Index of the source action in the problem this one was derived from, or its own index.
    pub fn source_action(&self) -> usize {
        self.source.map(|(a, _)| a).unwrap_or(self.index)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GroundingStats {
    pub candidate_actions: usize,
    pub kept_actions: usize,
    pub reachable_propositions: usize,
    pub propositions: usize,
}

#[derive(Debug, Clone)]
pub struct GroundProblem {
    pub name: String,
    pub domain_name: String,
    pub propositions: Vec<GroundAtom>,
    pub prop_names: Vec<String>,
    pub predicate_of: Vec<String>,
    pub actions: Vec<GroundAction>,
    pub s0: State,
    /// Initial distribution; `s0` is its most probable member.
    pub initial_states: Vec<(State, f64)>,
    pub goal: Vec<usize>,
    pub stats: GroundingStats,
    /// The lifted domain this problem was grounded from.
    pub domain: Arc<DomainDef>,
    prop_lookup: HashMap<String, usize>,
    action_lookup: HashMap<String, usize>,
}

impl GroundProblem {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        name: String,
        domain_name: String,
        propositions: Vec<GroundAtom>,
        actions: Vec<GroundAction>,
        s0: State,
        initial_states: Vec<(State, f64)>,
        goal: Vec<usize>,
        stats: GroundingStats,
        domain: Arc<DomainDef>,
    ) -> GroundProblem {
        let prop_names: Vec<String> = propositions.iter().map(|p| p.to_string()).collect();
        let predicate_of = propositions.iter().map(|p| p.predicate.clone()).collect();
        let prop_lookup = prop_names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let action_lookup = actions.iter().map(|a| (a.name.clone(), a.index)).collect();
        GroundProblem {
            name,
            domain_name,
            propositions,
            prop_names,
            predicate_of,
            actions,
            s0,
            initial_states,
            goal,
            stats,
            domain,
            prop_lookup,
            action_lookup,
        }
    }

    /// Same problem with a replaced action list (indices are rewritten densely).
    pub(crate) fn with_actions(&self, mut actions: Vec<GroundAction>) -> GroundProblem {
        for (i, a) in actions.iter_mut().enumerate() {
            a.index = i;
        }
        let mut stats = self.stats.clone();
        stats.kept_actions = actions.len();
        GroundProblem::assemble(
            self.name.clone(),
            self.domain_name.clone(),
            self.propositions.clone(),
            actions,
            self.s0.clone(),
            self.initial_states.clone(),
            self.goal.clone(),
            stats,
            self.domain.clone(),
        )
    }

    pub fn num_props(&self) -> usize {
        self.propositions.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn prop_index(&self, name: &str) -> Option<usize> {
        self.prop_lookup.get(name).copied()
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.action_lookup.get(name).copied()
    }

    pub fn schema_of(&self, a: usize) -> &str {
        &self.actions[a].schema
    }

    pub fn is_goal(&self, s: &State) -> bool {
        self.goal.iter().all(|&g| s.contains(g))
    }

    pub fn is_deterministic(&self) -> bool {
        self.actions.iter().all(GroundAction::is_deterministic)
    }

    /// Sorted proposition names true in `s`.
    pub fn state_names(&self, s: &State) -> Vec<String> {
        s.ones().map(|i| self.prop_names[i].clone()).collect()
    }

    pub fn state_from_names<S: AsRef<str>>(&self, names: &[S]) -> Result<State, PpddlError> {
        let mut s = State::empty(self.num_props());
        for n in names {
            let canon = GroundAtom::parse_canonical(n.as_ref())
                .map(|a| a.to_string())
                .unwrap_or_else(|| n.as_ref().to_string());
            let i = self
                .prop_index(&canon)
                .ok_or_else(|| PpddlError::UnknownTerm(format!("proposition {}", n.as_ref())))?;
            s.insert(i);
        }
        Ok(s)
    }
}

/// Ground formula in negation normal form.
#[derive(Debug, Clone, PartialEq)]
enum Gf {
    True,
    False,
    Lit(GroundAtom, bool),
    And(Vec<Gf>),
    Or(Vec<Gf>),
}

fn mk_and(parts: Vec<Gf>) -> Gf {
    let mut out = Vec::new();
    for p in parts {
        match p {
            Gf::True => {}
            Gf::False => return Gf::False,
            Gf::And(xs) => out.extend(xs),
            x => out.push(x),
        }
    }
    match out.len() {
        0 => Gf::True,
        1 => out.pop().unwrap(),
        _ => Gf::And(out),
    }
}

fn mk_or(parts: Vec<Gf>) -> Gf {
    let mut out = Vec::new();
    for p in parts {
        match p {
            Gf::False => {}
            Gf::True => return Gf::True,
            Gf::Or(xs) => out.extend(xs),
            x => out.push(x),
        }
    }
    match out.len() {
        0 => Gf::False,
        1 => out.pop().unwrap(),
        _ => Gf::Or(out),
    }
}

struct Binder<'a> {
    vars: HashMap<&'a str, &'a str>,
}

impl<'a> Binder<'a> {
    fn term(&self, t: &'a Term) -> &'a str {
        match t {
            Term::Var(v) => self.vars[v.as_str()],
            Term::Const(c) => c,
        }
    }

    fn atom(&self, a: &'a LiftedProposition) -> GroundAtom {
        GroundAtom {
            predicate: a.predicate.clone(),
            args: a.args.iter().map(|t| self.term(t).to_string()).collect(),
        }
    }
}

fn ground_formula(f: &Formula, b: &Binder, negate: bool, statics: &dyn Fn(&GroundAtom) -> Option<bool>) -> Gf {
    match f {
        Formula::Atom(a) => {
            let g = b.atom(a);
            match statics(&g) {
                Some(v) => {
                    if v != negate {
                        Gf::True
                    } else {
                        Gf::False
                    }
                }
                None => Gf::Lit(g, !negate),
            }
        }
        Formula::Eq(x, y) => {
            if (b.term(x) == b.term(y)) != negate {
                Gf::True
            } else {
                Gf::False
            }
        }
        Formula::Not(x) => ground_formula(x, b, !negate, statics),
        Formula::And(xs) => {
            let parts = xs.iter().map(|x| ground_formula(x, b, negate, statics)).collect();
            if negate {
                mk_or(parts)
            } else {
                mk_and(parts)
            }
        }
        Formula::Or(xs) => {
            let parts = xs.iter().map(|x| ground_formula(x, b, negate, statics)).collect();
            if negate {
                mk_and(parts)
            } else {
                mk_or(parts)
            }
        }
    }
}

/// Satisfiable in the delete relaxation given the reached set (negative literals always hold).
fn relaxed_sat(f: &Gf, reached: &HashSet<GroundAtom>) -> bool {
    match f {
        Gf::True => true,
        Gf::False => false,
        Gf::Lit(a, pos) => !*pos || reached.contains(a),
        Gf::And(xs) => xs.iter().all(|x| relaxed_sat(x, reached)),
        Gf::Or(xs) => xs.iter().any(|x| relaxed_sat(x, reached)),
    }
}

type Clause = Vec<(GroundAtom, bool)>;

fn cnf(f: &Gf) -> Vec<Clause> {
    match f {
        Gf::True => Vec::new(),
        Gf::False => vec![Vec::new()],
        Gf::Lit(a, p) => vec![vec![(a.clone(), *p)]],
        Gf::And(xs) => xs.iter().flat_map(cnf).collect(),
        Gf::Or(xs) => {
            let mut acc: Vec<Clause> = vec![Vec::new()];
            for x in xs {
                let cx = cnf(x);
                let mut next = Vec::new();
                for a in &acc {
                    for c in &cx {
                        let mut m = a.clone();
                        m.extend(c.iter().cloned());
                        next.push(m);
                    }
                }
                acc = next;
            }
            acc
        }
    }
}

#[derive(Debug, Clone)]
struct RawEffect {
    cond: Vec<(GroundAtom, bool)>,
    add: Vec<GroundAtom>,
    del: Vec<GroundAtom>,
}

fn flatten_effect(
    e: &Effect,
    b: &Binder,
    statics: &dyn Fn(&GroundAtom) -> Option<bool>,
) -> Result<Vec<(Rational, Vec<RawEffect>)>, PpddlError> {
    let one = || Rational::from_integer(1.into());
    Ok(match e {
        Effect::Add(a) => vec![(
            one(),
            vec![RawEffect {
                cond: vec![],
                add: vec![b.atom(a)],
                del: vec![],
            }],
        )],
        Effect::Del(a) => vec![(
            one(),
            vec![RawEffect {
                cond: vec![],
                add: vec![],
                del: vec![b.atom(a)],
            }],
        )],
        Effect::And(es) => {
            let mut acc = vec![(one(), Vec::new())];
            for x in es {
                let fx = flatten_effect(x, b, statics)?;
                let mut next = Vec::new();
                for (p, effs) in &acc {
                    for (q, effs2) in &fx {
                        let mut m: Vec<RawEffect> = effs.clone();
                        m.extend(effs2.iter().cloned());
                        next.push((p * q, m));
                    }
                }
                acc = next;
            }
            acc
        }
        Effect::Probabilistic(bs) => {
            let mut out = Vec::new();
            let mut total = Rational::zero();
            for (p, x) in bs {
                total += p;
                for (q, effs) in flatten_effect(x, b, statics)? {
                    out.push((p * q, effs));
                }
            }
            let rest = one() - total;
            if rest > Rational::zero() {
                out.push((rest, Vec::new()));
            }
            out
        }
        Effect::When(c, x) => {
            let gc = ground_formula(c, b, false, statics);
            let lits: Option<Vec<(GroundAtom, bool)>> = match gc {
                Gf::True => Some(vec![]),
                Gf::False => None,
                Gf::Lit(a, p) => Some(vec![(a, p)]),
                Gf::And(xs) => {
                    let mut v = Vec::new();
                    for x in xs {
                        match x {
                            Gf::Lit(a, p) => v.push((a, p)),
                            _ => return Err(PpddlError::Unsupported(Unsupported::DisjunctiveEffectCondition)),
                        }
                    }
                    Some(v)
                }
                Gf::Or(_) => return Err(PpddlError::Unsupported(Unsupported::DisjunctiveEffectCondition)),
            };
            match lits {
                None => vec![(one(), Vec::new())],
                Some(lits) => flatten_effect(x, b, statics)?
                    .into_iter()
                    .map(|(p, effs)| {
                        let effs = effs
                            .into_iter()
                            .map(|mut r| {
                                let mut cond = lits.clone();
                                cond.extend(r.cond);
                                r.cond = cond;
                                r
                            })
                            .collect();
                        (p, effs)
                    })
                    .collect(),
            }
        }
    })
}

struct Candidate {
    schema: usize,
    binding: Vec<String>,
    pre: Gf,
    outcomes: Vec<(Rational, Vec<RawEffect>)>,
}

/// Top-level precondition conjuncts that can be checked as soon as their variables are bound.
enum EarlyCheck<'a> {
    Static(&'a LiftedProposition, bool),
    Eq(&'a Term, &'a Term, bool),
}

fn collect_early<'a>(f: &'a Formula, static_preds: &HashSet<&str>, out: &mut Vec<EarlyCheck<'a>>) {
    match f {
        Formula::And(xs) => xs.iter().for_each(|x| collect_early(x, static_preds, out)),
        Formula::Atom(a) if static_preds.contains(a.predicate.as_str()) => out.push(EarlyCheck::Static(a, true)),
        Formula::Eq(x, y) => out.push(EarlyCheck::Eq(x, y, true)),
        Formula::Not(inner) => match inner.as_ref() {
            Formula::Atom(a) if static_preds.contains(a.predicate.as_str()) => out.push(EarlyCheck::Static(a, false)),
            Formula::Eq(x, y) => out.push(EarlyCheck::Eq(x, y, false)),
            _ => {}
        },
        _ => {}
    }
}

fn effect_preds<'a>(e: &'a Effect, out: &mut HashSet<&'a str>) {
    match e {
        Effect::Add(a) | Effect::Del(a) => {
            out.insert(&a.predicate);
        }
        Effect::And(es) => es.iter().for_each(|x| effect_preds(x, out)),
        Effect::Probabilistic(bs) => bs.iter().for_each(|(_, x)| effect_preds(x, out)),
        Effect::When(_, x) => effect_preds(x, out),
    }
}

pub fn ground(domain: &DomainDef, problem: &ProblemDef) -> Result<GroundProblem, PpddlError> {
    ground_with_limit(domain, problem, DEFAULT_ACTION_LIMIT)
}

pub fn ground_with_limit(domain: &DomainDef, problem: &ProblemDef, limit: usize) -> Result<GroundProblem, PpddlError> {
    if domain.name != problem.domain_name {
        return Err(PpddlError::DomainMismatch {
            domain: domain.name.clone(),
            problem: problem.domain_name.clone(),
        });
    }
    // Objects and their types.
    let mut object_type: HashMap<&str, &str> = HashMap::new();
    for o in domain.constants.iter().chain(&problem.objects) {
        if !domain.has_type(&o.ty) {
            return Err(PpddlError::UndeclaredType(o.ty.clone()));
        }
        if let Some(prev) = object_type.insert(&o.name, &o.ty) {
            if prev != o.ty {
                return Err(PpddlError::TypeMismatch(format!("object {} declared as {prev} and {}", o.name, o.ty)));
            }
        }
    }
    let mut objects: Vec<&str> = object_type.keys().copied().collect();
    objects.sort_unstable();
    let objects_of = |ty: &str| -> Vec<&str> {
        objects
            .iter()
            .copied()
            .filter(|o| domain.is_subtype(object_type[o], ty))
            .collect()
    };
    let check_atom = |a: &GroundAtom| -> Result<(), PpddlError> {
        let p = domain
            .predicate(&a.predicate)
            .ok_or_else(|| PpddlError::UnknownPredicate(a.predicate.clone()))?;
        if p.arity() != a.args.len() {
            return Err(PpddlError::ArityMismatch {
                predicate: a.predicate.clone(),
                expected: p.arity(),
                found: a.args.len(),
            });
        }
        for (o, decl) in a.args.iter().zip(&p.params) {
            let ty = object_type
                .get(o.as_str())
                .ok_or_else(|| PpddlError::UnknownTerm(format!("object {o} in {a}")))?;
            if !domain.is_subtype(ty, &decl.ty) {
                return Err(PpddlError::TypeMismatch(format!("{o} of type {ty} in {a} expects {}", decl.ty)));
            }
        }
        Ok(())
    };

    let init_dist = problem.initial_distribution();
    for (facts, _) in &init_dist {
        facts.iter().try_for_each(&check_atom)?;
    }
    problem.goal.iter().try_for_each(&check_atom)?;

    // Static predicates are never touched by effects and agree across all initial states.
    let mut changing = HashSet::new();
    for s in &domain.schemas {
        effect_preds(&s.effect, &mut changing);
    }
    let mut static_preds: HashSet<&str> = domain
        .predicates
        .iter()
        .map(|p| p.name.as_str())
        .filter(|p| !changing.contains(p))
        .collect();
    let first_init: BTreeSet<GroundAtom> = init_dist.first().map(|d| d.0.clone()).unwrap_or_default();
    for (facts, _) in init_dist.iter().skip(1) {
        for a in facts.symmetric_difference(&first_init) {
            static_preds.remove(a.predicate.as_str());
        }
    }
    let static_facts: HashSet<GroundAtom> = first_init
        .iter()
        .filter(|a| static_preds.contains(a.predicate.as_str()))
        .cloned()
        .collect();
    let statics = |a: &GroundAtom| -> Option<bool> {
        if static_preds.contains(a.predicate.as_str()) {
            Some(static_facts.contains(a))
        } else {
            None
        }
    };

    // Enumerate well-typed bindings, filtering early on static and equality conjuncts.
    let mut candidates: Vec<Candidate> = Vec::new();
    for (si, schema) in domain.schemas.iter().enumerate() {
        let mut early = Vec::new();
        collect_early(&schema.precondition, &static_preds, &mut early);
        let var_pos: HashMap<&str, usize> = schema
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name.as_str(), i))
            .collect();
        let last_var = |terms: &[&Term]| -> usize {
            terms
                .iter()
                .filter_map(|t| match t {
                    Term::Var(v) => var_pos.get(v.as_str()).copied(),
                    Term::Const(_) => None,
                })
                .max()
                .unwrap_or(0)
        };
        let mut checks_at: Vec<Vec<&EarlyCheck>> = vec![Vec::new(); schema.params.len().max(1)];
        for c in &early {
            let at = match c {
                EarlyCheck::Static(a, _) => last_var(&a.args.iter().collect::<Vec<_>>()),
                EarlyCheck::Eq(x, y, _) => last_var(&[x, y]),
            };
            checks_at[at].push(c);
        }
        let domains: Vec<Vec<&str>> = schema.params.iter().map(|p| objects_of(&p.ty)).collect();
        let mut assignment: Vec<&str> = Vec::with_capacity(schema.params.len());
        let passes = |assignment: &[&str], depth: usize| -> bool {
            let vars: HashMap<&str, &str> = schema
                .params
                .iter()
                .zip(assignment)
                .map(|(p, o)| (p.name.as_str(), *o))
                .collect();
            let b = Binder { vars };
            checks_at[depth].iter().all(|c| match c {
                EarlyCheck::Static(a, pos) => static_facts.contains(&b.atom(a)) == *pos,
                EarlyCheck::Eq(x, y, pos) => (b.term(x) == b.term(y)) == *pos,
            })
        };
        // Iterative depth-first enumeration.
        fn rec<'o>(
            depth: usize,
            domains: &[Vec<&'o str>],
            assignment: &mut Vec<&'o str>,
            passes: &dyn Fn(&[&'o str], usize) -> bool,
            emit: &mut dyn FnMut(&[&'o str]) -> Result<(), PpddlError>,
        ) -> Result<(), PpddlError> {
            if depth == domains.len() {
                if domains.is_empty() && !passes(assignment, 0) {
                    return Ok(());
                }
                return emit(assignment);
            }
            for &o in &domains[depth] {
                assignment.push(o);
                if passes(assignment, depth) {
                    rec(depth + 1, domains, assignment, passes, emit)?;
                }
                assignment.pop();
            }
            Ok(())
        }
        let mut emit = |asg: &[&str]| -> Result<(), PpddlError> {
            let vars: HashMap<&str, &str> = schema
                .params
                .iter()
                .zip(asg)
                .map(|(p, o)| (p.name.as_str(), *o))
                .collect();
            let b = Binder { vars };
            let pre = ground_formula(&schema.precondition, &b, false, &statics);
            if pre == Gf::False {
                return Ok(());
            }
            if candidates.len() >= limit {
                return Err(PpddlError::GroundingExplosion { limit });
            }
            let outcomes = flatten_effect(&schema.effect, &b, &statics)?;
            candidates.push(Candidate {
                schema: si,
                binding: asg.iter().map(|s| s.to_string()).collect(),
                pre,
                outcomes,
            });
            Ok(())
        };
        rec(0, &domains, &mut assignment, &passes, &mut emit)?;
    }

    // Delete-relaxed reachability fixpoint.
    let mut reached: HashSet<GroundAtom> = init_dist.iter().flat_map(|(f, _)| f.iter().cloned()).collect();
    let mut enabled = vec![false; candidates.len()];
    loop {
        let mut changed = false;
        for (ci, c) in candidates.iter().enumerate() {
            if !enabled[ci] {
                if !relaxed_sat(&c.pre, &reached) {
                    continue;
                }
                enabled[ci] = true;
                changed = true;
            }
            for (_, effs) in &c.outcomes {
                for r in effs {
                    if r.cond.iter().all(|(a, p)| !*p || reached.contains(a)) {
                        for a in &r.add {
                            if !reached.contains(a) {
                                reached.insert(a.clone());
                                changed = true;
                            }
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let reachable_count = reached.len();

    // Proposition set: reachable facts, goal facts, and every slot of a kept action.
    let mut props: BTreeSet<String> = BTreeSet::new();
    let mut atoms: HashMap<String, GroundAtom> = HashMap::new();
    let mut add_prop = |a: &GroundAtom, props: &mut BTreeSet<String>| {
        let n = a.to_string();
        if props.insert(n.clone()) {
            atoms.insert(n, a.clone());
        }
    };
    for a in &reached {
        add_prop(a, &mut props);
    }
    for a in &problem.goal {
        add_prop(a, &mut props);
    }
    let slot_lists: Vec<Vec<LiftedProposition>> =
        domain.schemas.iter().map(|s| s.unique_lifted_propositions()).collect();
    let kept: Vec<&Candidate> = candidates
        .iter()
        .zip(&enabled)
        .filter(|(_, e)| **e)
        .map(|(c, _)| c)
        .collect();
    let binder_for = |c: &Candidate| -> HashMap<String, String> {
        domain.schemas[c.schema]
            .params
            .iter()
            .zip(&c.binding)
            .map(|(p, o)| (p.name.clone(), o.clone()))
            .collect()
    };
    let ground_lp = |lp: &LiftedProposition, vars: &HashMap<String, String>| GroundAtom {
        predicate: lp.predicate.clone(),
        args: lp
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => vars[v].clone(),
                Term::Const(c) => c.clone(),
            })
            .collect(),
    };
    let mut kept_slots: Vec<Vec<GroundAtom>> = Vec::with_capacity(kept.len());
    for c in &kept {
        let vars = binder_for(c);
        let slots: Vec<GroundAtom> = slot_lists[c.schema].iter().map(|lp| ground_lp(lp, &vars)).collect();
        for a in &slots {
            add_prop(a, &mut props);
        }
        kept_slots.push(slots);
    }
    let propositions: Vec<GroundAtom> = props.iter().map(|n| atoms[n].clone()).collect();
    let index: HashMap<&GroundAtom, usize> = propositions.iter().enumerate().map(|(i, a)| (a, i)).collect();
    let n = propositions.len();

    // Build ground actions.
    let mut actions: Vec<GroundAction> = Vec::with_capacity(kept.len());
    for (c, slots) in kept.iter().zip(&kept_slots) {
        let schema = &domain.schemas[c.schema];
        let name = format!("{}({})", schema.name, c.binding.join(","));
        // Positive literals over never-reached atoms are false in every reachable state.
        let simplify_lit = |a: &GroundAtom, pos: bool| -> Gf {
            if reached.contains(a) {
                Gf::Lit(a.clone(), pos)
            } else if pos {
                Gf::False
            } else {
                Gf::True
            }
        };
        fn resimplify(f: &Gf, lit: &dyn Fn(&GroundAtom, bool) -> Gf) -> Gf {
            match f {
                Gf::Lit(a, p) => lit(a, *p),
                Gf::And(xs) => mk_and(xs.iter().map(|x| resimplify(x, lit)).collect()),
                Gf::Or(xs) => mk_or(xs.iter().map(|x| resimplify(x, lit)).collect()),
                x => x.clone(),
            }
        }
        let pre = resimplify(&c.pre, &simplify_lit);
        let mut pre_pos = BTreeSet::new();
        let mut pre_neg = BTreeSet::new();
        let mut clauses: Vec<Vec<Literal>> = Vec::new();
        let mut unsat = false;
        for clause in cnf(&pre) {
            let mut lits: Vec<Literal> = clause
                .iter()
                .map(|(a, p)| Literal {
                    prop: index[a],
                    positive: *p,
                })
                .collect();
            lits.sort();
            lits.dedup();
            if lits.is_empty() {
                unsat = true;
                break;
            }
            if lits.windows(2).any(|w| w[0].prop == w[1].prop) {
                continue;
            }
            if lits.len() == 1 {
                if lits[0].positive {
                    pre_pos.insert(lits[0].prop);
                } else {
                    pre_neg.insert(lits[0].prop);
                }
            } else {
                clauses.push(lits);
            }
        }
        if unsat || pre_pos.iter().any(|p| pre_neg.contains(p)) {
            continue;
        }
        clauses.sort();
        clauses.dedup();

        // Outcomes: merge conditional effects per condition, then identical outcomes.
        let mut merged: Vec<(Rational, Vec<CondEffect>)> = Vec::new();
        for (p, raws) in &c.outcomes {
            if p.is_zero() {
                continue;
            }
            let mut by_cond: Vec<CondEffect> = Vec::new();
            'raw: for r in raws {
                let mut cp = BTreeSet::new();
                let mut cn = BTreeSet::new();
                for (a, pos) in &r.cond {
                    match (reached.contains(a), *pos) {
                        (false, true) => continue 'raw,
                        (false, false) => {}
                        (true, true) => {
                            cp.insert(index[a]);
                        }
                        (true, false) => {
                            cn.insert(index[a]);
                        }
                    }
                }
                if cp.iter().any(|x| cn.contains(x)) {
                    continue;
                }
                let cp: Vec<usize> = cp.into_iter().collect();
                let cn: Vec<usize> = cn.into_iter().collect();
                let slot = match by_cond.iter_mut().find(|e| e.cond_pos == cp && e.cond_neg == cn) {
                    Some(e) => e,
                    None => {
                        by_cond.push(CondEffect {
                            cond_pos: cp,
                            cond_neg: cn,
                            add: vec![],
                            del: vec![],
                        });
                        by_cond.last_mut().unwrap()
                    }
                };
                slot.add.extend(r.add.iter().map(|a| index[a]));
                slot.del.extend(r.del.iter().filter_map(|a| index.get(a).copied()));
            }
            for e in by_cond.iter_mut() {
                e.add.sort_unstable();
                e.add.dedup();
                e.del.sort_unstable();
                e.del.dedup();
                if e.is_unconditional() {
                    let add = e.add.clone();
                    e.del.retain(|d| add.binary_search(d).is_err());
                }
            }
            by_cond.retain(|e| !(e.add.is_empty() && e.del.is_empty()));
            by_cond.sort_by(|a, b| (&a.cond_pos, &a.cond_neg).cmp(&(&b.cond_pos, &b.cond_neg)));
            match merged.iter_mut().find(|(_, effs)| *effs == by_cond) {
                Some(m) => m.0 += p,
                None => merged.push((p.clone(), by_cond)),
            }
        }
        let outcomes = merged
            .into_iter()
            .map(|(p, effects)| Outcome {
                probability: p.to_f64().unwrap_or(0.0),
                effects,
            })
            .collect();
        actions.push(GroundAction {
            index: 0,
            name,
            schema: schema.name.clone(),
            binding: c.binding.clone(),
            pre_pos: pre_pos.into_iter().collect(),
            pre_neg: pre_neg.into_iter().collect(),
            pre_clauses: clauses,
            outcomes,
            cost: schema.cost.to_f64().unwrap_or(1.0),
            slots: slots.iter().map(|a| index[a]).collect(),
            source: None,
        });
    }
    actions.sort_by(|a, b| a.name.cmp(&b.name));
    for (i, a) in actions.iter_mut().enumerate() {
        a.index = i;
    }

    let to_state = |facts: &BTreeSet<GroundAtom>| State::from_indices(n, facts.iter().map(|a| index[a]));
    let initial_states: Vec<(State, f64)> = init_dist
        .iter()
        .map(|(f, p)| (to_state(f), p.to_f64().unwrap_or(0.0)))
        .collect();
    let s0 = initial_states
        .iter()
        .fold(None::<&(State, f64)>, |best, cur| match best {
            Some(b) if b.1 >= cur.1 => Some(b),
            _ => Some(cur),
        })
        .map(|(s, _)| s.clone())
        .unwrap_or_else(|| State::empty(n));
    let mut goal: Vec<usize> = problem.goal.iter().map(|a| index[a]).collect();
    goal.sort_unstable();
    goal.dedup();
    let stats = GroundingStats {
        candidate_actions: candidates.len(),
        kept_actions: actions.len(),
        reachable_propositions: reachable_count,
        propositions: n,
    };
    Ok(GroundProblem::assemble(
        problem.name.clone(),
        domain.name.clone(),
        propositions,
        actions,
        s0,
        initial_states,
        goal,
        stats,
        Arc::new(domain.clone()),
    ))
}

#[cfg(test)]
mod tests {
    use super::super::{parse_domain, parse_problem};
    use super::*;

    const ROBOT: &str = "
        (define (domain unreliable-robot)
          (:types robot location)
          (:constants shakey - robot)
          (:predicates (at ?r - robot ?l - location) (path ?from - location ?to - location))
          (:action drive
            :parameters (?r - robot ?from - location ?to - location)
            :precondition (and (at ?r ?from) (path ?from ?to))
            :effect (probabilistic 0.9 (and (at ?r ?to) (not (at ?r ?from))))))";
    const ROBOT_PROBLEM: &str = "
        (define (problem errand) (:domain unreliable-robot)
          (:objects kitchen hall office - location)
          (:init (at shakey kitchen) (path kitchen hall) (path hall kitchen) (path hall office) (path office hall))
          (:goal (at shakey office)))";

    fn robot() -> GroundProblem {
        ground(&parse_domain(ROBOT).unwrap(), &parse_problem(ROBOT_PROBLEM).unwrap()).unwrap()
    }

    #[test]
    fn only_path_connected_drives() {
        let gp = robot();
        let names: Vec<&str> = gp.actions.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "drive(shakey,hall,kitchen)",
                "drive(shakey,hall,office)",
                "drive(shakey,kitchen,hall)",
                "drive(shakey,office,hall)"
            ]
        );
        assert!(gp.prop_index("at(shakey,shakey)").is_none());
        assert_eq!(gp.num_props(), 7);
        let a = &gp.actions[2];
        assert_eq!(a.outcomes.len(), 2);
        assert!((a.outcomes[0].probability - 0.9).abs() < 1e-15);
        assert!(a.outcomes[1].is_noop());
        let slot_names: Vec<&str> = a.slots.iter().map(|&p| gp.prop_names[p].as_str()).collect();
        assert_eq!(slot_names, ["at(shakey,kitchen)", "path(kitchen,hall)", "at(shakey,hall)"]);
    }

    #[test]
    fn unreachable_goal_kept() {
        let p = ROBOT_PROBLEM.replace("(path hall office) (path office hall)", "");
        let gp = ground(&parse_domain(ROBOT).unwrap(), &parse_problem(&p).unwrap()).unwrap();
        assert_eq!(gp.goal.len(), 1);
        assert_eq!(gp.prop_names[gp.goal[0]], "at(shakey,office)");
        assert_eq!(gp.num_actions(), 2);
    }

    #[test]
    fn explosion_limit() {
        let r = ground_with_limit(&parse_domain(ROBOT).unwrap(), &parse_problem(ROBOT_PROBLEM).unwrap(), 3);
        assert!(matches!(r, Err(PpddlError::GroundingExplosion { limit: 3 })));
    }

    #[test]
    fn ill_typed_init_rejected() {
        let p = ROBOT_PROBLEM.replace("(at shakey kitchen)", "(at kitchen shakey)");
        let r = ground(&parse_domain(ROBOT).unwrap(), &parse_problem(&p).unwrap());
        assert!(matches!(r, Err(PpddlError::TypeMismatch(_))));
    }

    #[test]
    fn disjunctive_precondition_becomes_clause() {
        let d = "(define (domain d) (:predicates (p) (q) (r))
                  (:action a :parameters () :precondition (or (p) (q)) :effect (r))
                  (:action b :parameters () :precondition (and) :effect (and (q) (not (p)))))";
        let p = "(define (problem x) (:domain d) (:init (p)) (:goal (r)))";
        let gp = ground(&parse_domain(d).unwrap(), &parse_problem(p).unwrap()).unwrap();
        let a = &gp.actions[gp.action_index("a()").unwrap()];
        assert_eq!(a.pre_clauses.len(), 1);
        assert_eq!(a.pre_clauses[0].len(), 2);
        assert!(a.is_applicable(&gp.s0));
    }
}

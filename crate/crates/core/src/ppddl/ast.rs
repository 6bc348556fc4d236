//! Lifted domain and problem definitions.

use std::collections::BTreeSet;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

pub type Rational = BigRational;

pub const ROOT_TYPE: &str = "object";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    /// Variable, stored with its leading `?`.
    Var(String),
    Const(String),
}

impl Term {
    pub fn parse(s: &str) -> Term {
        if s.starts_with('?') {
            Term::Var(s.to_string())
        } else {
            Term::Const(s.to_string())
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Term::Var(s) | Term::Const(s) => s,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypedName {
    pub name: String,
    pub ty: String,
}

impl TypedName {
    pub fn new(name: impl Into<String>, ty: impl Into<String>) -> Self {
        TypedName {
            name: name.into(),
            ty: ty.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    pub name: String,
    pub params: Vec<TypedName>,
}

impl Predicate {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn param_types(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.ty.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LiftedProposition {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl fmt::Display for LiftedProposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Atom(LiftedProposition),
    Eq(Term, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    pub fn truth() -> Formula {
        Formula::And(Vec::new())
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a LiftedProposition>) {
        match self {
            Formula::Atom(a) => out.push(a),
            Formula::Eq(..) => {}
            Formula::Not(f) => f.collect_atoms(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_atoms(out)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Add(LiftedProposition),
    Del(LiftedProposition),
    And(Vec<Effect>),
    /// Branches with probabilities summing to at most one; the remainder is a no-op.
    Probabilistic(Vec<(Rational, Effect)>),
    When(Formula, Box<Effect>),
}

impl Effect {
    pub fn empty() -> Effect {
        Effect::And(Vec::new())
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a LiftedProposition>) {
        match self {
            Effect::Add(a) | Effect::Del(a) => out.push(a),
            Effect::And(es) => es.iter().for_each(|e| e.collect_atoms(out)),
            Effect::Probabilistic(bs) => bs.iter().for_each(|(_, e)| e.collect_atoms(out)),
            Effect::When(c, e) => {
                c.collect_atoms(out);
                e.collect_atoms(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<TypedName>,
    pub precondition: Formula,
    pub effect: Effect,
    pub cost: Rational,
}

impl ActionSchema {
    /// Distinct lifted propositions in order of first appearance, precondition before effect.
    /// Conditions of `when` effects count as effect propositions.
    pub fn unique_lifted_propositions(&self) -> Vec<LiftedProposition> {
        let mut atoms = Vec::new();
        self.precondition.collect_atoms(&mut atoms);
        self.effect.collect_atoms(&mut atoms);
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for a in atoms {
            if seen.insert(a) {
                out.push(a.clone());
            }
        }
        out
    }

    pub fn unit_cost(&self) -> bool {
        self.cost.is_one()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainDef {
    pub name: String,
    pub requirements: Vec<String>,
    /// Declared types with their parent type.
    pub types: Vec<TypedName>,
    pub constants: Vec<TypedName>,
    pub predicates: Vec<Predicate>,
    pub schemas: Vec<ActionSchema>,
}

impl DomainDef {
    pub fn predicate(&self, name: &str) -> Option<&Predicate> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn schema(&self, name: &str) -> Option<&ActionSchema> {
        self.schemas.iter().find(|s| s.name == name)
    }

    pub fn has_type(&self, ty: &str) -> bool {
        // A type used only as a parent counts as implicitly declared.
        ty == ROOT_TYPE || self.types.iter().any(|t| t.name == ty || t.ty == ty)
    }

    pub fn parent_type(&self, ty: &str) -> Option<&str> {
        if ty == ROOT_TYPE {
            return None;
        }
        self.types
            .iter()
            .find(|t| t.name == ty)
            .map(|t| t.ty.as_str())
            .or(Some(ROOT_TYPE))
    }

    /// True when `ty` equals `ancestor` or inherits from it.
    pub fn is_subtype(&self, ty: &str, ancestor: &str) -> bool {
        let mut cur = Some(ty);
        let mut hops = 0;
        while let Some(t) = cur {
            if t == ancestor {
                return true;
            }
            cur = self.parent_type(t);
            hops += 1;
            if hops > self.types.len() + 1 {
                return false;
            }
        }
        false
    }
}

/// A ground atom with canonical name `pred(a,b)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new(predicate: impl Into<String>, args: &[&str]) -> Self {
        GroundAtom {
            predicate: predicate.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Parses the canonical `pred(a,b)` form.
    pub fn parse_canonical(s: &str) -> Option<GroundAtom> {
        let s = s.trim();
        let open = s.find('(')?;
        let inner = s[open + 1..].strip_suffix(')')?;
        let args = if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner.split(',').map(|a| a.trim().to_lowercase()).collect()
        };
        Some(GroundAtom {
            predicate: s[..open].trim().to_lowercase(),
            args,
        })
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.predicate, self.args.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitElement {
    Fact(GroundAtom),
    /// Independent random choice between conjunctions of facts; remainder adds nothing.
    Probabilistic(Vec<(Rational, Vec<GroundAtom>)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemDef {
    pub name: String,
    pub domain_name: String,
    pub objects: Vec<TypedName>,
    pub init: Vec<InitElement>,
    pub goal: Vec<GroundAtom>,
}

impl ProblemDef {
    /// Expands stochastic initialisation into a distribution over initial fact sets.
    pub fn initial_distribution(&self) -> Vec<(BTreeSet<GroundAtom>, Rational)> {
        let mut dist: Vec<(BTreeSet<GroundAtom>, Rational)> = vec![(BTreeSet::new(), Rational::one())];
        for el in &self.init {
            match el {
                InitElement::Fact(a) => {
                    for (s, _) in dist.iter_mut() {
                        s.insert(a.clone());
                    }
                }
                InitElement::Probabilistic(branches) => {
                    let total: Rational = branches.iter().map(|(p, _)| p.clone()).sum();
                    let rest = Rational::one() - total;
                    let mut next = Vec::new();
                    for (s, p) in &dist {
                        for (bp, atoms) in branches {
                            let mut s2 = s.clone();
                            s2.extend(atoms.iter().cloned());
                            next.push((s2, p * bp));
                        }
                        if rest > Rational::zero() {
                            next.push((s.clone(), p * &rest));
                        }
                    }
                    dist = next;
                }
            }
        }
        let mut merged: Vec<(BTreeSet<GroundAtom>, Rational)> = Vec::new();
        for (s, p) in dist {
            if let Some(e) = merged.iter_mut().find(|(t, _)| *t == s) {
                e.1 += p;
            } else {
                merged.push((s, p));
            }
        }
        merged
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(p: &str, args: &[&str]) -> LiftedProposition {
        LiftedProposition {
            predicate: p.into(),
            args: args.iter().map(|a| Term::parse(a)).collect(),
        }
    }

    #[test]
    fn duplicate_slots_collapse() {
        let s = ActionSchema {
            name: "a".into(),
            params: vec![TypedName::new("?x", "object")],
            precondition: Formula::Atom(lp("at", &["?x"])),
            effect: Effect::And(vec![Effect::Del(lp("at", &["?x"])), Effect::Add(lp("done", &[]))]),
            cost: Rational::one(),
        };
        let u = s.unique_lifted_propositions();
        assert_eq!(u, vec![lp("at", &["?x"]), lp("done", &[])]);
    }

    #[test]
    fn canonical_names_round_trip() {
        let a = GroundAtom::new("at", &["shakey", "hall"]);
        assert_eq!(a.to_string(), "at(shakey,hall)");
        assert_eq!(GroundAtom::parse_canonical("at(shakey,hall)"), Some(a));
        let n = GroundAtom::new("not-flattire", &[]);
        assert_eq!(n.to_string(), "not-flattire()");
        assert_eq!(GroundAtom::parse_canonical("not-flattire()"), Some(n));
    }
}

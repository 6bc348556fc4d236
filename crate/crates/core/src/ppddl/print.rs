//! Pretty-printer producing PPDDL text that re-parses to the same definitions.

use std::fmt::Write;

use num_traits::One;

use super::ast::*;

pub fn rational_str(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn typed_list(items: &[TypedName]) -> String {
    items
        .iter()
        .map(|t| format!("{} - {}", t.name, t.ty))
        .collect::<Vec<_>>()
        .join(" ")
}

fn atom(a: &LiftedProposition) -> String {
    let mut s = format!("({}", a.predicate);
    for t in &a.args {
        s.push(' ');
        s.push_str(t.name());
    }
    s.push(')');
    s
}

pub fn formula_str(f: &Formula) -> String {
    match f {
        Formula::Atom(a) => atom(a),
        Formula::Eq(x, y) => format!("(= {x} {y})"),
        Formula::Not(x) => format!("(not {})", formula_str(x)),
        Formula::And(xs) => {
            let parts: Vec<String> = xs.iter().map(formula_str).collect();
            if parts.is_empty() {
                "(and)".into()
            } else {
                format!("(and {})", parts.join(" "))
            }
        }
        Formula::Or(xs) => format!("(or {})", xs.iter().map(formula_str).collect::<Vec<_>>().join(" ")),
    }
}

pub fn effect_str(e: &Effect) -> String {
    match e {
        Effect::Add(a) => atom(a),
        Effect::Del(a) => format!("(not {})", atom(a)),
        Effect::And(es) => {
            if es.is_empty() {
                "(and)".into()
            } else {
                format!("(and {})", es.iter().map(effect_str).collect::<Vec<_>>().join(" "))
            }
        }
        Effect::Probabilistic(bs) => {
            let parts: Vec<String> = bs
                .iter()
                .map(|(p, e)| format!("{} {}", rational_str(p), effect_str(e)))
                .collect();
            format!("(probabilistic {})", parts.join(" "))
        }
        Effect::When(c, e) => format!("(when {} {})", formula_str(c), effect_str(e)),
    }
}

pub fn print_domain(d: &DomainDef) -> String {
    let mut s = String::new();
    writeln!(s, "(define (domain {})", d.name).unwrap();
    if !d.requirements.is_empty() {
        writeln!(s, "  (:requirements {})", d.requirements.join(" ")).unwrap();
    }
    if !d.types.is_empty() {
        writeln!(s, "  (:types {})", typed_list(&d.types)).unwrap();
    }
    if !d.constants.is_empty() {
        writeln!(s, "  (:constants {})", typed_list(&d.constants)).unwrap();
    }
    writeln!(s, "  (:predicates").unwrap();
    for p in &d.predicates {
        if p.params.is_empty() {
            writeln!(s, "    ({})", p.name).unwrap();
        } else {
            writeln!(s, "    ({} {})", p.name, typed_list(&p.params)).unwrap();
        }
    }
    writeln!(s, "  )").unwrap();
    for a in &d.schemas {
        writeln!(s, "  (:action {}", a.name).unwrap();
        writeln!(s, "    :parameters ({})", typed_list(&a.params)).unwrap();
        writeln!(s, "    :precondition {}", formula_str(&a.precondition)).unwrap();
        writeln!(s, "    :effect {}", effect_str(&a.effect)).unwrap();
        if !a.cost.is_one() {
            writeln!(s, "    :cost {}", rational_str(&a.cost)).unwrap();
        }
        writeln!(s, "  )").unwrap();
    }
    s.push_str(")\n");
    s
}

fn ground_atom_str(a: &GroundAtom) -> String {
    if a.args.is_empty() {
        format!("({})", a.predicate)
    } else {
        format!("({} {})", a.predicate, a.args.join(" "))
    }
}

pub fn print_problem(p: &ProblemDef) -> String {
    let mut s = String::new();
    writeln!(s, "(define (problem {})", p.name).unwrap();
    writeln!(s, "  (:domain {})", p.domain_name).unwrap();
    writeln!(s, "  (:objects {})", typed_list(&p.objects)).unwrap();
    writeln!(s, "  (:init").unwrap();
    for el in &p.init {
        match el {
            InitElement::Fact(a) => writeln!(s, "    {}", ground_atom_str(a)).unwrap(),
            InitElement::Probabilistic(bs) => {
                let parts: Vec<String> = bs
                    .iter()
                    .map(|(pr, atoms)| {
                        let body: Vec<String> = atoms.iter().map(ground_atom_str).collect();
                        format!("{} (and {})", rational_str(pr), body.join(" "))
                    })
                    .collect();
                writeln!(s, "    (probabilistic {})", parts.join(" ")).unwrap();
            }
        }
    }
    writeln!(s, "  )").unwrap();
    let goal: Vec<String> = p.goal.iter().map(ground_atom_str).collect();
    writeln!(s, "  (:goal (and {}))", goal.join(" ")).unwrap();
    s.push_str(")\n");
    s
}

//! PPDDL subset parser.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::ast::*;
use super::sexpr::{read_all, syntax, Pos, Sexpr};
use super::{PpddlError, Unsupported};

type Result<T> = std::result::Result<T, PpddlError>;

fn expect_list<'a>(e: &'a Sexpr, what: &str) -> Result<&'a [Sexpr]> {
    e.as_list().ok_or_else(|| syntax(e.pos(), format!("expected list for {what}")))
}

fn expect_atom<'a>(e: &'a Sexpr, what: &str) -> Result<&'a str> {
    e.as_atom().ok_or_else(|| syntax(e.pos(), format!("expected name for {what}")))
}

/// Parses `define` header and returns (kind keyword, name, remaining sections).
fn parse_define<'a>(text: &'a str, kind: &str) -> Result<(String, Vec<Sexpr>, Pos)> {
    let top = read_all(text)?;
    let first = top
        .first()
        .ok_or_else(|| syntax(Pos { line: 1, col: 1 }, "empty input"))?;
    if top.len() > 1 {
        return Err(syntax(top[1].pos(), "trailing content after define"));
    }
    let items = expect_list(first, "define")?;
    if first.head() != Some("define") || items.len() < 2 {
        return Err(syntax(first.pos(), "expected (define ...)"));
    }
    let header = expect_list(&items[1], "header")?;
    if header.len() != 2 || header[0].as_atom() != Some(kind) {
        return Err(syntax(items[1].pos(), format!("expected ({kind} <name>)")));
    }
    let name = expect_atom(&header[1], "name")?.to_string();
    Ok((name, items[2..].to_vec(), first.pos()))
}

/// Parses `a b - t c - u d` into typed names; untyped names default to `object`.
fn parse_typed_list(items: &[Sexpr], vars: bool) -> Result<Vec<TypedName>> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let e = &items[i];
        let a = expect_atom(e, "typed list element")?;
        if a == "-" {
            let t = items
                .get(i + 1)
                .ok_or_else(|| syntax(e.pos(), "missing type after '-'"))?;
            if t.head() == Some("either") {
                return Err(syntax(t.pos(), "either-types are not supported"));
            }
            let ty = expect_atom(t, "type")?;
            if pending.is_empty() {
                return Err(syntax(e.pos(), "type without names"));
            }
            out.extend(pending.drain(..).map(|n| TypedName::new(n, ty)));
            i += 2;
            continue;
        }
        if vars != a.starts_with('?') {
            return Err(syntax(
                e.pos(),
                if vars {
                    format!("expected variable, found '{a}'")
                } else {
                    format!("unexpected variable '{a}'")
                },
            ));
        }
        pending.push(a.to_string());
        i += 1;
    }
    out.extend(pending.into_iter().map(|n| TypedName::new(n, ROOT_TYPE)));
    Ok(out)
}

/// Exact rational from `0.9`, `.5`, `1/2` or `3`.
pub fn parse_rational(s: &str) -> Option<Rational> {
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.parse().ok()?;
        let d: BigInt = d.parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let (ip, fp) = body.split_once('.').unwrap_or((body, ""));
    if ip.is_empty() && fp.is_empty() {
        return None;
    }
    if !ip.chars().all(|c| c.is_ascii_digit()) || !fp.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{ip}{fp}");
    let n: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().ok()?
    };
    let d = num_traits::pow(BigInt::from(10), fp.len());
    let r = Rational::new(n, d);
    Some(if neg { -r } else { r })
}

fn numeric_or_reward(args: &[Sexpr]) -> PpddlError {
    let target = args.get(1).and_then(Sexpr::head).or_else(|| args.get(1).and_then(Sexpr::as_atom));
    if target == Some("reward") {
        PpddlError::Unsupported(Unsupported::Reward)
    } else {
        PpddlError::Unsupported(Unsupported::NumericFluent)
    }
}

fn parse_atom_terms(items: &[Sexpr], pos: Pos) -> Result<LiftedProposition> {
    let pred = expect_atom(&items[0], "predicate")?;
    let mut args = Vec::new();
    for a in &items[1..] {
        let t = a
            .as_atom()
            .ok_or_else(|| syntax(a.pos(), "nested terms (functions) are not supported"))?;
        args.push(Term::parse(t));
    }
    if pred.starts_with('?') {
        return Err(syntax(pos, "variable in predicate position"));
    }
    Ok(LiftedProposition {
        predicate: pred.to_string(),
        args,
    })
}

fn parse_formula(e: &Sexpr) -> Result<Formula> {
    let items = expect_list(e, "formula")?;
    let Some(head) = e.head() else {
        if items.is_empty() {
            return Ok(Formula::truth());
        }
        return Err(syntax(e.pos(), "formula must start with a keyword or predicate"));
    };
    match head {
        "and" => Ok(Formula::And(items[1..].iter().map(parse_formula).collect::<Result<_>>()?)),
        "or" => Ok(Formula::Or(items[1..].iter().map(parse_formula).collect::<Result<_>>()?)),
        "not" => {
            if items.len() != 2 {
                return Err(syntax(e.pos(), "not takes one argument"));
            }
            Ok(Formula::Not(Box::new(parse_formula(&items[1])?)))
        }
        "imply" => {
            if items.len() != 3 {
                return Err(syntax(e.pos(), "imply takes two arguments"));
            }
            Ok(Formula::Or(vec![
                Formula::Not(Box::new(parse_formula(&items[1])?)),
                parse_formula(&items[2])?,
            ]))
        }
        "forall" | "exists" => Err(PpddlError::Unsupported(Unsupported::Quantifier)),
        "<" | ">" | "<=" | ">=" => Err(PpddlError::Unsupported(Unsupported::NumericFluent)),
        "=" => {
            if items.len() != 3 {
                return Err(syntax(e.pos(), "= takes two arguments"));
            }
            if items[1].as_list().is_some() || items[2].as_list().is_some() {
                return Err(PpddlError::Unsupported(Unsupported::NumericFluent));
            }
            Ok(Formula::Eq(
                Term::parse(expect_atom(&items[1], "term")?),
                Term::parse(expect_atom(&items[2], "term")?),
            ))
        }
        _ => Ok(Formula::Atom(parse_atom_terms(items, e.pos())?)),
    }
}

fn parse_effect(e: &Sexpr) -> Result<Effect> {
    let items = expect_list(e, "effect")?;
    let Some(head) = e.head() else {
        if items.is_empty() {
            return Ok(Effect::empty());
        }
        return Err(syntax(e.pos(), "effect must start with a keyword or predicate"));
    };
    match head {
        "and" => Ok(Effect::And(items[1..].iter().map(parse_effect).collect::<Result<_>>()?)),
        "not" => {
            if items.len() != 2 {
                return Err(syntax(e.pos(), "not takes one argument"));
            }
            let inner = expect_list(&items[1], "deleted atom")?;
            match items[1].head() {
                Some("and" | "not" | "when" | "probabilistic" | "forall") | None => {
                    Err(syntax(items[1].pos(), "only atoms may be negated in effects"))
                }
                Some(_) => Ok(Effect::Del(parse_atom_terms(inner, items[1].pos())?)),
            }
        }
        "probabilistic" => {
            let rest = &items[1..];
            if rest.is_empty() || rest.len() % 2 != 0 {
                return Err(syntax(e.pos(), "probabilistic expects probability/effect pairs"));
            }
            let mut branches = Vec::new();
            let mut total = Rational::zero();
            for pair in rest.chunks(2) {
                let ps = expect_atom(&pair[0], "probability")?;
                let p = parse_rational(ps)
                    .ok_or_else(|| syntax(pair[0].pos(), format!("bad probability '{ps}'")))?;
                if p < Rational::zero() {
                    return Err(syntax(pair[0].pos(), "negative probability"));
                }
                total += &p;
                branches.push((p, parse_effect(&pair[1])?));
            }
            if total > Rational::one() {
                return Err(syntax(e.pos(), "probabilities sum to more than 1"));
            }
            Ok(Effect::Probabilistic(branches))
        }
        "when" => {
            if items.len() != 3 {
                return Err(syntax(e.pos(), "when takes a condition and an effect"));
            }
            Ok(Effect::When(parse_formula(&items[1])?, Box::new(parse_effect(&items[2])?)))
        }
        "forall" | "exists" => Err(PpddlError::Unsupported(Unsupported::Quantifier)),
        "increase" | "decrease" | "assign" | "scale-up" | "scale-down" => Err(numeric_or_reward(items)),
        _ => Ok(Effect::Add(parse_atom_terms(items, e.pos())?)),
    }
}

fn parse_action(items: &[Sexpr], pos: Pos) -> Result<ActionSchema> {
    let name = expect_atom(items.get(1).ok_or_else(|| syntax(pos, "action without name"))?, "action name")?;
    let mut params = Vec::new();
    let mut precondition = Formula::truth();
    let mut effect = Effect::empty();
    let mut cost = Rational::one();
    let mut i = 2;
    while i < items.len() {
        let key = expect_atom(&items[i], "action keyword")?;
        let val = items
            .get(i + 1)
            .ok_or_else(|| syntax(items[i].pos(), format!("missing value for {key}")))?;
        match key {
            ":parameters" => params = parse_typed_list(expect_list(val, "parameters")?, true)?,
            ":precondition" => precondition = parse_formula(val)?,
            ":effect" => effect = parse_effect(val)?,
            ":cost" => {
                let s = expect_atom(val, "cost")?;
                cost = parse_rational(s).ok_or_else(|| syntax(val.pos(), format!("bad cost '{s}'")))?;
                if cost <= Rational::zero() {
                    return Err(PpddlError::Invalid(format!("action {name}: cost must be positive")));
                }
            }
            _ => return Err(syntax(items[i].pos(), format!("unknown action keyword {key}"))),
        }
        i += 2;
    }
    Ok(ActionSchema {
        name: name.to_string(),
        params,
        precondition,
        effect,
        cost,
    })
}

pub fn parse_domain(text: &str) -> Result<DomainDef> {
    let (name, sections, _) = parse_define(text, "domain")?;
    let mut d = DomainDef {
        name,
        requirements: Vec::new(),
        types: Vec::new(),
        constants: Vec::new(),
        predicates: Vec::new(),
        schemas: Vec::new(),
    };
    for sec in &sections {
        let items = expect_list(sec, "domain section")?;
        let head = sec.head().ok_or_else(|| syntax(sec.pos(), "expected section keyword"))?;
        match head {
            ":requirements" => {
                for r in &items[1..] {
                    d.requirements.push(expect_atom(r, "requirement")?.to_string());
                }
            }
            ":types" => d.types.extend(parse_typed_list(&items[1..], false)?),
            ":constants" => d.constants.extend(parse_typed_list(&items[1..], false)?),
            ":predicates" => {
                for p in &items[1..] {
                    let pl = expect_list(p, "predicate")?;
                    let pname = expect_atom(pl.first().ok_or_else(|| syntax(p.pos(), "empty predicate"))?, "predicate")?;
                    d.predicates.push(Predicate {
                        name: pname.to_string(),
                        params: parse_typed_list(&pl[1..], true)?,
                    });
                }
            }
            ":functions" => return Err(PpddlError::Unsupported(Unsupported::NumericFluent)),
            ":derived" | ":axiom" => return Err(PpddlError::Unsupported(Unsupported::DomainAxiom)),
            ":durative-action" => return Err(PpddlError::Unsupported(Unsupported::DurativeAction)),
            ":action" => d.schemas.push(parse_action(items, sec.pos())?),
            other => return Err(syntax(sec.pos(), format!("unknown domain section {other}"))),
        }
    }
    validate_domain(&d)?;
    Ok(d)
}

fn check_type(d: &DomainDef, ty: &str) -> Result<()> {
    if d.has_type(ty) {
        Ok(())
    } else {
        Err(PpddlError::UndeclaredType(ty.to_string()))
    }
}

fn validate_domain(d: &DomainDef) -> Result<()> {
    for t in &d.types {
        check_type(d, &t.ty)?;
    }
    for t in &d.types {
        if d.is_subtype(&t.ty, &t.name) {
            return Err(PpddlError::Invalid(format!("cyclic type hierarchy at {}", t.name)));
        }
    }
    for c in &d.constants {
        check_type(d, &c.ty)?;
    }
    let mut seen = HashSet::new();
    for p in &d.predicates {
        if !seen.insert(&p.name) {
            return Err(PpddlError::DuplicatePredicate(p.name.clone()));
        }
        for a in &p.params {
            check_type(d, &a.ty)?;
        }
    }
    let mut seen = HashSet::new();
    for s in &d.schemas {
        if !seen.insert(&s.name) {
            return Err(PpddlError::DuplicateSchema(s.name.clone()));
        }
        let mut pnames = HashSet::new();
        for p in &s.params {
            check_type(d, &p.ty)?;
            if !pnames.insert(&p.name) {
                return Err(PpddlError::Invalid(format!("schema {}: duplicate parameter {}", s.name, p.name)));
            }
        }
        let term_type = |t: &Term| -> Result<String> {
            match t {
                Term::Var(v) => s
                    .params
                    .iter()
                    .find(|p| &p.name == v)
                    .map(|p| p.ty.clone())
                    .ok_or_else(|| PpddlError::UnknownTerm(format!("{v} in schema {}", s.name))),
                Term::Const(c) => d
                    .constants
                    .iter()
                    .find(|k| &k.name == c)
                    .map(|k| k.ty.clone())
                    .ok_or_else(|| PpddlError::UnknownTerm(format!("{c} in schema {}", s.name))),
            }
        };
        let check_atom = |a: &LiftedProposition| -> Result<()> {
            let p = d
                .predicate(&a.predicate)
                .ok_or_else(|| PpddlError::UnknownPredicate(a.predicate.clone()))?;
            if p.arity() != a.args.len() {
                return Err(PpddlError::ArityMismatch {
                    predicate: a.predicate.clone(),
                    expected: p.arity(),
                    found: a.args.len(),
                });
            }
            for (t, decl) in a.args.iter().zip(&p.params) {
                let ty = term_type(t)?;
                if !d.is_subtype(&ty, &decl.ty) && !d.is_subtype(&decl.ty, &ty) {
                    return Err(PpddlError::TypeMismatch(format!(
                        "{t} of type {ty} used as {} argument of {}",
                        decl.ty, a.predicate
                    )));
                }
            }
            Ok(())
        };
        fn walk_f(f: &Formula, g: &mut dyn FnMut(&Formula) -> Result<()>) -> Result<()> {
            g(f)?;
            match f {
                Formula::Not(x) => walk_f(x, g),
                Formula::And(xs) | Formula::Or(xs) => xs.iter().try_for_each(|x| walk_f(x, g)),
                _ => Ok(()),
            }
        }
        let mut on_formula = |f: &Formula| -> Result<()> {
            match f {
                Formula::Atom(a) => check_atom(a),
                Formula::Eq(x, y) => {
                    term_type(x)?;
                    term_type(y)?;
                    Ok(())
                }
                _ => Ok(()),
            }
        };
        walk_f(&s.precondition, &mut on_formula)?;
        fn walk_e(
            e: &Effect,
            atom: &dyn Fn(&LiftedProposition) -> Result<()>,
            form: &mut dyn FnMut(&Formula) -> Result<()>,
        ) -> Result<()> {
            match e {
                Effect::Add(a) | Effect::Del(a) => atom(a),
                Effect::And(es) => es.iter().try_for_each(|x| walk_e(x, atom, form)),
                Effect::Probabilistic(bs) => bs.iter().try_for_each(|(_, x)| walk_e(x, atom, form)),
                Effect::When(c, x) => {
                    walk_f(c, form)?;
                    walk_e(x, atom, form)
                }
            }
        }
        walk_e(&s.effect, &check_atom, &mut on_formula)?;
    }
    Ok(())
}

fn parse_ground_atom(e: &Sexpr) -> Result<GroundAtom> {
    let items = expect_list(e, "ground atom")?;
    let lp = parse_atom_terms(
        items.first().map(|_| items).ok_or_else(|| syntax(e.pos(), "empty atom"))?,
        e.pos(),
    )?;
    let mut args = Vec::new();
    for t in lp.args {
        match t {
            Term::Const(c) => args.push(c),
            Term::Var(v) => return Err(syntax(e.pos(), format!("variable {v} in ground atom"))),
        }
    }
    Ok(GroundAtom {
        predicate: lp.predicate,
        args,
    })
}

fn parse_init_conj(e: &Sexpr) -> Result<Vec<GroundAtom>> {
    match e.head() {
        Some("and") => {
            let mut out = Vec::new();
            for x in &e.as_list().unwrap()[1..] {
                out.extend(parse_init_conj(x)?);
            }
            Ok(out)
        }
        Some("probabilistic") => Err(syntax(e.pos(), "nested probabilistic init is not supported")),
        Some("=") => Err(PpddlError::Unsupported(Unsupported::NumericFluent)),
        Some("not") => Err(syntax(e.pos(), "negative literals in init")),
        _ => Ok(vec![parse_ground_atom(e)?]),
    }
}

fn parse_goal(e: &Sexpr, out: &mut Vec<GroundAtom>) -> Result<()> {
    let items = expect_list(e, "goal")?;
    match e.head() {
        None if items.is_empty() => Ok(()),
        Some("and") => items[1..].iter().try_for_each(|x| parse_goal(x, out)),
        Some("not") => Err(PpddlError::Unsupported(Unsupported::NegativeGoalLiteral)),
        Some("or" | "imply") => Err(PpddlError::Unsupported(Unsupported::DisjunctiveGoal)),
        Some("forall" | "exists") => Err(PpddlError::Unsupported(Unsupported::Quantifier)),
        Some("=" | "<" | ">" | "<=" | ">=") => Err(PpddlError::Unsupported(Unsupported::NumericFluent)),
        _ => {
            out.push(parse_ground_atom(e)?);
            Ok(())
        }
    }
}

pub fn parse_problem(text: &str) -> Result<ProblemDef> {
    let (name, sections, pos) = parse_define(text, "problem")?;
    let mut domain_name = None;
    let mut objects = Vec::new();
    let mut init = Vec::new();
    let mut goal = None;
    for sec in &sections {
        let items = expect_list(sec, "problem section")?;
        let head = sec.head().ok_or_else(|| syntax(sec.pos(), "expected section keyword"))?;
        match head {
            ":domain" => {
                domain_name = Some(expect_atom(items.get(1).ok_or_else(|| syntax(sec.pos(), "missing domain name"))?, "domain")?.to_string())
            }
            ":requirements" => {}
            ":objects" => objects.extend(parse_typed_list(&items[1..], false)?),
            ":init" => {
                for el in &items[1..] {
                    match el.head() {
                        Some("probabilistic") => {
                            let rest = &el.as_list().unwrap()[1..];
                            if rest.is_empty() || rest.len() % 2 != 0 {
                                return Err(syntax(el.pos(), "probabilistic expects probability/effect pairs"));
                            }
                            let mut branches = Vec::new();
                            let mut total = Rational::zero();
                            for pair in rest.chunks(2) {
                                let ps = expect_atom(&pair[0], "probability")?;
                                let p = parse_rational(ps)
                                    .ok_or_else(|| syntax(pair[0].pos(), format!("bad probability '{ps}'")))?;
                                total += &p;
                                branches.push((p, parse_init_conj(&pair[1])?));
                            }
                            if total > Rational::one() {
                                return Err(syntax(el.pos(), "probabilities sum to more than 1"));
                            }
                            init.push(InitElement::Probabilistic(branches));
                        }
                        _ => init.extend(parse_init_conj(el)?.into_iter().map(InitElement::Fact)),
                    }
                }
            }
            ":goal" => {
                let mut g = Vec::new();
                parse_goal(items.get(1).ok_or_else(|| syntax(sec.pos(), "missing goal"))?, &mut g)?;
                let mut seen = HashSet::new();
                g.retain(|a| seen.insert(a.clone()));
                goal = Some(g);
            }
            ":goal-reward" => return Err(PpddlError::Unsupported(Unsupported::Reward)),
            ":metric" => {
                let mentions_reward = format!("{:?}", items).contains("\"reward\"");
                if mentions_reward {
                    return Err(PpddlError::Unsupported(Unsupported::Reward));
                }
            }
            ":horizon" => {}
            other => return Err(syntax(sec.pos(), format!("unknown problem section {other}"))),
        }
    }
    Ok(ProblemDef {
        name,
        domain_name: domain_name.ok_or_else(|| syntax(pos, "problem without (:domain ...)"))?,
        objects,
        init,
        goal: goal.ok_or_else(|| syntax(pos, "problem without (:goal ...)"))?,
    })
}

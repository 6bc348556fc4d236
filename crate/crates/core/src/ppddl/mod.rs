//! PPDDL subset: reading, printing and grounding into indexed factored problems.

pub mod ast;
mod ground;
mod parse;
mod print;
pub mod sexpr;

use std::fmt;

pub use ast::*;
pub use ground::{
    ground, ground_with_limit, CondEffect, GroundAction, GroundProblem, GroundingStats, Literal, Outcome,
    DEFAULT_ACTION_LIMIT,
};
pub use parse::{parse_domain, parse_problem, parse_rational};
pub use print::{effect_str, formula_str, print_domain, print_problem, rational_str};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unsupported {
    Quantifier,
    NumericFluent,
    Reward,
    DomainAxiom,
    DurativeAction,
    NegativeGoalLiteral,
    DisjunctiveGoal,
    DisjunctiveEffectCondition,
}

impl fmt::Display for Unsupported {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unsupported::Quantifier => "quantifier",
            Unsupported::NumericFluent => "numeric-fluent",
            Unsupported::Reward => "reward",
            Unsupported::DomainAxiom => "non-conjunctive-goal-in-domain-axiom",
            Unsupported::DurativeAction => "durative-action",
            Unsupported::NegativeGoalLiteral => "negative-goal-literal",
            Unsupported::DisjunctiveGoal => "disjunctive-goal",
            Unsupported::DisjunctiveEffectCondition => "disjunctive-effect-condition",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PpddlError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unsupported feature: {0}")]
    Unsupported(Unsupported),
    #[error("undeclared type {0}")]
    UndeclaredType(String),
    #[error("duplicate predicate {0}")]
    DuplicatePredicate(String),
    #[error("duplicate action schema {0}")]
    DuplicateSchema(String),
    #[error("unknown predicate {0}")]
    UnknownPredicate(String),
    #[error("unknown term {0}")]
    UnknownTerm(String),
    #[error("predicate {predicate} expects {expected} arguments, found {found}")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("problem refers to domain {problem}, not {domain}")]
    DomainMismatch { domain: String, problem: String },
    #[error("grounding produced more than {limit} actions")]
    GroundingExplosion { limit: usize },
    #[error("{0}")]
    Invalid(String),
}

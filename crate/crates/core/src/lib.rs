//! Generalised planning with action schema networks.
//!
//! The pipeline: parse PPDDL ([`ppddl`]), ground into a factored SSP ([`ssp`]),
//! compute delete-relaxation features ([`heuristics`]), label states with a
//! teacher planner ([`teachers`]), wire a weight-shared network over the
//! relatedness graph ([`relatedness`], [`asnet`]), train it by imitation
//! ([`training`]) and evaluate or inspect the resulting policy ([`eval`]).

pub mod domains;
pub mod fixtures;
pub mod heuristics;
pub mod ppddl;
pub mod ssp;
pub mod relatedness;
pub mod asnet;
pub mod teachers;
pub mod training;
pub mod eval;

pub use ppddl::{GroundAction, GroundProblem};
pub use ssp::State;

use std::sync::Arc;

use crate::heuristics::{landmark_features, RelaxedTask};
use crate::ppddl::GroundProblem;
use crate::relatedness::FeatureFlags;
use crate::ssp::State;

/// Everything a forward pass needs to know about one state.
#[derive(Debug, Clone, PartialEq)]
pub struct InputFeatures {
    pub state: State,
    pub enabled: Vec<bool>,
    /// Per action `c`; empty when landmark features are off.
    pub landmarks: Vec<[bool; 3]>,
    /// Per action execution counts; empty when history features are off.
    pub counts: Vec<f64>,
}

/// Computes input features for states of one problem.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    pub gp: Arc<GroundProblem>,
    pub flags: FeatureFlags,
    task: Option<RelaxedTask>,
}

impl FeatureExtractor {
    pub fn new(gp: Arc<GroundProblem>, flags: FeatureFlags) -> FeatureExtractor {
        let task = flags.landmarks.then(|| RelaxedTask::new(&gp));
        FeatureExtractor { gp, flags, task }
    }

    /// `counts` may be empty, which means all zero.
    pub fn extract(&self, s: &State, counts: &[u32]) -> InputFeatures {
        let n = self.gp.num_actions();
        let enabled = self.gp.actions.iter().map(|a| a.is_applicable(s)).collect();
        let landmarks = match &self.task {
            Some(t) => landmark_features(t, &self.gp, s),
            None => Vec::new(),
        };
        let counts = if self.flags.history {
            (0..n).map(|a| counts.get(a).copied().unwrap_or(0) as f64).collect()
        } else {
            Vec::new()
        };
        InputFeatures {
            state: s.clone(),
            enabled,
            landmarks,
            counts,
        }
    }
}

//! The action schema network: shared parameters, forward and reverse passes,
//! the imitation loss, Adam, and checkpoints.

mod adam;
mod checkpoint;
mod features;
mod net;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use std::sync::Arc;

use crate::ppddl::GroundProblem;
use crate::relatedness::{action_in_dim, prop_in_dim, schema_signature, AsnetTopology, FeatureFlags, SchemaSignature};
use crate::ssp::State;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, store_from_json, store_to_json, store_to_json_with_note};
pub use features::{FeatureExtractor, InputFeatures};
pub use net::{backward, batch_loss, elu, forward, forward_activations, masked_softmax, BatchItem, Mode, Tape};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AsnetError {
    #[error("no enabled actions")]
    NoEnabledActions,
    #[error("tape does not match the network: {0}")]
    TapeMismatch(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("checkpoint does not fit the target domain: {0}")]
    ShapeMismatch(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// One module weight matrix (`d_out x d_in`) and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    pub fn zeros(d_out: usize, d_in: usize) -> Linear {
        Linear {
            w: Array2::zeros((d_out, d_in)),
            b: Array1::zeros(d_out),
        }
    }

    fn zeros_like(&self) -> Linear {
        Linear::zeros(self.w.nrows(), self.w.ncols())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyper {
    /// Number of proposition layers; there is one more action layer.
    pub layers: usize,
    pub d_h: usize,
    pub flags: FeatureFlags,
}

/// Per schema and action layer, and per predicate and proposition layer, one `Linear`.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// `action[schema][l - 1]` for action layers `l = 1..=L+1`.
    pub action: Vec<Vec<Linear>>,
    /// `prop[predicate][l - 1]` for proposition layers `l = 1..=L`.
    pub prop: Vec<Vec<Linear>>,
}

impl Params {
    pub fn zeros(sig: &SchemaSignature, hyper: &Hyper) -> Params {
        let action = (0..sig.schemas.len())
            .map(|s| {
                (1..=hyper.layers + 1)
                    .map(|l| {
                        let out = if l == hyper.layers + 1 { 1 } else { hyper.d_h };
                        Linear::zeros(out, action_in_dim(sig, s, l, hyper.d_h, &hyper.flags))
                    })
                    .collect()
            })
            .collect();
        let prop = (0..sig.predicates.len())
            .map(|p| {
                (1..=hyper.layers)
                    .map(|l| Linear::zeros(hyper.d_h, prop_in_dim(sig, p, l, hyper.d_h, &hyper.flags)))
                    .collect()
            })
            .collect();
        Params { action, prop }
    }

    pub fn zeros_like(&self) -> Params {
        Params {
            action: self.action.iter().map(|v| v.iter().map(Linear::zeros_like).collect()).collect(),
            prop: self.prop.iter().map(|v| v.iter().map(Linear::zeros_like).collect()).collect(),
        }
    }

    pub fn linears(&self) -> impl Iterator<Item = &Linear> {
        self.action.iter().flatten().chain(self.prop.iter().flatten())
    }

    pub fn linears_mut(&mut self) -> impl Iterator<Item = &mut Linear> {
        self.action.iter_mut().flatten().chain(self.prop.iter_mut().flatten())
    }

    /// Every tensor as a flat slice, weights before bias for each module.
    pub fn slices(&self) -> Vec<&[f64]> {
        self.linears()
            .flat_map(|l| [l.w.as_slice().expect("standard layout"), l.b.as_slice().expect("standard layout")])
            .collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.linears_mut()
            .flat_map(|l| [l.w.as_slice_mut().expect("standard layout"), l.b.as_slice_mut().expect("standard layout")])
            .collect()
    }

    pub fn add_assign(&mut self, other: &Params) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for a in self.slices_mut() {
            for x in a {
                *x *= k;
            }
        }
    }

    pub fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn count_nonzero(&self) -> usize {
        self.slices().iter().map(|s| s.iter().filter(|x| **x != 0.0).count()).sum()
    }

    pub fn sq_norm(&self) -> f64 {
        self.slices().iter().flat_map(|s| s.iter()).map(|x| x * x).sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.slices().iter().flat_map(|s| s.iter()).map(|x| x.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.slices().iter().flat_map(|s| s.iter()).fold(0.0, |m, x| m.max(x.abs()))
    }
}

pub type GradientSet = Params;

/// Weight initialisation schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    /// Uniform on ±sqrt(6 / (d_in + d_out)), zero biases.
    #[default]
    GlorotUniform,
    Zeros,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore {
    pub hyper: Hyper,
    pub signature: SchemaSignature,
    pub params: Params,
}

impl ParameterStore {
    pub fn zeros(signature: SchemaSignature, hyper: Hyper) -> ParameterStore {
        let params = Params::zeros(&signature, &hyper);
        ParameterStore { hyper, signature, params }
    }

    pub fn action_linear(&self, schema: &str, layer: usize) -> Option<&Linear> {
        let s = self.signature.schema_index(schema)?;
        self.params.action[s].get(layer.checked_sub(1)?)
    }

    pub fn action_linear_mut(&mut self, schema: &str, layer: usize) -> Option<&mut Linear> {
        let s = self.signature.schema_index(schema)?;
        self.params.action[s].get_mut(layer.checked_sub(1)?)
    }

    pub fn prop_linear(&self, predicate: &str, layer: usize) -> Option<&Linear> {
        let p = self.signature.predicate_index(predicate)?;
        self.params.prop[p].get(layer.checked_sub(1)?)
    }

    pub fn prop_linear_mut(&mut self, predicate: &str, layer: usize) -> Option<&mut Linear> {
        let p = self.signature.predicate_index(predicate)?;
        self.params.prop[p].get_mut(layer.checked_sub(1)?)
    }

    /// Tensor names in storage order, paired with the tensors.
    pub fn named_tensors(&self) -> Vec<(String, &Linear)> {
        let mut out = Vec::new();
        for (s, layers) in self.params.action.iter().enumerate() {
            for (l, lin) in layers.iter().enumerate() {
                out.push((format!("schema/{}/{}", self.signature.schemas[s].name, l + 1), lin));
            }
        }
        for (p, layers) in self.params.prop.iter().enumerate() {
            for (l, lin) in layers.iter().enumerate() {
                out.push((format!("predicate/{}/{}", self.signature.predicates[p].name, l + 1), lin));
            }
        }
        out
    }

    /// Checks that this store can drive networks for problems with signature `sig`.
    pub fn check_signature(&self, sig: &SchemaSignature) -> Result<(), AsnetError> {
        if self.signature.schemas != sig.schemas || self.signature.predicates != sig.predicates {
            return Err(AsnetError::ShapeMismatch(format!(
                "store was built for domain {} and does not match {}",
                self.signature.domain, sig.domain
            )));
        }
        Ok(())
    }

    /// Sets every weight with magnitude below `tau` to exactly zero.
    pub fn prune(&mut self, tau: f64) -> usize {
        let mut pruned = 0;
        for s in self.params.slices_mut() {
            for x in s {
                if *x != 0.0 && x.abs() < tau {
                    *x = 0.0;
                    pruned += 1;
                }
            }
        }
        pruned
    }
}

/// A network instantiated for one ground problem.
#[derive(Debug, Clone)]
pub struct ProblemNet {
    pub gp: Arc<GroundProblem>,
    pub topo: AsnetTopology,
    pub extractor: FeatureExtractor,
}

impl ProblemNet {
    pub fn new(gp: Arc<GroundProblem>, store: &ParameterStore) -> Result<ProblemNet, AsnetError> {
        let sig = schema_signature(&gp.domain);
        store.check_signature(&sig)?;
        let h = store.hyper;
        let topo = AsnetTopology::build(&gp, &sig, h.layers, h.d_h, h.flags).map_err(|e| AsnetError::ShapeMismatch(e.to_string()))?;
        let extractor = FeatureExtractor::new(gp.clone(), h.flags);
        Ok(ProblemNet { gp, topo, extractor })
    }

    pub fn features(&self, s: &State, counts: &[u32]) -> InputFeatures {
        self.extractor.extract(s, counts)
    }

    /// Eval-mode action probabilities.
    pub fn policy(&self, store: &ParameterStore, s: &State, counts: &[u32]) -> Result<Vec<f64>, AsnetError> {
        self.policy_for(store, &self.features(s, counts))
    }

    pub fn policy_for(&self, store: &ParameterStore, f: &InputFeatures) -> Result<Vec<f64>, AsnetError> {
        forward(store, &self.topo, f, Mode::Eval).map(|(pi, _)| pi)
    }
}

pub fn init_params<R: Rng + ?Sized>(signature: &SchemaSignature, hyper: Hyper, rng: &mut R, scheme: InitScheme) -> ParameterStore {
    let mut store = ParameterStore::zeros(signature.clone(), hyper);
    if scheme == InitScheme::GlorotUniform {
        for lin in store.params.linears_mut() {
            let (d_out, d_in) = lin.w.dim();
            let limit = (6.0 / (d_in + d_out).max(1) as f64).sqrt();
            lin.w.mapv_inplace(|_| rng.gen_range(-limit..=limit));
        }
    }
    store
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains;
    use crate::relatedness::schema_signature;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ttw_store(seed: u64) -> ParameterStore {
        let gp = domains::triangle_tireworld(1).ground().unwrap();
        let hyper = Hyper {
            layers: 2,
            d_h: 4,
            flags: FeatureFlags::default(),
        };
        init_params(&schema_signature(&gp.domain), hyper, &mut ChaCha8Rng::seed_from_u64(seed), InitScheme::GlorotUniform)
    }

    #[test]
    fn init_is_seeded_and_biases_zero() {
        let a = ttw_store(1);
        assert_eq!(a, ttw_store(1));
        assert_ne!(a, ttw_store(2));
        assert!(a.params.linears().all(|l| l.b.iter().all(|&x| x == 0.0)));
        let ct = a.action_linear("changetire", 1).unwrap();
        // v, g over 3 slots, m, 3 landmark bits, count.
        assert_eq!(ct.w.dim(), (4, 11));
        assert_eq!(a.action_linear("move-car", 3).unwrap().w.dim(), (1, 5 * 4));
        let limit = (6.0f64 / 15.0).sqrt();
        assert!(ct.w.iter().all(|x| x.abs() <= limit));
    }

    #[test]
    fn prune_zeroes_small_weights() {
        let mut s = ttw_store(3);
        let before = s.params.count_nonzero();
        s.prune(0.0);
        assert_eq!(s.params.count_nonzero(), before);
        s.prune(1e9);
        assert_eq!(s.params.count_nonzero(), 0);
    }
}

//! Depth against chain length on the two-chain unreliable-robot family.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asnet::ProblemNet;
use crate::domains;
use crate::eval::{rollout_rng, EvalError};
use crate::relatedness::FeatureFlags;
use crate::training::{run_policy, train, ExecMode, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReceptiveFieldConfig {
    /// Base training settings; layers, feature flags and regularisers are overridden.
    pub train: TrainConfig,
    /// Rollouts per cell, alternating the goal between the two chains.
    pub rollouts: usize,
    pub seed: u64,
    pub step_limit: usize,
}

impl Default for ReceptiveFieldConfig {
    fn default() -> Self {
        ReceptiveFieldConfig {
            // Cells beyond the receptive field never reach full success, so early
            // stopping cannot end training; the epoch cap does.
            train: TrainConfig {
                max_wall_time: 600.0,
                max_epochs: Some(20),
                train_iters: 100,
                ..TrainConfig::default()
            },
            rollouts: 30,
            seed: 0,
            step_limit: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceptiveFieldCell {
    pub layers: usize,
    pub k: usize,
    pub successes: usize,
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceptiveFieldTable {
    pub layer_values: Vec<usize>,
    pub k_values: Vec<usize>,
    /// Row per layer count, column per chain length.
    pub cells: Vec<Vec<ReceptiveFieldCell>>,
}

impl ReceptiveFieldTable {
    pub fn cell(&self, layers: usize, k: usize) -> Option<&ReceptiveFieldCell> {
        self.cells.iter().flatten().find(|c| c.layers == layers && c.k == k)
    }

    pub fn render(&self) -> String {
        let mut out = String::from("L \\ K");
        for k in &self.k_values {
            write!(out, "  {k:>6}").unwrap();
        }
        out.push('\n');
        for row in &self.cells {
            write!(out, "{:<5}", row.first().map_or(0, |c| c.layers)).unwrap();
            for c in row {
                write!(out, "  {:>6}", format!("{}/{}", c.successes, c.attempts)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Trains one network per depth on both goal sides of every chain length up to the
/// largest requested `K`, then evaluates each `(L, K)` cell with randomly tie-broken
/// argmax rollouts. Heuristic inputs, skip connections and regularisers are off.
pub fn receptive_field_experiment(layer_values: &[usize], k_values: &[usize], cfg: &ReceptiveFieldConfig) -> Result<ReceptiveFieldTable, EvalError> {
    if cfg.rollouts == 0 {
        return Err(EvalError::InvalidConfig("rollouts must be at least 1".into()));
    }
    let max_k = k_values.iter().copied().max().unwrap_or(0);
    let mut problems = Vec::new();
    for k in 1..=max_k {
        for left in [true, false] {
            problems.push(Arc::new(domains::two_chain(k, left).ground().expect("generator output grounds")));
        }
    }
    let mut cells = Vec::new();
    for &layers in layer_values {
        let tcfg = TrainConfig {
            layers,
            flags: FeatureFlags {
                landmarks: false,
                history: false,
                skip: false,
                ..cfg.train.flags
            },
            l1: 0.0,
            l2: 0.0,
            dropout: 0.0,
            seed: cfg.seed.wrapping_add(layers as u64),
            ..cfg.train.clone()
        };
        let outcome = train(&problems, tcfg)?;
        let store = outcome.store;
        let mut row = Vec::new();
        for &k in k_values {
            let left = ProblemNet::new(problems[2 * (k - 1)].clone(), &store)?;
            let right = ProblemNet::new(problems[2 * k - 1].clone(), &store)?;
            let successes = (0..cfg.rollouts)
                .into_par_iter()
                .map(|i| {
                    let net = if i % 2 == 0 { &left } else { &right };
                    let mut rng = rollout_rng(cfg.seed, 1000 * layers + k, i);
                    run_policy(&store, net, &net.gp.s0, &mut rng, cfg.step_limit, ExecMode::ArgmaxRandomTie).map(|r| r.reached_goal() as usize)
                })
                .sum::<Result<usize, _>>()?;
            row.push(ReceptiveFieldCell {
                layers,
                k,
                successes,
                attempts: cfg.rollouts,
            });
        }
        log::info!("receptive field L={layers}: {:?}", row.iter().map(|c| c.successes).collect::<Vec<_>>());
        cells.push(row);
    }
    Ok(ReceptiveFieldTable {
        layer_values: layer_values.to_vec(),
        k_values: k_values.to_vec(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asnet::{init_params, Hyper, InitScheme};
    use crate::relatedness::schema_signature;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Logits of the two first moves from `m` for a random network of depth `layers`.
    fn first_move_logits(layers: usize, k: usize, seed: u64) -> (f64, f64) {
        let gp = Arc::new(domains::two_chain(k, true).ground().unwrap());
        let hyper = Hyper {
            layers,
            d_h: 4,
            flags: FeatureFlags {
                landmarks: false,
                history: false,
                skip: false,
                ..FeatureFlags::default()
            },
        };
        let store = init_params(&schema_signature(&gp.domain), hyper, &mut ChaCha8Rng::seed_from_u64(seed), InitScheme::GlorotUniform);
        let net = ProblemNet::new(gp.clone(), &store).unwrap();
        let f = net.features(&gp.s0, &[]);
        let tape = crate::asnet::forward_activations(&store, &net.topo, &f, crate::asnet::Mode::Eval).unwrap();
        let l = tape.logits[gp.action_index("drive(shakey,m,l1)").unwrap()];
        let r = tape.logits[gp.action_index("drive(shakey,m,r1)").unwrap()];
        (l, r)
    }

    #[test]
    fn goal_signal_reaches_first_move_only_within_depth() {
        // The goal flag enters at drive(x_{K-1}, x_K) and moves one link back per
        // proposition layer, so the first move sees it exactly when K <= L + 1.
        for layers in 1..=3 {
            for k in 1..=5 {
                for seed in 0..3 {
                    let (l, r) = first_move_logits(layers, k, seed);
                    if k <= layers + 1 {
                        assert!(l != r, "L={layers} K={k} seed={seed}");
                    } else {
                        assert_eq!(l, r, "L={layers} K={k} seed={seed}");
                    }
                }
            }
        }
    }

    #[test]
    fn single_cell_experiment() {
        let cfg = ReceptiveFieldConfig {
            train: TrainConfig {
                d_h: 4,
                max_epochs: Some(3),
                train_iters: 30,
                trajectories_per_epoch: 4,
                ..TrainConfig::default()
            },
            rollouts: 6,
            ..ReceptiveFieldConfig::default()
        };
        let table = receptive_field_experiment(&[1], &[1], &cfg).unwrap();
        assert_eq!(table.cell(1, 1).unwrap().attempts, 6);
        assert!(table.render().starts_with("L \\ K"));
    }
}

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{AsnetError, GradientSet, InputFeatures, ParameterStore};
use crate::relatedness::AsnetTopology;

const NO_MEMBER: u32 = u32::MAX;
const PROB_CLAMP: f64 = 1e-7;

pub fn elu(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

fn elu_grad(z: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        z.exp()
    }
}

pub enum Mode<'a> {
    Eval,
    /// Dropout with the given rate, masks drawn from `rng`.
    Train { dropout: f64, rng: &'a mut dyn RngCore },
}

/// Everything recorded by a forward pass. Activation matrices are indexed by module
/// row (see `AsnetTopology::action_row` / `prop_row`), one per layer.
#[derive(Debug, Clone)]
pub struct Tape {
    /// `act_out[l - 1]`, after dropout.
    pub act_out: Vec<Array2<f64>>,
    /// `prop_out[l - 1]`, after dropout.
    pub prop_out: Vec<Array2<f64>>,
    act_in: Vec<Vec<Array2<f64>>>,
    act_z: Vec<Vec<Array2<f64>>>,
    act_mask: Vec<Option<Array2<f64>>>,
    prop_in: Vec<Vec<Array2<f64>>>,
    prop_z: Vec<Vec<Array2<f64>>>,
    prop_mask: Vec<Option<Array2<f64>>>,
    /// Per proposition layer and predicate: pooled member row for each (row, group, channel).
    pool_arg: Vec<Vec<Vec<u32>>>,
    /// Final-layer output per action index.
    pub logits: Vec<f64>,
    /// Masked softmax per action index (all zero without enabled actions).
    pub pi: Vec<f64>,
    pub enabled: Vec<bool>,
}

impl Tape {
    /// Output of an action module at action layer `l`.
    pub fn action_activation(&self, topo: &AsnetTopology, action: usize, l: usize) -> Vec<f64> {
        self.act_out[l - 1].row(topo.action_row[action]).to_vec()
    }

    pub fn prop_activation(&self, topo: &AsnetTopology, prop: usize, l: usize) -> Vec<f64> {
        self.prop_out[l - 1].row(topo.prop_row[prop]).to_vec()
    }
}

pub fn masked_softmax(logits: &[f64], enabled: &[bool]) -> Result<Vec<f64>, AsnetError> {
    let max = logits
        .iter()
        .zip(enabled)
        .filter(|(_, &e)| e)
        .map(|(&z, _)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(AsnetError::NoEnabledActions);
    }
    let mut pi: Vec<f64> = logits
        .iter()
        .zip(enabled)
        .map(|(&z, &e)| if e { (z - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    Ok(pi)
}

fn check_features(topo: &AsnetTopology, f: &InputFeatures) -> Result<(), AsnetError> {
    let n = topo.num_actions;
    let bad = f.enabled.len() != n
        || f.state.width() != topo.num_props
        || (topo.flags.landmarks && f.landmarks.len() != n)
        || (topo.flags.history && f.counts.len() != n);
    if bad {
        return Err(AsnetError::TapeMismatch("features do not match the topology".into()));
    }
    Ok(())
}

fn apply_dropout(h: &mut Array2<f64>, mode: &mut Mode) -> Option<Array2<f64>> {
    match mode {
        Mode::Train { dropout, rng } if *dropout > 0.0 => {
            let p = *dropout;
            let keep = 1.0 / (1.0 - p);
            let mask = Array2::from_shape_fn(h.dim(), |_| if rng.gen::<f64>() < p { 0.0 } else { keep });
            *h *= &mask;
            Some(mask)
        }
        _ => None,
    }
}

/// Computes activations for a state; the policy is left all zero when no action is enabled.
pub fn forward_activations(store: &ParameterStore, topo: &AsnetTopology, f: &InputFeatures, mut mode: Mode) -> Result<Tape, AsnetError> {
    check_features(topo, f)?;
    if store.hyper.layers != topo.layers || store.hyper.d_h != topo.d_h || store.hyper.flags != topo.flags {
        return Err(AsnetError::TapeMismatch("store hyperparameters differ from the topology".into()));
    }
    let big_l = topo.layers;
    let d = topo.d_h;
    let mut tape = Tape {
        act_out: Vec::with_capacity(big_l + 1),
        prop_out: Vec::with_capacity(big_l),
        act_in: Vec::new(),
        act_z: Vec::new(),
        act_mask: Vec::new(),
        prop_in: Vec::new(),
        prop_z: Vec::new(),
        prop_mask: Vec::new(),
        pool_arg: Vec::new(),
        logits: Vec::new(),
        pi: Vec::new(),
        enabled: f.enabled.clone(),
    };
    for l in 1..=big_l + 1 {
        let d_out = topo.action_out_dim(l);
        let mut out = Array2::zeros((topo.num_actions, d_out));
        let mut ins = Vec::with_capacity(topo.schema_rows.len());
        let mut zs = Vec::with_capacity(topo.schema_rows.len());
        for (s, &(lo, hi)) in topo.schema_rows.iter().enumerate() {
            let lin = &store.params.action[s][l - 1];
            let x = action_inputs(topo, f, &tape, s, l, lo, hi);
            let mut z = x.dot(&lin.w.t());
            z += &lin.b;
            let mut block = out.slice_mut(s![lo..hi, ..]);
            if l == big_l + 1 {
                block.assign(&z);
            } else {
                block.zip_mut_with(&z, |o, &v| *o = elu(v));
            }
            ins.push(x);
            zs.push(z);
        }
        let mask = if l <= big_l { apply_dropout(&mut out, &mut mode) } else { None };
        tape.act_in.push(ins);
        tape.act_z.push(zs);
        tape.act_mask.push(mask);
        tape.act_out.push(out);
        if l == big_l + 1 {
            break;
        }
        // Proposition layer l.
        let mut out = Array2::zeros((topo.num_props, d));
        let mut ins = Vec::with_capacity(topo.pred_rows.len());
        let mut zs = Vec::with_capacity(topo.pred_rows.len());
        let mut args = Vec::with_capacity(topo.pred_rows.len());
        for (q, &(lo, hi)) in topo.pred_rows.iter().enumerate() {
            let lin = &store.params.prop[q][l - 1];
            let (x, arg) = prop_inputs(topo, &tape, l, lo, hi, lin.w.ncols());
            let mut z = x.dot(&lin.w.t());
            z += &lin.b;
            out.slice_mut(s![lo..hi, ..]).zip_mut_with(&z, |o, &v| *o = elu(v));
            ins.push(x);
            zs.push(z);
            args.push(arg);
        }
        let mask = apply_dropout(&mut out, &mut mode);
        tape.prop_in.push(ins);
        tape.prop_z.push(zs);
        tape.prop_mask.push(mask);
        tape.pool_arg.push(args);
        tape.prop_out.push(out);
    }
    let last = &tape.act_out[big_l];
    tape.logits = (0..topo.num_actions).map(|a| last[[topo.action_row[a], 0]]).collect();
    tape.pi = masked_softmax(&tape.logits, &f.enabled).unwrap_or_else(|_| vec![0.0; topo.num_actions]);
    Ok(tape)
}

/// Forward pass returning the masked-softmax policy and the tape.
pub fn forward(store: &ParameterStore, topo: &AsnetTopology, f: &InputFeatures, mode: Mode) -> Result<(Vec<f64>, Tape), AsnetError> {
    if !f.enabled.iter().any(|&e| e) {
        return Err(AsnetError::NoEnabledActions);
    }
    let tape = forward_activations(store, topo, f, mode)?;
    Ok((tape.pi.clone(), tape))
}

fn action_inputs(topo: &AsnetTopology, f: &InputFeatures, tape: &Tape, s: usize, l: usize, lo: usize, hi: usize) -> Array2<f64> {
    let d_in = topo.action_in_dim(s, l);
    let m = topo.signature.schemas[s].slot_predicates.len();
    let d = topo.d_h;
    let mut x = Array2::zeros((hi - lo, d_in));
    for (i, r) in (lo..hi).enumerate() {
        let a = topo.row_action[r];
        let slots = &topo.slots[a];
        let mut row = x.row_mut(i);
        if l == 1 {
            for (j, &p) in slots.iter().enumerate() {
                row[j] = f.state.contains(p) as u8 as f64;
                row[m + j] = topo.goal_mask[p] as u8 as f64;
            }
            row[2 * m] = f.enabled[a] as u8 as f64;
            let mut k = 2 * m + 1;
            if topo.flags.landmarks {
                for c in f.landmarks[a] {
                    row[k] = c as u8 as f64;
                    k += 1;
                }
            }
            if topo.flags.history {
                row[k] = f.counts[a];
            }
        } else {
            let hp = &tape.prop_out[l - 2];
            for (j, &p) in slots.iter().enumerate() {
                row.slice_mut(s![j * d..(j + 1) * d]).assign(&hp.row(topo.prop_row[p]));
            }
            if topo.flags.skip {
                row.slice_mut(s![m * d..(m + 1) * d]).assign(&tape.act_out[l - 2].row(r));
            }
        }
    }
    x
}

fn prop_inputs(topo: &AsnetTopology, tape: &Tape, l: usize, lo: usize, hi: usize, d_in: usize) -> (Array2<f64>, Vec<u32>) {
    let d = topo.d_h;
    let ha = &tape.act_out[l - 1];
    let mut x = Array2::zeros((hi - lo, d_in));
    let groups = if hi > lo { topo.pool_groups[topo.row_prop[lo]].len() } else { 0 };
    let mut arg = vec![NO_MEMBER; (hi - lo) * groups * d];
    for (i, r) in (lo..hi).enumerate() {
        let p = topo.row_prop[r];
        let mut row = x.row_mut(i);
        for (g, members) in topo.pool_groups[p].iter().enumerate() {
            for j in 0..d {
                let mut best = f64::NEG_INFINITY;
                let mut best_row = NO_MEMBER;
                for &a in members {
                    let ar = topo.action_row[a];
                    let v = ha[[ar, j]];
                    if v > best {
                        best = v;
                        best_row = ar as u32;
                    }
                }
                if best_row != NO_MEMBER {
                    row[g * d + j] = best;
                    arg[(i * groups + g) * d + j] = best_row;
                }
            }
        }
        if topo.flags.skip && l >= 2 {
            row.slice_mut(s![groups * d..(groups + 1) * d]).assign(&tape.prop_out[l - 2].row(r));
        }
    }
    (x, arg)
}

/// Reverse pass from a gradient on the final-layer logits (indexed by action).
pub fn backward(store: &ParameterStore, topo: &AsnetTopology, tape: &Tape, dlogits: &[f64]) -> Result<GradientSet, AsnetError> {
    let big_l = topo.layers;
    if dlogits.len() != topo.num_actions || tape.act_out.len() != big_l + 1 || tape.prop_out.len() != big_l {
        return Err(AsnetError::TapeMismatch("tape or gradient shape differs from the topology".into()));
    }
    let d = topo.d_h;
    let mut grads = store.params.zeros_like();
    let mut d_act: Vec<Array2<f64>> = tape.act_out.iter().map(|a| Array2::zeros(a.dim())).collect();
    let mut d_prop: Vec<Array2<f64>> = tape.prop_out.iter().map(|a| Array2::zeros(a.dim())).collect();
    for a in 0..topo.num_actions {
        d_act[big_l][[topo.action_row[a], 0]] = dlogits[a];
    }
    for l in (1..=big_l + 1).rev() {
        // Action layer l.
        let mut dh = std::mem::replace(&mut d_act[l - 1], Array2::zeros((0, 0)));
        if let Some(mask) = &tape.act_mask[l - 1] {
            dh *= mask;
        }
        for (s, &(lo, hi)) in topo.schema_rows.iter().enumerate() {
            if hi == lo {
                continue;
            }
            let z = &tape.act_z[l - 1][s];
            let mut dz = dh.slice(s![lo..hi, ..]).to_owned();
            if l <= big_l {
                dz.zip_mut_with(z, |g, &zv| *g *= elu_grad(zv));
            }
            let x = &tape.act_in[l - 1][s];
            accumulate(&mut grads.action[s][l - 1], dz.view(), x.view());
            if l == 1 {
                continue;
            }
            let dx = dz.dot(&store.params.action[s][l - 1].w);
            let m = topo.signature.schemas[s].slot_predicates.len();
            for (i, r) in (lo..hi).enumerate() {
                let a = topo.row_action[r];
                for (j, &p) in topo.slots[a].iter().enumerate() {
                    let mut target = d_prop[l - 2].row_mut(topo.prop_row[p]);
                    target += &dx.slice(s![i, j * d..(j + 1) * d]);
                }
                if topo.flags.skip {
                    let mut target = d_act[l - 2].row_mut(r);
                    target += &dx.slice(s![i, m * d..(m + 1) * d]);
                }
            }
        }
        if l == 1 {
            break;
        }
        // Proposition layer l - 1.
        let pl = l - 1;
        let mut dh = std::mem::replace(&mut d_prop[pl - 1], Array2::zeros((0, 0)));
        if let Some(mask) = &tape.prop_mask[pl - 1] {
            dh *= mask;
        }
        for (q, &(lo, hi)) in topo.pred_rows.iter().enumerate() {
            if hi == lo {
                continue;
            }
            let z = &tape.prop_z[pl - 1][q];
            let mut dz = dh.slice(s![lo..hi, ..]).to_owned();
            dz.zip_mut_with(z, |g, &zv| *g *= elu_grad(zv));
            accumulate(&mut grads.prop[q][pl - 1], dz.view(), tape.prop_in[pl - 1][q].view());
            let dx = dz.dot(&store.params.prop[q][pl - 1].w);
            let groups = topo.pool_groups[topo.row_prop[lo]].len();
            let arg = &tape.pool_arg[pl - 1][q];
            for (i, r) in (lo..hi).enumerate() {
                for g in 0..groups {
                    for j in 0..d {
                        let ar = arg[(i * groups + g) * d + j];
                        if ar != NO_MEMBER {
                            d_act[pl - 1][[ar as usize, j]] += dx[[i, g * d + j]];
                        }
                    }
                }
                if topo.flags.skip && pl >= 2 {
                    let mut target = d_prop[pl - 2].row_mut(r);
                    target += &dx.slice(s![i, groups * d..(groups + 1) * d]);
                }
            }
        }
    }
    Ok(grads)
}

fn accumulate(lin: &mut super::Linear, dz: ArrayView2<f64>, x: ArrayView2<f64>) {
    lin.w += &dz.t().dot(&x);
    lin.b += &dz.sum_axis(Axis(0));
}

/// One training example: the state's features and its teacher labels.
#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a> {
    pub topo: &'a AsnetTopology,
    pub features: &'a InputFeatures,
    pub labels: &'a [bool],
}

/// Cross-entropy over enabled actions for one state, and its gradient on the logits.
fn state_loss(pi: &[f64], enabled: &[bool], labels: &[bool]) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let mut dpi = vec![0.0; pi.len()];
    for a in 0..pi.len() {
        if !enabled[a] {
            continue;
        }
        let y = labels[a];
        let p = pi[a].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let inside = pi[a] > PROB_CLAMP && pi[a] < 1.0 - PROB_CLAMP;
        if y {
            loss -= p.ln();
            if inside {
                dpi[a] = -1.0 / p;
            }
        } else {
            loss -= (1.0 - p).ln();
            if inside {
                dpi[a] = 1.0 / (1.0 - p);
            }
        }
    }
    let dot: f64 = pi.iter().zip(&dpi).map(|(p, g)| p * g).sum();
    let dz = pi.iter().zip(&dpi).zip(enabled).map(|((p, g), &e)| if e { p * (g - dot) } else { 0.0 }).collect();
    (loss, dz)
}

/// Mean cross-entropy over the batch plus `l2/2 |θ|² + l1 |θ|₁`, with its gradient.
/// With `dropout = Some((rate, seed))` each item draws masks from its own seeded stream.
pub fn batch_loss(store: &ParameterStore, batch: &[BatchItem], l2: f64, l1: f64, dropout: Option<(f64, u64)>) -> Result<(f64, GradientSet), AsnetError> {
    if batch.is_empty() {
        return Err(AsnetError::EmptyBatch);
    }
    let per_item: Vec<Result<(f64, GradientSet), AsnetError>> = batch
        .par_iter()
        .enumerate()
        .map(|(i, item)| {
            let mut rng;
            let mode = match dropout {
                Some((rate, seed)) if rate > 0.0 => {
                    rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add((i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
                    Mode::Train { dropout: rate, rng: &mut rng }
                }
                _ => Mode::Eval,
            };
            let (pi, tape) = forward(store, item.topo, item.features, mode)?;
            let labels: Vec<bool> = item.labels.iter().zip(&item.features.enabled).map(|(&y, &e)| y && e).collect();
            let (loss, dz) = state_loss(&pi, &item.features.enabled, &labels);
            Ok((loss, backward(store, item.topo, &tape, &dz)?))
        })
        .collect();
    let n = batch.len() as f64;
    let mut total = 0.0;
    let mut grads = store.params.zeros_like();
    for r in per_item {
        let (loss, g) = r?;
        total += loss;
        grads.add_assign(&g);
    }
    total /= n;
    grads.scale(1.0 / n);
    if l2 != 0.0 || l1 != 0.0 {
        total += 0.5 * l2 * store.params.sq_norm() + l1 * store.params.l1_norm();
        for (g, w) in grads.slices_mut().into_iter().zip(store.params.slices()) {
            for (gi, &wi) in g.iter_mut().zip(w) {
                let sign = if wi > 0.0 {
                    1.0
                } else if wi < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                *gi += l2 * wi + l1 * sign;
            }
        }
    }
    Ok((total, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asnet::{init_params, FeatureExtractor, Hyper, InitScheme};
    use crate::domains;
    use crate::relatedness::{schema_signature, FeatureFlags};
    use std::sync::Arc;

    fn setup(flags: FeatureFlags, d_h: usize, layers: usize, seed: u64) -> (ParameterStore, AsnetTopology, InputFeatures) {
        let gp = Arc::new(domains::triangle_tireworld(1).ground().unwrap());
        let sig = schema_signature(&gp.domain);
        let hyper = Hyper { layers, d_h, flags };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = init_params(&sig, hyper, &mut rng, InitScheme::GlorotUniform);
        for s in store.params.slices_mut() {
            for x in s.iter_mut() {
                *x += rng.gen_range(-0.3..0.3);
            }
        }
        let topo = AsnetTopology::build(&gp, &sig, layers, d_h, flags).unwrap();
        let fx = FeatureExtractor::new(gp.clone(), flags);
        let counts: Vec<u32> = (0..gp.num_actions() as u32).map(|i| i % 3).collect();
        let f = fx.extract(&gp.s0, &counts);
        (store, topo, f)
    }

    #[test]
    fn elu_values() {
        assert_eq!(elu(0.0), 0.0);
        assert_eq!(elu(2.0), 2.0);
        assert!((elu(-1.0) - (-0.6321205588285577)).abs() < 1e-12);
    }

    #[test]
    fn softmax_masks_and_shifts() {
        let pi = masked_softmax(&[1.0, 5.0, 2.0], &[true, false, true]).unwrap();
        assert_eq!(pi[1], 0.0);
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted = masked_softmax(&[101.0, 105.0, 102.0], &[true, false, true]).unwrap();
        for (a, b) in pi.iter().zip(&shifted) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(masked_softmax(&[1.0], &[false]), Err(AsnetError::NoEnabledActions));
        assert_eq!(masked_softmax(&[-3.0, 7.0], &[true, false]).unwrap(), [1.0, 0.0]);
    }

    #[test]
    fn hand_loss_value() {
        let (loss, dz) = state_loss(&[0.5, 0.5], &[true, true], &[true, false]);
        assert!((loss - 1.3862943611198906).abs() < 1e-12);
        assert!((dz[0] + 1.0).abs() < 1e-12 && (dz[1] - 1.0).abs() < 1e-12);
        let (loss, _) = state_loss(&[1.0, 0.0], &[true, true], &[true, false]);
        assert!(loss < 3e-7);
    }

    #[test]
    fn zero_upstream_gradient() {
        let (store, topo, f) = setup(FeatureFlags::default(), 3, 2, 1);
        let (_, tape) = forward(&store, &topo, &f, Mode::Eval).unwrap();
        let g = backward(&store, &topo, &tape, &vec![0.0; topo.num_actions]).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    fn loss_of(store: &ParameterStore, topo: &AsnetTopology, f: &InputFeatures, y: &[bool]) -> f64 {
        let item = BatchItem { topo, features: f, labels: y };
        batch_loss(store, &[item], 0.0, 0.0, None).unwrap().0
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for flags in [
            FeatureFlags::default(),
            FeatureFlags {
                skip: false,
                pooling: crate::relatedness::PoolingStyle::OldStyle,
                ..FeatureFlags::default()
            },
        ] {
            let (store, topo, f) = setup(flags, 3, 2, 7);
            let y: Vec<bool> = (0..topo.num_actions).map(|a| a % 2 == 0).collect();
            let item = BatchItem { topo: &topo, features: &f, labels: &y };
            let (_, g) = batch_loss(&store, &[item], 0.0, 0.0, None).unwrap();
            let h = 1e-5;
            let mut probe = store.clone();
            let gs = g.slices();
            let n_t = gs.len();
            for t in 0..n_t {
                let len = gs[t].len();
                let mut num = vec![0.0; len];
                for k in 0..len {
                    let orig = probe.params.slices()[t][k];
                    probe.params.slices_mut()[t][k] = orig + h;
                    let up = loss_of(&probe, &topo, &f, &y);
                    probe.params.slices_mut()[t][k] = orig - h;
                    let down = loss_of(&probe, &topo, &f, &y);
                    probe.params.slices_mut()[t][k] = orig;
                    num[k] = (up - down) / (2.0 * h);
                }
                let diff: f64 = num.iter().zip(gs[t]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let norm: f64 = gs[t].iter().map(|a| a * a).sum::<f64>().sqrt();
                assert!(diff < 1e-4 * norm + 1e-8, "tensor {t}: {diff} vs {norm}");
            }
        }
    }

    #[test]
    fn regulariser_value() {
        let (mut store, topo, f) = setup(FeatureFlags::default(), 2, 1, 3);
        for s in store.params.slices_mut() {
            s.iter_mut().for_each(|x| *x = 0.0);
        }
        store.params.action[0][0].w[[0, 0]] = 10.0;
        let y = vec![true; topo.num_actions];
        let item = BatchItem { topo: &topo, features: &f, labels: &y };
        let (with, g) = batch_loss(&store, &[item], 2e-4, 0.0, None).unwrap();
        let (without, _) = batch_loss(&store, &[item], 0.0, 0.0, None).unwrap();
        assert!((with - without - 0.01).abs() < 1e-12);
        let (_, g0) = batch_loss(&store, &[item], 0.0, 0.0, None).unwrap();
        assert!((g.action[0][0].w[[0, 0]] - g0.action[0][0].w[[0, 0]] - 2e-3).abs() < 1e-12);
        assert_eq!(batch_loss(&store, &[], 0.0, 0.0, None).unwrap_err(), AsnetError::EmptyBatch);
    }

    #[test]
    fn dropout_is_seeded() {
        let (store, topo, f) = setup(FeatureFlags::default(), 4, 2, 5);
        let y = vec![true; topo.num_actions];
        let item = BatchItem { topo: &topo, features: &f, labels: &y };
        let a = batch_loss(&store, &[item, item], 0.0, 0.0, Some((0.5, 9))).unwrap();
        let b = batch_loss(&store, &[item, item], 0.0, 0.0, Some((0.5, 9))).unwrap();
        assert_eq!(a, b);
        let c = batch_loss(&store, &[item, item], 0.0, 0.0, None).unwrap();
        assert_ne!(a.0, c.0);
    }
}

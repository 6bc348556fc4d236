//! Numeric check that a CosaNostra policy moves towards the customer at interior booths.
//!
//! At booth `b_k` (0 < k < K-1), with the pizza loaded and booths `b_0..=b_k` paid, the
//! final-layer logit of `leave-toll-booth(b_k,b_{k+1})` must beat that of
//! `leave-toll-booth(b_k,b_{k-1})`. For the sparse fixture both logits share the
//! `1.25 * da2(b_k)` term, so the comparison reduces to `da(b_{k+1})` against
//! `da(b_{k-1})`, and since ELU is increasing, to the first-layer pooled inputs of those
//! two propositions. When the leave-toll-booth pools on both sides agree, what remains is
//! the pay-operator first-layer pre-activation without its bias:
//! `w_count * count(pay-operator(x)) + w_open * open(x)`, evaluated for the next and
//! the previous booth.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::asnet::{forward_activations, Mode, ParameterStore, ProblemNet};
use crate::domains;
use crate::eval::EvalError;
use crate::ppddl::GroundProblem;
use crate::ssp::{successor_distribution, State};

/// Right-hand side of the reduced comparison as printed with the published weights.
pub const PUBLISHED_REDUCED_PREV: f64 = -2.81;

/// Every quantity in the reduction at one interior booth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoothCheck {
    pub k: usize,
    pub forward_logit: f64,
    pub backward_logit: f64,
    pub da2_next: f64,
    pub da2_prev: f64,
    pub da1_next: f64,
    pub da1_prev: f64,
    /// Max over first-layer `leave-toll-booth(x,*)` outputs.
    pub ltb_out_next: f64,
    pub ltb_out_prev: f64,
    /// Max over first-layer `leave-toll-booth(*,x)` outputs.
    pub ltb_in_next: f64,
    pub ltb_in_prev: f64,
    pub po1_next: f64,
    pub po1_prev: f64,
    pub po_count_next: u32,
    pub po_count_prev: u32,
    pub open_next: bool,
    pub open_prev: bool,
    /// `w_count * count + w_open * open` for `pay-operator(b_{k+1})`.
    pub reduced_next: f64,
    /// Same for `pay-operator(b_{k-1})`.
    pub reduced_prev: f64,
}

impl BoothCheck {
    pub fn holds(&self) -> bool {
        self.forward_logit > self.backward_logit
    }

    /// True when the leave-toll-booth pools cancel and only pay-operator terms remain.
    pub fn pools_cancel(&self) -> bool {
        self.ltb_out_next == self.ltb_out_prev && self.ltb_in_next == self.ltb_in_prev
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosanostraProof {
    pub booths: usize,
    pub w_count: f64,
    pub w_open: f64,
    pub checks: Vec<BoothCheck>,
}

impl CosanostraProof {
    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "K = {}, pay-operator layer 1: {} * count + {} * open", self.booths, self.w_count, self.w_open).unwrap();
        for c in &self.checks {
            writeln!(out, "b{}: act3 ltb(b{},b{}) = {:.6} vs ltb(b{},b{}) = {:.6}", c.k, c.k, c.k + 1, c.forward_logit, c.k, c.k - 1, c.backward_logit).unwrap();
            writeln!(out, "    da2 next {:.6} < prev {:.6}; da1 next {:.6} < prev {:.6}", c.da2_next, c.da2_prev, c.da1_next, c.da1_prev).unwrap();
            writeln!(
                out,
                "    ltb pools out {:.6}/{:.6} in {:.6}/{:.6}; po1 next {:.6} > prev {:.6}",
                c.ltb_out_next, c.ltb_out_prev, c.ltb_in_next, c.ltb_in_prev, c.po1_next, c.po1_prev
            )
            .unwrap();
            // Adding zero turns a negative zero into a plain one.
            writeln!(out, "    reduced: {} > {}", c.reduced_next + 0.0, c.reduced_prev + 0.0).unwrap();
        }
        out
    }
}

fn step(gp: &GroundProblem, s: &State, name: &str) -> Result<(State, usize), EvalError> {
    let bad = |detail: String| EvalError::AssertionFailure { k: 0, detail };
    let a = gp.action_index(name).ok_or_else(|| bad(format!("no action {name}")))?;
    let dist = successor_distribution(gp, s, a).map_err(|e| bad(format!("{name}: {e}")))?;
    match dist.0.as_slice() {
        [(next, _)] => Ok((next.clone(), a)),
        _ => Err(bad(format!("{name} is not deterministic here"))),
    }
}

/// State and action counts at booth `b_k` right after paying it, having loaded the pizza
/// and paid every earlier booth once.
pub fn canonical_delivery_state(gp: &GroundProblem, k: usize) -> Result<(State, Vec<u32>), EvalError> {
    let mut plan = vec!["load-pizza(shop)".to_string(), "leave-open-intersection(shop,b0)".into(), "pay-operator(b0)".into()];
    for j in 1..=k {
        plan.push(format!("leave-toll-booth(b{},b{j})", j - 1));
        plan.push(format!("pay-operator(b{j})"));
    }
    let mut s = gp.s0.clone();
    let mut counts = vec![0u32; gp.num_actions()];
    for name in &plan {
        let (next, a) = step(gp, &s, name)?;
        s = next;
        counts[a] += 1;
    }
    Ok((s, counts))
}

/// Checks the interior-booth inequality for the generated `K`-booth problem.
pub fn verify_cosanostra_inequality(store: &ParameterStore, booths: usize) -> Result<CosanostraProof, EvalError> {
    if booths < 3 {
        return Err(EvalError::InvalidConfig("need at least three booths for an interior booth".into()));
    }
    let gp = Arc::new(domains::cosanostra(booths).ground().map_err(|e| EvalError::InvalidConfig(e.to_string()))?);
    let net = ProblemNet::new(gp.clone(), store)?;
    let sig = &store.signature;
    let po = sig.schema_index("pay-operator").expect("signature matches cosanostra");
    let m = sig.schemas[po].slot_predicates.len();
    let open_col = sig.schemas[po].slot_predicates.iter().position(|p| p == "open").expect("pay-operator mentions open");
    let po_lin = &store.params.action[po][0];
    let w_open = po_lin.w[[0, open_col]];
    let w_count = if store.hyper.flags.history { po_lin.w[[0, 2 * m + 1 + 3 * store.hyper.flags.landmarks as usize]] } else { 0.0 };

    let act = |name: &str| gp.action_index(name).expect("action exists");
    let prop = |name: &str| gp.prop_index(name).expect("proposition exists");
    let ltb: Vec<usize> = (0..gp.num_actions()).filter(|&a| gp.actions[a].schema == "leave-toll-booth").collect();

    let mut checks = Vec::new();
    for k in 1..booths - 1 {
        let (s, counts) = canonical_delivery_state(&gp, k)?;
        let f = net.features(&s, &counts);
        let tape = forward_activations(store, &net.topo, &f, Mode::Eval)?;
        let topo = &net.topo;
        let a1 = |a: usize| tape.action_activation(topo, a, 1)[0];
        let pool = |pos: usize, loc: &str| ltb.iter().filter(|&&a| gp.actions[a].binding[pos] == loc).map(|&a| a1(a)).fold(f64::NEG_INFINITY, f64::max);
        let (next, prev) = (format!("b{}", k + 1), format!("b{}", k - 1));
        let da = |loc: &str, l: usize| tape.prop_activation(topo, prop(&format!("deliverator-at({loc})")), l)[0];
        let po_next = act(&format!("pay-operator({next})"));
        let po_prev = act(&format!("pay-operator({prev})"));
        let open_next = s.contains(prop(&format!("open({next})")));
        let open_prev = s.contains(prop(&format!("open({prev})")));
        let reduce = |count: u32, open: bool| w_count * count as f64 + w_open * open as u8 as f64;
        let check = BoothCheck {
            k,
            forward_logit: tape.logits[act(&format!("leave-toll-booth(b{k},{next})"))],
            backward_logit: tape.logits[act(&format!("leave-toll-booth(b{k},{prev})"))],
            da2_next: da(&next, 2.min(topo.layers)),
            da2_prev: da(&prev, 2.min(topo.layers)),
            da1_next: da(&next, 1),
            da1_prev: da(&prev, 1),
            ltb_out_next: pool(0, &next),
            ltb_out_prev: pool(0, &prev),
            ltb_in_next: pool(1, &next),
            ltb_in_prev: pool(1, &prev),
            po1_next: a1(po_next),
            po1_prev: a1(po_prev),
            po_count_next: counts[po_next],
            po_count_prev: counts[po_prev],
            open_next,
            open_prev,
            reduced_next: reduce(counts[po_next], open_next),
            reduced_prev: reduce(counts[po_prev], open_prev),
        };
        if !check.holds() {
            return Err(EvalError::AssertionFailure {
                k,
                detail: format!("forward logit {} does not exceed backward logit {}", check.forward_logit, check.backward_logit),
            });
        }
        checks.push(check);
    }
    Ok(CosanostraProof {
        booths,
        w_count,
        w_open,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asnet::ProblemNet;
    use crate::fixtures;
    use crate::training::{run_policy, ExecMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sparse_fixture_passes_interior_booths() {
        let store = fixtures::cosanostra_sparse_store();
        let proof = verify_cosanostra_inequality(&store, 3).unwrap();
        assert_eq!(proof.checks.len(), 1);
        let c = &proof.checks[0];
        assert_eq!((c.po_count_prev, c.open_prev, c.po_count_next, c.open_next), (1, true, 0, false));
        assert_eq!(c.reduced_next, 0.0);
        // One payment and an open gate: -1.10 * 1 - 0.61 * 1.
        assert!((c.reduced_prev - (-1.71)).abs() < 1e-12);
        assert!(c.da2_next < c.da2_prev && c.da1_next < c.da1_prev && c.po1_next > c.po1_prev);
        assert_eq!(verify_cosanostra_inequality(&store, 10).unwrap().checks.len(), 8);
    }

    #[test]
    fn zero_store_fails() {
        let mut store = fixtures::cosanostra_sparse_store();
        store.params.scale(0.0);
        assert!(matches!(verify_cosanostra_inequality(&store, 3), Err(EvalError::AssertionFailure { k: 1, .. })));
    }

    #[test]
    fn canonical_state_is_on_the_policy_path() {
        // The sparse policy visits the canonical state of each interior booth.
        let store = fixtures::cosanostra_sparse_store();
        let gp = Arc::new(domains::cosanostra(5).ground().unwrap());
        let net = ProblemNet::new(gp.clone(), &store).unwrap();
        let rec = run_policy(&store, &net, &gp.s0, &mut ChaCha8Rng::seed_from_u64(0), 300, ExecMode::Argmax).unwrap();
        for k in 1..4 {
            let (s, counts) = canonical_delivery_state(&gp, k).unwrap();
            assert!(rec.states.iter().zip(&rec.counts).any(|(x, c)| *x == s && *c == counts), "b{k}");
        }
    }
}

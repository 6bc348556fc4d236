//! Hand-transcribed sparse policies for Triangle Tireworld and CosaNostra Pizza.
//!
//! Both use one hidden channel and two proposition layers. Every weight not set here
//! is zero.

use crate::asnet::{store_to_json_with_note, Hyper, ParameterStore};
use crate::domains;
use crate::relatedness::{schema_signature, FeatureFlags, PoolingStyle};

fn set_w(store: &mut ParameterStore, schema: Option<&str>, pred: Option<&str>, layer: usize, col: usize, v: f64) {
    let lin = match (schema, pred) {
        (Some(s), _) => store.action_linear_mut(s, layer),
        (_, Some(p)) => store.prop_linear_mut(p, layer),
        _ => None,
    }
    .expect("module exists");
    lin.w[[0, col]] = v;
}

fn set_b(store: &mut ParameterStore, schema: Option<&str>, pred: Option<&str>, layer: usize, v: f64) {
    let lin = match (schema, pred) {
        (Some(s), _) => store.action_linear_mut(s, layer),
        (_, Some(p)) => store.prop_linear_mut(p, layer),
        _ => None,
    }
    .expect("module exists");
    lin.b[0] = v;
}

fn group_col(store: &ParameterStore, pred: &str, schema: &str, position: usize) -> usize {
    let p = store.signature.predicate_index(pred).expect("predicate");
    store.signature.predicates[p]
        .groups
        .iter()
        .position(|g| g.schema == schema && g.position == Some(position))
        .expect("pooling group")
}

fn slot_col(store: &ParameterStore, schema: &str, pred: &str, nth: usize) -> usize {
    let s = store.signature.schema_index(schema).expect("schema");
    store.signature.schemas[s]
        .slot_predicates
        .iter()
        .enumerate()
        .filter(|(_, p)| *p == pred)
        .nth(nth)
        .map(|(i, _)| i)
        .expect("slot")
}

/// Eight nonzero weights: prefer moves onto spare-equipped locations that neighbour
/// other spare-equipped locations.
pub fn ttw_sparse_store() -> ParameterStore {
    let gp = domains::triangle_tireworld(1).ground().expect("generator output grounds");
    let hyper = Hyper {
        layers: 2,
        d_h: 1,
        flags: FeatureFlags {
            landmarks: false,
            history: false,
            skip: true,
            pooling: PoolingStyle::PositionAware,
        },
    };
    let mut s = ParameterStore::zeros(schema_signature(&gp.domain), hyper);
    let (ct, mc, va) = (Some("changetire"), Some("move-car"), Some("vehicle-at"));
    set_b(&mut s, ct, None, 1, 15.76);
    let c = group_col(&s, "vehicle-at", "changetire", 2);
    set_w(&mut s, None, va, 1, c, 0.81);
    set_b(&mut s, None, va, 1, 0.02);
    // Destination vehicle-at is the second vehicle-at slot of move-car.
    let to = slot_col(&s, "move-car", "vehicle-at", 1);
    set_w(&mut s, mc, None, 2, to, 0.46);
    let from_group = group_col(&s, "vehicle-at", "move-car", 1);
    let skip = s.signature.predicates[s.signature.predicate_index("vehicle-at").unwrap()].groups.len();
    set_w(&mut s, None, va, 2, from_group, 0.44);
    set_w(&mut s, None, va, 2, skip, 0.35);
    set_b(&mut s, None, va, 2, 6.45);
    set_w(&mut s, mc, None, 3, to, 1.12);
    s
}

/// Sparse CosaNostra policy using action-count inputs and a skip connection.
pub fn cosanostra_sparse_store() -> ParameterStore {
    let gp = domains::cosanostra(1).ground().expect("generator output grounds");
    let hyper = Hyper {
        layers: 2,
        d_h: 1,
        flags: FeatureFlags {
            landmarks: false,
            history: true,
            skip: true,
            pooling: PoolingStyle::PositionAware,
        },
    };
    let mut s = ParameterStore::zeros(schema_signature(&gp.domain), hyper);
    let (ltb, po, lp, up) = (Some("leave-toll-booth"), Some("pay-operator"), Some("load-pizza"), Some("unload-pizza"));
    let da = Some("deliverator-at");
    let m = |s: &ParameterStore, schema: &str| s.signature.schemas[s.signature.schema_index(schema).unwrap()].slot_predicates.len();

    // First action layer inputs: truth values, goal flags, applicability, count.
    let ltb_m = m(&s, "leave-toll-booth");
    let ltb_to = slot_col(&s, "leave-toll-booth", "deliverator-at", 1);
    set_w(&mut s, ltb, None, 1, ltb_m + ltb_to, 0.28);
    set_w(&mut s, ltb, None, 1, 2 * ltb_m + 1, -1.31);
    set_b(&mut s, ltb, None, 1, 3.22);
    let po_m = m(&s, "pay-operator");
    let open = slot_col(&s, "pay-operator", "open", 0);
    set_w(&mut s, po, None, 1, open, -0.61);
    set_w(&mut s, po, None, 1, 2 * po_m + 1, -1.10);
    set_b(&mut s, po, None, 1, 1.29);

    let c = group_col(&s, "deliverator-at", "leave-toll-booth", 1);
    set_w(&mut s, None, da, 1, c, 0.40);
    let c = group_col(&s, "deliverator-at", "leave-toll-booth", ltb_to + 1);
    set_w(&mut s, None, da, 1, c, -1.46);
    let c = group_col(&s, "deliverator-at", "pay-operator", 1);
    set_w(&mut s, None, da, 1, c, -1.48);
    set_b(&mut s, None, da, 1, 4.98);

    let skip = s.signature.predicates[s.signature.predicate_index("deliverator-at").unwrap()].groups.len();
    set_w(&mut s, None, da, 2, skip, 3.60);

    let ltb_from = slot_col(&s, "leave-toll-booth", "deliverator-at", 0);
    set_w(&mut s, ltb, None, 3, ltb_from, 1.25);
    set_w(&mut s, ltb, None, 3, ltb_to, -1.07);
    let c = slot_col(&s, "load-pizza", "deliverator-at", 0);
    set_w(&mut s, lp, None, 3, c, -0.65);
    set_b(&mut s, lp, None, 3, 4.71);
    set_b(&mut s, po, None, 3, 4.99);
    let c = slot_col(&s, "unload-pizza", "deliverator-at", 0);
    set_w(&mut s, up, None, 3, c, 0.66);
    set_b(&mut s, up, None, 3, -4.74);
    s
}

/// Provenance text stored in the checked-in TTW fixture.
pub const TTW_NOTE: &str = "Sparse Triangle Tireworld policy with eight nonzero weights, transcribed by hand from the published lifted equations (two-decimal rounding). Regenerate with fixtures::ttw_fixture_json().";

/// Provenance text stored in the checked-in CosaNostra fixture.
pub const COSANOSTRA_NOTE: &str = "Sparse CosaNostra Pizza policy transcribed by hand from the published lifted equations (two-decimal rounding), uses action-count inputs and a proposition skip connection. Regenerate with fixtures::cosanostra_fixture_json().";

pub fn ttw_fixture_json() -> String {
    store_to_json_with_note(&ttw_sparse_store(), Some(TTW_NOTE))
}

pub fn cosanostra_fixture_json() -> String {
    store_to_json_with_note(&cosanostra_sparse_store(), Some(COSANOSTRA_NOTE))
}

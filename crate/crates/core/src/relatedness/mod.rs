//! Relatedness between ground actions and propositions, and the ASNet wiring built on it.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ppddl::{DomainDef, GroundProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PoolingStyle {
    /// One pooling group per (schema, position) pair.
    #[default]
    PositionAware,
    /// One pooling group per schema, merging all positions.
    OldStyle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureFlags {
    pub landmarks: bool,
    pub history: bool,
    pub skip: bool,
    pub pooling: PoolingStyle,
}

impl Default for FeatureFlags {
    fn default() -> Self {
        FeatureFlags {
            landmarks: true,
            history: true,
            skip: true,
            pooling: PoolingStyle::PositionAware,
        }
    }
}

impl FeatureFlags {
    /// Width of the per-action heuristic features appended at the first layer.
    pub fn extra_inputs(&self) -> usize {
        3 * self.landmarks as usize + self.history as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaSig {
    pub name: String,
    /// Predicate of each lifted proposition slot, in slot order.
    pub slot_predicates: Vec<String>,
    /// Lifted proposition of each slot, e.g. `vehicle-at(?to)`.
    #[serde(default)]
    pub slot_atoms: Vec<String>,
}

/// A pooling group of a predicate: a schema and, for position-aware pooling, a 1-based slot.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub schema: String,
    pub position: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateSig {
    pub name: String,
    /// Position-aware groups, ordered by (schema name, position).
    pub groups: Vec<GroupKey>,
}

/// Problem-independent shape of an ASNet for one domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaSignature {
    pub domain: String,
    /// Sorted by name.
    pub schemas: Vec<SchemaSig>,
    /// Sorted by name.
    pub predicates: Vec<PredicateSig>,
}

impl SchemaSignature {
    pub fn schema_index(&self, name: &str) -> Option<usize> {
        self.schemas.binary_search_by(|s| s.name.as_str().cmp(name)).ok()
    }

    pub fn predicate_index(&self, name: &str) -> Option<usize> {
        self.predicates.binary_search_by(|p| p.name.as_str().cmp(name)).ok()
    }

    /// Pooling groups of a predicate under a pooling style.
    pub fn groups(&self, pred: usize, style: PoolingStyle) -> Vec<GroupKey> {
        let groups = &self.predicates[pred].groups;
        match style {
            PoolingStyle::PositionAware => groups.clone(),
            PoolingStyle::OldStyle => {
                let names: BTreeSet<&str> = groups.iter().map(|g| g.schema.as_str()).collect();
                names
                    .into_iter()
                    .map(|s| GroupKey {
                        schema: s.to_string(),
                        position: None,
                    })
                    .collect()
            }
        }
    }
}

pub fn schema_signature(domain: &DomainDef) -> SchemaSignature {
    let mut schemas: Vec<SchemaSig> = domain
        .schemas
        .iter()
        .map(|s| {
            let props = s.unique_lifted_propositions();
            SchemaSig {
                name: s.name.clone(),
                slot_atoms: props.iter().map(|p| p.to_string()).collect(),
                slot_predicates: props.into_iter().map(|p| p.predicate).collect(),
            }
        })
        .collect();
    schemas.sort_by(|a, b| a.name.cmp(&b.name));
    let mut predicates: Vec<PredicateSig> = domain
        .predicates
        .iter()
        .map(|p| {
            let mut groups = Vec::new();
            for s in &schemas {
                for (k, sp) in s.slot_predicates.iter().enumerate() {
                    if *sp == p.name {
                        groups.push(GroupKey {
                            schema: s.name.clone(),
                            position: Some(k + 1),
                        });
                    }
                }
            }
            groups.sort();
            PredicateSig {
                name: p.name.clone(),
                groups,
            }
        })
        .collect();
    predicates.sort_by(|a, b| a.name.cmp(&b.name));
    SchemaSignature {
        domain: domain.name.clone(),
        schemas,
        predicates,
    }
}

/// The relation R(a, p, k) of one ground problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelatednessGraph {
    /// Sorted (action, proposition, 1-based position) triples.
    pub edges: Vec<(usize, usize, usize)>,
    /// Per action, the proposition in each slot.
    pub slots: Vec<Vec<usize>>,
    /// Per proposition, members of each position-aware group of its predicate
    /// (aligned with the signature's group list).
    pub groups: Vec<Vec<Vec<usize>>>,
}

pub fn build_relatedness(gp: &GroundProblem, sig: &SchemaSignature) -> RelatednessGraph {
    let slots: Vec<Vec<usize>> = gp.actions.iter().map(|a| a.slots.clone()).collect();
    let mut edges = Vec::new();
    let mut groups: Vec<Vec<Vec<usize>>> = gp
        .predicate_of
        .iter()
        .map(|pred| {
            let n = sig.predicate_index(pred).map_or(0, |i| sig.predicates[i].groups.len());
            vec![Vec::new(); n]
        })
        .collect();
    for a in &gp.actions {
        for (k, &p) in a.slots.iter().enumerate() {
            edges.push((a.index, p, k + 1));
            if let Some(pi) = sig.predicate_index(&gp.predicate_of[p]) {
                let key = GroupKey {
                    schema: a.schema.clone(),
                    position: Some(k + 1),
                };
                if let Some(g) = sig.predicates[pi].groups.iter().position(|x| *x == key) {
                    groups[p][g].push(a.index);
                }
            }
        }
    }
    edges.sort_unstable();
    RelatednessGraph { edges, slots, groups }
}

/// Complete module wiring of an ASNet for one problem.
///
/// Action modules of one schema occupy a contiguous block of rows (ascending action
/// index), and likewise proposition modules of one predicate, so every shared weight
/// matrix is applied to one dense block per layer.
#[derive(Debug, Clone, Serialize)]
pub struct AsnetTopology {
    pub layers: usize,
    pub d_h: usize,
    pub flags: FeatureFlags,
    pub signature: SchemaSignature,
    pub num_actions: usize,
    pub num_props: usize,
    /// Schema index of each action.
    pub action_schema: Vec<usize>,
    /// Predicate index of each proposition.
    pub prop_pred: Vec<usize>,
    pub action_row: Vec<usize>,
    pub prop_row: Vec<usize>,
    /// Row ranges per schema / predicate, with the module at each row.
    pub schema_rows: Vec<(usize, usize)>,
    pub pred_rows: Vec<(usize, usize)>,
    pub row_action: Vec<usize>,
    pub row_prop: Vec<usize>,
    /// Slot propositions per action.
    pub slots: Vec<Vec<usize>>,
    /// Per proposition, the action members of each pooling group under the chosen style.
    pub pool_groups: Vec<Vec<Vec<usize>>>,
    pub goal_mask: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopologyError {
    #[error("problem uses schema or predicate {0} absent from the signature")]
    Unknown(String),
    #[error("action {action} has {found} slots but schema {schema} declares {expected}")]
    SlotMismatch {
        action: String,
        schema: String,
        expected: usize,
        found: usize,
    },
    #[error("layers and hidden size must be positive")]
    BadShape,
}

impl AsnetTopology {
    pub fn build(gp: &GroundProblem, sig: &SchemaSignature, layers: usize, d_h: usize, flags: FeatureFlags) -> Result<AsnetTopology, TopologyError> {
        if layers == 0 || d_h == 0 {
            return Err(TopologyError::BadShape);
        }
        let graph = build_relatedness(gp, sig);
        let mut action_schema = Vec::with_capacity(gp.num_actions());
        for a in &gp.actions {
            let s = sig.schema_index(&a.schema).ok_or_else(|| TopologyError::Unknown(a.schema.clone()))?;
            if a.slots.len() != sig.schemas[s].slot_predicates.len() {
                return Err(TopologyError::SlotMismatch {
                    action: a.name.clone(),
                    schema: a.schema.clone(),
                    expected: sig.schemas[s].slot_predicates.len(),
                    found: a.slots.len(),
                });
            }
            action_schema.push(s);
        }
        let mut prop_pred = Vec::with_capacity(gp.num_props());
        for pred in &gp.predicate_of {
            prop_pred.push(sig.predicate_index(pred).ok_or_else(|| TopologyError::Unknown(pred.clone()))?);
        }
        let (row_action, action_row, schema_rows) = blocks(&action_schema, sig.schemas.len());
        let (row_prop, prop_row, pred_rows) = blocks(&prop_pred, sig.predicates.len());
        let pool_groups = match flags.pooling {
            PoolingStyle::PositionAware => graph.groups,
            PoolingStyle::OldStyle => graph
                .groups
                .iter()
                .enumerate()
                .map(|(p, gs)| {
                    let pi = prop_pred[p];
                    sig.groups(pi, PoolingStyle::OldStyle)
                        .iter()
                        .map(|key| {
                            let mut members: Vec<usize> = sig.predicates[pi]
                                .groups
                                .iter()
                                .zip(gs)
                                .filter(|(g, _)| g.schema == key.schema)
                                .flat_map(|(_, m)| m.iter().copied())
                                .collect();
                            members.sort_unstable();
                            members.dedup();
                            members
                        })
                        .collect()
                })
                .collect(),
        };
        let mut goal_mask = vec![false; gp.num_props()];
        for &g in &gp.goal {
            goal_mask[g] = true;
        }
        let topo = AsnetTopology {
            layers,
            d_h,
            flags,
            signature: sig.clone(),
            num_actions: gp.num_actions(),
            num_props: gp.num_props(),
            action_schema,
            prop_pred,
            action_row,
            prop_row,
            schema_rows,
            pred_rows,
            row_action,
            row_prop,
            slots: graph.slots,
            pool_groups,
            goal_mask,
        };
        topo.audit();
        Ok(topo)
    }

    /// Input width of the action modules of a schema at action layer `l` (1-based).
    pub fn action_in_dim(&self, schema: usize, l: usize) -> usize {
        action_in_dim(&self.signature, schema, l, self.d_h, &self.flags)
    }

    pub fn action_out_dim(&self, l: usize) -> usize {
        if l == self.layers + 1 {
            1
        } else {
            self.d_h
        }
    }

    /// Input width of the proposition modules of a predicate at proposition layer `l`.
    pub fn prop_in_dim(&self, pred: usize, l: usize) -> usize {
        prop_in_dim(&self.signature, pred, l, self.d_h, &self.flags)
    }

    /// Checks every module's wired input count against the declared widths.
    fn audit(&self) {
        for a in 0..self.num_actions {
            let s = self.action_schema[a];
            let m = self.slots[a].len();
            assert_eq!(2 * m + 1 + self.flags.extra_inputs(), self.action_in_dim(s, 1));
            for l in 2..=self.layers + 1 {
                assert_eq!((m + self.flags.skip as usize) * self.d_h, self.action_in_dim(s, l));
            }
        }
        for p in 0..self.num_props {
            let q = self.prop_pred[p];
            for l in 1..=self.layers {
                let skip = (self.flags.skip && l >= 2) as usize;
                assert_eq!((self.pool_groups[p].len() + skip) * self.d_h, self.prop_in_dim(q, l));
            }
        }
    }
}

pub fn action_in_dim(sig: &SchemaSignature, schema: usize, l: usize, d_h: usize, flags: &FeatureFlags) -> usize {
    let m = sig.schemas[schema].slot_predicates.len();
    if l == 1 {
        2 * m + 1 + flags.extra_inputs()
    } else {
        (m + flags.skip as usize) * d_h
    }
}

pub fn prop_in_dim(sig: &SchemaSignature, pred: usize, l: usize, d_h: usize, flags: &FeatureFlags) -> usize {
    let s = sig.groups(pred, flags.pooling).len();
    (s + (flags.skip && l >= 2) as usize) * d_h
}

type Blocks = (Vec<usize>, Vec<usize>, Vec<(usize, usize)>);

/// Stable grouping of items by class: (row -> item, item -> row, class -> row range).
fn blocks(class_of: &[usize], classes: usize) -> Blocks {
    let mut row_item: Vec<usize> = (0..class_of.len()).collect();
    row_item.sort_by_key(|&i| (class_of[i], i));
    let mut item_row = vec![0; class_of.len()];
    for (r, &i) in row_item.iter().enumerate() {
        item_row[i] = r;
    }
    let mut ranges = vec![(0, 0); classes];
    let mut r = 0;
    for (c, range) in ranges.iter_mut().enumerate() {
        let start = r;
        while r < row_item.len() && class_of[row_item[r]] == c {
            r += 1;
        }
        *range = (start, r);
    }
    (row_item, item_row, ranges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains;
    use crate::ppddl::{ground, parse_domain, parse_problem};

    fn robot3() -> GroundProblem {
        domains::unreliable_robot_errand().ground().unwrap()
    }

    #[test]
    fn drive_slots_and_groups() {
        let gp = robot3();
        let sig = schema_signature(&gp.domain);
        let g = build_relatedness(&gp, &sig);
        let a = gp.action_index("drive(shakey,kitchen,hall)").unwrap();
        let names: Vec<&str> = g.slots[a].iter().map(|&p| gp.prop_names[p].as_str()).collect();
        assert_eq!(names, ["at(shakey,kitchen)", "path(kitchen,hall)", "at(shakey,hall)"]);
        let hall = gp.prop_index("at(shakey,hall)").unwrap();
        let at = sig.predicate_index("at").unwrap();
        assert_eq!(sig.predicates[at].groups.len(), 2);
        let sizes: Vec<usize> = g.groups[hall].iter().map(|m| m.len()).collect();
        assert_eq!(sizes, [2, 2]);
    }

    #[test]
    fn self_loop_relates_at_two_positions() {
        let d = parse_domain(domains::UNRELIABLE_ROBOT).unwrap();
        let p = parse_problem(
            "(define (problem loop) (:domain unreliable-robot) (:objects kitchen - location)
              (:init (at shakey kitchen) (path kitchen kitchen)) (:goal (at shakey kitchen)))",
        )
        .unwrap();
        let gp = ground(&d, &p).unwrap();
        let g = build_relatedness(&gp, &schema_signature(&d));
        let a = gp.action_index("drive(shakey,kitchen,kitchen)").unwrap();
        let at = gp.prop_index("at(shakey,kitchen)").unwrap();
        let ks: Vec<usize> = g.edges.iter().filter(|e| e.0 == a && e.1 == at).map(|e| e.2).collect();
        assert_eq!(ks, [1, 3]);
    }

    #[test]
    fn signature_stable_across_sizes() {
        let sigs: Vec<SchemaSignature> = [1, 2, 3].iter().map(|&n| schema_signature(&domains::triangle_tireworld(n).ground().unwrap().domain)).collect();
        assert_eq!(sigs[0], sigs[1]);
        assert_eq!(sigs[1], sigs[2]);
        let robot = schema_signature(&robot3().domain);
        assert_eq!(robot.schemas[0].slot_predicates.len(), 3);
    }

    #[test]
    fn first_layer_dimensions() {
        let gp = domains::two_chain(1, true).ground().unwrap();
        let sig = schema_signature(&gp.domain);
        let off = FeatureFlags {
            landmarks: false,
            history: false,
            skip: false,
            pooling: PoolingStyle::PositionAware,
        };
        let t = AsnetTopology::build(&gp, &sig, 1, 16, off).unwrap();
        assert_eq!(t.action_in_dim(0, 1), 7);
        assert_eq!(t.action_in_dim(0, 2), 48);
        assert_eq!(t.action_out_dim(2), 1);
        let on = FeatureFlags { skip: true, ..FeatureFlags::default() };
        let t = AsnetTopology::build(&gp, &sig, 2, 16, on).unwrap();
        assert_eq!(t.action_in_dim(0, 1), 11);
        assert_eq!(t.action_in_dim(0, 2), 64);
        let at = sig.predicate_index("at").unwrap();
        assert_eq!(t.prop_in_dim(at, 1), 32);
        assert_eq!(t.prop_in_dim(at, 2), 48);
    }

    fn two_rooms() -> GroundProblem {
        let d = parse_domain(domains::UNRELIABLE_ROBOT).unwrap();
        let p = parse_problem(
            "(define (problem two) (:domain unreliable-robot) (:objects office hall - location)
              (:init (at shakey hall) (path hall office) (path office hall)) (:goal (at shakey office)))",
        )
        .unwrap();
        ground(&d, &p).unwrap()
    }

    #[test]
    fn old_style_pooling_is_degenerate() {
        let gp = two_rooms();
        let sig = schema_signature(&gp.domain);
        let flags = FeatureFlags {
            pooling: PoolingStyle::OldStyle,
            ..FeatureFlags::default()
        };
        let t = AsnetTopology::build(&gp, &sig, 1, 4, flags).unwrap();
        let o = gp.prop_index("at(shakey,office)").unwrap();
        let h = gp.prop_index("at(shakey,hall)").unwrap();
        assert_eq!(t.pool_groups[o], t.pool_groups[h]);
        let t = AsnetTopology::build(&gp, &sig, 1, 4, FeatureFlags::default()).unwrap();
        assert_ne!(t.pool_groups[o], t.pool_groups[h]);
    }

    #[test]
    fn rows_are_contiguous_per_schema() {
        let gp = domains::cosanostra(2).ground().unwrap();
        let sig = schema_signature(&gp.domain);
        let t = AsnetTopology::build(&gp, &sig, 2, 3, FeatureFlags::default()).unwrap();
        for (s, &(lo, hi)) in t.schema_rows.iter().enumerate() {
            for r in lo..hi {
                assert_eq!(t.action_schema[t.row_action[r]], s);
            }
        }
        assert_eq!(t.schema_rows.last().unwrap().1, t.num_actions);
    }
}

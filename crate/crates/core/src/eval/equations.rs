//! Human-readable lifted equations for sparse networks, and a direct evaluator for
//! them that shares no code with the network forward pass.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::asnet::{elu, InputFeatures, ParameterStore, ProblemNet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleKind {
    Action,
    Proposition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationTerm {
    /// Input column of the module's weight matrix.
    pub column: usize,
    pub label: String,
    pub weight: f64,
}

/// One output channel of one lifted module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedEquation {
    pub kind: ModuleKind,
    /// Schema or predicate name.
    pub name: String,
    pub layer: usize,
    pub channel: usize,
    /// False only for the final action layer, which feeds the softmax directly.
    pub elu: bool,
    pub terms: Vec<EquationTerm>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedEquationDump {
    pub domain: String,
    pub layers: usize,
    pub d_h: usize,
    pub threshold: f64,
    pub equations: Vec<LiftedEquation>,
}

fn chan(d: usize, c: usize) -> String {
    if d == 1 {
        String::new()
    } else {
        format!(".{c}")
    }
}

fn action_input_labels(store: &ParameterStore, s: usize, l: usize) -> Vec<String> {
    let sig = &store.signature.schemas[s];
    let d = store.hyper.d_h;
    let flags = &store.hyper.flags;
    let atoms = &sig.slot_atoms;
    let mut out = Vec::new();
    if l == 1 {
        out.extend(atoms.iter().map(|a| format!("truth({a})")));
        out.extend(atoms.iter().map(|a| format!("goal({a})")));
        out.push("enabled".into());
        if flags.landmarks {
            out.extend(["landmark-alone", "landmark-shared", "landmark-none"].map(String::from));
        }
        if flags.history {
            out.push("action-count".into());
        }
    } else {
        for a in atoms {
            for c in 0..d {
                out.push(format!("prop{}[{a}]{}", l - 1, chan(d, c)));
            }
        }
        if flags.skip {
            for c in 0..d {
                out.push(format!("act{}[self]{}", l - 1, chan(d, c)));
            }
        }
    }
    out
}

fn prop_input_labels(store: &ParameterStore, q: usize, l: usize) -> Vec<String> {
    let d = store.hyper.d_h;
    let flags = &store.hyper.flags;
    let sig = &store.signature;
    let mut out = Vec::new();
    for g in sig.groups(q, flags.pooling) {
        let target = match g.position {
            Some(k) => {
                let s = sig.schema_index(&g.schema).expect("group schema exists");
                format!("{} @ {}", g.schema, sig.schemas[s].slot_atoms[k - 1])
            }
            None => g.schema.clone(),
        };
        for c in 0..d {
            out.push(format!("pool(act{l}[{target}]){}", chan(d, c)));
        }
    }
    if flags.skip && l >= 2 {
        for c in 0..d {
            out.push(format!("prop{}[self]{}", l - 1, chan(d, c)));
        }
    }
    out
}

/// Lists every module channel with a weight or bias of magnitude at least `tau`.
pub fn export_lifted_equations(store: &ParameterStore, tau: f64) -> LiftedEquationDump {
    let big_l = store.hyper.layers;
    let mut equations = Vec::new();
    let mut emit = |kind, name: &str, layer, labels: Vec<String>, lin: &crate::asnet::Linear, elu: bool| {
        for c in 0..lin.w.nrows() {
            let terms: Vec<EquationTerm> = (0..lin.w.ncols())
                .filter(|&j| lin.w[[c, j]].abs() >= tau && lin.w[[c, j]] != 0.0)
                .map(|j| EquationTerm {
                    column: j,
                    label: labels[j].clone(),
                    weight: lin.w[[c, j]],
                })
                .collect();
            let b = lin.b[c];
            let bias = if b.abs() >= tau { b } else { 0.0 };
            if terms.is_empty() && bias == 0.0 {
                continue;
            }
            equations.push(LiftedEquation {
                kind,
                name: name.to_string(),
                layer,
                channel: c,
                elu,
                terms,
                bias,
            });
        }
    };
    for l in 1..=big_l + 1 {
        for (s, sig) in store.signature.schemas.iter().enumerate() {
            let lin = &store.params.action[s][l - 1];
            emit(ModuleKind::Action, &sig.name, l, action_input_labels(store, s, l), lin, l <= big_l);
        }
        if l <= big_l {
            for (q, sig) in store.signature.predicates.iter().enumerate() {
                let lin = &store.params.prop[q][l - 1];
                emit(ModuleKind::Proposition, &sig.name, l, prop_input_labels(store, q, l), lin, true);
            }
        }
    }
    LiftedEquationDump {
        domain: store.signature.domain.clone(),
        layers: big_l,
        d_h: store.hyper.d_h,
        threshold: tau,
        equations,
    }
}

fn coef(v: f64) -> String {
    let r = (v * 1e4).round() / 1e4;
    format!("{r}")
}

impl LiftedEquation {
    pub fn lhs(&self, d_h: usize) -> String {
        let tag = match self.kind {
            ModuleKind::Action => "act",
            ModuleKind::Proposition => "prop",
        };
        format!("{tag}{}[{}]{}", self.layer, self.name, chan(d_h, self.channel))
    }

    pub fn render(&self, d_h: usize) -> String {
        let mut rhs = String::new();
        for t in &self.terms {
            if rhs.is_empty() {
                write!(rhs, "{} * {}", coef(t.weight), t.label).unwrap();
            } else if t.weight < 0.0 {
                write!(rhs, " - {} * {}", coef(-t.weight), t.label).unwrap();
            } else {
                write!(rhs, " + {} * {}", coef(t.weight), t.label).unwrap();
            }
        }
        if self.bias != 0.0 || rhs.is_empty() {
            if rhs.is_empty() {
                rhs = coef(self.bias);
            } else if self.bias < 0.0 {
                write!(rhs, " - {}", coef(-self.bias)).unwrap();
            } else {
                write!(rhs, " + {}", coef(self.bias)).unwrap();
            }
        }
        if self.elu {
            format!("{} = elu({rhs})", self.lhs(d_h))
        } else {
            format!("{} = {rhs}", self.lhs(d_h))
        }
    }
}

impl LiftedEquationDump {
    /// Every coefficient in the dump, biases included.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for e in &self.equations {
            out.extend(e.terms.iter().map(|t| t.weight));
            if e.bias != 0.0 {
                out.push(e.bias);
            }
        }
        out
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# {} ({} proposition layers, |w| >= {})", self.domain, self.layers, self.threshold).unwrap();
        writeln!(out, "# every module not listed outputs elu(0) = 0").unwrap();
        for e in &self.equations {
            writeln!(out, "{}", e.render(self.d_h)).unwrap();
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dump serialises")
    }

    fn find(&self, kind: ModuleKind, name: &str, layer: usize) -> impl Iterator<Item = &LiftedEquation> {
        let name = name.to_string();
        self.equations.iter().filter(move |e| e.kind == kind && e.name == name && e.layer == layer)
    }
}

/// Module outputs obtained by evaluating a dump on one state.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpActivations {
    /// `act[l - 1][action][channel]`.
    pub act: Vec<Vec<Vec<f64>>>,
    /// `prop[l - 1][prop][channel]`.
    pub prop: Vec<Vec<Vec<f64>>>,
    pub logits: Vec<f64>,
}

fn apply(eqs: Vec<&LiftedEquation>, x: &[f64], d_out: usize, use_elu: bool) -> Vec<f64> {
    let mut z = vec![0.0; d_out];
    for e in eqs {
        z[e.channel] = e.bias + e.terms.iter().map(|t| t.weight * x[t.column]).sum::<f64>();
    }
    if use_elu {
        z.iter().map(|&v| elu(v)).collect()
    } else {
        z
    }
}

/// Evaluates the dump's equations on one problem state; channels absent from the
/// dump have zero pre-activation.
pub fn evaluate_dump(dump: &LiftedEquationDump, net: &ProblemNet, f: &InputFeatures) -> DumpActivations {
    let topo = &net.topo;
    let sig = &topo.signature;
    let d = dump.d_h;
    let big_l = dump.layers;
    let mut act: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut prop: Vec<Vec<Vec<f64>>> = Vec::new();
    for l in 1..=big_l + 1 {
        let d_out = if l == big_l + 1 { 1 } else { d };
        let mut layer = Vec::with_capacity(topo.num_actions);
        for a in 0..topo.num_actions {
            let s = topo.action_schema[a];
            let slots = &topo.slots[a];
            let mut x = Vec::new();
            if l == 1 {
                x.extend(slots.iter().map(|&p| f.state.contains(p) as u8 as f64));
                x.extend(slots.iter().map(|&p| topo.goal_mask[p] as u8 as f64));
                x.push(f.enabled[a] as u8 as f64);
                if topo.flags.landmarks {
                    x.extend(f.landmarks[a].iter().map(|&c| c as u8 as f64));
                }
                if topo.flags.history {
                    x.push(f.counts[a]);
                }
            } else {
                for &p in slots {
                    x.extend(&prop[l - 2][p]);
                }
                if topo.flags.skip {
                    x.extend(&act[l - 2][a]);
                }
            }
            let eqs = dump.find(ModuleKind::Action, &sig.schemas[s].name, l).collect();
            layer.push(apply(eqs, &x, d_out, l <= big_l));
        }
        act.push(layer);
        if l == big_l + 1 {
            break;
        }
        let mut layer = Vec::with_capacity(topo.num_props);
        for p in 0..topo.num_props {
            let mut x = Vec::new();
            for members in &topo.pool_groups[p] {
                for c in 0..d {
                    let best = members.iter().map(|&a| act[l - 1][a][c]).fold(f64::NEG_INFINITY, f64::max);
                    x.push(if members.is_empty() { 0.0 } else { best });
                }
            }
            if topo.flags.skip && l >= 2 {
                x.extend(&prop[l - 2][p]);
            }
            let q = topo.prop_pred[p];
            let eqs = dump.find(ModuleKind::Proposition, &sig.predicates[q].name, l).collect();
            layer.push(apply(eqs, &x, d, true));
        }
        prop.push(layer);
    }
    let logits = act[big_l].iter().map(|v| v[0]).collect();
    DumpActivations { act, prop, logits }
}

use serde::{Deserialize, Serialize};

use crate::asnet::{forward_activations, AsnetError, Mode, ParameterStore, ProblemNet};
use crate::training::RolloutRecord;

/// Every module output at one visited state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationStep {
    pub step: usize,
    /// True propositions.
    pub state: Vec<String>,
    /// Per-action execution counts on arrival.
    pub counts: Vec<u32>,
    pub enabled: Vec<bool>,
    /// Action taken from this state; `None` at the final state.
    pub chosen: Option<String>,
    /// `act[l - 1][action]`, one vector of channels per action.
    pub act: Vec<Vec<Vec<f64>>>,
    /// `prop[l - 1][prop]`.
    pub prop: Vec<Vec<Vec<f64>>>,
    pub logits: Vec<f64>,
    pub pi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationDump {
    pub problem: String,
    pub layers: usize,
    pub d_h: usize,
    pub actions: Vec<String>,
    pub propositions: Vec<String>,
    pub steps: Vec<ActivationStep>,
}

/// One CSV line: a single channel of a single module at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationRow {
    pub step: usize,
    /// `action`, `proposition` or `policy`.
    pub kind: String,
    pub layer: usize,
    pub unit: String,
    pub channel: usize,
    pub value: f64,
    pub enabled: Option<bool>,
    pub chosen: bool,
}

/// Re-runs the network on every state of a rollout and records all module outputs.
pub fn export_activations(store: &ParameterStore, net: &ProblemNet, rec: &RolloutRecord) -> Result<ActivationDump, AsnetError> {
    let gp = &net.gp;
    let topo = &net.topo;
    let mut steps = Vec::with_capacity(rec.states.len());
    for (i, (s, counts)) in rec.states.iter().zip(&rec.counts).enumerate() {
        let f = net.features(s, counts);
        let tape = forward_activations(store, topo, &f, Mode::Eval)?;
        let act = (1..=topo.layers + 1).map(|l| (0..topo.num_actions).map(|a| tape.action_activation(topo, a, l)).collect()).collect();
        let prop = (1..=topo.layers).map(|l| (0..topo.num_props).map(|p| tape.prop_activation(topo, p, l)).collect()).collect();
        steps.push(ActivationStep {
            step: i,
            state: gp.state_names(s),
            counts: counts.clone(),
            enabled: f.enabled.clone(),
            chosen: rec.actions.get(i).map(|&a| gp.actions[a].name.clone()),
            act,
            prop,
            logits: tape.logits.clone(),
            pi: tape.pi.clone(),
        });
    }
    Ok(ActivationDump {
        problem: gp.name.clone(),
        layers: topo.layers,
        d_h: topo.d_h,
        actions: gp.actions.iter().map(|a| a.name.clone()).collect(),
        propositions: gp.prop_names.clone(),
        steps,
    })
}

impl ActivationDump {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("dump serialises")
    }

    pub fn rows(&self) -> Vec<ActivationRow> {
        let mut rows = Vec::new();
        for st in &self.steps {
            let chosen = |name: &str| st.chosen.as_deref() == Some(name);
            for (l, layer) in st.act.iter().enumerate() {
                for (a, vals) in layer.iter().enumerate() {
                    for (c, &v) in vals.iter().enumerate() {
                        rows.push(ActivationRow {
                            step: st.step,
                            kind: "action".into(),
                            layer: l + 1,
                            unit: self.actions[a].clone(),
                            channel: c,
                            value: v,
                            enabled: Some(st.enabled[a]),
                            chosen: chosen(&self.actions[a]),
                        });
                    }
                }
            }
            for (l, layer) in st.prop.iter().enumerate() {
                for (p, vals) in layer.iter().enumerate() {
                    for (c, &v) in vals.iter().enumerate() {
                        rows.push(ActivationRow {
                            step: st.step,
                            kind: "proposition".into(),
                            layer: l + 1,
                            unit: self.propositions[p].clone(),
                            channel: c,
                            value: v,
                            enabled: None,
                            chosen: false,
                        });
                    }
                }
            }
            for (a, name) in self.actions.iter().enumerate() {
                rows.push(ActivationRow {
                    step: st.step,
                    kind: "policy".into(),
                    layer: self.layers + 1,
                    unit: name.clone(),
                    channel: 0,
                    value: st.pi[a],
                    enabled: Some(st.enabled[a]),
                    chosen: chosen(name),
                });
            }
        }
        rows
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in self.rows() {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains;
    use crate::fixtures;
    use crate::training::{run_policy, ExecMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn ttw2() -> (ParameterStore, ProblemNet) {
        let store = fixtures::ttw_sparse_store();
        let gp = Arc::new(domains::triangle_tireworld(2).ground().unwrap());
        let net = ProblemNet::new(gp, &store).unwrap();
        (store, net)
    }

    #[test]
    fn goal_start_has_one_step() {
        let (store, net) = ttw2();
        let goal = net.gp.state_from_names(&["vehicle-at(l-1-5)", "not-flattire()"]).unwrap();
        let rec = run_policy(&store, &net, &goal, &mut ChaCha8Rng::seed_from_u64(0), 300, ExecMode::Argmax).unwrap();
        let dump = export_activations(&store, &net, &rec).unwrap();
        assert_eq!(dump.steps.len(), 1);
        assert_eq!(dump.steps[0].chosen, None);
    }

    #[test]
    fn sparse_ttw_trace_and_replay() {
        let (store, net) = ttw2();
        let s0 = net.gp.s0.clone();
        let rec = run_policy(&store, &net, &s0, &mut ChaCha8Rng::seed_from_u64(0), 300, ExecMode::Argmax).unwrap();
        assert!(rec.reached_goal());
        let dump = export_activations(&store, &net, &rec).unwrap();
        // Eight moves and two tire changes, plus the goal state.
        assert_eq!(dump.steps.len(), 11);
        assert!(dump.steps[..10].iter().all(|s| s.chosen.is_some()));
        for st in &dump.steps {
            let s = net.gp.state_from_names(&st.state).unwrap();
            let f = net.features(&s, &st.counts);
            let tape = forward_activations(&store, &net.topo, &f, Mode::Eval).unwrap();
            assert_eq!(tape.logits, st.logits);
            for (l, layer) in st.prop.iter().enumerate() {
                for (p, v) in layer.iter().enumerate() {
                    assert_eq!(&tape.prop_activation(&net.topo, p, l + 1), v);
                }
            }
        }
        let mut buf = Vec::new();
        dump.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,kind,layer,unit,channel,value,enabled,chosen\n"));
        assert_eq!(text.lines().count(), dump.rows().len() + 1);
        let back: ActivationDump = serde_json::from_str(&dump.to_json()).unwrap();
        assert_eq!(back, dump);
    }
}

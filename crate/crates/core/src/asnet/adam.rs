use serde::{Deserialize, Serialize};

use super::{GradientSet, Params};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Params,
    pub v: Params,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &Params) -> AdamState {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    /// One bias-corrected update of `params` against `grads`.
    pub fn step(&mut self, cfg: &AdamConfig, params: &mut Params, grads: &GradientSet) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let c2 = 1.0 - cfg.beta2.powi(self.t as i32);
        let tensors = params.slices_mut().into_iter().zip(grads.slices()).zip(self.m.slices_mut()).zip(self.v.slices_mut());
        for (((w, g), m), v) in tensors {
            for i in 0..w.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                w[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asnet::Linear;

    fn scalar(x: f64) -> Params {
        let mut l = Linear::zeros(1, 1);
        l.w[[0, 0]] = x;
        Params {
            action: vec![vec![l]],
            prop: vec![],
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = AdamConfig::default();
        let mut p = scalar(1.0);
        let mut st = AdamState::new(&p);
        st.step(&cfg, &mut p, &scalar(0.5));
        assert!((p.action[0][0].w[[0, 0]] - (1.0 - 1e-3)).abs() < 1e-9);
        // Zero gradient on the bias leaves it alone.
        assert_eq!(p.action[0][0].b[0], 0.0);
    }

    #[test]
    fn minimises_a_quadratic() {
        let cfg = AdamConfig {
            learning_rate: 0.05,
            ..AdamConfig::default()
        };
        let mut p = scalar(3.0);
        let mut st = AdamState::new(&p);
        for _ in 0..2000 {
            let x = p.action[0][0].w[[0, 0]];
            st.step(&cfg, &mut p, &scalar(2.0 * (x - 1.0)));
        }
        assert!((p.action[0][0].w[[0, 0]] - 1.0).abs() < 1e-3);
    }
}

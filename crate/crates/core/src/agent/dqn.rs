//! Dueling double DQN learner and its greedy controller.

use std::sync::Arc;

use super::replay::ReplayBuffer;
use crate::controllers::{Controller, Decision};
use crate::encoder::{encode, DtseConfig};
use crate::error::Result;
use crate::neural::{argmax, huber_grad, huber_loss, polyak_update, Adam, AdamConfig, QNetwork, Workspace};
use crate::rng::RngStream;
use crate::sim::Simulation;

/// `δ = r + γ·Q̂(s', argmax_a' Q(s', a'), Θ⁻) - Q(s, a)`; no bootstrap on terminal `s'`.
#[allow(clippy::too_many_arguments)]
pub fn double_td_errors(
    q_s: &[f32],
    q_next_online: &[f32],
    q_next_target: &[f32],
    actions: &[usize],
    rewards: &[f32],
    terminals: &[bool],
    gamma: f32,
    n_actions: usize,
) -> Vec<f32> {
    (0..actions.len())
        .map(|b| {
            let row = b * n_actions..(b + 1) * n_actions;
            let bootstrap = if terminals[b] {
                0.0
            } else {
                let a_star = argmax(&q_next_online[row.clone()]);
                gamma * q_next_target[row.start + a_star]
            };
            rewards[b] + bootstrap - q_s[row.start + actions[b]]
        })
        .collect()
}

/// ε-greedy choice: one uniform draw decides exploration, a second picks the action.
pub fn select_action(q: &[f32], epsilon: f64, rng: &mut RngStream) -> usize {
    if rng.uniform() < epsilon {
        rng.index(q.len())
    } else {
        argmax(q)
    }
}

#[derive(Clone, Debug)]
pub struct DqnLearner {
    pub online: QNetwork<f32>,
    pub target: QNetwork<f32>,
    pub adam: Adam<f32>,
    pub gamma: f32,
    pub tau: f32,
    pub batch: usize,
    ws_s: Workspace<f32>,
    ws_next: Workspace<f32>,
    input_s: Vec<f32>,
    input_next: Vec<f32>,
    grads: Vec<f32>,
}

impl DqnLearner {
    pub fn new(online: QNetwork<f32>, adam: AdamConfig, gamma: f32, tau: f32, batch: usize) -> Self {
        let n = online.params().len();
        Self {
            target: online.clone(),
            adam: Adam::new(n, adam),
            online,
            gamma,
            tau,
            batch,
            ws_s: Workspace::new(),
            ws_next: Workspace::new(),
            input_s: Vec::new(),
            input_next: Vec::new(),
            grads: vec![0.0; n],
        }
    }

    pub fn q_values(&mut self, state: &[f32]) -> Result<Vec<f32>> {
        Ok(self.online.forward(state, 1, &mut self.ws_next)?.to_vec())
    }

    /// One minibatch update: double TD errors, Huber loss, Adam on the online
    /// network, Polyak on the target. Returns the loss.
    pub fn update(&mut self, buffer: &ReplayBuffer, rng: &mut RngStream) -> Result<f32> {
        let idx = buffer.sample_indices(self.batch, rng)?;
        let m = idx.len();
        let n_in = self.online.arch().input_len();
        let n_act = self.online.arch().actions;
        self.input_s.resize(m * n_in, 0.0);
        self.input_next.resize(m * n_in, 0.0);
        let mut actions = Vec::with_capacity(m);
        let mut rewards = Vec::with_capacity(m);
        let mut terminals = Vec::with_capacity(m);
        for (b, &i) in idx.iter().enumerate() {
            let t = buffer.get(i);
            t.state.unpack_into(&mut self.input_s[b * n_in..(b + 1) * n_in]);
            t.next_state.unpack_into(&mut self.input_next[b * n_in..(b + 1) * n_in]);
            actions.push(t.action as usize);
            rewards.push(t.reward);
            terminals.push(t.terminal);
        }

        let q_next_target = self.target.forward(&self.input_next, m, &mut self.ws_next)?.to_vec();
        let q_next_online = self.online.forward(&self.input_next, m, &mut self.ws_next)?.to_vec();
        let q_s = self.online.forward(&self.input_s, m, &mut self.ws_s)?.to_vec();
        let deltas = double_td_errors(
            &q_s,
            &q_next_online,
            &q_next_target,
            &actions,
            &rewards,
            &terminals,
            self.gamma,
            n_act,
        );
        let loss = huber_loss(&deltas)?;

        let mut dq = vec![0.0f32; m * n_act];
        for (b, &d) in deltas.iter().enumerate() {
            dq[b * n_act + actions[b]] = -huber_grad(d, m);
        }
        self.grads.fill(0.0);
        self.online.backward(&mut self.ws_s, &dq, &mut self.grads);
        self.adam.update(self.online.params_mut(), &self.grads);
        polyak_update(self.target.params_mut(), self.online.params(), self.tau)?;
        Ok(loss)
    }
}

/// Greedy deployment policy over the connected-vehicle state.
#[derive(Clone, Debug)]
pub struct DqnController {
    net: Arc<QNetwork<f32>>,
    dtse: DtseConfig,
    ws: Workspace<f32>,
}

impl DqnController {
    pub fn new(net: Arc<QNetwork<f32>>, v_max: f64) -> Self {
        Self {
            net,
            dtse: DtseConfig {
                v_max,
                ..DtseConfig::default()
            },
            ws: Workspace::new(),
        }
    }

    /// Greedy action for the simulation's current detected state.
    pub fn act_greedy(&mut self, sim: &Simulation) -> usize {
        let state = encode(&sim.observe().detected(), &self.dtse).expect("simulator views match the encoder");
        let q = self
            .net
            .forward(&state.data, 1, &mut self.ws)
            .expect("checkpoint shape verified at load");
        argmax(q)
    }
}

impl Controller for DqnController {
    fn name(&self) -> &'static str {
        "dqn"
    }

    fn decide(&mut self, sim: &Simulation) -> Decision {
        if sim.is_decision_point() {
            Decision::Phase(self.act_greedy(sim))
        } else {
            Decision::Hold
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn td_error_hand_value() {
        let d = double_td_errors(&[1.0, 0.0], &[1.0, 2.0], &[9.0, 1.5], &[0], &[0.5], &[false], 0.99, 2);
        assert!((d[0] - 0.985).abs() < 1e-6);
    }

    #[test]
    fn terminal_has_no_bootstrap() {
        let d = double_td_errors(&[1.0, 0.0], &[5.0, 2.0], &[9.0, 9.0], &[0], &[1.0], &[true], 0.99, 2);
        assert_eq!(d[0], 0.0);
    }

    #[test]
    fn greedy_and_random_selection() {
        let mut rng = RngStream::new(0);
        assert_eq!(select_action(&[0.2, 0.7], 0.0, &mut rng), 1);
        assert_eq!(select_action(&[0.5, 0.5], 0.0, &mut rng), 0);
        let mut counts = [0; 2];
        for _ in 0..4000 {
            counts[select_action(&[0.0, 1.0], 1.0, &mut rng)] += 1;
        }
        assert!((counts[0] as f64 / 4000.0 - 0.5).abs() < 0.05);
    }
}

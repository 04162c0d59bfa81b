//! Small deep Q-network on one-hot state encodings, with three target
//! rules: plain max over the target network, decoupled selection on the
//! online network, and the self-correcting rule
//!
//! ```text
//! q_beta(s', a) = Q(s', a; target) - beta * (Q(s', a; target) - Q(s', a; online))
//! ```
//!
//! where selection argmaxes `q_beta` and evaluation reads the target
//! network. With `beta = 0` the rule collapses to the plain max; with
//! `beta = 1` it collapses to the decoupled rule.
//!
//! The network is a rectifier MLP with a linear head, trained by plain
//! constant-step gradient descent on the squared TD error. Gradients are
//! hand-derived (and checked against finite differences) so the optimizer
//! has no hidden state.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

use crate::argmax::{argmax_first, argmax_tied};
use crate::experiments::{EnvSpec, ExperimentError};
use crate::mdp::Transition;
use crate::seeding::stream_rng;

#[derive(Debug, Error)]
pub enum ScdqnError {
    #[error("replay buffer holds {have} transitions, need {need}")]
    ReplayUnderfull { have: usize, need: usize },
    #[error("scdqn beta must be finite and >= 1 in training configs, got {0}")]
    InvalidBeta(f64),
    #[error("one-hot training needs every non-terminal state to expose the same action count")]
    NonUniformActions,
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

/// One dense layer, weights stored row-major `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

/// Rectifier MLP with a linear output head. Also serves as the gradient
/// container (same shape as the parameters).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

impl Mlp {
    /// Uniform(-1/sqrt(in), 1/sqrt(in)) weights, zero biases.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|io| {
                let (in_dim, out_dim) = (io[0], io[1]);
                let scale = 1.0 / (in_dim as f64).sqrt();
                DenseLayer {
                    w: (0..in_dim * out_dim)
                        .map(|_| (2.0 * rng.random::<f64>() - 1.0) * scale)
                        .collect(),
                    b: vec![0.0; out_dim],
                    in_dim,
                    out_dim,
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        let layers = sizes
            .windows(2)
            .map(|io| DenseLayer {
                w: vec![0.0; io[0] * io[1]],
                b: vec![0.0; io[1]],
                in_dim: io[0],
                out_dim: io[1],
            })
            .collect();
        Mlp { layers }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].in_dim];
        sizes.extend(self.layers.iter().map(|l| l.out_dim));
        sizes
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Activations per layer: `[input, hidden_1, ..., output]`.
    fn forward_cached(&self, x: &[f64]) -> Vec<Vec<f64>> {
        assert_eq!(x.len(), self.input_dim(), "input size mismatch");
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (li, layer) in self.layers.iter().enumerate() {
            let prev = acts.last().unwrap();
            let mut out = layer.b.clone();
            for o in 0..layer.out_dim {
                let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                let mut acc = 0.0;
                for (wi, xi) in row.iter().zip(prev) {
                    acc += wi * xi;
                }
                out[o] += acc;
            }
            if li + 1 < self.layers.len() {
                for v in &mut out {
                    *v = v.max(0.0);
                }
            }
            acts.push(out);
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).pop().unwrap()
    }

    /// `self += scale * other`, elementwise over all parameters.
    pub fn scaled_add(&mut self, other: &Mlp, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.w.iter_mut().zip(&b.w) {
                *x += scale * y;
            }
            for (x, y) in a.b.iter_mut().zip(&b.b) {
                *x += scale * y;
            }
        }
    }
}

/// Delayed parameter snapshot used for target computation.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetParams(Mlp);

impl TargetParams {
    pub fn from_online(online: &Mlp) -> Self {
        TargetParams(online.clone())
    }

    pub fn sync(&mut self, online: &Mlp) {
        self.0 = online.clone();
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.0.forward(x)
    }

    pub fn params(&self) -> &Mlp {
        &self.0
    }

    pub fn params_mut(&mut self) -> &mut Mlp {
        &mut self.0
    }
}

/// FIFO transition store with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    buf: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        ReplayBuffer { capacity, buf: VecDeque::with_capacity(capacity) }
    }

    pub fn push(&mut self, t: Transition) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    /// Uniform sample with replacement.
    pub fn sample(&self, batch: usize, rng: &mut impl Rng) -> Vec<Transition> {
        (0..batch)
            .map(|_| self.buf[rng.random_range(0..self.buf.len())])
            .collect()
    }
}

/// How TD targets are built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetRule {
    Dqn,
    DoubleDqn,
    Scdqn { beta: f64 },
}

impl TargetRule {
    /// Training configs require `beta >= 1`; the 0 and 1 endpoints exist
    /// only as reduction checks in tests.
    pub fn validate(&self) -> Result<(), ScdqnError> {
        match *self {
            TargetRule::Scdqn { beta } if !(beta.is_finite() && beta >= 1.0) => {
                Err(ScdqnError::InvalidBeta(beta))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TargetRule::Dqn => "dqn".into(),
            TargetRule::DoubleDqn => "double_dqn".into(),
            TargetRule::Scdqn { beta } => format!("scdqn_beta{beta}"),
        }
    }
}

fn one_hot(s: usize, n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    x[s] = 1.0;
    x
}

/// TD targets for a batch. Terminal transitions contribute `r` alone.
/// Argmaxes here use the deterministic first-index rule so that targets are
/// a pure function of parameters and batch.
pub fn td_targets(
    rule: TargetRule,
    batch: &[Transition],
    online: &Mlp,
    target: &TargetParams,
    gamma: f64,
) -> Vec<f64> {
    assert!(!batch.is_empty(), "empty batch");
    let n_states = online.input_dim();
    batch
        .iter()
        .map(|t| {
            if t.done {
                return t.r;
            }
            let x = one_hot(t.s_next, n_states);
            let q_tgt = target.forward(&x);
            let cont = match rule {
                TargetRule::Dqn => q_tgt.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                TargetRule::DoubleDqn => {
                    let q_onl = online.forward(&x);
                    q_tgt[argmax_first(&q_onl)]
                }
                TargetRule::Scdqn { beta } => {
                    let q_onl = online.forward(&x);
                    let q_beta: Vec<f64> = q_tgt
                        .iter()
                        .zip(&q_onl)
                        .map(|(&qt, &qo)| qt - beta * (qt - qo))
                        .collect();
                    q_tgt[argmax_first(&q_beta)]
                }
            };
            t.r + gamma * cont
        })
        .collect()
}

/// Mean squared TD error of the taken actions against fixed targets.
pub fn td_loss(online: &Mlp, batch: &[Transition], targets: &[f64]) -> f64 {
    assert_eq!(batch.len(), targets.len());
    let n_states = online.input_dim();
    let mut loss = 0.0;
    for (t, &target) in batch.iter().zip(targets) {
        let q = online.forward(&one_hot(t.s, n_states));
        let diff = q[t.a] - target;
        loss += diff * diff;
    }
    loss / batch.len() as f64
}

/// Gradient of [`td_loss`] with respect to the online parameters. Targets
/// are constants; only the taken-action output carries error.
pub fn grad_td_loss(online: &Mlp, batch: &[Transition], targets: &[f64]) -> Mlp {
    assert_eq!(batch.len(), targets.len());
    let n_states = online.input_dim();
    let mut grad = Mlp::zeros(&online.layer_sizes());
    let scale = 2.0 / batch.len() as f64;
    for (t, &target) in batch.iter().zip(targets) {
        let acts = online.forward_cached(&one_hot(t.s, n_states));
        let output = acts.last().unwrap();
        let mut delta = vec![0.0; output.len()];
        delta[t.a] = scale * (output[t.a] - target);
        for li in (0..online.layers.len()).rev() {
            let layer = &online.layers[li];
            let prev_act = &acts[li];
            let glayer = &mut grad.layers[li];
            for o in 0..layer.out_dim {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                glayer.b[o] += d;
                let row = &mut glayer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, &x) in row.iter_mut().zip(prev_act) {
                    *g += d * x;
                }
            }
            if li > 0 {
                let mut next_delta = vec![0.0; layer.in_dim];
                for o in 0..layer.out_dim {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (nd, &w) in next_delta.iter_mut().zip(row) {
                        *nd += d * w;
                    }
                }
                // rectifier gate: active where the forward activation was positive
                for (nd, &a) in next_delta.iter_mut().zip(prev_act) {
                    if a <= 0.0 {
                        *nd = 0.0;
                    }
                }
                delta = next_delta;
            }
        }
    }
    grad
}

/// Online/target parameter pair plus replay, advanced by [`train_step`].
#[derive(Debug, Clone)]
pub struct TrainState {
    pub online: Mlp,
    pub target: TargetParams,
    pub replay: ReplayBuffer,
    pub step: u64,
}

impl TrainState {
    pub fn new(online: Mlp, replay_capacity: usize) -> Self {
        let target = TargetParams::from_online(&online);
        TrainState { online, target, replay: ReplayBuffer::new(replay_capacity), step: 0 }
    }
}

/// One learner step: sample a batch, build targets, descend, and sync the
/// target parameters every `sync_period` steps.
#[allow(clippy::too_many_arguments)]
pub fn train_step(
    state: &mut TrainState,
    rule: TargetRule,
    batch_size: usize,
    learning_rate: f64,
    sync_period: u64,
    gamma: f64,
    rng: &mut impl Rng,
) -> Result<(), ScdqnError> {
    if state.replay.len() < batch_size {
        return Err(ScdqnError::ReplayUnderfull { have: state.replay.len(), need: batch_size });
    }
    let batch = state.replay.sample(batch_size, rng);
    let targets = td_targets(rule, &batch, &state.online, &state.target, gamma);
    let grad = grad_td_loss(&state.online, &batch, &targets);
    state.online.scaled_add(&grad, -learning_rate);
    state.step += 1;
    if sync_period > 0 && state.step % sync_period == 0 {
        state.target.sync(&state.online);
    }
    Ok(())
}

/// Toy-scale training setup: one-hot states into a single-hidden-layer net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScdqnToyConfig {
    pub schema_version: u32,
    pub name: String,
    pub env: EnvSpec,
    pub rules: Vec<TargetRule>,
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Learner steps happen every `train_period` environment steps.
    pub train_period: u32,
    pub target_sync_period: u64,
    pub total_env_steps: u32,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay_steps: u32,
    pub max_steps_per_episode: u32,
    /// Curve rows are emitted every `log_period` environment steps.
    pub log_period: u32,
    pub eval_episodes: u32,
    pub eval_max_steps: u32,
    pub master_seed: u64,
}

/// One row of the training curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    pub episode_return_mean: f64,
    pub selected_action_value_mean: f64,
}

/// Training outcome for one target rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyRuleResult {
    pub label: String,
    pub curve: Vec<CurvePoint>,
    pub eval_successes: u32,
    pub eval_episodes: u32,
    pub final_greedy_return: f64,
}

pub const CURVE_CSV_HEADER: &str = "step,episode_return_mean,selected_action_value_mean";

pub fn curve_to_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from(CURVE_CSV_HEADER);
    out.push('\n');
    for p in curve {
        out.push_str(&format!(
            "{},{},{}\n",
            p.step, p.episode_return_mean, p.selected_action_value_mean
        ));
    }
    out
}

fn linear_eps(cfg: &ScdqnToyConfig, step: u32) -> f64 {
    if step >= cfg.eps_decay_steps {
        return cfg.eps_end;
    }
    let frac = step as f64 / cfg.eps_decay_steps as f64;
    cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac
}

/// Trains each configured rule on the one-hot encoding of the environment
/// and evaluates the final greedy policy.
pub fn run_toy_training(cfg: &ScdqnToyConfig) -> Result<Vec<ToyRuleResult>, ScdqnError> {
    let mdp = cfg.env.build()?;
    let n_states = mdp.n_states();
    let n_actions = (0..n_states)
        .filter(|&s| !mdp.is_terminal(s))
        .map(|s| mdp.n_actions(s))
        .collect::<std::collections::HashSet<_>>();
    if n_actions.len() != 1 {
        return Err(ScdqnError::NonUniformActions);
    }
    let n_actions = n_actions.into_iter().next().unwrap();
    for rule in &cfg.rules {
        rule.validate()?;
    }

    let mut results = Vec::with_capacity(cfg.rules.len());
    for (rule_idx, &rule) in cfg.rules.iter().enumerate() {
        let stream_base = 16 * rule_idx as u64;
        let mut init_rng = stream_rng(cfg.master_seed, stream_base);
        let mut env_rng = stream_rng(cfg.master_seed, stream_base + 1);
        let mut policy_rng = stream_rng(cfg.master_seed, stream_base + 2);
        let mut sample_rng = stream_rng(cfg.master_seed, stream_base + 3);
        let mut eval_rng = stream_rng(cfg.master_seed, stream_base + 4);

        let online = Mlp::new(&[n_states, cfg.hidden, n_actions], &mut init_rng);
        let mut state = TrainState::new(online, cfg.replay_capacity);

        let mut s = mdp.start_state();
        let mut episode_steps = 0u32;
        let mut episode_return = 0.0;
        let mut window_returns: Vec<f64> = Vec::new();
        let mut last_return_mean = 0.0;
        let mut window_action_values = 0.0;
        let mut window_steps = 0u32;
        let mut curve = Vec::new();

        for env_step in 1..=cfg.total_env_steps {
            let eps = linear_eps(cfg, env_step);
            let q_vals = state.online.forward(&one_hot(s, n_states));
            let a = if policy_rng.random::<f64>() < eps {
                policy_rng.random_range(0..n_actions)
            } else {
                argmax_tied(&q_vals, &mut policy_rng)
            };
            window_action_values += q_vals[a];
            window_steps += 1;

            let t = mdp.sample_step(s, a, &mut env_rng).expect("live state");
            state.replay.push(t);
            episode_return += t.r;
            episode_steps += 1;

            if t.done || episode_steps >= cfg.max_steps_per_episode {
                window_returns.push(episode_return);
                episode_return = 0.0;
                episode_steps = 0;
                s = mdp.start_state();
            } else {
                s = t.s_next;
            }

            if state.replay.len() >= cfg.batch_size && env_step % cfg.train_period == 0 {
                train_step(
                    &mut state,
                    rule,
                    cfg.batch_size,
                    cfg.learning_rate,
                    cfg.target_sync_period,
                    mdp.gamma(),
                    &mut sample_rng,
                )?;
            }

            if env_step % cfg.log_period == 0 {
                if !window_returns.is_empty() {
                    last_return_mean =
                        window_returns.iter().sum::<f64>() / window_returns.len() as f64;
                    window_returns.clear();
                }
                curve.push(CurvePoint {
                    step: env_step as u64,
                    episode_return_mean: last_return_mean,
                    selected_action_value_mean: window_action_values / window_steps as f64,
                });
                window_action_values = 0.0;
                window_steps = 0;
            }
        }

        // greedy evaluation of the final network
        let mut successes = 0;
        let mut final_return = 0.0;
        for _ in 0..cfg.eval_episodes {
            let mut s = mdp.start_state();
            let mut ep_return = 0.0;
            for _ in 0..cfg.eval_max_steps {
                let q_vals = state.online.forward(&one_hot(s, n_states));
                let a = argmax_first(&q_vals);
                let t = mdp.sample_step(s, a, &mut eval_rng).expect("live state");
                ep_return += t.r;
                s = t.s_next;
                if t.done {
                    successes += 1;
                    break;
                }
            }
            final_return += ep_return;
        }

        results.push(ToyRuleResult {
            label: rule.label(),
            curve,
            eval_successes: successes,
            eval_episodes: cfg.eval_episodes,
            final_greedy_return: final_return / cfg.eval_episodes.max(1) as f64,
        });
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::stream_rng;

    fn random_batch(
        n_states: usize,
        n_actions: usize,
        len: usize,
        rng: &mut impl Rng,
    ) -> Vec<Transition> {
        (0..len)
            .map(|_| Transition {
                s: rng.random_range(0..n_states),
                a: rng.random_range(0..n_actions),
                r: 2.0 * rng.random::<f64>() - 1.0,
                s_next: rng.random_range(0..n_states),
                done: rng.random::<f64>() < 0.2,
            })
            .collect()
    }

    #[test]
    fn forward_zero_params_zero_output() {
        let net = Mlp::zeros(&[4, 8, 3]);
        assert_eq!(net.forward(&one_hot(1, 4)), vec![0.0; 3]);
    }

    #[test]
    fn forward_single_linear_layer_reads_weight_column() {
        let mut net = Mlp::zeros(&[3, 2]);
        // w[o][i]
        net.layers_mut()[0].w = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        net.layers_mut()[0].b = vec![0.5, -0.5];
        let out = net.forward(&one_hot(1, 3));
        assert_eq!(out, vec![2.0 + 0.5, 5.0 - 0.5]);
    }

    #[test]
    fn forward_is_nonlinear() {
        // the rectifier folds the negative half-space, so scaling the input
        // by a negative constant does not scale the output
        let mut rng = stream_rng(0, 0);
        let net = Mlp::new(&[4, 6, 2], &mut rng);
        let x = vec![0.3, -0.2, 0.8, 0.1];
        let c = -1.5;
        let scaled_in: Vec<f64> = x.iter().map(|v| c * v).collect();
        let out_scaled_in = net.forward(&scaled_in);
        let scaled_out: Vec<f64> = net.forward(&x).iter().map(|v| c * v).collect();
        let diff: f64 = out_scaled_in
            .iter()
            .zip(&scaled_out)
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(diff > 1e-9, "rectifier net must not commute with negative scaling");
    }

    #[test]
    fn param_count_matches_shape() {
        let net = Mlp::zeros(&[9, 64, 4]);
        assert_eq!(net.param_count(), (9 + 1) * 64 + (64 + 1) * 4);
    }

    #[test]
    fn replay_fifo_eviction() {
        let mut rb = ReplayBuffer::new(2);
        for i in 0..3 {
            rb.push(Transition { s: i, a: 0, r: 0.0, s_next: 0, done: false });
        }
        assert_eq!(rb.len(), 2);
        let mut rng = stream_rng(1, 0);
        let sample = rb.sample(8, &mut rng);
        assert!(sample.iter().all(|t| t.s == 1 || t.s == 2));
    }

    #[test]
    fn targets_agree_when_target_equals_online() {
        let mut rng = stream_rng(2, 0);
        let online = Mlp::new(&[5, 8, 3], &mut rng);
        let target = TargetParams::from_online(&online);
        let batch = random_batch(5, 3, 16, &mut rng);
        let dqn = td_targets(TargetRule::Dqn, &batch, &online, &target, 0.9);
        let ddqn = td_targets(TargetRule::DoubleDqn, &batch, &online, &target, 0.9);
        let scq = td_targets(TargetRule::Scdqn { beta: 3.0 }, &batch, &online, &target, 0.9);
        for i in 0..batch.len() {
            assert!((dqn[i] - ddqn[i]).abs() <= 1e-12);
            assert!((dqn[i] - scq[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn reduction_identities() {
        let mut rng = stream_rng(3, 0);
        for _ in 0..100 {
            let online = Mlp::new(&[6, 10, 4], &mut rng);
            let mut target = TargetParams::from_online(&online);
            // desynchronize the pair
            let noise = Mlp::new(&[6, 10, 4], &mut rng);
            target.params_mut().scaled_add(&noise, 0.5);
            let batch = random_batch(6, 4, 8, &mut rng);
            let dqn = td_targets(TargetRule::Dqn, &batch, &online, &target, 0.95);
            let via_beta0 =
                td_targets(TargetRule::Scdqn { beta: 0.0 }, &batch, &online, &target, 0.95);
            let ddqn = td_targets(TargetRule::DoubleDqn, &batch, &online, &target, 0.95);
            let via_beta1 =
                td_targets(TargetRule::Scdqn { beta: 1.0 }, &batch, &online, &target, 0.95);
            for i in 0..batch.len() {
                assert!((dqn[i] - via_beta0[i]).abs() <= 1e-12);
                assert!((ddqn[i] - via_beta1[i]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn zero_td_error_zero_gradient() {
        let mut rng = stream_rng(4, 0);
        let online = Mlp::new(&[4, 6, 2], &mut rng);
        let batch = random_batch(4, 2, 6, &mut rng);
        // targets equal to current predictions
        let targets: Vec<f64> = batch
            .iter()
            .map(|t| online.forward(&one_hot(t.s, 4))[t.a])
            .collect();
        let grad = grad_td_loss(&online, &batch, &targets);
        for layer in grad.layers() {
            assert!(layer.w.iter().all(|&g| g == 0.0));
            assert!(layer.b.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn single_linear_layer_gradient_is_analytic() {
        // loss = (q[a] - T)^2, q[a] = w[a] . x + b[a]
        // d/dw[a][i] = 2 (q[a] - T) x[i], zero elsewhere
        let mut net = Mlp::zeros(&[3, 2]);
        net.layers_mut()[0].w = vec![0.1, 0.2, 0.3, -0.1, 0.0, 0.4];
        let batch = vec![Transition { s: 1, a: 0, r: 0.0, s_next: 0, done: true }];
        let targets = vec![2.0];
        let q = net.forward(&one_hot(1, 3))[0];
        let grad = grad_td_loss(&net, &batch, &targets);
        let expected = 2.0 * (q - 2.0);
        assert_eq!(grad.layers()[0].w[1], expected); // row 0, input 1
        assert_eq!(grad.layers()[0].b[0], expected);
        assert_eq!(grad.layers()[0].w[3], 0.0); // untouched action row
        assert_eq!(grad.layers()[0].b[1], 0.0);
    }

    // Finite-difference oracle over every parameter.
    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = stream_rng(5, 0);
        let h = 1e-5;
        for _ in 0..5 {
            let online = Mlp::new(&[5, 7, 3], &mut rng);
            let batch = random_batch(5, 3, 4, &mut rng);
            let target = TargetParams::from_online(&online);
            let targets = td_targets(TargetRule::Dqn, &batch, &online, &target, 0.9);
            let grad = grad_td_loss(&online, &batch, &targets);
            let mut max_rel = 0.0f64;
            for li in 0..online.layers().len() {
                let n_w = online.layers()[li].w.len();
                for pi in 0..n_w + online.layers()[li].b.len() {
                    let mut plus = online.clone();
                    let mut minus = online.clone();
                    let (g, loss_p, loss_m);
                    if pi < n_w {
                        plus.layers_mut()[li].w[pi] += h;
                        minus.layers_mut()[li].w[pi] -= h;
                        g = grad.layers()[li].w[pi];
                    } else {
                        plus.layers_mut()[li].b[pi - n_w] += h;
                        minus.layers_mut()[li].b[pi - n_w] -= h;
                        g = grad.layers()[li].b[pi - n_w];
                    }
                    loss_p = td_loss(&plus, &batch, &targets);
                    loss_m = td_loss(&minus, &batch, &targets);
                    let num = (loss_p - loss_m) / (2.0 * h);
                    let rel = (num - g).abs() / (num.abs() + g.abs()).max(1e-8);
                    max_rel = max_rel.max(rel);
                }
            }
            assert!(max_rel < 1e-4, "max relative error {max_rel}");
        }
    }

    // Perturbing the target parameters changes targets but not the gradient
    // computed against fixed targets.
    #[test]
    fn no_gradient_flows_into_target_params() {
        let mut rng = stream_rng(6, 0);
        let online = Mlp::new(&[4, 6, 2], &mut rng);
        let mut target = TargetParams::from_online(&online);
        let batch = random_batch(4, 2, 8, &mut rng);
        let targets = td_targets(TargetRule::Dqn, &batch, &online, &target, 0.9);
        let grad_before = grad_td_loss(&online, &batch, &targets);
        let noise = Mlp::new(&[4, 6, 2], &mut rng);
        target.params_mut().scaled_add(&noise, 1.0);
        let perturbed_targets = td_targets(TargetRule::Dqn, &batch, &online, &target, 0.9);
        assert_ne!(targets, perturbed_targets, "perturbation must move the targets");
        let grad_after = grad_td_loss(&online, &batch, &targets);
        assert_eq!(grad_before, grad_after);
    }

    #[test]
    fn train_step_with_zero_learning_rate_is_identity() {
        let mut rng = stream_rng(7, 0);
        let online = Mlp::new(&[4, 6, 2], &mut rng);
        let mut state = TrainState::new(online.clone(), 64);
        for t in random_batch(4, 2, 32, &mut rng) {
            state.replay.push(t);
        }
        train_step(&mut state, TargetRule::Dqn, 16, 0.0, 100, 0.9, &mut rng).unwrap();
        assert_eq!(state.online, online);
    }

    #[test]
    fn train_step_sync_period_one_keeps_target_equal() {
        let mut rng = stream_rng(8, 0);
        let online = Mlp::new(&[4, 6, 2], &mut rng);
        let mut state = TrainState::new(online, 64);
        for t in random_batch(4, 2, 40, &mut rng) {
            state.replay.push(t);
        }
        for _ in 0..5 {
            train_step(
                &mut state,
                TargetRule::Scdqn { beta: 3.0 },
                16,
                0.01,
                1,
                0.9,
                &mut rng,
            )
            .unwrap();
            assert_eq!(state.target.params(), &state.online);
        }
    }

    #[test]
    fn train_step_replay_underfull_is_an_error() {
        let mut rng = stream_rng(9, 0);
        let online = Mlp::new(&[4, 6, 2], &mut rng);
        let mut state = TrainState::new(online, 64);
        assert!(matches!(
            train_step(&mut state, TargetRule::Dqn, 16, 0.01, 100, 0.9, &mut rng),
            Err(ScdqnError::ReplayUnderfull { .. })
        ));
    }

    #[test]
    fn rule_validation() {
        assert!(TargetRule::Scdqn { beta: 0.5 }.validate().is_err());
        assert!(TargetRule::Scdqn { beta: 3.0 }.validate().is_ok());
        assert!(TargetRule::Dqn.validate().is_ok());
        assert_eq!(TargetRule::Scdqn { beta: 3.0 }.label(), "scdqn_beta3");
    }
}

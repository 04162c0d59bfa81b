//! The three tabular learning algorithms: Q-learning, Double Q-learning, and
//! Self-correcting Q-learning, with the learning-rate and exploration
//! schedules used by the benchmark presets.
//!
//! Self-correcting Q-learning keeps, next to the live table `q`, a
//! previous-value table `q_prev`. For action selection at the next state it
//! combines the two as
//!
//! ```text
//! q_beta(s', a) = q(s', a) - beta * (q(s', a) - q_prev(s', a))
//! ```
//!
//! takes the argmax over `q_beta`, and evaluates the chosen action on `q`
//! itself. The gap `q - q_prev` is the correction direction; `beta >= 1`
//! scales how much of it is removed. With a zero gap the update is exactly
//! the Q-learning update.
//!
//! Two readings of "previous value" are provided. The default, `PerEntry`,
//! remembers for each `(s, a)` the value it held before its own most recent
//! update, so the gap reflects that entry's last move (the delayed-copy
//! flavor). `Snapshot` keeps the literal table of one global update step
//! ago, which differs from `q` in at most one entry.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::argmax::{argmax_tied, argmax_tied_by};
use crate::mdp::{ActionId, QTable, StateId, TabularMdp, Transition};
use crate::seeding::RunRng;

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("constant learning rate must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("scaled harmonic base rate must lie in (0, 1], got {0}")]
    InvalidAlpha0(f64),
    #[error("constant epsilon must lie in [0, 1], got {0}")]
    InvalidEpsilon(f64),
    #[error("beta must be finite and >= 1, got {0}")]
    InvalidBeta(f64),
}

/// Step-size schedule, queried with the post-increment visit count n(s,a).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearningRateSchedule {
    /// Fixed step size. Does not satisfy the summability condition for
    /// convergence, but matches the bias-example protocol.
    Constant { alpha: f64 },
    /// alpha = 1 / n(s,a).
    InverseCount,
    /// alpha = alpha0 * (c + 1) / (c + n(s,a)).
    ScaledHarmonic { alpha0: f64, c: u32 },
}

impl LearningRateSchedule {
    pub fn validate(&self) -> Result<(), AgentError> {
        match *self {
            LearningRateSchedule::Constant { alpha } => {
                if alpha > 0.0 && alpha <= 1.0 {
                    Ok(())
                } else {
                    Err(AgentError::InvalidAlpha(alpha))
                }
            }
            LearningRateSchedule::InverseCount => Ok(()),
            LearningRateSchedule::ScaledHarmonic { alpha0, .. } => {
                if alpha0 > 0.0 && alpha0 <= 1.0 {
                    Ok(())
                } else {
                    Err(AgentError::InvalidAlpha0(alpha0))
                }
            }
        }
    }

    /// Step size for the n-th update of an entry (n >= 1).
    pub fn alpha(&self, n_sa: u32) -> f64 {
        debug_assert!(n_sa >= 1);
        match *self {
            LearningRateSchedule::Constant { alpha } => alpha,
            LearningRateSchedule::InverseCount => 1.0 / n_sa as f64,
            LearningRateSchedule::ScaledHarmonic { alpha0, c } => {
                alpha0 * (c as f64 + 1.0) / (c as f64 + n_sa as f64)
            }
        }
    }
}

/// Exploration schedule, queried with the visit count n(s) which is
/// incremented on arrival, before action selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExplorationSchedule {
    ConstantEps { eps: f64 },
    /// eps = 1 / sqrt(n(s)).
    InverseSqrtVisits,
}

impl ExplorationSchedule {
    pub fn validate(&self) -> Result<(), AgentError> {
        match *self {
            ExplorationSchedule::ConstantEps { eps } => {
                if (0.0..=1.0).contains(&eps) {
                    Ok(())
                } else {
                    Err(AgentError::InvalidEpsilon(eps))
                }
            }
            ExplorationSchedule::InverseSqrtVisits => Ok(()),
        }
    }

    pub fn epsilon(&self, n_s: u32) -> f64 {
        match *self {
            ExplorationSchedule::ConstantEps { eps } => eps,
            ExplorationSchedule::InverseSqrtVisits => {
                debug_assert!(n_s >= 1);
                1.0 / (n_s as f64).sqrt()
            }
        }
    }
}

/// Which table the self-correcting gap compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrevMode {
    /// q_prev(s,a) is the value q(s,a) held before its own latest update.
    #[default]
    PerEntry,
    /// q_prev is the whole table as of one global update ago.
    Snapshot,
}

/// Algorithm-specific learning state.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentKind {
    QLearning {
        q: QTable,
    },
    DoubleQ {
        qa: QTable,
        qb: QTable,
        /// When set, both tables are updated on every transition (the
        /// grid-world protocol) instead of a fair coin picking one.
        update_both: bool,
    },
    Scq {
        q: QTable,
        q_prev: QTable,
        beta: f64,
        prev_mode: PrevMode,
        /// Entry written by the latest update; drives Snapshot bookkeeping.
        last_write: Option<(StateId, ActionId)>,
    },
}

/// One learning agent: algorithm state plus visit counters and schedules.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub kind: AgentKind,
    pub counts_sa: Vec<Vec<u32>>,
    pub counts_s: Vec<u32>,
    pub lr: LearningRateSchedule,
    pub explore: ExplorationSchedule,
    pub gamma: f64,
}

impl Agent {
    pub fn q_learning(
        mdp: &TabularMdp,
        lr: LearningRateSchedule,
        explore: ExplorationSchedule,
    ) -> Result<Self, AgentError> {
        Self::with_kind(mdp, lr, explore, AgentKind::QLearning { q: QTable::zeros(mdp) })
    }

    pub fn double_q(
        mdp: &TabularMdp,
        lr: LearningRateSchedule,
        explore: ExplorationSchedule,
        update_both: bool,
    ) -> Result<Self, AgentError> {
        Self::with_kind(
            mdp,
            lr,
            explore,
            AgentKind::DoubleQ { qa: QTable::zeros(mdp), qb: QTable::zeros(mdp), update_both },
        )
    }

    pub fn scq(
        mdp: &TabularMdp,
        lr: LearningRateSchedule,
        explore: ExplorationSchedule,
        beta: f64,
        prev_mode: PrevMode,
    ) -> Result<Self, AgentError> {
        if !(beta.is_finite() && beta >= 1.0) {
            return Err(AgentError::InvalidBeta(beta));
        }
        Self::with_kind(
            mdp,
            lr,
            explore,
            AgentKind::Scq {
                q: QTable::zeros(mdp),
                q_prev: QTable::zeros(mdp),
                beta,
                prev_mode,
                last_write: None,
            },
        )
    }

    fn with_kind(
        mdp: &TabularMdp,
        lr: LearningRateSchedule,
        explore: ExplorationSchedule,
        kind: AgentKind,
    ) -> Result<Self, AgentError> {
        lr.validate()?;
        explore.validate()?;
        Ok(Agent {
            kind,
            counts_sa: mdp.actions_per_state().iter().map(|&n| vec![0; n]).collect(),
            counts_s: vec![0; mdp.n_states()],
            lr,
            explore,
            gamma: mdp.gamma(),
        })
    }

    /// Records one arrival at `s`. Call before selecting the action there.
    pub fn note_visit(&mut self, s: StateId) {
        self.counts_s[s] += 1;
    }

    /// Value the behavior policy ranks actions by: `q` for Q-learning and
    /// SCQ, the twin average for Double Q.
    fn behavior_value(&self, s: StateId, a: ActionId) -> f64 {
        match &self.kind {
            AgentKind::QLearning { q } => q.get(s, a),
            AgentKind::DoubleQ { qa, qb, .. } => 0.5 * (qa.get(s, a) + qb.get(s, a)),
            AgentKind::Scq { q, .. } => q.get(s, a),
        }
    }

    /// Epsilon-greedy action at `s`, with the epsilon of the current visit
    /// count. Greedy ties break uniformly at random.
    pub fn select_action(&self, s: StateId, rng: &mut impl Rng) -> ActionId {
        let n_actions = self.counts_sa[s].len();
        let eps = self.explore.epsilon(self.counts_s[s]);
        if eps > 0.0 && rng.random::<f64>() < eps {
            rng.random_range(0..n_actions)
        } else {
            argmax_tied_by(n_actions, |a| self.behavior_value(s, a), rng)
        }
    }

    /// SCQ target lookup at `s_next`: biased-down combination for selection,
    /// live table for evaluation. Panics unless the agent is SCQ.
    pub fn scq_target(&self, s_next: StateId, tie_rng: &mut impl Rng) -> (ActionId, f64) {
        let AgentKind::Scq { q, q_prev, beta, .. } = &self.kind else {
            panic!("scq_target called on a non-SCQ agent");
        };
        let n_actions = q.row(s_next).len();
        let a_hat = argmax_tied_by(
            n_actions,
            |a| {
                let qv = q.get(s_next, a);
                qv - beta * (qv - q_prev.get(s_next, a))
            },
            tie_rng,
        );
        (a_hat, q.get(s_next, a_hat))
    }

    /// Applies the agent's update rule to one transition. Increments
    /// n(s,a) and draws the step size from the post-increment count.
    pub fn update(&mut self, t: &Transition, rng: &mut impl Rng) {
        self.counts_sa[t.s][t.a] += 1;
        let alpha = self.lr.alpha(self.counts_sa[t.s][t.a]);
        let gamma = self.gamma;

        if matches!(self.kind, AgentKind::Scq { .. }) {
            // target first (reads q and q_prev), bookkeeping second
            let target = if t.done {
                t.r
            } else {
                let (_, value) = self.scq_target(t.s_next, rng);
                t.r + gamma * value
            };
            let AgentKind::Scq { q, q_prev, prev_mode, last_write, .. } = &mut self.kind else {
                unreachable!()
            };
            match prev_mode {
                PrevMode::PerEntry => {
                    q_prev.set(t.s, t.a, q.get(t.s, t.a));
                }
                PrevMode::Snapshot => {
                    // q_prev lags the live table only at the previously
                    // written entry; patching that one entry makes it the
                    // exact pre-write snapshot
                    if let Some((ps, pa)) = *last_write {
                        q_prev.set(ps, pa, q.get(ps, pa));
                    }
                }
            }
            let old = q.get(t.s, t.a);
            q.set(t.s, t.a, old + alpha * (target - old));
            *last_write = Some((t.s, t.a));
            return;
        }

        match &mut self.kind {
            AgentKind::QLearning { q } => {
                let cont = if t.done { 0.0 } else { q.max_value(t.s_next) };
                let old = q.get(t.s, t.a);
                q.set(t.s, t.a, old + alpha * (t.r + gamma * cont - old));
            }
            AgentKind::DoubleQ { qa, qb, update_both } => {
                let do_a = *update_both || rng.random_bool(0.5);
                let do_b = *update_both || !do_a;
                if do_a {
                    let cont = if t.done {
                        0.0
                    } else {
                        qb.get(t.s_next, argmax_tied(qa.row(t.s_next), rng))
                    };
                    let old = qa.get(t.s, t.a);
                    qa.set(t.s, t.a, old + alpha * (t.r + gamma * cont - old));
                }
                if do_b {
                    let cont = if t.done {
                        0.0
                    } else {
                        qa.get(t.s_next, argmax_tied(qb.row(t.s_next), rng))
                    };
                    let old = qb.get(t.s, t.a);
                    qb.set(t.s, t.a, old + alpha * (t.r + gamma * cont - old));
                }
            }
            AgentKind::Scq { .. } => unreachable!("handled above"),
        }
    }

    /// The table the agent would be judged by: `q`, or the twin average.
    pub fn final_q_table(&self) -> QTable {
        match &self.kind {
            AgentKind::QLearning { q } => q.clone(),
            AgentKind::Scq { q, .. } => q.clone(),
            AgentKind::DoubleQ { qa, qb, .. } => {
                let mut avg = qa.clone();
                for s in 0..qa.n_states() {
                    for a in 0..qa.row(s).len() {
                        avg.set(s, a, 0.5 * (qa.get(s, a) + qb.get(s, a)));
                    }
                }
                avg
            }
        }
    }
}

/// Everything the harness needs about one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub transitions: Vec<Transition>,
    pub total_reward: f64,
}

impl EpisodeLog {
    pub fn steps(&self) -> usize {
        self.transitions.len()
    }

    pub fn first_action(&self) -> Option<ActionId> {
        self.transitions.first().map(|t| t.a)
    }
}

/// Runs one episode from the MDP's start state, selecting, stepping, and
/// updating until termination or `max_steps`.
pub fn run_episode(
    agent: &mut Agent,
    mdp: &TabularMdp,
    max_steps: usize,
    rng: &mut RunRng,
) -> EpisodeLog {
    let mut transitions = Vec::new();
    let mut total_reward = 0.0;
    let mut s = mdp.start_state();
    for _ in 0..max_steps {
        agent.note_visit(s);
        let a = agent.select_action(s, &mut rng.policy);
        let t = mdp.sample_step(s, a, &mut rng.env).expect("stepping from a live state");
        agent.update(&t, &mut rng.update);
        total_reward += t.r;
        s = t.s_next;
        transitions.push(t);
        if t.done {
            break;
        }
    }
    EpisodeLog { transitions, total_reward }
}

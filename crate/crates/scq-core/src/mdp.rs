//! Finite tabular MDPs, stochastic stepping, and a value-iteration oracle.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::argmax::argmax_tied;
use crate::estimators::DistributionSpec;

pub type StateId = usize;
pub type ActionId = usize;

const KERNEL_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MdpError {
    #[error("MDP needs at least one state")]
    NoStates,
    #[error("state {state} action {action}: kernel row sums to {sum}, expected 1")]
    KernelRowSum { state: StateId, action: ActionId, sum: f64 },
    #[error("state {state} action {action}: negative transition probability {prob}")]
    NegativeProbability { state: StateId, action: ActionId, prob: f64 },
    #[error("state {state} action {action}: next state {next} out of range")]
    NextStateOutOfRange { state: StateId, action: ActionId, next: StateId },
    #[error("state {state}: non-terminal states need at least one action")]
    NoActions { state: StateId },
    #[error("terminal state {state} must not define transitions")]
    TerminalWithTransitions { state: StateId },
    #[error("discount must lie in [0, 1); gamma = 1 is reserved for the bundled episodic environments")]
    InvalidGamma(f64),
    #[error("start state {0} out of range or terminal")]
    InvalidStart(StateId),
    #[error("invalid reward distribution: {0}")]
    InvalidReward(String),
    #[error("cannot step from terminal state {0}")]
    TerminalStep(StateId),
    #[error("action {action} invalid for state {state}")]
    InvalidAction { state: StateId, action: ActionId },
    #[error("value iteration did not reach residual {tol} within {iters} sweeps (last residual {residual})")]
    NoConvergence { tol: f64, iters: usize, residual: f64 },
}

/// One entry of the transition kernel: probability of landing in
/// `next_state` together with the reward distribution for that landing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub next_state: StateId,
    pub prob: f64,
    pub reward: DistributionSpec,
}

/// A finite MDP: per-(state, action) outcome rows, a terminal set, a
/// discount, and a start state. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    outcomes: Vec<Vec<Vec<Outcome>>>,
    terminal: Vec<bool>,
    gamma: f64,
    start_state: StateId,
    actions_per_state: Vec<usize>,
}

impl TabularMdp {
    /// General constructor. Rejects `gamma >= 1`; the bundled episodic
    /// environments with `gamma = 1` are built through their own
    /// constructors, which assert proper termination by construction.
    pub fn new(
        outcomes: Vec<Vec<Vec<Outcome>>>,
        terminal: Vec<bool>,
        gamma: f64,
        start_state: StateId,
    ) -> Result<Self, MdpError> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(MdpError::InvalidGamma(gamma));
        }
        Self::build(outcomes, terminal, gamma, start_state)
    }

    /// Constructor for the bundled gamma = 1 tasks (bias example, cliff
    /// walk), whose builders guarantee that every policy with positive
    /// exploration terminates with probability one.
    pub(crate) fn new_proper_episodic(
        outcomes: Vec<Vec<Vec<Outcome>>>,
        terminal: Vec<bool>,
        start_state: StateId,
    ) -> Result<Self, MdpError> {
        Self::build(outcomes, terminal, 1.0, start_state)
    }

    fn build(
        outcomes: Vec<Vec<Vec<Outcome>>>,
        terminal: Vec<bool>,
        gamma: f64,
        start_state: StateId,
    ) -> Result<Self, MdpError> {
        let n = outcomes.len();
        if n == 0 || terminal.len() != n {
            return Err(MdpError::NoStates);
        }
        if start_state >= n || terminal[start_state] {
            return Err(MdpError::InvalidStart(start_state));
        }
        for (s, rows) in outcomes.iter().enumerate() {
            if terminal[s] {
                if !rows.is_empty() {
                    return Err(MdpError::TerminalWithTransitions { state: s });
                }
                continue;
            }
            if rows.is_empty() {
                return Err(MdpError::NoActions { state: s });
            }
            for (a, row) in rows.iter().enumerate() {
                let mut sum = 0.0;
                for o in row {
                    if o.prob < 0.0 {
                        return Err(MdpError::NegativeProbability { state: s, action: a, prob: o.prob });
                    }
                    if o.next_state >= n {
                        return Err(MdpError::NextStateOutOfRange {
                            state: s,
                            action: a,
                            next: o.next_state,
                        });
                    }
                    o.reward
                        .validate()
                        .map_err(|e| MdpError::InvalidReward(e.to_string()))?;
                    sum += o.prob;
                }
                if (sum - 1.0).abs() > KERNEL_SUM_TOL {
                    return Err(MdpError::KernelRowSum { state: s, action: a, sum });
                }
            }
        }
        let actions_per_state = outcomes.iter().map(Vec::len).collect();
        Ok(TabularMdp { outcomes, terminal, gamma, start_state, actions_per_state })
    }

    pub fn n_states(&self) -> usize {
        self.outcomes.len()
    }

    pub fn n_actions(&self, s: StateId) -> usize {
        self.actions_per_state[s]
    }

    pub fn actions_per_state(&self) -> &[usize] {
        &self.actions_per_state
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn start_state(&self) -> StateId {
        self.start_state
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        self.terminal[s]
    }

    pub fn outcomes(&self, s: StateId, a: ActionId) -> &[Outcome] {
        &self.outcomes[s][a]
    }

    /// Expected immediate reward: `sum_s' P(s'|s,a) * E[reward(s,a,s')]`.
    pub fn expected_reward(&self, s: StateId, a: ActionId) -> f64 {
        self.outcomes[s][a]
            .iter()
            .map(|o| o.prob * o.reward.expected_value())
            .sum()
    }

    /// Samples one environment transition.
    pub fn sample_step(
        &self,
        s: StateId,
        a: ActionId,
        rng: &mut impl Rng,
    ) -> Result<Transition, MdpError> {
        if self.terminal[s] {
            return Err(MdpError::TerminalStep(s));
        }
        if a >= self.n_actions(s) {
            return Err(MdpError::InvalidAction { state: s, action: a });
        }
        let row = &self.outcomes[s][a];
        let outcome = if row.len() == 1 {
            &row[0]
        } else {
            let u: f64 = rng.random();
            let mut cum = 0.0;
            let mut chosen = &row[row.len() - 1];
            for o in row {
                cum += o.prob;
                if u < cum {
                    chosen = o;
                    break;
                }
            }
            chosen
        };
        let r = outcome.reward.sample(rng);
        Ok(Transition {
            s,
            a,
            r,
            s_next: outcome.next_state,
            done: self.terminal[outcome.next_state],
        })
    }
}

/// One environment step: `(s, a, r, s', done)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: StateId,
    pub a: ActionId,
    pub r: f64,
    pub s_next: StateId,
    pub done: bool,
}

/// Dense state x action value table shaped after one MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    values: Vec<Vec<f64>>,
}

impl QTable {
    pub fn zeros(mdp: &TabularMdp) -> Self {
        QTable {
            values: mdp.actions_per_state().iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.values.len()
    }

    pub fn matches(&self, mdp: &TabularMdp) -> bool {
        self.values.len() == mdp.n_states()
            && self
                .values
                .iter()
                .zip(mdp.actions_per_state())
                .all(|(row, &n)| row.len() == n)
    }

    pub fn get(&self, s: StateId, a: ActionId) -> f64 {
        self.values[s][a]
    }

    pub fn set(&mut self, s: StateId, a: ActionId, v: f64) {
        self.values[s][a] = v;
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        &self.values[s]
    }

    /// `max_a Q(s, a)`; panics on action-less (terminal) states.
    pub fn max_value(&self, s: StateId) -> f64 {
        self.values[s]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Max-norm distance to another table of the same shape.
    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// One Bellman optimality backup of `q`. Terminal states contribute zero
/// continuation value.
pub fn bellman_backup(mdp: &TabularMdp, q: &QTable) -> QTable {
    let mut out = QTable::zeros(mdp);
    for s in 0..mdp.n_states() {
        if mdp.is_terminal(s) {
            continue;
        }
        for a in 0..mdp.n_actions(s) {
            let mut v = 0.0;
            for o in mdp.outcomes(s, a) {
                let cont = if mdp.is_terminal(o.next_state) {
                    0.0
                } else {
                    q.max_value(o.next_state)
                };
                v += o.prob * (o.reward.expected_value() + mdp.gamma() * cont);
            }
            out.set(s, a, v);
        }
    }
    out
}

/// Max-norm violation of the Bellman optimality equations by `q`.
pub fn bellman_residual(mdp: &TabularMdp, q: &QTable) -> f64 {
    bellman_backup(mdp, q).max_abs_diff(q)
}

/// Iterates Bellman backups from zero until the residual of the returned
/// table is at most `tol`.
pub fn value_iteration(mdp: &TabularMdp, tol: f64, max_iters: usize) -> Result<QTable, MdpError> {
    assert!(tol > 0.0, "tolerance must be positive");
    let mut q = QTable::zeros(mdp);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        let tq = bellman_backup(mdp, &q);
        residual = tq.max_abs_diff(&q);
        if residual <= tol {
            return Ok(q);
        }
        q = tq;
    }
    Err(MdpError::NoConvergence { tol, iters: max_iters, residual })
}

/// Uniformly random element of `argmax_a q(s, a)`.
pub fn greedy_action(q: &QTable, s: StateId, tie_rng: &mut impl Rng) -> ActionId {
    argmax_tied(q.row(s), tie_rng)
}

/// Random episodic MDP: `n_decision` non-terminal states, `n_actions` each,
/// every (s, a) mixing over all decision states plus a shared terminal state
/// with substantial termination mass, Gaussian rewards with means in (-1, 1).
/// Useful as a convergence-testing family: every policy terminates, so value
/// iteration and long-run learning are both well behaved.
pub fn random_episodic_mdp(
    n_decision: usize,
    n_actions: usize,
    gamma: f64,
    rng: &mut impl Rng,
) -> TabularMdp {
    assert!(n_decision >= 1 && n_actions >= 1);
    let terminal_id = n_decision;
    let mut outcomes = Vec::with_capacity(n_decision + 1);
    for _ in 0..n_decision {
        let mut rows = Vec::with_capacity(n_actions);
        for _ in 0..n_actions {
            let mut weights: Vec<f64> = (0..n_decision).map(|_| rng.random::<f64>()).collect();
            // termination weight dominates enough to keep horizons short
            weights.push(1.0 + 2.0 * rng.random::<f64>());
            let total: f64 = weights.iter().sum();
            let reward = DistributionSpec::Gaussian {
                mean: 2.0 * rng.random::<f64>() - 1.0,
                std: 0.25,
            };
            let mut row: Vec<Outcome> = weights
                .iter()
                .enumerate()
                .map(|(i, &w)| Outcome {
                    next_state: if i == n_decision { terminal_id } else { i },
                    prob: w / total,
                    reward,
                })
                .collect();
            // pin the row sum to exactly 1 within validation tolerance
            let partial: f64 = row.iter().take(n_decision).map(|o| o.prob).sum();
            row[n_decision].prob = 1.0 - partial;
            rows.push(row);
        }
        outcomes.push(rows);
    }
    outcomes.push(Vec::new());
    let mut terminal = vec![false; n_decision + 1];
    terminal[terminal_id] = true;
    TabularMdp::new(outcomes, terminal, gamma, 0).expect("generated MDP is valid")
}

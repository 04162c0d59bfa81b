//! Metric computations over episode logs.

use crate::mdp::{QTable, StateId};
use std::collections::VecDeque;

use super::ExperimentError;

/// Centered moving average with shrinking windows at the edges.
/// `window = 0` (or 1) is the identity.
pub fn smooth(series: &[f64], window: usize) -> Vec<f64> {
    debug_assert!(window <= series.len().max(1));
    if window <= 1 {
        return series.to_vec();
    }
    let half = (window - 1) / 2;
    let n = series.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let slice = &series[lo..=hi];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

/// Running window over the most recent `cap` step rewards, spanning episode
/// boundaries.
#[derive(Debug, Clone)]
pub struct TrailingWindow {
    cap: usize,
    buf: VecDeque<f64>,
    sum: f64,
}

impl TrailingWindow {
    pub fn new(cap: usize) -> Self {
        assert!(cap >= 1, "window must be positive");
        TrailingWindow { cap, buf: VecDeque::with_capacity(cap), sum: 0.0 }
    }

    pub fn push(&mut self, r: f64) {
        if self.buf.len() == self.cap {
            self.sum -= self.buf.pop_front().unwrap();
        }
        self.buf.push_back(r);
        self.sum += r;
    }

    pub fn is_full(&self) -> bool {
        self.buf.len() == self.cap
    }

    /// Average over the available steps (fewer than `cap` early on).
    pub fn average(&self) -> f64 {
        if self.buf.is_empty() {
            0.0
        } else {
            self.sum / self.buf.len() as f64
        }
    }
}

/// Per-episode trailing average reward per step, plus how many leading
/// episodes ended before the window was full.
#[derive(Debug, Clone, PartialEq)]
pub struct AvgRewardSeries {
    pub values: Vec<f64>,
    pub partial_episodes: usize,
}

/// Trailing `window`-step reward average sampled at each episode boundary.
pub fn metric_avg_reward_per_step(
    step_rewards_per_episode: &[Vec<f64>],
    window: usize,
) -> AvgRewardSeries {
    let mut tw = TrailingWindow::new(window);
    let mut values = Vec::with_capacity(step_rewards_per_episode.len());
    let mut partial_episodes = 0;
    for episode in step_rewards_per_episode {
        for &r in episode {
            tw.push(r);
        }
        if !tw.is_full() {
            partial_episodes += 1;
        }
        values.push(tw.average());
    }
    AvgRewardSeries { values, partial_episodes }
}

/// Percentage of runs whose first action in each episode was `left_action`.
/// `first_actions[run][episode]` is None when the episode had no steps.
pub fn metric_percent_left(
    first_actions: &[Vec<Option<usize>>],
    left_action: usize,
) -> Result<Vec<f64>, ExperimentError> {
    if first_actions.is_empty() {
        return Err(ExperimentError::EmptySeries);
    }
    let episodes = first_actions[0].len();
    if first_actions.iter().any(|run| run.len() != episodes) {
        return Err(ExperimentError::SeriesLengthMismatch);
    }
    let runs = first_actions.len() as f64;
    Ok((0..episodes)
        .map(|ep| {
            let lefts = first_actions
                .iter()
                .filter(|run| run[ep] == Some(left_action))
                .count();
            100.0 * lefts as f64 / runs
        })
        .collect())
}

/// `max_a Q(start, a) - max_a Q*(start, a)`.
pub fn metric_start_state_bias(q: &QTable, q_star: &QTable, start: StateId) -> f64 {
    q.max_value(start) - q_star.max_value(start)
}

/// Final-episode total reward of the agent minus the random baseline's.
pub fn metric_relative_total_reward(
    agent_returns: &[f64],
    baseline_returns: &[f64],
) -> Result<f64, ExperimentError> {
    if agent_returns.is_empty() || baseline_returns.is_empty() {
        return Err(ExperimentError::MissingBaseline);
    }
    if agent_returns.len() != baseline_returns.len() {
        return Err(ExperimentError::SeriesLengthMismatch);
    }
    Ok(agent_returns.last().unwrap() - baseline_returns.last().unwrap())
}

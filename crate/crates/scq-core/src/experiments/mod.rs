//! Declarative experiment configs, the seeded multi-run executor, and
//! cross-run aggregation.
//!
//! Determinism contract: for a fixed config the aggregate result (and the
//! files written from it) is bit-identical regardless of thread count. Each
//! (run, agent) pair owns disjoint ChaCha streams derived from the master
//! seed, runs are reduced strictly in run order, and floats are never
//! accumulated in a thread-dependent order.

pub mod metrics;
mod output;

pub use output::write_outputs;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    Agent, AgentError, EpisodeLog, ExplorationSchedule, LearningRateSchedule, PrevMode,
};
use crate::envs;
use crate::mdp::{value_iteration, MdpError, QTable, TabularMdp};
use crate::seeding::RunRng;

use metrics::TrailingWindow;

pub const SCHEMA_VERSION: u32 = 1;
const VI_TOLERANCE: f64 = 1e-10;
const VI_MAX_SWEEPS: usize = 1_000_000;
/// Runs are materialized in bounded batches so aggregation stays in run
/// order (deterministic) without holding every run's series in memory.
const RUN_BATCH: usize = 32;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("config schema version {found} unsupported (expected {expected})")]
    UnsupportedSchemaVersion { found: u32, expected: u32 },
    #[error("metric {metric} cannot be computed on environment {env}")]
    MetricEnvMismatch { metric: String, env: String },
    #[error("baseline series missing or empty")]
    MissingBaseline,
    #[error("series lengths differ")]
    SeriesLengthMismatch,
    #[error("empty series")]
    EmptySeries,
    #[error(transparent)]
    Env(#[from] MdpError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// Worker count: explicit, or one worker per available CPU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ThreadCountRepr", into = "ThreadCountRepr")]
pub enum ThreadCount {
    Auto,
    Fixed(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ThreadCountRepr {
    Num(usize),
    Word(String),
}

impl TryFrom<ThreadCountRepr> for ThreadCount {
    type Error = String;

    fn try_from(repr: ThreadCountRepr) -> Result<Self, String> {
        match repr {
            ThreadCountRepr::Num(0) => Err("thread count must be positive".into()),
            ThreadCountRepr::Num(n) => Ok(ThreadCount::Fixed(n)),
            ThreadCountRepr::Word(w) if w == "auto" => Ok(ThreadCount::Auto),
            ThreadCountRepr::Word(w) => Err(format!("expected \"auto\" or a number, got {w:?}")),
        }
    }
}

impl From<ThreadCount> for ThreadCountRepr {
    fn from(tc: ThreadCount) -> Self {
        match tc {
            ThreadCount::Auto => ThreadCountRepr::Word("auto".into()),
            ThreadCount::Fixed(n) => ThreadCountRepr::Num(n),
        }
    }
}

/// Builds a rayon pool honouring the configured worker count.
pub fn build_pool(threads: ThreadCount) -> rayon::ThreadPool {
    let n = match threads {
        ThreadCount::Auto => 0, // rayon: default to available parallelism
        ThreadCount::Fixed(n) => n,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .expect("thread pool construction")
}

/// Which bundled environment to run, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    BiasExample { k_b_actions: usize },
    GridWorld { n: usize, reward_lo: f64, reward_hi: f64, gamma: f64 },
    CliffWalk { height: usize, width: usize },
}

impl EnvSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        match *self {
            EnvSpec::BiasExample { k_b_actions } if k_b_actions == 0 => {
                Err(ExperimentError::InvalidConfig("bias example needs k_b_actions >= 1".into()))
            }
            EnvSpec::GridWorld { n, reward_lo, reward_hi, gamma } => {
                if n < 2 {
                    Err(ExperimentError::InvalidConfig("grid world needs n >= 2".into()))
                } else if reward_lo > reward_hi {
                    Err(ExperimentError::InvalidConfig(format!(
                        "grid reward interval inverted: ({reward_lo}, {reward_hi})"
                    )))
                } else if !(0.0..1.0).contains(&gamma) {
                    Err(ExperimentError::InvalidConfig(format!(
                        "grid world gamma must lie in [0, 1), got {gamma}"
                    )))
                } else {
                    Ok(())
                }
            }
            EnvSpec::CliffWalk { height, width } if height < 2 || width < 3 => {
                Err(ExperimentError::InvalidConfig("cliff walk needs height >= 2, width >= 3".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self) -> Result<TabularMdp, ExperimentError> {
        self.validate()?;
        Ok(match *self {
            EnvSpec::BiasExample { k_b_actions } => envs::make_bias_example(k_b_actions),
            EnvSpec::GridWorld { n, reward_lo, reward_hi, gamma } => {
                envs::make_grid_world(n, reward_lo, reward_hi, gamma)?
            }
            EnvSpec::CliffWalk { height, width } => envs::make_cliff_walk(height, width),
        })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            EnvSpec::BiasExample { .. } => "bias_example",
            EnvSpec::GridWorld { .. } => "grid_world",
            EnvSpec::CliffWalk { .. } => "cliff_walk",
        }
    }
}

/// Algorithm choice plus its algorithm-specific knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "snake_case")]
pub enum AgentAlgoSpec {
    QLearning,
    DoubleQ {
        #[serde(default)]
        update_both: bool,
    },
    Scq {
        beta: f64,
        #[serde(default)]
        prev_mode: PrevMode,
    },
}

/// One agent entry of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    #[serde(flatten)]
    pub algo: AgentAlgoSpec,
    /// Output directory name; derived from the algorithm when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub lr: LearningRateSchedule,
    pub explore: ExplorationSchedule,
}

impl AgentSpec {
    pub fn resolved_label(&self) -> String {
        if let Some(label) = &self.label {
            return label.clone();
        }
        match &self.algo {
            AgentAlgoSpec::QLearning => "q_learning".into(),
            AgentAlgoSpec::DoubleQ { .. } => "double_q".into(),
            AgentAlgoSpec::Scq { beta, .. } => format!("scq_beta{beta}"),
        }
    }

    pub fn build(&self, mdp: &TabularMdp) -> Result<Agent, AgentError> {
        match self.algo {
            AgentAlgoSpec::QLearning => Agent::q_learning(mdp, self.lr, self.explore),
            AgentAlgoSpec::DoubleQ { update_both } => {
                Agent::double_q(mdp, self.lr, self.explore, update_both)
            }
            AgentAlgoSpec::Scq { beta, prev_mode } => {
                Agent::scq(mdp, self.lr, self.explore, beta, prev_mode)
            }
        }
    }
}

/// Metric selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricKind {
    /// Total reward per episode.
    EpisodeReturn,
    /// Bias example only: percent of runs opening the episode with `left`.
    PercentLeft,
    /// Trailing `window`-step average reward, sampled per episode.
    AvgRewardPerStep { window: usize },
    /// Final `max_a Q(start, a)` minus the value-iteration optimum.
    StartStateBias,
    /// Final-episode return minus the uniform-random baseline's.
    RelativeTotalReward,
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::EpisodeReturn => "episode_return",
            MetricKind::PercentLeft => "percent_left",
            MetricKind::AvgRewardPerStep { .. } => "avg_reward_per_step",
            MetricKind::StartStateBias => "start_state_bias",
            MetricKind::RelativeTotalReward => "relative_total_reward",
        }
    }
}

fn default_max_steps() -> u32 {
    10_000
}

/// Declarative description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub env: EnvSpec,
    pub agents: Vec<AgentSpec>,
    pub n_runs: u32,
    pub n_episodes: u32,
    pub master_seed: u64,
    pub metrics: Vec<MetricKind>,
    pub smoothing_window: usize,
    pub threads: ThreadCount,
    /// Per-episode step cap; hitting it is counted in the summary.
    #[serde(default = "default_max_steps")]
    pub max_steps_per_episode: u32,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ExperimentError::UnsupportedSchemaVersion {
                found: self.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(ExperimentError::InvalidConfig(
                "experiment name must be a non-empty path component".into(),
            ));
        }
        self.env.validate()?;
        if self.agents.is_empty() {
            return Err(ExperimentError::InvalidConfig("at least one agent required".into()));
        }
        if self.n_runs == 0 {
            return Err(ExperimentError::InvalidConfig("n_runs must be >= 1".into()));
        }
        if self.n_episodes == 0 {
            return Err(ExperimentError::InvalidConfig("n_episodes must be >= 1".into()));
        }
        if self.smoothing_window > self.n_episodes as usize {
            return Err(ExperimentError::InvalidConfig(
                "smoothing_window cannot exceed n_episodes".into(),
            ));
        }
        let mut labels = std::collections::HashSet::new();
        for spec in &self.agents {
            let label = spec.resolved_label();
            if label.is_empty() || label.contains(['/', '\\']) {
                return Err(ExperimentError::InvalidConfig(format!(
                    "agent label {label:?} must be a non-empty path component"
                )));
            }
            if !labels.insert(label.clone()) {
                return Err(ExperimentError::InvalidConfig(format!(
                    "duplicate agent label {label:?}"
                )));
            }
            spec.lr.validate()?;
            spec.explore.validate()?;
            if let AgentAlgoSpec::Scq { beta, .. } = spec.algo {
                if !(beta.is_finite() && beta >= 1.0) {
                    return Err(ExperimentError::Agent(AgentError::InvalidBeta(beta)));
                }
            }
        }
        for metric in &self.metrics {
            match metric {
                MetricKind::PercentLeft => {
                    if !matches!(self.env, EnvSpec::BiasExample { .. }) {
                        return Err(ExperimentError::MetricEnvMismatch {
                            metric: metric.name().into(),
                            env: self.env.kind_name().into(),
                        });
                    }
                }
                MetricKind::AvgRewardPerStep { window } => {
                    if *window == 0 {
                        return Err(ExperimentError::InvalidConfig(
                            "avg_reward_per_step window must be >= 1".into(),
                        ));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn wants(&self, want: fn(&MetricKind) -> bool) -> bool {
        self.metrics.iter().any(want)
    }
}

/// Per-episode statistics across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub sem: Vec<f64>,
}

/// Aggregated output for one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentAggregate {
    pub label: String,
    pub series: BTreeMap<String, SeriesStats>,
    pub summary: BTreeMap<String, f64>,
}

/// Aggregated output of a whole experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub config: ExperimentConfig,
    pub agents: Vec<AgentAggregate>,
    /// Uniform-random rollouts, present when a metric needs them.
    pub baseline: Option<AgentAggregate>,
}

// ---------------------------------------------------------------------------
// execution

/// Everything one run produces for one agent.
struct AgentRunOut {
    returns: Vec<f64>,
    first_left: Option<Vec<f64>>,
    avg_reward: Option<Vec<f64>>,
    partial_episodes: usize,
    bias: Option<f64>,
    cap_hits: u32,
}

struct RunOut {
    agents: Vec<AgentRunOut>,
    baseline_returns: Option<Vec<f64>>,
}

fn execute_run(cfg: &ExperimentConfig, mdp: &TabularMdp, q_star: Option<&QTable>, run: u32) -> RunOut {
    let n_episodes = cfg.n_episodes as usize;
    let max_steps = cfg.max_steps_per_episode as usize;
    let want_left = cfg.wants(|m| matches!(m, MetricKind::PercentLeft));
    let avg_window = cfg.metrics.iter().find_map(|m| match m {
        MetricKind::AvgRewardPerStep { window } => Some(*window),
        _ => None,
    });
    let want_bias = cfg.wants(|m| matches!(m, MetricKind::StartStateBias));
    let want_baseline = cfg.wants(|m| matches!(m, MetricKind::RelativeTotalReward));

    let mut agents_out = Vec::with_capacity(cfg.agents.len());
    for (agent_idx, spec) in cfg.agents.iter().enumerate() {
        let mut rng = RunRng::new(cfg.master_seed, run, agent_idx as u32);
        let mut agent = spec.build(mdp).expect("validated agent spec");
        let mut returns = Vec::with_capacity(n_episodes);
        let mut first_left = want_left.then(|| Vec::with_capacity(n_episodes));
        let mut avg_reward = avg_window.map(|_| Vec::with_capacity(n_episodes));
        let mut window = avg_window.map(TrailingWindow::new);
        let mut partial_episodes = 0usize;
        let mut cap_hits = 0u32;

        for _ in 0..n_episodes {
            let log: EpisodeLog = crate::agents::run_episode(&mut agent, mdp, max_steps, &mut rng);
            returns.push(log.total_reward);
            if let Some(lefts) = &mut first_left {
                let left = log.first_action() == Some(envs::BIAS_ACTION_LEFT);
                lefts.push(if left { 100.0 } else { 0.0 });
            }
            if let (Some(values), Some(tw)) = (&mut avg_reward, &mut window) {
                for t in &log.transitions {
                    tw.push(t.r);
                }
                if !tw.is_full() {
                    partial_episodes += 1;
                }
                values.push(tw.average());
            }
            if log.steps() == max_steps && !log.transitions.last().map(|t| t.done).unwrap_or(false) {
                cap_hits += 1;
            }
        }

        let bias = if want_bias {
            let q_star = q_star.expect("oracle computed when the bias metric is requested");
            Some(metrics::metric_start_state_bias(
                &agent.final_q_table(),
                q_star,
                mdp.start_state(),
            ))
        } else {
            None
        };

        agents_out.push(AgentRunOut {
            returns,
            first_left,
            avg_reward,
            partial_episodes,
            bias,
            cap_hits,
        });
    }

    let baseline_returns = want_baseline.then(|| {
        let mut rng = RunRng::new(cfg.master_seed, run, cfg.agents.len() as u32);
        let mut returns = Vec::with_capacity(n_episodes);
        for _ in 0..n_episodes {
            let mut total = 0.0;
            let mut s = mdp.start_state();
            for _ in 0..max_steps {
                let a = rng.policy.random_range(0..mdp.n_actions(s));
                let t = mdp.sample_step(s, a, &mut rng.env).expect("live state");
                total += t.r;
                s = t.s_next;
                if t.done {
                    break;
                }
            }
            returns.push(total);
        }
        returns
    });

    RunOut { agents: agents_out, baseline_returns }
}

use rand::Rng as _;

// ---------------------------------------------------------------------------
// aggregation

struct SeriesAccum {
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    min: Vec<f64>,
    max: Vec<f64>,
}

impl SeriesAccum {
    fn new(len: usize) -> Self {
        SeriesAccum {
            sum: vec![0.0; len],
            sumsq: vec![0.0; len],
            min: vec![f64::INFINITY; len],
            max: vec![f64::NEG_INFINITY; len],
        }
    }

    fn push(&mut self, series: &[f64]) {
        for (i, &v) in series.iter().enumerate() {
            self.sum[i] += v;
            self.sumsq[i] += v * v;
            self.min[i] = self.min[i].min(v);
            self.max[i] = self.max[i].max(v);
        }
    }

    fn finish(self, n_runs: u64) -> SeriesStats {
        let n = n_runs as f64;
        let mean: Vec<f64> = self.sum.iter().map(|s| s / n).collect();
        let sem = self
            .sumsq
            .iter()
            .zip(&self.sum)
            .map(|(&sq, &s)| sem_from_sums(s, sq, n_runs))
            .collect();
        SeriesStats { mean, min: self.min, max: self.max, sem }
    }
}

/// Standard error of the mean from raw sums; 0 for a single run.
fn sem_from_sums(sum: f64, sumsq: f64, n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let var = ((sumsq - sum * sum / nf) / (nf - 1.0)).max(0.0);
    (var / nf).sqrt()
}

struct ScalarAccum {
    n: u64,
    sum: f64,
    sumsq: f64,
}

impl ScalarAccum {
    fn new() -> Self {
        ScalarAccum { n: 0, sum: 0.0, sumsq: 0.0 }
    }

    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sumsq += v * v;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn sem(&self) -> f64 {
        sem_from_sums(self.sum, self.sumsq, self.n)
    }
}

struct AgentAccum {
    returns: SeriesAccum,
    first_left: Option<SeriesAccum>,
    avg_reward: Option<SeriesAccum>,
    partial_episodes_max: usize,
    bias: ScalarAccum,
    cap_hits: u64,
}

/// Runs the whole experiment on the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<AggregateResult, ExperimentError> {
    cfg.validate()?;
    let mdp = cfg.env.build()?;
    let q_star = if cfg.wants(|m| matches!(m, MetricKind::StartStateBias)) {
        Some(value_iteration(&mdp, VI_TOLERANCE, VI_MAX_SWEEPS)?)
    } else {
        None
    };

    let n_episodes = cfg.n_episodes as usize;
    let mut accums: Vec<AgentAccum> = cfg
        .agents
        .iter()
        .map(|_| AgentAccum {
            returns: SeriesAccum::new(n_episodes),
            first_left: cfg
                .wants(|m| matches!(m, MetricKind::PercentLeft))
                .then(|| SeriesAccum::new(n_episodes)),
            avg_reward: cfg
                .wants(|m| matches!(m, MetricKind::AvgRewardPerStep { .. }))
                .then(|| SeriesAccum::new(n_episodes)),
            partial_episodes_max: 0,
            bias: ScalarAccum::new(),
            cap_hits: 0,
        })
        .collect();
    let mut baseline_accum = cfg
        .wants(|m| matches!(m, MetricKind::RelativeTotalReward))
        .then(|| SeriesAccum::new(n_episodes));

    // batched parallel execution, strictly ordered reduction
    let mut run_start = 0u32;
    while run_start < cfg.n_runs {
        let run_end = (run_start + RUN_BATCH as u32).min(cfg.n_runs);
        let batch: Vec<RunOut> = (run_start..run_end)
            .into_par_iter()
            .map(|run| execute_run(cfg, &mdp, q_star.as_ref(), run))
            .collect();
        for run_out in &batch {
            for (accum, agent_out) in accums.iter_mut().zip(&run_out.agents) {
                accum.returns.push(&agent_out.returns);
                if let (Some(acc), Some(series)) = (&mut accum.first_left, &agent_out.first_left) {
                    acc.push(series);
                }
                if let (Some(acc), Some(series)) = (&mut accum.avg_reward, &agent_out.avg_reward) {
                    acc.push(series);
                }
                accum.partial_episodes_max =
                    accum.partial_episodes_max.max(agent_out.partial_episodes);
                if let Some(b) = agent_out.bias {
                    accum.bias.push(b);
                }
                accum.cap_hits += agent_out.cap_hits as u64;
            }
            if let (Some(acc), Some(series)) = (&mut baseline_accum, &run_out.baseline_returns) {
                acc.push(series);
            }
        }
        run_start = run_end;
    }

    let n_runs = cfg.n_runs as u64;
    let baseline_stats = baseline_accum.map(|acc| acc.finish(n_runs));

    let mut agents = Vec::with_capacity(cfg.agents.len());
    for (spec, accum) in cfg.agents.iter().zip(accums) {
        let mut series = BTreeMap::new();
        let mut summary = BTreeMap::new();

        let returns = accum.returns.finish(n_runs);
        push_series_summaries(&mut summary, "episode_return", &returns);
        if cfg.wants(|m| matches!(m, MetricKind::EpisodeReturn)) {
            series.insert("episode_return".to_string(), returns.clone());
        }
        if let Some(acc) = accum.first_left {
            let stats = acc.finish(n_runs);
            push_series_summaries(&mut summary, "percent_left", &stats);
            series.insert("percent_left".to_string(), stats);
        }
        if let Some(acc) = accum.avg_reward {
            let stats = acc.finish(n_runs);
            push_series_summaries(&mut summary, "avg_reward_per_step", &stats);
            summary.insert(
                "avg_reward_partial_window_episodes".to_string(),
                accum.partial_episodes_max as f64,
            );
            series.insert("avg_reward_per_step".to_string(), stats);
        }
        if accum.bias.n > 0 {
            summary.insert("start_state_bias".to_string(), accum.bias.mean());
            summary.insert("start_state_bias_sem".to_string(), accum.bias.sem());
        }
        if let Some(base) = &baseline_stats {
            let rel = metrics::metric_relative_total_reward(&returns.mean, &base.mean)?;
            summary.insert("relative_total_reward".to_string(), rel);
            let sem = (returns.sem.last().unwrap().powi(2) + base.sem.last().unwrap().powi(2)).sqrt();
            summary.insert("relative_total_reward_sem".to_string(), sem);
        }
        summary.insert("step_cap_hits".to_string(), accum.cap_hits as f64);

        agents.push(AgentAggregate { label: spec.resolved_label(), series, summary });
    }

    let baseline = baseline_stats.map(|stats| {
        let mut series = BTreeMap::new();
        let mut summary = BTreeMap::new();
        push_series_summaries(&mut summary, "episode_return", &stats);
        series.insert("episode_return".to_string(), stats);
        AgentAggregate { label: "random_baseline".to_string(), series, summary }
    });

    Ok(AggregateResult { config: cfg.clone(), agents, baseline })
}

fn push_series_summaries(summary: &mut BTreeMap<String, f64>, name: &str, stats: &SeriesStats) {
    let last = *stats.mean.last().unwrap();
    summary.insert(format!("final_{name}"), last);
    summary.insert(format!("final_{name}_sem"), *stats.sem.last().unwrap());
    let tail = stats.mean.len().saturating_sub(5);
    let last5 = &stats.mean[tail..];
    summary.insert(
        format!("last5_{name}"),
        last5.iter().sum::<f64>() / last5.len() as f64,
    );
}

//! Bundled experiment presets: the benchmark settings behind the shipped
//! CLI names, fully resolved so a preset run is reproducible end to end.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::{ExplorationSchedule, LearningRateSchedule, PrevMode};
use crate::estimators::{estimate_bias, BiasReport, DistributionSpec, EstimatorError};
use crate::experiments::{
    AgentAlgoSpec, AgentSpec, EnvSpec, ExperimentConfig, MetricKind, ThreadCount, SCHEMA_VERSION,
};
use crate::scdqn::{ScdqnToyConfig, TargetRule};

/// Master seed used by every bundled preset unless overridden.
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig1,
    Fig2High,
    Fig2Med,
    Fig2Low,
    Fig3Ten,
    Fig3Twenty,
    BetaSweep,
    EstimatorBias,
    ScdqnToy,
}

impl Preset {
    pub const ALL: [Preset; 9] = [
        Preset::Fig1,
        Preset::Fig2High,
        Preset::Fig2Med,
        Preset::Fig2Low,
        Preset::Fig3Ten,
        Preset::Fig3Twenty,
        Preset::BetaSweep,
        Preset::EstimatorBias,
        Preset::ScdqnToy,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2High => "fig2-high",
            Preset::Fig2Med => "fig2-med",
            Preset::Fig2Low => "fig2-low",
            Preset::Fig3Ten => "fig3-10",
            Preset::Fig3Twenty => "fig3-20",
            Preset::BetaSweep => "beta-sweep",
            Preset::EstimatorBias => "estimator-bias",
            Preset::ScdqnToy => "scdqn-toy",
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL
            .iter()
            .find(|p| p.name() == s)
            .copied()
            .ok_or_else(|| {
                let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
                format!("unknown preset {s:?}; known presets: {}", names.join(", "))
            })
    }
}

/// Monte-Carlo estimator-bias demo settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorBiasConfig {
    pub schema_version: u32,
    pub name: String,
    /// Number of variables, all Gaussian(mean, std).
    pub m: usize,
    pub mean: f64,
    pub std: f64,
    pub taus: Vec<f64>,
    pub samples_per_set: u32,
    pub n_trials: u64,
    pub seed: u64,
}

impl EstimatorBiasConfig {
    /// One report per configured tau.
    pub fn run(&self) -> Result<Vec<BiasReport>, EstimatorError> {
        let dists = vec![DistributionSpec::Gaussian { mean: self.mean, std: self.std }; self.m];
        self.taus
            .iter()
            .map(|&tau| estimate_bias(&dists, tau, self.samples_per_set, self.n_trials, self.seed))
            .collect()
    }
}

/// A materialized preset, ready to execute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "config", rename_all = "snake_case")]
pub enum PresetSpec {
    Experiments(Vec<ExperimentConfig>),
    EstimatorBias(EstimatorBiasConfig),
    ScdqnToy(ScdqnToyConfig),
}

fn agent(algo: AgentAlgoSpec, label: &str, lr: LearningRateSchedule, explore: ExplorationSchedule) -> AgentSpec {
    AgentSpec { algo, label: Some(label.to_string()), lr, explore }
}

/// Q, Double Q, and SCQ beta in {1, 2, 4} under shared schedules.
fn standard_agent_set(
    lr: LearningRateSchedule,
    explore: ExplorationSchedule,
    update_both: bool,
    label_suffix: &str,
) -> Vec<AgentSpec> {
    let mut agents = vec![
        agent(AgentAlgoSpec::QLearning, &format!("q_learning{label_suffix}"), lr, explore),
        agent(
            AgentAlgoSpec::DoubleQ { update_both },
            &format!("double_q{label_suffix}"),
            lr,
            explore,
        ),
    ];
    for beta in [1.0, 2.0, 4.0] {
        agents.push(agent(
            AgentAlgoSpec::Scq { beta, prev_mode: PrevMode::PerEntry },
            &format!("scq_beta{beta}{label_suffix}"),
            lr,
            explore,
        ));
    }
    agents
}

fn fig1() -> ExperimentConfig {
    let lr = LearningRateSchedule::Constant { alpha: 0.1 };
    let explore = ExplorationSchedule::ConstantEps { eps: 0.1 };
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        name: "fig1".into(),
        env: EnvSpec::BiasExample { k_b_actions: 8 },
        agents: standard_agent_set(lr, explore, false, ""),
        n_runs: 10_000,
        n_episodes: 300,
        master_seed: DEFAULT_SEED,
        metrics: vec![MetricKind::PercentLeft, MetricKind::EpisodeReturn],
        smoothing_window: 0,
        threads: ThreadCount::Auto,
        max_steps_per_episode: 100,
    }
}

fn fig2(name: &str, reward_lo: f64, reward_hi: f64) -> ExperimentConfig {
    let lr = LearningRateSchedule::InverseCount;
    let explore = ExplorationSchedule::InverseSqrtVisits;
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        env: EnvSpec::GridWorld { n: 3, reward_lo, reward_hi, gamma: 0.95 },
        // the grid-world protocol updates both twin tables every transition
        agents: standard_agent_set(lr, explore, true, ""),
        n_runs: 500,
        n_episodes: 10_000,
        master_seed: DEFAULT_SEED,
        metrics: vec![
            MetricKind::EpisodeReturn,
            MetricKind::AvgRewardPerStep { window: 500 },
            MetricKind::StartStateBias,
        ],
        smoothing_window: 0,
        threads: ThreadCount::Auto,
        max_steps_per_episode: 10_000,
    }
}

fn fig3(name: &str, width: usize) -> ExperimentConfig {
    let lr = LearningRateSchedule::ScaledHarmonic { alpha0: 0.1, c: 100 };
    let annealed = ExplorationSchedule::InverseSqrtVisits;
    let fixed = ExplorationSchedule::ConstantEps { eps: 0.1 };
    let mut agents = standard_agent_set(lr, annealed, false, "_annealed");
    agents.extend(standard_agent_set(lr, fixed, false, "_fixed"));
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        env: EnvSpec::CliffWalk { height: 5, width },
        agents,
        n_runs: 500,
        n_episodes: 500,
        master_seed: DEFAULT_SEED,
        metrics: vec![MetricKind::EpisodeReturn, MetricKind::RelativeTotalReward],
        smoothing_window: 20,
        threads: ThreadCount::Auto,
        max_steps_per_episode: 10_000,
    }
}

fn beta_sweep() -> Vec<ExperimentConfig> {
    let betas = [1.0, 2.0, 3.0, 4.0];
    let scq_agents = |lr, explore: ExplorationSchedule| -> Vec<AgentSpec> {
        betas
            .iter()
            .map(|&beta| {
                agent(
                    AgentAlgoSpec::Scq { beta, prev_mode: PrevMode::PerEntry },
                    &format!("scq_beta{beta}"),
                    lr,
                    explore,
                )
            })
            .collect()
    };
    let grid = ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        name: "beta-sweep-grid".into(),
        env: EnvSpec::GridWorld { n: 3, reward_lo: -6.0, reward_hi: 4.0, gamma: 0.95 },
        agents: scq_agents(LearningRateSchedule::InverseCount, ExplorationSchedule::InverseSqrtVisits),
        n_runs: 200,
        n_episodes: 10_000,
        master_seed: DEFAULT_SEED,
        metrics: vec![
            MetricKind::EpisodeReturn,
            MetricKind::AvgRewardPerStep { window: 500 },
            MetricKind::StartStateBias,
        ],
        smoothing_window: 0,
        threads: ThreadCount::Auto,
        max_steps_per_episode: 10_000,
    };
    let cliff = ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        name: "beta-sweep-cliff".into(),
        env: EnvSpec::CliffWalk { height: 5, width: 10 },
        agents: scq_agents(
            LearningRateSchedule::ScaledHarmonic { alpha0: 0.1, c: 100 },
            ExplorationSchedule::InverseSqrtVisits,
        ),
        n_runs: 200,
        n_episodes: 500,
        master_seed: DEFAULT_SEED,
        metrics: vec![MetricKind::EpisodeReturn, MetricKind::RelativeTotalReward],
        smoothing_window: 20,
        threads: ThreadCount::Auto,
        max_steps_per_episode: 10_000,
    };
    vec![grid, cliff]
}

fn estimator_bias() -> EstimatorBiasConfig {
    EstimatorBiasConfig {
        schema_version: SCHEMA_VERSION,
        name: "estimator-bias".into(),
        m: 8,
        mean: -0.1,
        std: 1.0,
        taus: vec![0.25, 0.5, 0.75],
        samples_per_set: 1,
        n_trials: 100_000,
        seed: DEFAULT_SEED,
    }
}

fn scdqn_toy() -> ScdqnToyConfig {
    ScdqnToyConfig {
        schema_version: SCHEMA_VERSION,
        name: "scdqn-toy".into(),
        env: EnvSpec::GridWorld { n: 3, reward_lo: -2.0, reward_hi: 0.0, gamma: 0.95 },
        rules: vec![TargetRule::Dqn, TargetRule::DoubleDqn, TargetRule::Scdqn { beta: 3.0 }],
        hidden: 64,
        learning_rate: 0.005,
        batch_size: 32,
        replay_capacity: 10_000,
        train_period: 2,
        target_sync_period: 250,
        total_env_steps: 60_000,
        eps_start: 1.0,
        eps_end: 0.05,
        eps_decay_steps: 20_000,
        max_steps_per_episode: 100,
        log_period: 500,
        eval_episodes: 100,
        eval_max_steps: 10,
        master_seed: DEFAULT_SEED,
    }
}

/// Resolves a preset name into its full configuration.
pub fn materialize(preset: Preset) -> PresetSpec {
    match preset {
        Preset::Fig1 => PresetSpec::Experiments(vec![fig1()]),
        Preset::Fig2High => PresetSpec::Experiments(vec![fig2("fig2-high", -12.0, 10.0)]),
        Preset::Fig2Med => PresetSpec::Experiments(vec![fig2("fig2-med", -6.0, 4.0)]),
        Preset::Fig2Low => PresetSpec::Experiments(vec![fig2("fig2-low", -2.0, 0.0)]),
        Preset::Fig3Ten => PresetSpec::Experiments(vec![fig3("fig3-10", 10)]),
        Preset::Fig3Twenty => PresetSpec::Experiments(vec![fig3("fig3-20", 20)]),
        Preset::BetaSweep => PresetSpec::Experiments(beta_sweep()),
        Preset::EstimatorBias => PresetSpec::EstimatorBias(estimator_bias()),
        Preset::ScdqnToy => PresetSpec::ScdqnToy(scdqn_toy()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_names_round_trip() {
        for preset in Preset::ALL {
            assert_eq!(Preset::from_str(preset.name()).unwrap(), preset);
        }
        assert!(Preset::from_str("fig9").is_err());
    }

    // Schema stability: serialize -> parse -> serialize is the identity for
    // every bundled preset.
    #[test]
    fn preset_configs_round_trip_through_json() {
        for preset in Preset::ALL {
            let spec = materialize(preset);
            let json = serde_json::to_string_pretty(&spec).unwrap();
            let back: PresetSpec = serde_json::from_str(&json).unwrap();
            assert_eq!(spec, back, "{}", preset.name());
            assert_eq!(json, serde_json::to_string_pretty(&back).unwrap());
        }
    }

    #[test]
    fn experiment_presets_validate() {
        for preset in Preset::ALL {
            if let PresetSpec::Experiments(cfgs) = materialize(preset) {
                for cfg in cfgs {
                    cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", cfg.name));
                }
            }
        }
    }

    #[test]
    fn fig_settings_match_protocol() {
        let PresetSpec::Experiments(cfgs) = materialize(Preset::Fig1) else { unreachable!() };
        let fig1 = &cfgs[0];
        assert_eq!(fig1.n_runs, 10_000);
        assert_eq!(fig1.n_episodes, 300);
        assert_eq!(fig1.agents.len(), 5);
        assert!(matches!(fig1.env, EnvSpec::BiasExample { k_b_actions: 8 }));

        let PresetSpec::Experiments(cfgs) = materialize(Preset::Fig2High) else { unreachable!() };
        assert!(matches!(
            cfgs[0].env,
            EnvSpec::GridWorld { reward_lo, reward_hi, .. } if reward_lo == -12.0 && reward_hi == 10.0
        ));
        // grid-world protocol: both twin tables update every transition
        assert!(cfgs[0]
            .agents
            .iter()
            .any(|a| matches!(a.algo, AgentAlgoSpec::DoubleQ { update_both: true })));

        let PresetSpec::Experiments(cfgs) = materialize(Preset::Fig3Twenty) else { unreachable!() };
        assert!(matches!(cfgs[0].env, EnvSpec::CliffWalk { height: 5, width: 20 }));
        // both exploration strategies present
        assert_eq!(cfgs[0].agents.len(), 10);
        assert!(cfgs[0].agents.iter().any(|a| a.label.as_deref() == Some("q_learning_annealed")));
        assert!(cfgs[0].agents.iter().any(|a| a.label.as_deref() == Some("q_learning_fixed")));

        let PresetSpec::Experiments(cfgs) = materialize(Preset::BetaSweep) else { unreachable!() };
        assert_eq!(cfgs.len(), 2);
        assert_eq!(cfgs[0].agents.len(), 4, "beta in 1..4 on the grid");
    }

    #[test]
    fn estimator_bias_preset_runs() {
        let PresetSpec::EstimatorBias(mut cfg) = materialize(Preset::EstimatorBias) else {
            unreachable!()
        };
        cfg.n_trials = 500;
        let reports = cfg.run().unwrap();
        assert_eq!(reports.len(), 3);
        assert_eq!(reports[1].tau, 0.5);
        assert_eq!(reports[0].single.true_max, -0.1);
    }
}

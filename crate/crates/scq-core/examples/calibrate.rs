// Scratch calibration harness (not part of the deliverable test suite).
use std::time::Instant;

use scq_core::agents::{Agent, ExplorationSchedule, LearningRateSchedule, PrevMode};
use scq_core::experiments::{run_experiment, MetricKind};
use scq_core::mdp::{random_episodic_mdp, value_iteration};
use scq_core::presets::{materialize, Preset, PresetSpec};
use scq_core::scdqn::run_toy_training;
use scq_core::seeding::{stream_rng, RunRng};

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());

    if which == "a2" || which == "all" {
        let PresetSpec::Experiments(mut cfgs) = materialize(Preset::Fig1) else { unreachable!() };
        let mut cfg = cfgs.remove(0);
        cfg.n_runs = 2000;
        let t0 = Instant::now();
        let result = run_experiment(&cfg).unwrap();
        println!("== A2 fig1 @2000 runs ({:?})", t0.elapsed());
        for agent in &result.agents {
            println!(
                "  {:<14} last5 %left = {:.2}  final = {:.2}",
                agent.label, agent.summary["last5_percent_left"], agent.summary["final_percent_left"]
            );
        }
    }

    if which == "a3" || which == "all" {
        for preset in [Preset::Fig2High, Preset::Fig2Med, Preset::Fig2Low] {
            let PresetSpec::Experiments(mut cfgs) = materialize(preset) else { unreachable!() };
            let mut cfg = cfgs.remove(0);
            cfg.n_runs = 200;
            let t0 = Instant::now();
            let result = run_experiment(&cfg).unwrap();
            println!("== A3 {} @200 runs ({:?})", cfg.name, t0.elapsed());
            for agent in &result.agents {
                println!(
                    "  {:<14} bias = {:+.4} (sem {:.4})  final_avg_r = {:+.4}",
                    agent.label,
                    agent.summary["start_state_bias"],
                    agent.summary["start_state_bias_sem"],
                    agent.summary["final_avg_reward_per_step"],
                );
            }
        }
    }

|| which == "all" {
        for preset in [Preset::Fig3Ten, Preset::Fig3Twenty] {
            let PresetSpec::Experiments(mut cfgs) = materialize(preset) else { unreachable!() };
            let mut cfg = cfgs.remove(0);
            cfg.n_runs = 100;
            cfg.agents.retain(|a| a.resolved_label().ends_with("_annealed"));
            let t0 = Instant::now();
            let result = run_experiment(&cfg).unwrap();
            println!("== A5 {} annealed @100 runs ({:?})", cfg.name, t0.elapsed());
            for agent in &result.agents {
                println!(
                    "  {:<20} rel = {:+.2} (sem {:.2}) final_ret = {:+.2} cap_hits = {}",
                    agent.label,
                    agent.summary["relative_total_reward"],
                    agent.summary["relative_total_reward_sem"],
                    agent.summary["final_episode_return"],
                    agent.summary["step_cap_hits"],
                );
            }
        }
    }

    if which == "a6" || which == "all" {
        let t0 = Instant::now();
        let n_mdps = 20;
        let steps = 200_000usize;
        for beta in [None, Some(1.0), Some(2.0), Some(4.0)] {
            let mut ok = 0;
            let mut worst: f64 = 0.0;
            for i in 0..n_mdps {
                let mut gen = stream_rng(1000 + i, 0);
                let mdp = random_episodic_mdp(5, 3, 0.95, &mut gen);
                let q_star = value_iteration(&mdp, 1e-10, 1_000_000).unwrap();
                let lr = LearningRateSchedule::InverseCount;
                let explore = ExplorationSchedule::ConstantEps { eps: 0.2 };
                let mut agent = match beta {
                    None => Agent::double_q(&mdp, lr, explore, false).unwrap(),
                    Some(b) => Agent::scq(&mdp, lr, explore, b, PrevMode::PerEntry).unwrap(),
                };
                let mut rng = RunRng::new(500 + i, 0, 0);
                let mut done_steps = 0usize;
                while done_steps < steps {
                    let remaining = steps - done_steps;
                    let log = scq_core::agents::run_episode(&mut agent, &mdp, remaining, &mut rng);
                    done_steps += log.steps().max(1);
                }
                let err = agent.final_q_table().max_abs_diff(&q_star);
                worst = worst.max(err);
                if err < 0.05 {
                    ok += 1;
                }
            }
            println!(
                "== A6 beta={beta:?}: {ok}/{n_mdps} under 0.05, worst {worst:.4} ({:?})",
                t0.elapsed()
            );
        }
    }

    if which == "a9" || which == "all" {
        let PresetSpec::Experiments(cfgs) = materialize(Preset::BetaSweep) else { unreachable!() };
        let cfg = cfgs.into_iter().next().unwrap();
        let t0 = Instant::now();
        let result = run_experiment(&cfg).unwrap();
        println!("== A9 {} ({:?})", cfg.name, t0.elapsed());
        let mut vals = Vec::new();
        for agent in &result.agents {
            let v = agent.summary["final_avg_reward_per_step"];
            println!("  {:<12} final_avg_r = {v:+.4}", agent.label);
            if agent.label != "scq_beta1" {
                vals.push(v);
            }
        }
        let (lo, hi) = (vals.iter().cloned().fold(f64::MAX, f64::min), vals.iter().cloned().fold(f64::MIN, f64::max));
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        println!("  spread (max-min)/|mean| = {:.3}", (hi - lo) / mean.abs());
    }

    if which == "toy" || which == "all" {
        let PresetSpec::ScdqnToy(cfg) = materialize(Preset::ScdqnToy) else { unreachable!() };
        let t0 = Instant::now();
        let results = run_toy_training(&cfg).unwrap();
        println!("== scdqn toy ({:?})", t0.elapsed());
        for r in &results {
            println!(
                "  {:<14} eval {}/{} within {} steps, greedy return {:+.2}",
                r.label, r.eval_successes, r.eval_episodes, cfg.eval_max_steps, r.final_greedy_return
            );
        }
    }
}

#[allow(dead_code)]
fn variants() {
    use scq_core::experiments::{AgentAlgoSpec, AgentSpec};
    for preset in [Preset::Fig2High, Preset::Fig2Med, Preset::Fig2Low] {
        let PresetSpec::Experiments(mut cfgs) = materialize(preset) else { unreachable!() };
        let mut cfg = cfgs.remove(0);
        cfg.n_runs = 200;
        let lr = cfg.agents[0].lr;
        let explore = cfg.agents[0].explore;
        let mut agents = vec![
            AgentSpec { algo: AgentAlgoSpec::QLearning, label: Some("q".into()), lr, explore },
            AgentSpec { algo: AgentAlgoSpec::DoubleQ { update_both: false }, label: Some("dq_coin".into()), lr, explore },
            AgentSpec { algo: AgentAlgoSpec::DoubleQ { update_both: true }, label: Some("dq_both".into()), lr, explore },
        ];
        for beta in [1.0, 2.0, 4.0] {
            agents.push(AgentSpec {
                algo: AgentAlgoSpec::Scq { beta, prev_mode: PrevMode::PerEntry },
                label: Some(format!("scq{beta}_entry")), lr, explore,
            });
            agents.push(AgentSpec {
                algo: AgentAlgoSpec::Scq { beta, prev_mode: PrevMode::Snapshot },
                label: Some(format!("scq{beta}_snap")), lr, explore,
            });
        }
        cfg.agents = agents;
        let t0 = Instant::now();
        let result = run_experiment(&cfg).unwrap();
        println!("== variants {} @200 runs ({:?})", cfg.name, t0.elapsed());
        for agent in &result.agents {
            println!(
                "  {:<12} bias = {:+.4} (sem {:.4}) final_avg_r = {:+.4}",
                agent.label,
                agent.summary["start_state_bias"],
                agent.summary["start_state_bias_sem"],
                agent.summary["final_avg_reward_per_step"],
            );
        }
    }
}

//! CSV/JSON output layout: `<out>/<experiment>/<agent>/<metric>.csv` plus a
//! `summary.json` holding the resolved config and final scalars. Files are
//! byte-stable for a fixed config.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{metrics::smooth, AgentAggregate, AggregateResult, SeriesStats};

#[derive(Serialize)]
struct SummaryDoc<'a> {
    name: &'a str,
    master_seed: u64,
    config: &'a super::ExperimentConfig,
    agents: Vec<AgentSummaryDoc<'a>>,
}

#[derive(Serialize)]
struct AgentSummaryDoc<'a> {
    label: &'a str,
    summary: &'a std::collections::BTreeMap<String, f64>,
}

fn series_csv(stats: &SeriesStats, smoothing_window: usize) -> String {
    let mean = smooth(&stats.mean, smoothing_window);
    let mut out = String::from("episode,mean,min,max,sem\n");
    for i in 0..mean.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i + 1,
            mean[i],
            stats.min[i],
            stats.max[i],
            stats.sem[i]
        ));
    }
    out
}

fn write_agent_dir(
    exp_dir: &Path,
    agent: &AgentAggregate,
    smoothing_window: usize,
) -> io::Result<()> {
    let dir = exp_dir.join(&agent.label);
    fs::create_dir_all(&dir)?;
    for (metric, stats) in &agent.series {
        fs::write(dir.join(format!("{metric}.csv")), series_csv(stats, smoothing_window))?;
    }
    Ok(())
}

/// Writes the experiment layout under `out_dir` and returns the experiment
/// directory.
pub fn write_outputs(result: &AggregateResult, out_dir: &Path) -> io::Result<PathBuf> {
    let exp_dir = out_dir.join(&result.config.name);
    fs::create_dir_all(&exp_dir)?;
    for agent in &result.agents {
        write_agent_dir(&exp_dir, agent, result.config.smoothing_window)?;
    }
    if let Some(baseline) = &result.baseline {
        write_agent_dir(&exp_dir, baseline, result.config.smoothing_window)?;
    }
    let mut agents: Vec<AgentSummaryDoc> = result
        .agents
        .iter()
        .map(|a| AgentSummaryDoc { label: &a.label, summary: &a.summary })
        .collect();
    if let Some(baseline) = &result.baseline {
        agents.push(AgentSummaryDoc { label: &baseline.label, summary: &baseline.summary });
    }
    let doc = SummaryDoc {
        name: &result.config.name,
        master_seed: result.config.master_seed,
        config: &result.config,
        agents,
    };
    let mut json = serde_json::to_string_pretty(&doc).expect("summary serializes");
    json.push('\n');
    fs::write(exp_dir.join("summary.json"), json)?;
    Ok(exp_dir)
}

#[cfg(test)]
mod tests {
    use super::super::tests_support::tiny_experiment;
    use super::*;

    #[test]
    fn layout_and_stability() {
        let result = tiny_experiment();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let exp_a = write_outputs(&result, dir_a.path()).unwrap();
        let exp_b = write_outputs(&result, dir_b.path()).unwrap();

        let summary = fs::read_to_string(exp_a.join("summary.json")).unwrap();
        assert!(summary.contains("\"master_seed\""));
        let csv = fs::read_to_string(
            exp_a.join(&result.agents[0].label).join("episode_return.csv"),
        )
        .unwrap();
        assert!(csv.starts_with("episode,mean,min,max,sem\n"));
        assert_eq!(
            csv.lines().count(),
            result.config.n_episodes as usize + 1,
            "one row per episode plus header"
        );

        // identical input -> identical bytes
        assert_eq!(
            fs::read(exp_a.join("summary.json")).unwrap(),
            fs::read(exp_b.join("summary.json")).unwrap()
        );
        assert_eq!(
            fs::read(exp_a.join(&result.agents[0].label).join("episode_return.csv")).unwrap(),
            fs::read(exp_b.join(&result.agents[0].label).join("episode_return.csv")).unwrap()
        );
    }
}

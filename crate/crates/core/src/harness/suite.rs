//! Ablation suites: several configurations over the same episodes.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use super::episode::{run_episode, EpisodeConfig, EpisodeResult};
use super::metrics::{aggregate, FailureCause, MetricsTable};
use crate::policy::{PlannerKind, PolicyConfig};
use crate::world::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub label: String,
    pub episode: EpisodeConfig,
}

impl SuiteConfig {
    pub fn new(label: impl Into<String>, policy: PolicyConfig) -> Self {
        Self { label: label.into(), episode: EpisodeConfig::new(policy) }
    }
}

/// Full method with `planner` (oracle or llm), the three ablations of its
/// inputs, and the two heuristic planners.
pub fn ablation_configs(planner: PolicyConfig) -> Vec<SuiteConfig> {
    vec![
        SuiteConfig::new(format!("Ours ({})", planner.planner), planner.clone()),
        SuiteConfig::new("No Signs/People", planner.clone().without_signs_people()),
        SuiteConfig::new("No Map Image", planner.clone().without_map_image()),
        SuiteConfig::new("No VLM (closest)", PolicyConfig::new(PlannerKind::Closest)),
        SuiteConfig::new("No VLM (random)", PolicyConfig::new(PlannerKind::Random)),
        SuiteConfig::new("No JSON", planner.without_json()),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteEpisode {
    pub config: String,
    pub result: EpisodeResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub tables: Vec<MetricsTable>,
    pub episodes: Vec<SuiteEpisode>,
}

/// Runs every configuration on episode `i = 0..seeds.len()`, which uses
/// `scenarios[i % scenarios.len()]` and `seeds[i]`. Episodes run on all
/// available cores; results are ordered and independent of scheduling.
pub fn run_ablation_suite(scenarios: &[Scenario], seeds: &[u64], configs: &[SuiteConfig]) -> SuiteReport {
    assert!(!scenarios.is_empty(), "suite needs at least one scenario");
    let jobs: Vec<(usize, usize)> = (0..configs.len()).flat_map(|c| (0..seeds.len()).map(move |e| (c, e))).collect();
    let results: Vec<Mutex<Option<EpisodeResult>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(c, e)) = jobs.get(j) else { break };
                let scenario = &scenarios[e % scenarios.len()];
                let result = run_episode(scenario, &configs[c].episode, seeds[e]);
                *results[j].lock().expect("result slot") = Some(result);
            });
        }
    });
    let episodes: Vec<SuiteEpisode> = jobs
        .iter()
        .zip(results)
        .map(|(&(c, _), slot)| SuiteEpisode {
            config: configs[c].label.clone(),
            result: slot.into_inner().expect("result slot").expect("every job ran"),
        })
        .collect();
    let tables = configs
        .iter()
        .filter_map(|config| {
            let metrics: Vec<_> = episodes
                .iter()
                .filter(|e| e.config == config.label)
                .map(|e| e.result.metrics())
                .collect();
            aggregate(&config.label, &metrics).ok()
        })
        .collect();
    SuiteReport { tables, episodes }
}

impl SuiteReport {
    pub fn table(&self, label: &str) -> Option<&MetricsTable> {
        self.tables.iter().find(|t| t.label == label)
    }

    /// One row per episode.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["config", "scenario", "seed", "success", "reason", "duration", "distance", "steps", "failure_causes"])
            .expect("in-memory csv");
        for e in &self.episodes {
            let r = &e.result;
            let causes: Vec<&str> = r.failure_causes.iter().map(|c| c.label()).collect();
            writer
                .write_record([
                    e.config.clone(),
                    r.scenario.clone(),
                    r.seed.to_string(),
                    r.success.to_string(),
                    r.reason.name().to_string(),
                    format!("{:.3}", r.duration),
                    format!("{:.3}", r.distance),
                    r.steps.to_string(),
                    causes.join("; "),
                ])
                .expect("in-memory csv");
        }
        String::from_utf8(writer.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }

    /// Metrics table per configuration and failure-cause frequencies.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str("| Environment | Success Rate (%) | Duration (s) | Distance Traveled (m) |\n");
        out.push_str("|---|---|---|---|\n");
        for t in &self.tables {
            let _ = writeln!(out, "| {} | {:.2} | {:.2} | {:.2} |", t.label, t.success_rate, t.avg_duration, t.avg_distance);
        }
        let failures: Vec<&SuiteEpisode> = self.episodes.iter().filter(|e| !e.result.success).collect();
        if !failures.is_empty() {
            out.push_str("\n| Failure Cause | Percentage of failed episodes |\n|---|---|\n");
            for cause in FailureCause::ALL {
                let n = failures.iter().filter(|e| e.result.failure_causes.contains(&cause)).count();
                let _ = writeln!(out, "| {} | {:.2} |", cause.label(), 100.0 * n as f64 / failures.len() as f64);
            }
        }
        if let Some(first) = self.tables.first() {
            let _ = write!(
                out,
                "\nEpisodes per configuration: {}. Durations come from a simulated clock \
                 (fixed charges for motion, scans, model calls and conversations); failed episodes \
                 count as 900 s and 100 m. Compare configurations by trend, not absolute value.\n",
                first.episodes
            );
        }
        out
    }

    /// Writes `results.csv`, `report.md` and one directory per episode with
    /// `event_log.jsonl` and `result.json`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("results.csv"), self.to_csv())?;
        std::fs::write(dir.join("report.md"), self.to_markdown())?;
        for e in &self.episodes {
            let slug: String = e
                .config
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
                .collect();
            let episode_dir = dir.join(format!("{slug}__{}__{}", e.result.scenario, e.result.seed));
            super::write_episode(&episode_dir, &e.result)?;
        }
        Ok(())
    }
}

//! Episodes, metrics, ablation suites and the hospital floor.

pub mod episode;
pub mod hospital;
pub mod metrics;
pub mod suite;

use std::path::Path;

pub use episode::{run_episode, run_episode_with, EndReason, EpisodeConfig, EpisodeHooks, EpisodeResult};
pub use hospital::{generate_hospital, hospital_scenario};
pub use metrics::{aggregate, classify_failure, EpisodeMetrics, FailureCause, MetricsTable};
pub use suite::{ablation_configs, run_ablation_suite, SuiteConfig, SuiteReport};

/// Writes `event_log.jsonl` and `result.json` into `dir`.
pub fn write_episode(dir: &Path, result: &EpisodeResult) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("event_log.jsonl"), result.event_log_jsonl())?;
    let json = serde_json::to_string_pretty(result).map_err(std::io::Error::other)?;
    std::fs::write(dir.join("result.json"), json + "\n")
}

//! Episode metrics with failure penalties, and rule-based failure causes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::primitives::{Event, EventKind};

/// Seconds charged to a failed episode when averaging.
pub const FAILURE_DURATION: f64 = 900.0;
/// Meters charged to a failed episode when averaging.
pub const FAILURE_DISTANCE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub success: bool,
    pub duration: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub label: String,
    pub episodes: usize,
    pub successes: usize,
    /// Percent, rounded to two decimals.
    pub success_rate: f64,
    pub avg_duration: f64,
    pub avg_distance: f64,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no episodes to aggregate")]
    Empty,
}

pub fn round2(value: f64) -> f64 {
    (value * 100.0).round() / 100.0
}

/// Success rate and averages; failures count as [`FAILURE_DURATION`] and
/// [`FAILURE_DISTANCE`].
pub fn aggregate(label: &str, episodes: &[EpisodeMetrics]) -> Result<MetricsTable, MetricsError> {
    if episodes.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = episodes.len() as f64;
    let successes = episodes.iter().filter(|e| e.success).count();
    let (mut duration, mut distance) = (0.0, 0.0);
    for e in episodes {
        if e.success {
            duration += e.duration;
            distance += e.distance;
        } else {
            duration += FAILURE_DURATION;
            distance += FAILURE_DISTANCE;
        }
    }
    Ok(MetricsTable {
        label: label.to_string(),
        episodes: episodes.len(),
        successes,
        success_rate: round2(100.0 * successes as f64 / n),
        avg_duration: round2(duration / n),
        avg_distance: round2(distance / n),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureCause {
    IncorrectDetection,
    DetectionMissed,
    ReasoningFailure,
    IncorrectHumanInfo,
    SlamFailure,
    PlannerControllerFailure,
}

impl FailureCause {
    pub const ALL: [FailureCause; 6] = [
        FailureCause::IncorrectDetection,
        FailureCause::DetectionMissed,
        FailureCause::ReasoningFailure,
        FailureCause::IncorrectHumanInfo,
        FailureCause::SlamFailure,
        FailureCause::PlannerControllerFailure,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FailureCause::IncorrectDetection => "Incorrect Detection",
            FailureCause::DetectionMissed => "Detection Missed",
            FailureCause::ReasoningFailure => "Reasoning Failure",
            FailureCause::IncorrectHumanInfo => "Incorrect Human Info",
            FailureCause::SlamFailure => "SLAM Failure",
            FailureCause::PlannerControllerFailure => "Planner/Controller Failure",
        }
    }
}

fn misread(reply: &str, truth: Option<&str>) -> bool {
    let number = reply.split(';').next().unwrap_or("").trim();
    match truth {
        Some(truth) => !number.starts_with('-') && number != truth,
        None => false,
    }
}

/// Tags each event with at most one cause.
pub fn event_cause(event: &Event) -> Option<FailureCause> {
    Some(match &event.kind {
        EventKind::FalseDetection { .. } => FailureCause::IncorrectDetection,
        EventKind::LabelRead { reply, truth, .. } if misread(reply, truth.as_deref()) => {
            FailureCause::IncorrectDetection
        }
        EventKind::GoalDoorMissed { .. } => FailureCause::DetectionMissed,
        EventKind::ChoiceRejected { .. }
        | EventKind::PolicyFailure { .. }
        | EventKind::VisitedChoice { .. }
        | EventKind::Exhausted => FailureCause::ReasoningFailure,
        EventKind::HumanMisinformation { .. } => FailureCause::IncorrectHumanInfo,
        EventKind::PoseError { .. } => FailureCause::SlamFailure,
        EventKind::Collision { .. } | EventKind::Unreachable { .. } => FailureCause::PlannerControllerFailure,
        _ => return None,
    })
}

/// Up to three causes ranked by how many events point at them (ties in
/// table order). A failure with no tagged events is a reasoning failure.
pub fn classify_failure(events: &[Event]) -> Vec<FailureCause> {
    let mut counts = [0usize; 6];
    for event in events {
        if let Some(cause) = event_cause(event) {
            counts[cause as usize] += 1;
        }
    }
    let mut ranked: Vec<FailureCause> = FailureCause::ALL.into_iter().filter(|c| counts[*c as usize] > 0).collect();
    ranked.sort_by(|a, b| counts[*b as usize].cmp(&counts[*a as usize]).then(a.cmp(b)));
    ranked.truncate(3);
    if ranked.is_empty() {
        ranked.push(FailureCause::ReasoningFailure);
    }
    ranked
}

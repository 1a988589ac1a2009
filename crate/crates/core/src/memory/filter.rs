use serde::{Deserialize, Serialize};

use crate::world::{DetectionCategory, DetectionEvent};

/// Acceptance rule for one detector query. Confidence is inclusive, size
/// windows are open intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterRule {
    pub category: DetectionCategory,
    pub min_confidence: f64,
    pub width: Option<(f64, f64)>,
    pub height: Option<(f64, f64)>,
}

pub const FILTER_RULES: [FilterRule; 4] = [
    FilterRule {
        category: DetectionCategory::Door,
        min_confidence: 0.3,
        width: Some((0.5, 2.5)),
        height: Some((0.5, 3.0)),
    },
    FilterRule {
        category: DetectionCategory::RoomLabel,
        min_confidence: 0.04,
        width: Some((0.0, 0.4)),
        height: Some((0.0, 0.15)),
    },
    FilterRule {
        category: DetectionCategory::Sign,
        min_confidence: 0.03,
        width: Some((0.35, 0.5)),
        height: Some((0.2, 0.5)),
    },
    FilterRule {
        category: DetectionCategory::Person,
        min_confidence: 0.3,
        width: None,
        height: None,
    },
];

pub fn filter_rule(category: DetectionCategory) -> &'static FilterRule {
    FILTER_RULES
        .iter()
        .find(|r| r.category == category)
        .expect("every category has a rule")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Confidence,
    Size,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterDecision {
    Accept,
    Reject(RejectReason),
}

fn inside(value: f64, window: Option<(f64, f64)>) -> bool {
    window.is_none_or(|(lo, hi)| value > lo && value < hi)
}

pub fn filter_detection(event: &DetectionEvent) -> FilterDecision {
    let rule = filter_rule(event.category);
    // Written negated so that a NaN confidence is rejected.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    let low_confidence = !(event.confidence >= rule.min_confidence);
    if low_confidence {
        FilterDecision::Reject(RejectReason::Confidence)
    } else if !inside(event.box_width, rule.width) || !inside(event.box_height, rule.height) {
        FilterDecision::Reject(RejectReason::Size)
    } else {
        FilterDecision::Accept
    }
}

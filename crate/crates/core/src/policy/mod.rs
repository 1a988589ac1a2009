//! Landmark selection: prompts, reply parsing and planners.

pub mod llm;
pub mod planners;
pub mod prompts;
pub mod protocol;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::{LandmarkCategory, MemoryBank};
use crate::primitives::RobotGoal;

pub use planners::{choose_closest, choose_oracle, choose_random, goal_in_text, OracleRule};
pub use protocol::{format_choice, parse_choice, Choice, ProtocolError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Llm,
    Oracle,
    Closest,
    Random,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 4] = [PlannerKind::Llm, PlannerKind::Oracle, PlannerKind::Closest, PlannerKind::Random];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Llm => "llm",
            PlannerKind::Oracle => "oracle",
            PlannerKind::Closest => "closest",
            PlannerKind::Random => "random",
        }
    }

    /// Closest and random pick without looking at the prompt.
    pub fn uses_prompt(self) -> bool {
        matches!(self, PlannerKind::Llm | PlannerKind::Oracle)
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlannerKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PlannerKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| PolicyError::Config(format!("unknown planner {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmSettings {
    pub endpoint: String,
    pub model: String,
    /// Seconds per request.
    pub timeout: f64,
    pub max_retries: u32,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: llm::DEFAULT_MODEL.to_string(),
            timeout: 60.0,
            max_retries: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub planner: PlannerKind,
    pub include_signs_people: bool,
    pub include_map_image: bool,
    pub include_json: bool,
    pub llm: Option<LlmSettings>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("no unvisited landmark left")]
    Exhausted,
    #[error("invalid policy configuration: {0}")]
    Config(String),
}

impl PolicyConfig {
    pub fn new(planner: PlannerKind) -> Self {
        Self {
            planner,
            include_signs_people: true,
            include_map_image: true,
            include_json: true,
            llm: None,
        }
    }

    pub fn without_signs_people(mut self) -> Self {
        self.include_signs_people = false;
        self
    }

    pub fn without_map_image(mut self) -> Self {
        self.include_map_image = false;
        self
    }

    pub fn without_json(mut self) -> Self {
        self.include_json = false;
        self
    }

    pub fn with_llm(mut self, settings: LlmSettings) -> Self {
        self.llm = Some(settings);
        self
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.planner == PlannerKind::Llm && self.llm.as_ref().is_none_or(|s| s.endpoint.is_empty()) {
            return Err(PolicyError::Config("the llm planner needs an endpoint".into()));
        }
        if self.planner.uses_prompt() && !self.include_json && !self.include_map_image {
            return Err(PolicyError::Config(
                "at least one of the map image and the landmark JSON must be included".into(),
            ));
        }
        Ok(())
    }

    /// The bank as the planner may see it under this configuration.
    pub fn planner_view(&self, bank: &MemoryBank) -> MemoryBank {
        let mut view = if self.include_signs_people {
            bank.clone()
        } else {
            bank.filtered(|c| !matches!(c, LandmarkCategory::Sign | LandmarkCategory::Person))
        };
        if !self.include_json {
            view = view.positions_only();
        }
        view
    }
}

/// Everything sent to a prompt-reading planner for one decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub system_text: String,
    pub instruction_text: String,
    /// PNG bytes.
    pub map_image: Option<Vec<u8>>,
    pub landmark_json: Option<String>,
}

/// Builds the landmark-choice prompt. `map_png` is dropped when the
/// configuration excludes the image.
pub fn build_prompt(bank: &MemoryBank, map_png: Option<Vec<u8>>, goal: &RobotGoal, config: &PolicyConfig) -> PromptBundle {
    let landmark_json = config.include_json.then(|| {
        if config.include_signs_people {
            bank.to_json()
        } else {
            bank.filtered(|c| !matches!(c, LandmarkCategory::Sign | LandmarkCategory::Person))
                .to_json()
        }
    });
    let instruction_text = prompts::choose_landmark_prompt(goal, landmark_json.as_deref().unwrap_or(""));
    PromptBundle {
        system_text: prompts::SYSTEM_PROMPT.to_string(),
        instruction_text,
        map_image: if config.include_map_image { map_png } else { None },
        landmark_json,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point2;
    use crate::memory::parse_json;

    fn mixed_bank() -> MemoryBank {
        let mut bank = MemoryBank::new();
        bank.insert(LandmarkCategory::Door, Point2::new(1.0, 0.0), 0.0);
        bank.insert(LandmarkCategory::Sign, Point2::new(2.0, 0.0), 0.0);
        bank.insert(LandmarkCategory::Person, Point2::new(3.0, 0.0), 0.0);
        bank.insert(LandmarkCategory::Frontier, Point2::new(4.0, 0.0), 0.0);
        bank.attach_label(0, "3001").unwrap();
        bank
    }

    #[test]
    fn ablations_strip_their_inputs() {
        let bank = mixed_bank();
        let goal = RobotGoal::Room("3012".into());
        let png = Some(vec![0x89, b'P']);
        let full = build_prompt(&bank, png.clone(), &goal, &PolicyConfig::new(PlannerKind::Oracle));
        assert!(full.map_image.is_some());
        let json = full.landmark_json.clone().unwrap();
        assert!(full.instruction_text.contains(&json));
        assert!(full.instruction_text.contains("Room 3012"));

        let no_image = build_prompt(&bank, png.clone(), &goal, &PolicyConfig::new(PlannerKind::Oracle).without_map_image());
        assert!(no_image.map_image.is_none() && no_image.landmark_json.is_some());

        let no_json = build_prompt(&bank, png.clone(), &goal, &PolicyConfig::new(PlannerKind::Oracle).without_json());
        assert!(no_json.map_image.is_some() && no_json.landmark_json.is_none());
        assert!(!no_json.instruction_text.contains("\"name\""));

        let no_sp = build_prompt(&bank, png, &goal, &PolicyConfig::new(PlannerKind::Oracle).without_signs_people());
        let entries = parse_json(&no_sp.landmark_json.unwrap()).unwrap();
        assert_eq!(entries.len(), 2);
        assert!(entries.iter().all(|e| e.name.contains("door") || e.name.contains("frontier")));
    }

    #[test]
    fn config_validation() {
        assert!(PolicyConfig::new(PlannerKind::Llm).validate().is_err());
        let llm = LlmSettings { endpoint: "http://localhost:1".into(), ..LlmSettings::default() };
        assert!(PolicyConfig::new(PlannerKind::Llm).with_llm(llm).validate().is_ok());
        let blind = PolicyConfig::new(PlannerKind::Oracle).without_json().without_map_image();
        assert!(blind.validate().is_err());
        let blind_closest = PolicyConfig::new(PlannerKind::Closest).without_json().without_map_image();
        assert!(blind_closest.validate().is_ok());
        assert_eq!("random".parse::<PlannerKind>().unwrap(), PlannerKind::Random);
    }

    #[test]
    fn json_free_view_forgets_visits() {
        let view = PolicyConfig::new(PlannerKind::Oracle).without_json().planner_view(&mixed_bank());
        assert!(view.landmarks().all(|l| !l.visited && l.label_text.is_none()));
    }
}

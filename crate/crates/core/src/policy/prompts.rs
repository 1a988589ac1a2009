//! Prompt templates and placeholder substitution.

use thiserror::Error;

use crate::primitives::RobotGoal;

pub const SYSTEM_PROMPT: &str = include_str!("../../assets/prompts/system.txt");
pub const CHOOSE_LANDMARK_TEMPLATE: &str = include_str!("../../assets/prompts/choose_landmark.txt");
pub const READ_DOOR_LABEL_PROMPT: &str = include_str!("../../assets/prompts/read_door_label.txt");
pub const READ_SIGN_PROMPT: &str = include_str!("../../assets/prompts/read_sign.txt");
pub const INTERACTION_TYPE_TEMPLATE: &str = include_str!("../../assets/prompts/interaction_type.txt");
pub const RECORD_NOTE_TEMPLATE: &str = include_str!("../../assets/prompts/record_note.txt");

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template placeholder {{{0}}} has no value")]
    MissingValue(String),
}

/// Substitutes `{name}` placeholders and collapses `{{`/`}}` escapes.
/// Braces not enclosing an identifier are copied unchanged.
pub fn fill(template: &str, values: &[(&str, &str)]) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(pos) = rest.find(['{', '}']) {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if tail.starts_with("{{") || tail.starts_with("}}") {
            out.push_str(&tail[..1]);
            rest = &tail[2..];
            continue;
        }
        if let Some(inner) = tail.strip_prefix('{') {
            let name_len = inner
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                .unwrap_or(inner.len());
            if name_len > 0 && inner[name_len..].starts_with('}') {
                let name = &inner[..name_len];
                let value = values
                    .iter()
                    .find(|(k, _)| *k == name)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| TemplateError::MissingValue(name.to_string()))?;
                out.push_str(value);
                rest = &tail[name_len + 2..];
                continue;
            }
        }
        out.push_str(&tail[..1]);
        rest = &tail[1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// How a goal reads inside a prompt.
pub fn goal_text(goal: &RobotGoal) -> String {
    match goal {
        RobotGoal::Unknown => "None".to_string(),
        other => other.to_string(),
    }
}

pub fn choose_landmark_prompt(goal: &RobotGoal, landmark_json: &str) -> String {
    fill(
        CHOOSE_LANDMARK_TEMPLATE,
        &[("target", &goal_text(goal)), ("vlm_keypt_dict", landmark_json)],
    )
    .expect("landmark template placeholders are fixed")
}

pub fn interaction_type_prompt(goal: &RobotGoal, learned_info: &str) -> String {
    fill(
        INTERACTION_TYPE_TEMPLATE,
        &[("goal", &goal_text(goal)), ("learned_info", learned_info)],
    )
    .expect("interaction template placeholders are fixed")
}

pub fn record_note_prompt(goal: &RobotGoal, robot_facing: &str, conversation_history: &str) -> String {
    fill(
        RECORD_NOTE_TEMPLATE,
        &[
            ("goal", &goal_text(goal)),
            ("robot_facing", robot_facing),
            ("conversation_history", conversation_history),
        ],
    )
    .expect("note template placeholders are fixed")
}

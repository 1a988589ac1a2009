//! Scripted answers from simulated people.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geom::{angle_diff, Pose};
use crate::world::{GoalTarget, NpcSpec, RelativeDirection, Scenario};

pub const REFUSAL: &str = "Sorry, I don't know the answer to that question.";

/// The three ways a robot can open a conversation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InteractionType {
    /// Ask how to help; the person states the delivery task.
    OfferHelp = 1,
    /// Ask where a room is.
    AskDirections = 2,
    /// Ask which room a named person occupies.
    AskDirectory = 3,
}

impl InteractionType {
    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Self::OfferHelp),
            2 => Some(Self::AskDirections),
            3 => Some(Self::AskDirectory),
            _ => None,
        }
    }

    pub fn number(self) -> u8 {
        self as u8
    }
}

/// Bins a bearing relative to the listener's heading: ahead within 45
/// degrees, behind beyond 135, otherwise left or right.
pub fn relative_bin(relative: f64) -> RelativeDirection {
    let magnitude = relative.abs();
    if magnitude <= PI / 4.0 {
        RelativeDirection::Forward
    } else if magnitude >= 3.0 * PI / 4.0 {
        RelativeDirection::Backwards
    } else if relative > 0.0 {
        RelativeDirection::Left
    } else {
        RelativeDirection::Right
    }
}

pub fn spoken_direction(direction: RelativeDirection) -> &'static str {
    match direction {
        RelativeDirection::Left => "on your left",
        RelativeDirection::Right => "on your right",
        RelativeDirection::Forward => "straight ahead",
        RelativeDirection::Backwards => "behind you",
    }
}

/// Inverse of [`spoken_direction`] for parsing a reply.
pub fn parse_spoken_direction(utterance: &str) -> Option<RelativeDirection> {
    RelativeDirection::ALL
        .into_iter()
        .find(|d| utterance.contains(spoken_direction(*d)))
}

/// Distance rounded to the nearest 5 m, never below 5.
pub fn coarse_distance(meters: f64) -> u32 {
    ((meters / 5.0).round() as u32).max(1) * 5
}

fn goal_phrase(target: &GoalTarget) -> String {
    match target {
        GoalTarget::Room(room) => format!("Room {room}"),
        GoalTarget::Occupant(name) => name.clone(),
    }
}

/// What a person says in reply. `goal` is what the robot asked about: a
/// room number for directions, an occupant name for the directory. For
/// [`InteractionType::OfferHelp`] the person states the scenario's task.
pub fn npc_respond(
    scenario: &Scenario,
    npc: &NpcSpec,
    interaction: InteractionType,
    goal: &str,
    robot_pose: Pose,
) -> String {
    respond(scenario, npc, interaction, goal, robot_pose, false)
}

/// Like [`npc_respond`], but a misinformed person reverses the direction.
pub fn respond(
    scenario: &Scenario,
    npc: &NpcSpec,
    interaction: InteractionType,
    goal: &str,
    robot_pose: Pose,
    misinformed: bool,
) -> String {
    match interaction {
        InteractionType::OfferHelp => format!(
            "Hello! Could you deliver this to {}?",
            goal_phrase(&scenario.goal.target)
        ),
        InteractionType::AskDirections => {
            let room = if npc.known_rooms.contains(goal) {
                Some(goal.to_string())
            } else if npc.knows_directory {
                scenario
                    .directory
                    .get(goal)
                    .filter(|room| npc.known_rooms.contains(*room))
                    .cloned()
            } else {
                None
            };
            let Some(door) = room.as_deref().and_then(|r| scenario.door_with_label(r)) else {
                return REFUSAL.to_string();
            };
            let offset = door.position - robot_pose.position();
            let mut relative = angle_diff(offset.angle(), robot_pose.yaw);
            if misinformed {
                relative = angle_diff(relative + PI, 0.0);
            }
            format!(
                "Room {} is {}, about {} meters away.",
                room.unwrap_or_default(),
                spoken_direction(relative_bin(relative)),
                coarse_distance(offset.norm())
            )
        }
        InteractionType::AskDirectory => {
            match scenario.directory.get(goal).filter(|_| npc.knows_directory) {
                Some(room) => format!("{goal} is in Room {room}."),
                None => REFUSAL.to_string(),
            }
        }
    }
}

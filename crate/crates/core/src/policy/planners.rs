//! Planners that pick a landmark without a language model.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::protocol::Choice;
use super::PolicyError;
use crate::geom::{Cardinal, Point2, Pose};
use crate::memory::{Landmark, LandmarkCategory, MemoryBank};
use crate::primitives::{parse_direction_note, RobotGoal, TRUTH_MATCH_RADIUS};
use crate::world::Scenario;

/// Half-width of the cone around a compass bin that counts as "that way".
pub const DIRECTION_CONE_DEG: f64 = 67.5;

fn choice(landmark: &Landmark, rationale: String) -> Choice {
    Choice { landmark_index: landmark.index, rationale }
}

fn nearest<'a>(candidates: impl Iterator<Item = &'a Landmark>, from: Point2) -> Option<&'a Landmark> {
    // Candidates arrive in index order, so strict comparison keeps the
    // lower index on ties.
    let mut best: Option<(&Landmark, f64)> = None;
    for landmark in candidates {
        let d = landmark.position.dist(from);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((landmark, d));
        }
    }
    best.map(|(l, _)| l)
}

/// Unvisited landmark nearest to the robot; ties go to the lower index.
pub fn choose_closest(bank: &MemoryBank, pose: Pose) -> Result<Choice, PolicyError> {
    let landmark = nearest(bank.unvisited(), pose.position()).ok_or(PolicyError::Exhausted)?;
    Ok(choice(landmark, format!("closest unvisited landmark ({:.2} m)", landmark.position.dist(pose.position()))))
}

/// Uniform draw over unvisited landmarks.
pub fn choose_random(bank: &MemoryBank, rng: &mut impl Rng) -> Result<Choice, PolicyError> {
    let open: Vec<&Landmark> = bank.unvisited().collect();
    if open.is_empty() {
        return Err(PolicyError::Exhausted);
    }
    let landmark = open[rng.random_range(0..open.len())];
    Ok(choice(landmark, "random unvisited landmark".to_string()))
}

/// Whether `text` names `room`, either directly or as an inclusive
/// `low-high` range of room numbers.
pub fn goal_in_text(text: &str, room: &str) -> bool {
    let goal: Option<u64> = room.parse().ok();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut numbers: Vec<(u64, usize, usize)> = Vec::new();
    while i < chars.len() {
        if chars[i].is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            if digits == room {
                return true;
            }
            if let Ok(n) = digits.parse() {
                numbers.push((n, start, i));
            }
        } else {
            i += 1;
        }
    }
    let Some(goal) = goal else { return false };
    numbers.windows(2).any(|pair| {
        let (lo, _, end) = pair[0];
        let (hi, start, _) = pair[1];
        let between: String = chars[end..start].iter().collect();
        between.trim() == "-" && lo <= goal && goal <= hi
    })
}

/// Which priority rule produced an oracle choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleRule {
    GoalDoor,
    FollowDirections,
    AskForInformation,
    Explore,
    Remaining,
}

/// Compass bins in which some recorded sign or note places the goal room,
/// per source landmark.
fn directional_hints<'a>(bank: &'a MemoryBank, room: &str) -> Vec<(&'a Landmark, Vec<Cardinal>)> {
    let mut hints = Vec::new();
    for landmark in bank.landmarks() {
        let mut bins = Vec::new();
        if let Some(directions) = &landmark.directions {
            for (bin, texts) in directions.iter() {
                if texts.iter().any(|t| goal_in_text(t, room)) {
                    bins.push(bin);
                }
            }
        }
        if let Some(info) = &landmark.info {
            if let Some((noted_room, bin)) = parse_direction_note(info) {
                if noted_room == room && !bins.contains(&bin) {
                    bins.push(bin);
                }
            }
        }
        if !bins.is_empty() {
            hints.push((landmark, bins));
        }
    }
    hints
}

/// Upper-bound planner with ground-truth door numbers. Priority: the goal
/// door if it is already a landmark; otherwise, along a direction that a
/// sign or note gives for the goal (nearest source first), the nearest unread
/// sign or else the unvisited non-door landmark farthest out; otherwise the nearest sign or person, the
/// nearest frontier, and finally any landmark.
///
/// With `knows_door_numbers` false the first rule is skipped, which is the
/// situation of a planner that never sees door labels.
pub fn choose_oracle(
    bank: &MemoryBank,
    scenario: &Scenario,
    goal: &RobotGoal,
    pose: Pose,
    knows_door_numbers: bool,
) -> Result<(Choice, OracleRule), PolicyError> {
    let here = pose.position();
    let room = goal.room();

    if let (Some(room), true) = (room, knows_door_numbers) {
        if let Some(target) = scenario.door_with_label(room) {
            let goal_door = bank.unvisited().find(|l| {
                l.category == LandmarkCategory::Door
                    && scenario
                        .doors
                        .iter()
                        .filter(|d| d.position.dist(l.position) <= TRUTH_MATCH_RADIUS)
                        .min_by(|a, b| a.position.dist(l.position).total_cmp(&b.position.dist(l.position)))
                        .is_some_and(|d| d.id == target.id)
            });
            if let Some(door) = goal_door {
                return Ok((choice(door, format!("door {} is Room {room}", door.index)), OracleRule::GoalDoor));
            }
        }
    }

    if let Some(room) = room {
        let mut hints = directional_hints(bank, room);
        hints.sort_by(|(a, _), (b, _)| a.position.dist(here).total_cmp(&b.position.dist(here)).then(a.index.cmp(&b.index)));
        let cone = DIRECTION_CONE_DEG.to_radians().cos();
        for (source, bins) in hints {
            let mut best: Option<(&Landmark, f64)> = None;
            let mut sign_ahead: Option<(&Landmark, f64)> = None;
            for bin in &bins {
                let dir = bin.unit();
                for candidate in bank.unvisited() {
                    if candidate.category == LandmarkCategory::Door || candidate.index == source.index {
                        continue;
                    }
                    let offset = candidate.position - source.position;
                    let length = offset.norm();
                    if length < 1e-9 {
                        continue;
                    }
                    let along = offset.dot(dir);
                    if along < length * cone - 1e-12 {
                        continue;
                    }
                    if candidate.category == LandmarkCategory::Sign {
                        let d = candidate.position.dist(here);
                        if sign_ahead.is_none_or(|(_, b)| d < b) {
                            sign_ahead = Some((candidate, d));
                        }
                    }
                    if best.is_none_or(|(_, b)| along > b) {
                        best = Some((candidate, along));
                    }
                }
            }
            if let Some((landmark, _)) = sign_ahead.or(best) {
                let names: Vec<&str> = bins.iter().map(|b| b.name()).collect();
                return Ok((
                    choice(
                        landmark,
                        format!("landmark {} puts Room {room} to the {}", source.index, names.join("/")),
                    ),
                    OracleRule::FollowDirections,
                ));
            }
        }
    }

    let informants = bank
        .unvisited()
        .filter(|l| matches!(l.category, LandmarkCategory::Sign | LandmarkCategory::Person));
    if let Some(l) = nearest(informants, here) {
        return Ok((choice(l, "nearest sign or person".into()), OracleRule::AskForInformation));
    }
    let frontiers = bank.unvisited().filter(|l| l.category == LandmarkCategory::Frontier);
    if let Some(l) = nearest(frontiers, here) {
        return Ok((choice(l, "nearest frontier".into()), OracleRule::Explore));
    }
    let l = nearest(bank.unvisited(), here).ok_or(PolicyError::Exhausted)?;
    Ok((choice(l, "nearest remaining landmark".into()), OracleRule::Remaining))
}

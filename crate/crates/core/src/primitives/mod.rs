//! Behavior primitives, one per landmark category.

mod context;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{angle_diff, Cardinal, Point2, Pose};
use crate::memory::{CardinalDirections, LandmarkCategory, MemoryError};
use crate::nav::{standoff_pose, NavError, DOOR_STANDOFF, PERSON_STANDOFF, SIGN_STANDOFF};
use crate::policy::protocol::{
    format_sign_reply, parse_interaction_reply, parse_label_reply, parse_note_reply,
    parse_sign_reply, LabelValue, ReadResult,
};
use crate::world::{
    line_of_sight, parse_spoken_direction, respond, DetectionCategory, DoorSpec, InteractionType,
    RelativeDirection, REFUSAL,
};

pub use context::{describe_truth, EpisodeContext, Event, EventKind, RobotGoal, SimConfig};

/// Distance (m) from the door landmark within which a label detection is
/// attributed to it.
pub const LABEL_SEARCH_RADIUS: f64 = 1.0;
/// Reading distance in front of a label.
pub const LABEL_READ_STANDOFF: f64 = 0.5;
pub const LABEL_READ_RANGE: f64 = 0.75;
pub const LABEL_READ_HALF_ANGLE_DEG: f64 = 30.0;
/// A landmark is matched to a ground-truth entity within this radius.
pub const TRUTH_MATCH_RADIUS: f64 = 1.0;
/// Slack on the interaction radius for grid-snapped standoff cells.
pub const INTERACTION_SLACK: f64 = 0.3;
/// Signs are legible within this angle of their face normal.
pub const SIGN_READ_HALF_ANGLE_DEG: f64 = 75.0;
pub const SIGN_READ_RANGE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Unreachable,
    NoStandoff,
    Collision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeKind {
    Explored,
    LabelRead {
        text: String,
    },
    /// `label` equals the robot's goal room; `truth` is the label actually
    /// on that door, if any.
    GoalFound {
        label: String,
        truth: Option<String>,
    },
    SignRead {
        directions: CardinalDirections,
    },
    InfoRecorded {
        text: String,
    },
    NoInformation,
    Failed {
        reason: FailureReason,
    },
}

impl OutcomeKind {
    pub fn name(&self) -> &'static str {
        match self {
            OutcomeKind::Explored => "explored",
            OutcomeKind::LabelRead { .. } => "label_read",
            OutcomeKind::GoalFound { .. } => "goal_found",
            OutcomeKind::SignRead { .. } => "sign_read",
            OutcomeKind::InfoRecorded { .. } => "info_recorded",
            OutcomeKind::NoInformation => "no_information",
            OutcomeKind::Failed { .. } => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveOutcome {
    pub kind: OutcomeKind,
    pub distance: f64,
    pub elapsed: f64,
    pub events: Vec<Event>,
}

/// Snaps `heading + offset(relative)` to the nearest of the eight compass
/// bins. Exact ties go to the bin listed first in [`Cardinal::ALL`].
pub fn bin_relative_to_cardinal(relative: RelativeDirection, heading_yaw: f64) -> Cardinal {
    let absolute = heading_yaw + relative.offset();
    let mut best = Cardinal::North;
    let mut best_gap = f64::INFINITY;
    for bin in Cardinal::ALL {
        let gap = angle_diff(absolute, bin.yaw()).abs();
        if gap < best_gap - 1e-9 {
            best = bin;
            best_gap = gap;
        }
    }
    best
}

/// Replaces one digit of `text` with a different digit.
pub fn corrupt_digit(text: &str, rng: &mut impl Rng) -> Option<String> {
    let positions: Vec<usize> = text
        .char_indices()
        .filter(|(_, c)| c.is_ascii_digit())
        .map(|(i, _)| i)
        .collect();
    if positions.is_empty() {
        return None;
    }
    let at = positions[rng.random_range(0..positions.len())];
    let old = text.as_bytes()[at] - b'0';
    let new = (old + rng.random_range(1..10u8)) % 10;
    let mut out = text.to_string();
    out.replace_range(at..at + 1, &char::from(b'0' + new).to_string());
    Some(out)
}

/// Simulated label read by the vision model. Sees `door`'s label only from
/// within [`LABEL_READ_RANGE`], in front of the label, and facing it within
/// [`LABEL_READ_HALF_ANGLE_DEG`]; otherwise reports "not visible".
pub fn read_label(door: Option<&DoorSpec>, pose: Pose, ocr_error_rate: f64, rng: &mut impl Rng) -> ReadResult {
    let visible = door.and_then(|d| {
        let text = d.label_text.as_ref()?;
        let offset = pose.position() - d.position;
        let in_range = offset.norm() <= LABEL_READ_RANGE;
        let in_front = d.label_visible_from.contains(offset.angle());
        let facing = angle_diff(pose.yaw, d.label_visible_from.center + std::f64::consts::PI).abs()
            <= LABEL_READ_HALF_ANGLE_DEG.to_radians() + 1e-9;
        (in_range && in_front && facing).then_some(text)
    });
    let Some(text) = visible else {
        return ReadResult {
            value: LabelValue::NotVisible,
            confidence: rng.random_range(0.9..=1.0),
        };
    };
    if ocr_error_rate > 0.0 && rng.random_bool(ocr_error_rate.min(1.0)) {
        if rng.random_bool(0.5) {
            if let Some(wrong) = corrupt_digit(text, rng) {
                return ReadResult {
                    value: LabelValue::Number(wrong),
                    confidence: rng.random_range(0.3..=0.6),
                };
            }
        }
        return ReadResult {
            value: LabelValue::Unreadable,
            confidence: rng.random_range(0.1..=0.4),
        };
    }
    ReadResult {
        value: LabelValue::Number(text.clone()),
        confidence: rng.random_range(0.9..=1.0),
    }
}

/// Interaction type the choice prompt asks for: a goal when there is none,
/// the directory for an occupant name, directions otherwise.
pub fn interaction_for(goal: &RobotGoal) -> InteractionType {
    match goal {
        RobotGoal::Unknown => InteractionType::OfferHelp,
        RobotGoal::Occupant(_) => InteractionType::AskDirectory,
        RobotGoal::Room(_) => InteractionType::AskDirections,
    }
}

pub fn robot_utterance(interaction: InteractionType, goal: &RobotGoal) -> String {
    match interaction {
        InteractionType::OfferHelp => "Hi, I am a delivery robot! How can I help you?".to_string(),
        InteractionType::AskDirections => format!("Hi, I am a delivery robot! Do you know where {goal} is?"),
        InteractionType::AskDirectory => {
            format!("Hi, I am a delivery robot! Do you know which room # {goal} is in?")
        }
    }
}

pub fn direction_note(room: &str, bin: Cardinal, meters: u32) -> String {
    format!(
        "Note: Room {room} is to the {}, about {meters} meters away from where I met this person.",
        bin.name()
    )
}

/// Room and compass bin of a note written by [`direction_note`].
pub fn parse_direction_note(note: &str) -> Option<(String, Cardinal)> {
    let rest = note.strip_prefix("Note: Room ")?;
    let (room, rest) = rest.split_once(" is to the ")?;
    let name = rest.split(',').next()?.trim();
    Some((room.to_string(), Cardinal::from_name(name)?))
}

/// Goal stated in an offer-help reply.
pub fn parse_task_reply(reply: &str) -> Option<RobotGoal> {
    let rest = reply.split("deliver this to ").nth(1)?;
    let target = rest.trim_end_matches(['?', '.', '!']).trim();
    match target.strip_prefix("Room ") {
        Some(room) => Some(RobotGoal::Room(room.to_string())),
        None if !target.is_empty() => Some(RobotGoal::Occupant(target.to_string())),
        None => None,
    }
}

/// Room number in a directory reply like `Dr. Lee is in Room 3012.`
pub fn parse_directory_reply(reply: &str) -> Option<String> {
    let rest = reply.split(" is in Room ").nth(1)?;
    let room = rest.trim_end_matches(['?', '.', '!']).trim();
    (!room.is_empty()).then(|| room.to_string())
}

fn check_category(
    ctx: &EpisodeContext<'_>,
    index: u32,
    category: LandmarkCategory,
    operation: &'static str,
) -> Result<(), MemoryError> {
    let landmark = ctx.bank.get(index).ok_or(MemoryError::UnknownIndex(index))?;
    if landmark.category != category {
        return Err(MemoryError::CategoryMismatch {
            index,
            category: landmark.category,
            operation,
        });
    }
    Ok(())
}

/// Runs `body`, marks the landmark visited once and packages the outcome.
fn run<F>(
    ctx: &mut EpisodeContext<'_>,
    index: u32,
    category: LandmarkCategory,
    name: &'static str,
    body: F,
) -> Result<PrimitiveOutcome, MemoryError>
where
    F: FnOnce(&mut EpisodeContext<'_>) -> OutcomeKind,
{
    check_category(ctx, index, category, name)?;
    let (clock, distance, first_event) = (ctx.clock, ctx.distance, ctx.events().len());
    ctx.log(EventKind::PrimitiveStart {
        primitive: name.to_string(),
        index,
    });
    let kind = body(ctx);
    ctx.bank.mark_visited(index)?;
    ctx.log(EventKind::Outcome {
        index,
        outcome: kind.name().to_string(),
    });
    Ok(PrimitiveOutcome {
        kind,
        distance: ctx.distance - distance,
        elapsed: ctx.clock - clock,
        events: ctx.events()[first_event..].to_vec(),
    })
}

fn nav_failure(ctx: &mut EpisodeContext<'_>, index: u32, error: &NavError) -> OutcomeKind {
    ctx.log(EventKind::Unreachable {
        index,
        reason: error.to_string(),
    });
    let reason = match error {
        NavError::NoStandoff(_) => FailureReason::NoStandoff,
        _ => FailureReason::Unreachable,
    };
    OutcomeKind::Failed { reason }
}

/// Drives to a standoff pose in front of `target`. `Err` carries the
/// failure outcome.
#[allow(clippy::result_large_err)]
fn approach(
    ctx: &mut EpisodeContext<'_>,
    index: u32,
    target: Point2,
    approach_yaw: f64,
    standoff: f64,
) -> Result<(), OutcomeKind> {
    let mask = ctx.obstacle_mask();
    let pose = standoff_pose(&ctx.grid, &mask, target, approach_yaw, standoff, ctx.pose.position())
        .map_err(|e| nav_failure(ctx, index, &e))?;
    let outcome = ctx
        .travel_to(pose.position(), Some(pose.yaw))
        .map_err(|e| nav_failure(ctx, index, &e))?;
    if outcome.collided {
        return Err(OutcomeKind::Failed {
            reason: FailureReason::Collision,
        });
    }
    Ok(())
}

fn flag_false_detection(ctx: &mut EpisodeContext<'_>, index: u32, category: LandmarkCategory, position: Point2) {
    let truth = describe_truth(ctx.scenario, category, position);
    ctx.log(EventKind::FalseDetection { index, category, truth });
}

/// Drives to the frontier midpoint and turns a full circle while sensing.
pub fn execute_frontier(ctx: &mut EpisodeContext<'_>, index: u32) -> Result<PrimitiveOutcome, MemoryError> {
    run(ctx, index, LandmarkCategory::Frontier, "frontier", |ctx| {
        let target = ctx.bank.get(index).expect("checked").position;
        match ctx.travel_to(target, None) {
            Err(e) => return nav_failure(ctx, index, &e),
            Ok(o) if o.collided => {
                return OutcomeKind::Failed {
                    reason: FailureReason::Collision,
                }
            }
            Ok(_) => {}
        }
        ctx.scan_360();
        OutcomeKind::Explored
    })
}

/// Approaches a door, looks for its room label and reads it.
pub fn execute_door(ctx: &mut EpisodeContext<'_>, index: u32) -> Result<PrimitiveOutcome, MemoryError> {
    run(ctx, index, LandmarkCategory::Door, "door", |ctx| {
        let landmark = ctx.bank.get(index).expect("checked").clone();
        if let Err(kind) = approach(ctx, index, landmark.position, landmark.approach_yaw, DOOR_STANDOFF) {
            return kind;
        }

        // Pan the camera across the door looking for a room label.
        let base_yaw = ctx.pose.yaw;
        let pans = ctx.sim.label_pans.clone();
        let mut label: Option<Point2> = None;
        let mut best = f64::INFINITY;
        let mut swept = 0.0;
        let mut previous = 0.0;
        for &pan in &pans {
            swept += (pan - previous).abs();
            previous = pan;
            ctx.frame_index += 1;
            for event in ctx.detect(base_yaw + pan, DetectionCategory::RoomLabel) {
                let d = event.position.dist(landmark.position);
                if d <= LABEL_SEARCH_RADIUS && d < best {
                    best = d;
                    label = Some(event.position);
                }
            }
        }
        swept += previous.abs();
        ctx.charge("label_search", swept / ctx.scenario.clock_costs.angular_speed);

        let truth_door = ctx
            .scenario
            .doors
            .iter()
            .filter(|d| d.position.dist(landmark.position) <= TRUTH_MATCH_RADIUS)
            .min_by(|a, b| {
                a.position
                    .dist(landmark.position)
                    .total_cmp(&b.position.dist(landmark.position))
            })
            .cloned();
        if truth_door.is_none() {
            flag_false_detection(ctx, index, LandmarkCategory::Door, landmark.position);
        }
        let Some(label_position) = label else {
            ctx.log(EventKind::LabelMissing { index });
            return OutcomeKind::NoInformation;
        };
        if let Err(kind) = approach(ctx, index, label_position, landmark.approach_yaw, LABEL_READ_STANDOFF) {
            return kind;
        }

        // The model sees whichever real label is in front of the camera.
        let pose = ctx.pose;
        let seen = ctx
            .scenario
            .doors
            .iter()
            .filter(|d| d.label_text.is_some())
            .min_by(|a, b| {
                a.position
                    .dist(pose.position())
                    .total_cmp(&b.position.dist(pose.position()))
            })
            .cloned();
        for _attempt in 0..2 {
            let result = read_label(seen.as_ref(), pose, ctx.sim.ocr_error_rate, &mut ctx.rng);
            let reply = result.to_reply();
            ctx.charge("vlm_read_label", ctx.scenario.clock_costs.vlm_call);
            ctx.log(EventKind::LabelRead {
                index,
                reply: reply.clone(),
                truth: truth_door.as_ref().and_then(|d| d.label_text.clone()),
            });
            let parsed = parse_label_reply(&reply).expect("simulated reply is well formed");
            if let LabelValue::Number(text) = parsed.value {
                if ctx.goal.room() == Some(text.as_str()) {
                    let truth = seen.as_ref().and_then(|d| d.label_text.clone());
                    ctx.bank.attach_label(index, &text).expect("door landmark");
                    return OutcomeKind::GoalFound { label: text, truth };
                }
                ctx.bank.attach_label(index, &text).expect("door landmark");
                return OutcomeKind::LabelRead { text };
            }
        }
        OutcomeKind::NoInformation
    })
}

/// Approaches a sign and records its entries by compass bin.
pub fn execute_sign(ctx: &mut EpisodeContext<'_>, index: u32) -> Result<PrimitiveOutcome, MemoryError> {
    run(ctx, index, LandmarkCategory::Sign, "sign", |ctx| {
        let landmark = ctx.bank.get(index).expect("checked").clone();
        if let Err(kind) = approach(ctx, index, landmark.position, landmark.approach_yaw, SIGN_STANDOFF) {
            return kind;
        }
        let pose = ctx.pose;
        let scenario = ctx.scenario;
        let tolerance = scenario.map.resolution() * 0.75;
        let sign = scenario
            .signs
            .iter()
            .filter(|s| s.position.dist(landmark.position) <= TRUTH_MATCH_RADIUS)
            .find(|s| {
                let offset = pose.position() - s.position;
                offset.norm() <= SIGN_READ_RANGE
                    && angle_diff(offset.angle(), s.facing_yaw).abs()
                        <= SIGN_READ_HALF_ANGLE_DEG.to_radians()
                    && line_of_sight(scenario, pose.position(), s.position, tolerance)
            });
        let reply = match sign {
            None => {
                flag_false_detection(ctx, index, LandmarkCategory::Sign, landmark.position);
                "-1".to_string()
            }
            Some(sign) => {
                let mut entries = sign.entries.clone();
                if ctx.sim.ocr_error_rate > 0.0 {
                    for (_, text) in entries.iter_mut() {
                        if ctx.rng.random_bool(ctx.sim.ocr_error_rate.min(1.0)) {
                            if let Some(wrong) = corrupt_digit(text, &mut ctx.rng) {
                                *text = wrong;
                            }
                        }
                    }
                }
                format_sign_reply(&entries)
            }
        };
        ctx.charge("vlm_read_sign", ctx.scenario.clock_costs.vlm_call);
        ctx.log(EventKind::SignRead {
            index,
            reply: reply.clone(),
        });
        let entries = parse_sign_reply(&reply).expect("simulated reply is well formed");
        if entries.is_empty() {
            return OutcomeKind::NoInformation;
        }
        let heading = sign.expect("entries come from a sign").reader_heading();
        let mut directions = CardinalDirections::new();
        for (relative, text) in entries {
            directions.push(bin_relative_to_cardinal(relative, heading), text);
        }
        ctx.bank
            .attach_directions(index, directions.clone())
            .expect("sign landmark");
        OutcomeKind::SignRead { directions }
    })
}

/// Approaches a person, asks a question chosen from the current goal and
/// records a note.
pub fn execute_person(ctx: &mut EpisodeContext<'_>, index: u32) -> Result<PrimitiveOutcome, MemoryError> {
    run(ctx, index, LandmarkCategory::Person, "person", |ctx| {
        let landmark = ctx.bank.get(index).expect("checked").clone();
        if let Err(kind) = approach(ctx, index, landmark.position, landmark.approach_yaw, PERSON_STANDOFF) {
            return kind;
        }
        let pose = ctx.pose;
        let scenario = ctx.scenario;
        let npc = scenario
            .npcs
            .iter()
            .filter(|n| n.position.dist(landmark.position) <= TRUTH_MATCH_RADIUS)
            .min_by(|a, b| {
                a.position
                    .dist(landmark.position)
                    .total_cmp(&b.position.dist(landmark.position))
            });
        if npc.is_none() {
            flag_false_detection(ctx, index, LandmarkCategory::Person, landmark.position);
        }
        let npc = npc.filter(|n| {
            n.position.dist(pose.position()) <= scenario.interaction_radius + INTERACTION_SLACK
        });

        let interaction_reply = interaction_for(&ctx.goal).number().to_string();
        ctx.charge("vlm_interaction_type", scenario.clock_costs.vlm_call);
        let interaction = parse_interaction_reply(&interaction_reply).expect("simulated reply is well formed");
        let question = robot_utterance(interaction, &ctx.goal);
        ctx.log(EventKind::Utterance {
            speaker: "robot".into(),
            text: question,
        });

        let Some(npc) = npc else {
            let note = format!("Note: No response from this person about {}. No information gained.", ctx.goal);
            ctx.charge("vlm_note", scenario.clock_costs.vlm_call);
            ctx.bank.attach_info(index, &note).expect("person landmark");
            ctx.log(EventKind::Note { index, text: note });
            return OutcomeKind::NoInformation;
        };

        let asked = match &ctx.goal {
            RobotGoal::Room(room) => room.clone(),
            RobotGoal::Occupant(name) => name.clone(),
            RobotGoal::Unknown => String::new(),
        };
        let misinformed = interaction == InteractionType::AskDirections
            && ctx.sim.npc_error_rate > 0.0
            && ctx.rng.random_bool(ctx.sim.npc_error_rate.min(1.0));
        let reply = respond(scenario, npc, interaction, &asked, pose, misinformed);
        ctx.charge("conversation", scenario.clock_costs.npc_exchange);
        ctx.log(EventKind::Utterance {
            speaker: format!("person {}", npc.id),
            text: reply.clone(),
        });

        let goal_before = ctx.goal.clone();
        let (note, informative) = if reply == REFUSAL {
            (
                format!("Note: This person did not know where {goal_before} is. No information gained."),
                false,
            )
        } else {
            match interaction {
                InteractionType::OfferHelp => match parse_task_reply(&reply) {
                    Some(goal) => {
                        ctx.goal = goal.clone();
                        ctx.log(EventKind::GoalUpdated { goal: goal.clone() });
                        (format!("Note: This person asked me to deliver to {goal}."), true)
                    }
                    None => ("Note: The reply did not state a task. No information gained.".into(), false),
                },
                InteractionType::AskDirectory => match parse_directory_reply(&reply) {
                    Some(room) => {
                        let goal = RobotGoal::Room(room.clone());
                        ctx.goal = goal.clone();
                        ctx.log(EventKind::GoalUpdated { goal });
                        (format!("Note: {goal_before} is in Room {room}."), true)
                    }
                    None => (
                        format!("Note: This person did not know where {goal_before} is. No information gained."),
                        false,
                    ),
                },
                InteractionType::AskDirections => {
                    let room = reply
                        .strip_prefix("Room ")
                        .and_then(|r| r.split(" is ").next())
                        .unwrap_or(&asked)
                        .to_string();
                    let meters = reply
                        .split("about ")
                        .nth(1)
                        .and_then(|r| r.split(' ').next())
                        .and_then(|m| m.parse::<u32>().ok())
                        .unwrap_or(5);
                    match parse_spoken_direction(&reply) {
                        Some(relative) => {
                            let bin = bin_relative_to_cardinal(relative, pose.yaw);
                            if let Some(door) = scenario.door_with_label(&room) {
                                let bearing = (door.position - pose.position()).angle();
                                let error = angle_diff(bin.yaw(), bearing).abs();
                                if error > std::f64::consts::FRAC_PI_2 {
                                    ctx.log(EventKind::HumanMisinformation {
                                        npc: npc.id,
                                        claimed: bin.name().to_string(),
                                        bearing_error_deg: error.to_degrees(),
                                    });
                                }
                            }
                            (direction_note(&room, bin, meters), true)
                        }
                        None => (
                            format!("Note: This person did not know where {goal_before} is. No information gained."),
                            false,
                        ),
                    }
                }
            }
        };
        ctx.charge("vlm_note", scenario.clock_costs.vlm_call);
        let note = parse_note_reply(&note).expect("simulated note is well formed");
        ctx.bank.attach_info(index, &note).expect("person landmark");
        ctx.log(EventKind::Note {
            index,
            text: note.clone(),
        });
        if informative {
            OutcomeKind::InfoRecorded { text: note }
        } else {
            OutcomeKind::NoInformation
        }
    })
}

/// Dispatches on the landmark's category.
pub fn execute(ctx: &mut EpisodeContext<'_>, index: u32) -> Result<PrimitiveOutcome, MemoryError> {
    let category = ctx
        .bank
        .get(index)
        .ok_or(MemoryError::UnknownIndex(index))?
        .category;
    match category {
        LandmarkCategory::Frontier => execute_frontier(ctx, index),
        LandmarkCategory::Door => execute_door(ctx, index),
        LandmarkCategory::Sign => execute_sign(ctx, index),
        LandmarkCategory::Person => execute_person(ctx, index),
    }
}

//! Mutable episode state shared by the primitives and the episode loop.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::frontier::{extract_frontiers, DEFAULT_MIN_SEGMENT_LENGTH};
use crate::geom::{Point2, Pose};
use crate::mapping::{dilate_obstacles, BinaryMask, OccupancyGrid};
use crate::memory::{filter_detection, FilterDecision, LandmarkCategory, MemoryBank, MemorySettings};
use crate::nav::{follow_path, inflation_radius, motion_time, plan_path, FollowOutcome, NavError};
use crate::world::{
    raycast_scan, simulate_detections_with, Camera, DetectionCategory, DetectionEvent,
    DetectionModel, EntitySource, GoalTarget, Scenario, LIDAR_RANGE, LIDAR_RAYS,
};

/// Sensing and noise settings for one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub camera: Camera,
    pub detection: DetectionModel,
    pub memory: MemorySettings,
    pub lidar_rays: usize,
    pub lidar_range: f64,
    /// Meters between captures while driving.
    pub capture_spacing: f64,
    /// Camera pans (rad) per capture while driving.
    pub travel_pans: Vec<f64>,
    /// Stops in a full in-place turn.
    pub scan_stops: usize,
    pub frames_per_stop: usize,
    /// Camera pans (rad) while searching a door for its label.
    pub label_pans: Vec<f64>,
    /// When false, sign and person queries are never run.
    pub detect_signs_people: bool,
    pub ocr_error_rate: f64,
    /// Probability that a person gives a reversed direction.
    pub npc_error_rate: f64,
    /// Standard deviation (m) of the pose error injected into mapping.
    pub pose_noise_sigma: f64,
    /// Injected pose errors above this are logged.
    pub pose_error_bound: f64,
    pub min_frontier_length: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let deg = |d: f64| d.to_radians();
        Self {
            camera: Camera::default(),
            detection: DetectionModel::default(),
            memory: MemorySettings::default(),
            lidar_rays: LIDAR_RAYS,
            lidar_range: LIDAR_RANGE,
            capture_spacing: 1.0,
            travel_pans: vec![deg(-60.0), 0.0, deg(60.0)],
            scan_stops: 8,
            frames_per_stop: 3,
            label_pans: vec![deg(-60.0), deg(-30.0), 0.0, deg(30.0), deg(60.0)],
            detect_signs_people: true,
            ocr_error_rate: 0.0,
            npc_error_rate: 0.0,
            pose_noise_sigma: 0.0,
            pose_error_bound: 0.3,
            min_frontier_length: DEFAULT_MIN_SEGMENT_LENGTH,
        }
    }
}

/// What the robot currently believes it has to find.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum RobotGoal {
    Unknown,
    Room(String),
    Occupant(String),
}

impl RobotGoal {
    pub fn from_target(target: &GoalTarget) -> Self {
        match target {
            GoalTarget::Room(room) => RobotGoal::Room(room.clone()),
            GoalTarget::Occupant(name) => RobotGoal::Occupant(name.clone()),
        }
    }

    pub fn room(&self) -> Option<&str> {
        match self {
            RobotGoal::Room(room) => Some(room),
            _ => None,
        }
    }
}

impl fmt::Display for RobotGoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RobotGoal::Unknown => f.write_str("unknown"),
            RobotGoal::Room(room) => write!(f, "Room {room}"),
            RobotGoal::Occupant(name) => f.write_str(name),
        }
    }
}

/// One entry of the episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Simulated clock when the entry was written.
    pub t: f64,
    pub step: u32,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    EpisodeStart {
        scenario: String,
        seed: u64,
        config: String,
        goal: RobotGoal,
    },
    Charge {
        reason: String,
        seconds: f64,
        clock: f64,
    },
    Promoted {
        index: u32,
        category: LandmarkCategory,
        position: [f64; 2],
        /// Ground-truth entity nearby, for diagnostics only.
        truth: String,
    },
    GoalDoorSighted {
        door: u32,
    },
    GoalDoorMissed {
        door: u32,
    },
    Decision {
        planner: String,
        index: u32,
        name: String,
        rationale: String,
    },
    ChoiceRejected {
        reason: String,
    },
    VisitedChoice {
        index: u32,
    },
    PolicyFailure {
        message: String,
    },
    Exhausted,
    PrimitiveStart {
        primitive: String,
        index: u32,
    },
    Move {
        from: [f64; 2],
        to: [f64; 2],
        distance: f64,
        rotation: f64,
    },
    Collision {
        position: [f64; 2],
    },
    Unreachable {
        index: u32,
        reason: String,
    },
    FalseDetection {
        index: u32,
        category: LandmarkCategory,
        truth: String,
    },
    LabelMissing {
        index: u32,
    },
    LabelRead {
        index: u32,
        reply: String,
        truth: Option<String>,
    },
    SignRead {
        index: u32,
        reply: String,
    },
    Utterance {
        speaker: String,
        text: String,
    },
    Note {
        index: u32,
        text: String,
    },
    HumanMisinformation {
        npc: u32,
        claimed: String,
        bearing_error_deg: f64,
    },
    GoalUpdated {
        goal: RobotGoal,
    },
    PoseError {
        error: f64,
    },
    Outcome {
        index: u32,
        outcome: String,
    },
    EpisodeEnd {
        success: bool,
        reason: String,
        duration: f64,
        distance: f64,
        steps: u32,
    },
}

fn xy(p: Point2) -> [f64; 2] {
    [p.x, p.y]
}

pub struct EpisodeContext<'a> {
    pub scenario: &'a Scenario,
    pub sim: SimConfig,
    pub pose: Pose,
    pub grid: OccupancyGrid,
    pub bank: MemoryBank,
    pub goal: RobotGoal,
    /// Simulated seconds since the start.
    pub clock: f64,
    /// Meters driven.
    pub distance: f64,
    /// Planner decisions so far.
    pub step: u32,
    pub frame_index: u64,
    /// Capture positions, for debug overlays.
    pub trajectory: Vec<Point2>,
    pub rng: ChaCha8Rng,
    events: Vec<Event>,
    goal_door_sighted: bool,
}

impl<'a> EpisodeContext<'a> {
    pub fn new(scenario: &'a Scenario, sim: SimConfig, seed: u64) -> Self {
        let goal = if scenario.goal.announced {
            RobotGoal::from_target(&scenario.goal.target)
        } else {
            RobotGoal::Unknown
        };
        Self {
            scenario,
            pose: scenario.start_pose,
            grid: OccupancyGrid::new(scenario.map.resolution()),
            bank: MemoryBank::with_settings(sim.memory),
            sim,
            goal,
            clock: 0.0,
            distance: 0.0,
            step: 0,
            frame_index: 0,
            trajectory: vec![scenario.start_pose.position()],
            rng: ChaCha8Rng::seed_from_u64(seed),
            events: Vec::new(),
            goal_door_sighted: false,
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn log(&mut self, kind: EventKind) {
        self.events.push(Event {
            t: self.clock,
            step: self.step,
            kind,
        });
    }

    /// Advances the clock and logs the charge.
    pub fn charge(&mut self, reason: &str, seconds: f64) {
        debug_assert!(seconds >= 0.0);
        self.clock += seconds;
        self.log(EventKind::Charge {
            reason: reason.to_string(),
            seconds,
            clock: self.clock,
        });
    }

    pub fn goal_door_sighted(&self) -> bool {
        self.goal_door_sighted
    }

    pub fn inflation(&self) -> f64 {
        inflation_radius(self.scenario.footprint_radius)
    }

    pub fn obstacle_mask(&self) -> BinaryMask {
        dilate_obstacles(&self.grid, self.inflation())
    }

    /// Lidar scan from the current pose into the map, with injected pose
    /// error when configured.
    pub fn integrate_scan(&mut self) {
        let Ok(mut scan) = raycast_scan(self.scenario, self.pose, self.sim.lidar_rays, self.sim.lidar_range)
        else {
            return;
        };
        if self.sim.pose_noise_sigma > 0.0 {
            let normal = Normal::new(0.0, self.sim.pose_noise_sigma).expect("finite sigma");
            let offset = Point2::new(normal.sample(&mut self.rng), normal.sample(&mut self.rng));
            scan.pose = Pose::new(scan.pose.x + offset.x, scan.pose.y + offset.y, scan.pose.yaw);
            if offset.norm() > self.sim.pose_error_bound {
                self.log(EventKind::PoseError { error: offset.norm() });
            }
        }
        self.grid.integrate_scan(&scan);
    }

    fn queries(&self) -> Vec<DetectionCategory> {
        if self.sim.detect_signs_people {
            vec![DetectionCategory::Door, DetectionCategory::Person, DetectionCategory::Sign]
        } else {
            vec![DetectionCategory::Door]
        }
    }

    /// Runs the detector for `category` on a new frame at the given camera
    /// heading and returns the events that pass the filter.
    pub fn detect(&mut self, camera_yaw: f64, category: DetectionCategory) -> Vec<DetectionEvent> {
        let pose = Pose::new(self.pose.x, self.pose.y, camera_yaw);
        let raw = simulate_detections_with(
            self.scenario,
            pose,
            &self.sim.camera,
            category,
            &self.sim.detection,
            self.frame_index,
            &mut self.rng,
        );
        raw.into_iter()
            .filter(|e| filter_detection(e) == FilterDecision::Accept)
            .collect()
    }

    /// One camera frame: every enabled query, filtered and ingested.
    pub fn capture_frame(&mut self, camera_yaw: f64) {
        self.frame_index += 1;
        let mut accepted = Vec::new();
        for category in self.queries() {
            let pose = Pose::new(self.pose.x, self.pose.y, camera_yaw);
            let raw = simulate_detections_with(
                self.scenario,
                pose,
                &self.sim.camera,
                category,
                &self.sim.detection,
                self.frame_index,
                &mut self.rng,
            );
            for event in raw {
                if !self.goal_door_sighted {
                    if let (EntitySource::Door(id), Some(goal)) = (event.source, self.scenario.goal_room()) {
                        let is_goal = self
                            .scenario
                            .door_with_label(goal)
                            .is_some_and(|d| d.id == id);
                        if is_goal {
                            self.goal_door_sighted = true;
                            self.log(EventKind::GoalDoorSighted { door: id });
                        }
                    }
                }
                if filter_detection(&event) == FilterDecision::Accept {
                    accepted.push(event);
                }
            }
        }
        let report = self.bank.ingest_frame(&accepted, self.frame_index);
        for index in report.promoted {
            let landmark = self.bank.get(index).expect("promoted landmark exists");
            let (category, position) = (landmark.category, landmark.position);
            let truth = describe_truth(self.scenario, category, position);
            self.log(EventKind::Promoted {
                index,
                category,
                position: xy(position),
                truth,
            });
        }
    }

    /// Scan plus one frame per pan.
    pub fn sense(&mut self, pans: &[f64]) {
        self.integrate_scan();
        for &pan in pans {
            self.capture_frame(self.pose.yaw + pan);
        }
    }

    /// Sensing on arrival or between decisions, with the travel pans.
    pub fn sense_here(&mut self) {
        let pans = self.sim.travel_pans.clone();
        self.sense(&pans);
    }

    /// Full turn in place with a scan and several frames at each stop.
    pub fn scan_360(&mut self) {
        let stops = self.sim.scan_stops.max(1);
        let start_yaw = self.pose.yaw;
        for k in 0..stops {
            let yaw = start_yaw + std::f64::consts::TAU * k as f64 / stops as f64;
            self.pose = Pose::new(self.pose.x, self.pose.y, yaw);
            self.integrate_scan();
            for _ in 0..self.sim.frames_per_stop {
                self.capture_frame(self.pose.yaw);
            }
        }
        self.pose = Pose::new(self.pose.x, self.pose.y, start_yaw);
        self.charge("scan_360", self.scenario.clock_costs.scan_360);
    }

    /// Replaces the frontier landmarks from the current map.
    pub fn refresh_frontiers(&mut self) -> Vec<u32> {
        let mask = self.obstacle_mask();
        let frontiers = extract_frontiers(&self.grid, &mask, self.sim.min_frontier_length);
        self.bank.refresh_frontiers(&frontiers)
    }

    /// Plans to `goal`, drives there sensing every capture spacing, then
    /// turns to `final_yaw`. Motion time is charged even when the drive
    /// ends in a collision.
    pub fn travel_to(&mut self, goal: Point2, final_yaw: Option<f64>) -> Result<FollowOutcome, NavError> {
        let mask = self.obstacle_mask();
        let path = plan_path(&self.grid, &mask, self.pose.position(), goal)?;
        let start = self.pose;
        let spacing = self.sim.capture_spacing;
        let mut captures = Vec::new();
        let mut next_capture = spacing;
        let outcome = follow_path(
            start,
            &path,
            &self.scenario.clock_costs,
            self.scenario,
            final_yaw,
            |pose, driven| {
                if driven + 1e-9 >= next_capture {
                    captures.push(pose);
                    while next_capture <= driven + 1e-9 {
                        next_capture += spacing;
                    }
                }
            },
        );
        for pose in captures {
            self.pose = pose;
            self.trajectory.push(pose.position());
            self.sense_here();
        }
        self.pose = outcome.pose;
        if self.trajectory.last() != Some(&outcome.pose.position()) {
            self.trajectory.push(outcome.pose.position());
        }
        self.distance += outcome.distance;
        self.log(EventKind::Move {
            from: xy(start.position()),
            to: xy(outcome.pose.position()),
            distance: outcome.distance,
            rotation: outcome.rotation,
        });
        self.charge("motion", outcome.elapsed);
        if outcome.collided {
            self.log(EventKind::Collision {
                position: xy(outcome.pose.position()),
            });
        }
        Ok(outcome)
    }

    /// Turns in place and charges the rotation time.
    pub fn turn_to(&mut self, yaw: f64) {
        let turn = crate::geom::angle_diff(yaw, self.pose.yaw).abs();
        self.pose = Pose::new(self.pose.x, self.pose.y, yaw);
        self.charge("rotation", motion_time(0.0, turn, &self.scenario.clock_costs));
    }
}

/// Names the ground-truth entity a landmark most plausibly came from.
pub fn describe_truth(scenario: &Scenario, category: LandmarkCategory, position: Point2) -> String {
    const RADIUS: f64 = 1.0;
    let nearest = |candidates: Vec<(Point2, String)>| {
        candidates
            .into_iter()
            .map(|(p, name)| (p.dist(position), name))
            .filter(|(d, _)| *d <= RADIUS)
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, name)| name)
    };
    let own: Vec<(Point2, String)> = match category {
        LandmarkCategory::Door => scenario
            .doors
            .iter()
            .map(|d| (d.position, format!("door {}", d.id)))
            .collect(),
        LandmarkCategory::Sign => scenario
            .signs
            .iter()
            .map(|s| (s.position, format!("sign {}", s.id)))
            .collect(),
        LandmarkCategory::Person => scenario
            .npcs
            .iter()
            .map(|n| (n.position, format!("person {}", n.id)))
            .collect(),
        LandmarkCategory::Frontier => return "frontier".to_string(),
    };
    nearest(own)
        .or_else(|| {
            nearest(
                scenario
                    .posters
                    .iter()
                    .map(|p| (p.position, format!("poster {}", p.id)))
                    .collect(),
            )
        })
        .unwrap_or_else(|| "clutter".to_string())
}

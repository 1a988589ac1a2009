//! Simulated 2D lidar and object detector.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{angle_diff, normalize_angle, traverse_cells, Point2, Pose};
use crate::world::Scenario;

pub const LIDAR_RAYS: usize = 720;
pub const LIDAR_RANGE: f64 = 5.0;

#[derive(Debug, Error, PartialEq)]
pub enum SensorError {
    #[error("sensor pose ({x:.2}, {y:.2}) is inside an obstacle")]
    InsideObstacle { x: f64, y: f64 },
    #[error("ray count must be at least 1")]
    NoRays,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRay {
    /// Map-frame bearing of the ray.
    pub angle: f64,
    /// Distance to the first opaque cell boundary, or `None` for a miss.
    pub range: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarScan {
    pub pose: Pose,
    pub max_range: f64,
    pub rays: Vec<ScanRay>,
}

/// Casts `ray_count` rays evenly spaced over a full turn, the first along
/// `pose.yaw`.
pub fn raycast_scan(
    scenario: &Scenario,
    pose: Pose,
    ray_count: usize,
    max_range: f64,
) -> Result<LidarScan, SensorError> {
    if ray_count == 0 {
        return Err(SensorError::NoRays);
    }
    let map = &scenario.map;
    let origin = pose.position();
    if map.is_opaque(map.cell_of(origin)) {
        return Err(SensorError::InsideObstacle { x: pose.x, y: pose.y });
    }
    let rays = (0..ray_count)
        .map(|i| {
            let angle = normalize_angle(pose.yaw + TAU * i as f64 / ray_count as f64);
            ScanRay {
                angle,
                range: cast_ray(scenario, origin, angle, max_range),
            }
        })
        .collect();
    Ok(LidarScan {
        pose,
        max_range,
        rays,
    })
}

/// Distance along the ray to the first opaque cell, if within `max_range`.
pub fn cast_ray(scenario: &Scenario, origin: Point2, angle: f64, max_range: f64) -> Option<f64> {
    let map = &scenario.map;
    let mut hit = None;
    traverse_cells(map.resolution(), origin, angle, max_range, |cell, t_enter, _| {
        if map.is_opaque(cell) {
            hit = Some(t_enter);
            false
        } else {
            true
        }
    });
    hit.filter(|&t| t <= max_range)
}

/// True when no opaque cell lies strictly between `from` and `to`. The
/// target's own cell and anything within `tolerance` of it are ignored so
/// that objects mounted on walls stay visible.
pub fn line_of_sight(scenario: &Scenario, from: Point2, to: Point2, tolerance: f64) -> bool {
    let distance = from.dist(to);
    if distance <= tolerance {
        return true;
    }
    let reach = distance - tolerance;
    cast_ray(scenario, from, (to - from).angle(), reach).is_none()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionCategory {
    Door,
    Person,
    Sign,
    RoomLabel,
}

impl DetectionCategory {
    /// Open-vocabulary text query used for this category.
    pub fn query(self) -> &'static str {
        match self {
            DetectionCategory::Door => "door",
            DetectionCategory::Person => "person",
            DetectionCategory::Sign => "directions sign",
            DetectionCategory::RoomLabel => "room label",
        }
    }
}

/// Ground-truth origin of a detection. Only diagnostics look at this; the
/// memory bank never does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "entity", content = "id", rename_all = "snake_case")]
pub enum EntitySource {
    Door(u32),
    Label(u32),
    Sign(u32),
    Npc(u32),
    Poster(u32),
    Clutter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub frame_index: u64,
    pub category: DetectionCategory,
    pub confidence: f64,
    pub box_width: f64,
    pub box_height: f64,
    pub position: Point2,
    pub approach_yaw: f64,
    pub source: EntitySource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub fov: f64,
    pub range: f64,
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            fov: 90f64.to_radians(),
            range: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..self.hi)
        } else {
            self.lo
        }
    }
}

/// Per-category distributions of synthetic detector output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryModel {
    pub confidence: Range,
    pub width: Range,
    pub height: Range,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    pub door: CategoryModel,
    pub person: CategoryModel,
    pub sign: CategoryModel,
    pub label: CategoryModel,
    /// Probability per query of one spurious event.
    pub clutter_rate: f64,
    /// Standard deviation of position noise per axis (m).
    pub position_sigma: f64,
    /// Room labels are small; they resolve only within this range.
    pub label_range: f64,
    /// Wall-mounted objects are visible within this angle of their normal.
    pub visibility_half_angle: f64,
}

impl Default for DetectionModel {
    fn default() -> Self {
        Self {
            door: CategoryModel {
                confidence: Range::new(0.2, 0.9),
                width: Range::new(0.7, 1.3),
                height: Range::new(1.8, 2.4),
            },
            person: CategoryModel {
                confidence: Range::new(0.2, 0.9),
                width: Range::new(0.4, 0.7),
                height: Range::new(1.5, 1.9),
            },
            sign: CategoryModel {
                confidence: Range::new(0.02, 0.2),
                width: Range::new(0.36, 0.49),
                height: Range::new(0.21, 0.49),
            },
            label: CategoryModel {
                confidence: Range::new(0.02, 0.2),
                width: Range::new(0.08, 0.35),
                height: Range::new(0.04, 0.14),
            },
            clutter_rate: 0.0,
            position_sigma: 0.05,
            label_range: 3.0,
            visibility_half_angle: 75f64.to_radians(),
        }
    }
}

impl DetectionModel {
    pub fn category(&self, category: DetectionCategory) -> &CategoryModel {
        match category {
            DetectionCategory::Door => &self.door,
            DetectionCategory::Person => &self.person,
            DetectionCategory::Sign => &self.sign,
            DetectionCategory::RoomLabel => &self.label,
        }
    }
}

struct Candidate {
    position: Point2,
    approach_yaw: f64,
    source: EntitySource,
    facing: Option<f64>,
}

fn candidates(scenario: &Scenario, category: DetectionCategory) -> Vec<Candidate> {
    match category {
        DetectionCategory::Door => scenario
            .doors
            .iter()
            .map(|d| Candidate {
                position: d.position,
                approach_yaw: d.yaw,
                source: EntitySource::Door(d.id),
                facing: Some(d.yaw),
            })
            .collect(),
        DetectionCategory::RoomLabel => scenario
            .doors
            .iter()
            .filter(|d| d.label_text.is_some())
            .map(|d| Candidate {
                position: d.position,
                approach_yaw: d.yaw,
                source: EntitySource::Label(d.id),
                facing: Some(d.label_visible_from.center),
            })
            .collect(),
        DetectionCategory::Sign => scenario
            .signs
            .iter()
            .map(|s| Candidate {
                position: s.position,
                approach_yaw: s.facing_yaw,
                source: EntitySource::Sign(s.id),
                facing: None,
            })
            .collect(),
        DetectionCategory::Person => scenario
            .npcs
            .iter()
            .map(|n| Candidate {
                position: n.position,
                approach_yaw: n.yaw,
                source: EntitySource::Npc(n.id),
                facing: None,
            })
            .collect(),
    }
}

fn in_view(
    scenario: &Scenario,
    pose: Pose,
    camera: &Camera,
    range: f64,
    half_angle: f64,
    position: Point2,
    facing: Option<f64>,
) -> bool {
    let origin = pose.position();
    let offset = position - origin;
    let distance = offset.norm();
    if distance > range || distance < 1e-9 {
        return false;
    }
    if angle_diff(offset.angle(), pose.yaw).abs() > camera.fov / 2.0 + 1e-12 {
        return false;
    }
    if let Some(normal) = facing {
        let toward_viewer = (origin - position).angle();
        if angle_diff(toward_viewer, normal).abs() > half_angle {
            return false;
        }
    }
    line_of_sight(scenario, origin, position, scenario.map.resolution() * 0.75)
}

/// Detections for one camera frame and one text query, with a fresh RNG
/// seeded from `rng_seed`.
pub fn simulate_detections(
    scenario: &Scenario,
    pose: Pose,
    camera: &Camera,
    category: DetectionCategory,
    model: &DetectionModel,
    frame_index: u64,
    rng_seed: u64,
) -> Vec<DetectionEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    simulate_detections_with(scenario, pose, camera, category, model, frame_index, &mut rng)
}

pub fn simulate_detections_with(
    scenario: &Scenario,
    pose: Pose,
    camera: &Camera,
    category: DetectionCategory,
    model: &DetectionModel,
    frame_index: u64,
    rng: &mut impl Rng,
) -> Vec<DetectionEvent> {
    let range = match category {
        DetectionCategory::RoomLabel => camera.range.min(model.label_range),
        _ => camera.range,
    };
    let noise = Normal::new(0.0, model.position_sigma.max(0.0)).expect("finite sigma");
    let stats = *model.category(category);
    let mut events = Vec::new();
    let mut emit = |rng: &mut dyn rand::RngCore, position: Point2, approach_yaw: f64, source| {
        let position = Point2::new(
            position.x + noise.sample(rng),
            position.y + noise.sample(rng),
        );
        let confidence = stats.confidence.sample(rng).clamp(0.0, 1.0);
        let box_width = stats.width.sample(rng).max(0.0);
        let box_height = stats.height.sample(rng).max(0.0);
        events.push(DetectionEvent {
            frame_index,
            category,
            confidence,
            box_width,
            box_height,
            position,
            approach_yaw,
            source,
        });
    };

    for candidate in candidates(scenario, category) {
        if in_view(
            scenario,
            pose,
            camera,
            range,
            model.visibility_half_angle,
            candidate.position,
            candidate.facing,
        ) {
            emit(rng, candidate.position, candidate.approach_yaw, candidate.source);
        }
    }

    if model.clutter_rate > 0.0 && rng.random_bool(model.clutter_rate.min(1.0)) {
        let posters: Vec<_> = scenario
            .posters
            .iter()
            .filter(|p| {
                in_view(
                    scenario,
                    pose,
                    camera,
                    range,
                    model.visibility_half_angle,
                    p.position,
                    Some(p.yaw),
                )
            })
            .collect();
        if posters.is_empty() {
            let bearing = pose.yaw + rng.random_range(-0.5..0.5) * camera.fov;
            let free = cast_ray(scenario, pose.position(), bearing, range).unwrap_or(range);
            let distance = rng.random_range(0.0..1.0) * free;
            let position = pose.position() + Point2::from_polar(distance, bearing);
            emit(rng, position, normalize_angle(bearing + std::f64::consts::PI), EntitySource::Clutter);
        } else {
            let poster = posters[rng.random_range(0..posters.len())];
            emit(rng, poster.position, poster.yaw, EntitySource::Poster(poster.id));
        }
    }
    events
}

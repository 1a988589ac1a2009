//! Ground-truth building, simulated sensors, people and kinematics.

mod motion;
mod npc;
mod scenario;
mod sensor;

pub use motion::{collision_radius, footprint_collides, step_motion};
pub use npc::{
    coarse_distance, npc_respond, parse_spoken_direction, relative_bin, respond, spoken_direction,
    InteractionType, REFUSAL,
};
pub use scenario::{
    cell_position, door, CellKind, ClockCosts, DoorSpec, GoalSpec, GoalTarget, NpcKind, NpcSpec,
    PosterSpec, RelativeDirection, Scenario, ScenarioError, SignSpec, WorldMap, YawInterval,
    DEFAULT_FOOTPRINT_RADIUS, DEFAULT_INTERACTION_RADIUS, DEFAULT_LABEL_HALF_ANGLE_DEG,
    DEFAULT_RESOLUTION,
};
pub use sensor::{
    cast_ray, line_of_sight, raycast_scan, simulate_detections, simulate_detections_with, Camera,
    CategoryModel, DetectionCategory, DetectionEvent, DetectionModel, EntitySource, LidarScan,
    Range, ScanRay, SensorError, LIDAR_RANGE, LIDAR_RAYS,
};

/// Parses and validates a scenario document.
pub fn load_scenario(document: &str) -> Result<Scenario, ScenarioError> {
    Scenario::parse(document)
}

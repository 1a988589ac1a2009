//! Rotate-then-translate kinematics with a disk footprint.

use crate::geom::{cell_center, CellIndex, Point2, Pose};
use crate::world::Scenario;

/// Clearance a wall cell is given on top of the footprint radius: the cell
/// is treated as the disk inscribed in it.
pub fn collision_radius(scenario: &Scenario) -> f64 {
    scenario.footprint_radius + scenario.map.resolution() / 2.0
}

/// True when the footprint centered at `point` overlaps an opaque cell.
pub fn footprint_collides(scenario: &Scenario, point: Point2) -> bool {
    let map = &scenario.map;
    let res = map.resolution();
    let radius = collision_radius(scenario);
    let reach = (radius / res).ceil() as i32 + 1;
    let center = map.cell_of(point);
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let cell = CellIndex::new(center.x + dx, center.y + dy);
            if map.is_opaque(cell) && cell_center(cell, res).dist(point) < radius {
                return true;
            }
        }
    }
    false
}

/// Applies `angular` (rad) then `linear` (m) along the new heading. On a
/// collision anywhere along the sweep the original pose is returned.
pub fn step_motion(pose: Pose, command: (f64, f64), scenario: &Scenario) -> (Pose, bool) {
    let (linear, angular) = command;
    let turned = Pose::new(pose.x, pose.y, pose.yaw + angular);
    if linear == 0.0 {
        return (turned, false);
    }
    let start = pose.position();
    let step = scenario.map.resolution() / 4.0;
    let samples = (linear.abs() / step).ceil().max(1.0) as usize;
    let heading = Point2::from_polar(linear, turned.yaw);
    for i in 1..=samples {
        let point = start + heading * (i as f64 / samples as f64);
        if footprint_collides(scenario, point) {
            return (pose, true);
        }
    }
    let end = start + heading;
    (Pose::new(end.x, end.y, turned.yaw), false)
}

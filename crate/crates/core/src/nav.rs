//! Grid path planning over the inflated occupancy map and waypoint tracking
//! against the ground-truth world.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{angle_diff, cell_center, CellIndex, Point2, Pose, Surd2};
use crate::mapping::{disk_offsets, BinaryMask, Occupancy, OccupancyGrid};
use crate::world::{step_motion, ClockCosts, Scenario};

/// Start and goal cells may be moved this far to reach traversable space.
pub const SNAP_RADIUS: f64 = 0.5;
pub const STANDOFF_FALLBACK_RADIUS: f64 = 2.0;
pub const DOOR_STANDOFF: f64 = 1.0;
pub const PERSON_STANDOFF: f64 = 1.5;
pub const SIGN_STANDOFF: f64 = 1.2;
/// Added to the footprint radius to get the inflation radius.
pub const INFLATION_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NavError {
    #[error("start ({x:.2}, {y:.2}) is inside an obstacle")]
    StartInObstacle { x: f64, y: f64 },
    #[error("goal is unreachable")]
    Unreachable,
    #[error("no reachable standoff pose within {0} m")]
    NoStandoff(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub cells: Vec<CellIndex>,
    pub waypoints: Vec<Point2>,
    /// Exact cost in cells.
    pub cost: Surd2,
    /// Meters.
    pub length: f64,
}

/// Neighbor expansion order: E, NE, N, NW, W, SW, S, SE.
const NEIGHBORS: [(i32, i32); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

pub fn traversable(grid: &OccupancyGrid, mask: &BinaryMask, cell: CellIndex) -> bool {
    grid.get(cell) == Occupancy::Free && !mask.get(cell)
}

/// Nearest traversable cell whose center is within `radius` of `point`'s
/// cell center; ties broken by row, then column.
pub fn snap_to_traversable(
    grid: &OccupancyGrid,
    mask: &BinaryMask,
    point: Point2,
    radius: f64,
) -> Option<CellIndex> {
    let center = grid.cell_of(point);
    if traversable(grid, mask, center) {
        return Some(center);
    }
    let mut offsets = disk_offsets(radius, grid.resolution());
    offsets.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dy, dx));
    offsets
        .into_iter()
        .map(|(dx, dy)| center.offset(dx, dy))
        .find(|c| traversable(grid, mask, *c))
}

fn can_step(grid: &OccupancyGrid, mask: &BinaryMask, from: CellIndex, dx: i32, dy: i32) -> bool {
    let to = from.offset(dx, dy);
    if !traversable(grid, mask, to) {
        return false;
    }
    // No corner cutting.
    dx == 0
        || dy == 0
        || (traversable(grid, mask, from.offset(dx, 0)) && traversable(grid, mask, from.offset(0, dy)))
}

/// Minimum-cost 8-connected path (straight 1, diagonal sqrt 2) over free,
/// uninflated cells. The goal is snapped within [`SNAP_RADIUS`] when blocked.
pub fn plan_path(
    grid: &OccupancyGrid,
    mask: &BinaryMask,
    start: Point2,
    goal: Point2,
) -> Result<Path, NavError> {
    let start_cell = grid.cell_of(start);
    if grid.get(start_cell) == Occupancy::Occupied {
        return Err(NavError::StartInObstacle { x: start.x, y: start.y });
    }
    let start_cell = snap_to_traversable(grid, mask, start, SNAP_RADIUS)
        .ok_or(NavError::StartInObstacle { x: start.x, y: start.y })?;
    let goal_cell =
        snap_to_traversable(grid, mask, goal, SNAP_RADIUS).ok_or(NavError::Unreachable)?;
    let cells = dijkstra(grid, mask, start_cell, goal_cell).ok_or(NavError::Unreachable)?;
    let cost = cells
        .windows(2)
        .fold(Surd2::ZERO, |acc, w| acc + Surd2::step(w[0], w[1]));
    let res = grid.resolution();
    Ok(Path {
        waypoints: cells.iter().map(|c| cell_center(*c, res)).collect(),
        length: cost.to_f64() * res,
        cost,
        cells,
    })
}

fn dijkstra(
    grid: &OccupancyGrid,
    mask: &BinaryMask,
    start: CellIndex,
    goal: CellIndex,
) -> Option<Vec<CellIndex>> {
    let origin = grid.origin_cell();
    let (w, h) = (grid.width() as i32, grid.height() as i32);
    let index = |c: CellIndex| -> usize {
        ((c.y - origin.y) * w + (c.x - origin.x)) as usize
    };
    let n = (w * h) as usize;
    let mut best: Vec<Option<Surd2>> = vec![None; n];
    let mut parent: Vec<u32> = vec![u32::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut counter: u64 = 0;
    best[index(start)] = Some(Surd2::ZERO);
    heap.push(Reverse((Surd2::ZERO, counter, start.x, start.y)));
    while let Some(Reverse((cost, _, x, y))) = heap.pop() {
        let cell = CellIndex::new(x, y);
        let i = index(cell);
        if done[i] {
            continue;
        }
        done[i] = true;
        if cell == goal {
            let mut path = vec![cell];
            let mut k = i;
            while parent[k] != u32::MAX {
                k = parent[k] as usize;
                path.push(CellIndex::new(
                    origin.x + (k as i32 % w),
                    origin.y + (k as i32 / w),
                ));
            }
            path.reverse();
            return Some(path);
        }
        for (dx, dy) in NEIGHBORS {
            if !can_step(grid, mask, cell, dx, dy) {
                continue;
            }
            let next = cell.offset(dx, dy);
            let j = index(next);
            if done[j] {
                continue;
            }
            let candidate = cost + if dx != 0 && dy != 0 { Surd2::SQRT2 } else { Surd2::ONE };
            if best[j].is_none_or(|b| candidate < b) {
                best[j] = Some(candidate);
                parent[j] = i as u32;
                counter += 1;
                heap.push(Reverse((candidate, counter, next.x, next.y)));
            }
        }
    }
    None
}

/// Traversable cells connected to `start` (after snapping).
pub fn reachable_cells(grid: &OccupancyGrid, mask: &BinaryMask, start: Point2) -> BinaryMask {
    let mut reached = BinaryMask::for_grid(grid);
    let Some(start) = snap_to_traversable(grid, mask, start, SNAP_RADIUS) else {
        return reached;
    };
    reached.set(start, true);
    let mut stack = vec![start];
    while let Some(cell) = stack.pop() {
        for (dx, dy) in NEIGHBORS {
            let next = cell.offset(dx, dy);
            if !reached.get(next) && can_step(grid, mask, cell, dx, dy) {
                reached.set(next, true);
                stack.push(next);
            }
        }
    }
    reached
}

/// Pose `standoff` meters from `target` along `approach_yaw`, facing the
/// target. When that cell is blocked or cut off from `from`, the reachable
/// cell within [`STANDOFF_FALLBACK_RADIUS`] of the target closest to the
/// ideal point is used instead.
pub fn standoff_pose(
    grid: &OccupancyGrid,
    mask: &BinaryMask,
    target: Point2,
    approach_yaw: f64,
    standoff: f64,
    from: Point2,
) -> Result<Pose, NavError> {
    let res = grid.resolution();
    let reachable = reachable_cells(grid, mask, from);
    let ideal = target + Point2::from_polar(standoff, approach_yaw);
    let facing = |cell: CellIndex| {
        let p = cell_center(cell, res);
        Pose::at(p, (target - p).angle())
    };
    let ideal_cell = grid.cell_of(ideal);
    if reachable.get(ideal_cell) {
        return Ok(facing(ideal_cell));
    }
    let target_cell = grid.cell_of(target);
    let mut best: Option<(f64, CellIndex)> = None;
    for (dx, dy) in disk_offsets(STANDOFF_FALLBACK_RADIUS + res, res) {
        let cell = target_cell.offset(dx, dy);
        if !reachable.get(cell) || cell_center(cell, res).dist(target) > STANDOFF_FALLBACK_RADIUS {
            continue;
        }
        let d = cell_center(cell, res).dist(ideal);
        let better = match best {
            None => true,
            Some((bd, bc)) => d < bd || (d == bd && (cell.y, cell.x) < (bc.y, bc.x)),
        };
        if better {
            best = Some((d, cell));
        }
    }
    best.map(|(_, c)| facing(c))
        .ok_or(NavError::NoStandoff(STANDOFF_FALLBACK_RADIUS))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowOutcome {
    pub pose: Pose,
    pub distance: f64,
    pub rotation: f64,
    pub elapsed: f64,
    pub collided: bool,
}

pub fn motion_time(distance: f64, rotation: f64, costs: &ClockCosts) -> f64 {
    distance / costs.linear_speed + rotation / costs.angular_speed
}

/// Drives through the waypoints (turn in place, then straight), then turns
/// to `final_yaw` if given. `on_waypoint` sees the pose and the distance
/// driven so far after every waypoint. Stops early on a collision with the
/// real world.
pub fn follow_path<F>(
    pose: Pose,
    path: &Path,
    clock_costs: &ClockCosts,
    scenario: &Scenario,
    final_yaw: Option<f64>,
    mut on_waypoint: F,
) -> FollowOutcome
where
    F: FnMut(Pose, f64),
{
    let mut current = pose;
    let mut distance = 0.0;
    let mut rotation = 0.0;
    let mut collided = false;
    for waypoint in &path.waypoints {
        let offset = *waypoint - current.position();
        let length = offset.norm();
        if length < 1e-9 {
            continue;
        }
        let turn = angle_diff(offset.angle(), current.yaw);
        rotation += turn.abs();
        let (next, hit) = step_motion(current, (length, turn), scenario);
        if hit {
            collided = true;
            break;
        }
        current = next;
        distance += length;
        on_waypoint(current, distance);
    }
    if let (Some(yaw), false) = (final_yaw, collided) {
        let turn = angle_diff(yaw, current.yaw);
        rotation += turn.abs();
        current = Pose::new(current.x, current.y, yaw);
    }
    FollowOutcome {
        pose: current,
        distance,
        rotation,
        elapsed: motion_time(distance, rotation, clock_costs),
        collided,
    }
}

/// Inflation radius for a footprint.
pub fn inflation_radius(footprint_radius: f64) -> f64 {
    footprint_radius + INFLATION_MARGIN
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::dilate_obstacles;
    use crate::world::{CellKind, GoalSpec, WorldMap};

    fn open_grid(w: usize, h: usize) -> OccupancyGrid {
        let mut grid = OccupancyGrid::with_window(0.1, CellIndex::new(0, 0), w, h);
        for y in 0..h as i32 {
            for x in 0..w as i32 {
                grid.set(CellIndex::new(x, y), Occupancy::Free);
            }
        }
        grid
    }

    #[test]
    fn start_equals_goal() {
        let grid = open_grid(10, 10);
        let mask = BinaryMask::for_grid(&grid);
        let p = Point2::new(0.35, 0.35);
        let path = plan_path(&grid, &mask, p, p).unwrap();
        assert_eq!(path.waypoints.len(), 1);
        assert_eq!(path.length, 0.0);
    }

    #[test]
    fn diagonal_corner_to_corner() {
        let grid = open_grid(10, 10);
        let mask = BinaryMask::for_grid(&grid);
        let path = plan_path(&grid, &mask, Point2::new(0.05, 0.05), Point2::new(0.95, 0.95)).unwrap();
        assert_eq!(path.cost, Surd2::new(0, 9));
        assert!((path.length - 9.0 * std::f64::consts::SQRT_2 * 0.1).abs() < 1e-12);
    }

    #[test]
    fn occupied_start_is_an_error() {
        let mut grid = open_grid(10, 10);
        grid.set(CellIndex::new(0, 0), Occupancy::Occupied);
        let mask = dilate_obstacles(&grid, 0.0);
        assert!(matches!(
            plan_path(&grid, &mask, Point2::new(0.05, 0.05), Point2::new(0.55, 0.55)),
            Err(NavError::StartInObstacle { .. })
        ));
    }

    #[test]
    fn walled_off_goal_is_unreachable() {
        let mut grid = open_grid(20, 5);
        for y in 0..5 {
            grid.set(CellIndex::new(10, y), Occupancy::Occupied);
        }
        let mask = dilate_obstacles(&grid, 0.0);
        assert_eq!(
            plan_path(&grid, &mask, Point2::new(0.05, 0.25), Point2::new(1.85, 0.25)),
            Err(NavError::Unreachable)
        );
    }

    fn world(w: usize, h: usize) -> Scenario {
        let map = WorldMap::new(w, h, 0.1, CellKind::Free);
        Scenario::bare("w", map, Pose::new(0.5, 0.5, 0.0), GoalSpec::room("1"))
    }

    #[test]
    fn straight_path_timing() {
        let scenario = world(40, 20);
        let grid = open_grid(40, 20);
        let mask = BinaryMask::for_grid(&grid);
        let path = plan_path(&grid, &mask, Point2::new(0.55, 0.95), Point2::new(2.55, 0.95)).unwrap();
        let outcome = follow_path(
            Pose::new(0.55, 0.95, 0.0),
            &path,
            &ClockCosts::default(),
            &scenario,
            None,
            |_, _| {},
        );
        assert!(!outcome.collided);
        assert!((outcome.distance - 2.0).abs() < 1e-9);
        assert!((outcome.elapsed - 4.0).abs() < 1e-9);
    }

    #[test]
    fn hidden_wall_causes_collision() {
        let mut scenario = world(40, 20);
        for y in 0..20 {
            scenario.map.set(CellIndex::new(20, y), CellKind::Wall);
        }
        let grid = open_grid(40, 20);
        let mask = BinaryMask::for_grid(&grid);
        let path = plan_path(&grid, &mask, Point2::new(0.55, 0.95), Point2::new(3.55, 0.95)).unwrap();
        let outcome = follow_path(Pose::new(0.55, 0.95, 0.0), &path, &ClockCosts::default(), &scenario, None, |_, _| {});
        assert!(outcome.collided);
    }

    #[test]
    fn zero_length_path_only_turns() {
        let scenario = world(10, 10);
        let path = Path {
            cells: vec![CellIndex::new(5, 5)],
            waypoints: vec![Point2::new(0.55, 0.55)],
            cost: Surd2::ZERO,
            length: 0.0,
        };
        let outcome = follow_path(
            Pose::new(0.55, 0.55, 0.0),
            &path,
            &ClockCosts::default(),
            &scenario,
            Some(1.5),
            |_, _| {},
        );
        assert_eq!(outcome.distance, 0.0);
        assert!((outcome.elapsed - 1.5).abs() < 1e-12);
    }

    #[test]
    fn standoff_faces_the_door() {
        let mut grid = open_grid(40, 40);
        for x in 0..40 {
            grid.set(CellIndex::new(x, 39), Occupancy::Occupied);
        }
        let mask = dilate_obstacles(&grid, 0.35);
        let door = Point2::new(2.0, 3.9);
        let pose = standoff_pose(&grid, &mask, door, -std::f64::consts::FRAC_PI_2, 1.0, Point2::new(2.05, 1.05)).unwrap();
        assert!((pose.position().dist(door) - 1.0).abs() < 0.08);
        assert!((pose.yaw - std::f64::consts::FRAC_PI_2).abs() < 0.1);
    }

    #[test]
    fn sealed_target_has_no_standoff() {
        let mut grid = open_grid(40, 40);
        for x in 0..40 {
            grid.set(CellIndex::new(x, 20), Occupancy::Occupied);
        }
        let mask = dilate_obstacles(&grid, 0.35);
        let result = standoff_pose(&grid, &mask, Point2::new(2.0, 3.9), 0.0, 1.0, Point2::new(2.05, 0.55));
        assert_eq!(result, Err(NavError::NoStandoff(2.0)));
    }
}

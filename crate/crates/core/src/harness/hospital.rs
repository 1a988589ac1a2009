//! Procedural hospital floor: a tree of corridors with 41 numbered rooms,
//! four junction signs, eleven staff and patients, and a staff directory.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::{CellIndex, Cardinal, Point2, Pose};
use crate::primitives::bin_relative_to_cardinal;
use crate::world::{
    door, CellKind, GoalSpec, GoalTarget, NpcKind, NpcSpec, PosterSpec, RelativeDirection, Scenario, SignSpec,
    WorldMap,
};

pub const FIRST_ROOM: u32 = 3001;
pub const ROOM_COUNT: u32 = 41;
pub const RESOLUTION: f64 = 0.1;
pub const WIDTH_M: f64 = 50.0;
pub const HEIGHT_M: f64 = 36.0;
/// Corridor width in meters.
pub const CORRIDOR: f64 = 2.0;
/// Doors keep this far from corridor intersections and dead ends.
const JUNCTION_CLEARANCE: f64 = 1.5;
const END_CLEARANCE: f64 = 0.5;
/// Lower bound on straight-line distance between start and goal door.
const MIN_START_GOAL_DISTANCE: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Zone {
    Reception,
    Waiting,
    PublicService,
    Consultation,
    Examination,
    Support,
    Stairs,
}

impl Zone {
    pub fn name(self) -> &'static str {
        match self {
            Zone::Reception => "reception",
            Zone::Waiting => "waiting",
            Zone::PublicService => "public service",
            Zone::Consultation => "consultation",
            Zone::Examination => "examination",
            Zone::Support => "support",
            Zone::Stairs => "stairs",
        }
    }
}

/// Straight corridor piece carrying rooms, listed in numbering order.
struct Arm {
    /// Centerline start and end; rooms are numbered from start to end.
    from: Point2,
    to: Point2,
    /// Clearance needed at each end before the first/last door.
    clear_from: f64,
    clear_to: f64,
    zone: Zone,
}

const fn p(x: f64, y: f64) -> Point2 {
    Point2 { x, y }
}

/// Corridor rectangles `(x0, y0, x1, y1)` in meters.
const CORRIDORS: [(f64, f64, f64, f64); 5] = [
    (1.0, 17.0, 49.0, 19.0),
    (9.0, 1.0, 11.0, 35.0),
    (24.0, 1.0, 26.0, 35.0),
    (39.0, 1.0, 41.0, 35.0),
    (26.0, 7.0, 36.0, 9.0),
];

/// Junction centers carrying a sign, with the sign's wall position and
/// printed-face direction.
const SIGNS: [(Point2, Point2, f64); 4] = [
    (p(10.0, 18.0), p(11.35, 17.05), FRAC_PI_2),
    (p(25.0, 18.0), p(26.35, 17.05), FRAC_PI_2),
    (p(40.0, 18.0), p(41.35, 17.05), FRAC_PI_2),
    (p(25.0, 8.0), p(24.05, 8.0), 0.0),
];

fn arms() -> Vec<Arm> {
    let (j, e) = (JUNCTION_CLEARANCE + CORRIDOR / 2.0, END_CLEARANCE + CORRIDOR / 2.0);
    let arm = |from, to, clear_from, clear_to, zone| Arm { from, to, clear_from, clear_to, zone };
    vec![
        arm(p(1.0, 18.0), p(10.0, 18.0), END_CLEARANCE, j, Zone::Reception),
        arm(p(10.0, 18.0), p(10.0, 35.0), j, e, Zone::Waiting),
        arm(p(10.0, 18.0), p(10.0, 1.0), j, e, Zone::PublicService),
        arm(p(10.0, 18.0), p(25.0, 18.0), j, j, Zone::PublicService),
        arm(p(25.0, 18.0), p(25.0, 35.0), j, e, Zone::Consultation),
        arm(p(25.0, 18.0), p(25.0, 8.0), j, j, Zone::Examination),
        arm(p(25.0, 8.0), p(36.0, 8.0), j, END_CLEARANCE, Zone::Examination),
        arm(p(25.0, 8.0), p(25.0, 1.0), j, e, Zone::Examination),
        arm(p(25.0, 18.0), p(40.0, 18.0), j, j, Zone::Support),
        arm(p(40.0, 18.0), p(40.0, 35.0), j, e, Zone::Support),
        arm(p(40.0, 18.0), p(40.0, 1.0), j, e, Zone::Stairs),
        arm(p(40.0, 18.0), p(49.0, 18.0), j, END_CLEARANCE, Zone::Stairs),
    ]
}

/// A room door as placed by the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct Room {
    pub number: String,
    pub zone: Zone,
    /// Free cell in front of the door.
    pub position: Point2,
    /// Outward normal, into the corridor.
    pub yaw: f64,
    /// Wall cell turned into a door cell.
    pub cell: CellIndex,
    pub arm: usize,
}

fn usable(arm: &Arm) -> f64 {
    arm.from.dist(arm.to) - arm.clear_from - arm.clear_to
}

/// Rooms per arm by largest remainder on usable length.
fn allocate(arms: &[Arm]) -> Vec<u32> {
    let total: f64 = arms.iter().map(usable).sum();
    let quotas: Vec<f64> = arms.iter().map(|a| usable(a) / total * f64::from(ROOM_COUNT)).collect();
    let mut counts: Vec<u32> = quotas.iter().map(|q| q.floor() as u32).collect();
    let mut order: Vec<usize> = (0..arms.len()).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    let missing = ROOM_COUNT - counts.iter().sum::<u32>();
    for &i in order.iter().take(missing as usize) {
        counts[i] += 1;
    }
    counts
}

fn cell_of(point: Point2) -> CellIndex {
    CellIndex::new((point.x / RESOLUTION).floor() as i32, (point.y / RESOLUTION).floor() as i32)
}

/// Rooms in numbering order. Doors alternate between the left and right
/// walls of each arm at even spacing.
pub fn rooms() -> Vec<Room> {
    let arms = arms();
    let counts = allocate(&arms);
    let mut rooms = Vec::new();
    let mut number = FIRST_ROOM;
    let half = CORRIDOR / 2.0;
    let inset = half - RESOLUTION / 2.0;
    for (a, (arm, count)) in arms.iter().zip(counts).enumerate() {
        let dir = (arm.to - arm.from) * (1.0 / arm.from.dist(arm.to));
        let left = Point2::new(-dir.y, dir.x);
        let spacing = usable(arm) / f64::from(count);
        for k in 0..count {
            let along = arm.clear_from + spacing * (f64::from(k) + 0.5);
            let side = if k % 2 == 0 { left } else { left * -1.0 };
            let center = arm.from + dir * along;
            // Snap the along-axis coordinate to a cell center.
            let snapped = cell_of(center + side * inset);
            let position = Point2::new(
                (f64::from(snapped.x) + 0.5) * RESOLUTION,
                (f64::from(snapped.y) + 0.5) * RESOLUTION,
            );
            let wall = cell_of(center + side * (half + RESOLUTION / 2.0));
            rooms.push(Room {
                number: number.to_string(),
                zone: arm.zone,
                position,
                yaw: (side * -1.0).angle(),
                cell: wall,
                arm: a,
            });
            number += 1;
        }
    }
    rooms
}

fn build_map(rooms: &[Room]) -> WorldMap {
    let w = (WIDTH_M / RESOLUTION).round() as usize;
    let h = (HEIGHT_M / RESOLUTION).round() as usize;
    let mut map = WorldMap::new(w, h, RESOLUTION, CellKind::Wall);
    for (x0, y0, x1, y1) in CORRIDORS {
        let (cx0, cy0) = ((x0 / RESOLUTION).round() as i32, (y0 / RESOLUTION).round() as i32);
        let (cx1, cy1) = ((x1 / RESOLUTION).round() as i32, (y1 / RESOLUTION).round() as i32);
        for y in cy0..cy1 {
            for x in cx0..cx1 {
                map.set(CellIndex::new(x, y), CellKind::Free);
            }
        }
    }
    for room in rooms {
        map.set(room.cell, CellKind::Door);
    }
    map
}

/// Compass direction of each arm leaving a junction, with the arms reached
/// that way (without passing back through the junction).
fn exits(junction: Point2) -> Vec<(Cardinal, BTreeSet<usize>)> {
    let arms = arms();
    let touches = |a: &Arm, q: Point2| a.from.dist(q) < 1e-9 || a.to.dist(q) < 1e-9;
    let mut result = Vec::new();
    for (i, arm) in arms.iter().enumerate() {
        if !touches(arm, junction) {
            continue;
        }
        let far = if arm.from.dist(junction) < 1e-9 { arm.to } else { arm.from };
        let heading = (far - junction).angle();
        let bin = Cardinal::ALL
            .into_iter()
            .min_by(|a, b| {
                crate::geom::angle_diff(a.yaw(), heading)
                    .abs()
                    .total_cmp(&crate::geom::angle_diff(b.yaw(), heading).abs())
            })
            .expect("eight bins");
        // Flood over arms sharing endpoints, never crossing the junction.
        let mut reached = BTreeSet::from([i]);
        let mut frontier = vec![far];
        let mut seen_points = vec![junction, far];
        while let Some(q) = frontier.pop() {
            for (k, other) in arms.iter().enumerate() {
                if touches(other, q) && reached.insert(k) {
                    for end in [other.from, other.to] {
                        if !seen_points.iter().any(|s| s.dist(end) < 1e-9) {
                            seen_points.push(end);
                            frontier.push(end);
                        }
                    }
                }
            }
        }
        // Arms that start at the junction in the same corridor but were
        // reached through `far` are fine; arms through the junction are not.
        reached.retain(|&k| k == i || !touches(&arms[k], junction));
        result.push((bin, reached));
    }
    result
}

/// Compresses sorted room numbers into `Rooms a-b` / `Room a` texts.
pub fn range_texts(numbers: &BTreeSet<u32>) -> Vec<String> {
    let mut out = Vec::new();
    let mut iter = numbers.iter().copied().peekable();
    while let Some(start) = iter.next() {
        let mut end = start;
        while iter.peek() == Some(&(end + 1)) {
            end = iter.next().expect("peeked");
        }
        out.push(if start == end { format!("Room {start}") } else { format!("Rooms {start}-{end}") });
    }
    out
}

fn relative_for(bin: Cardinal, reader_heading: f64) -> Option<RelativeDirection> {
    RelativeDirection::ALL
        .into_iter()
        .find(|r| bin_relative_to_cardinal(*r, reader_heading) == bin)
}

fn signs(rooms: &[Room]) -> Vec<SignSpec> {
    SIGNS
        .iter()
        .enumerate()
        .map(|(i, &(junction, position, facing_yaw))| {
            let reader = crate::geom::normalize_angle(facing_yaw + PI);
            let mut entries = Vec::new();
            for (bin, arms) in exits(junction) {
                let numbers: BTreeSet<u32> = rooms
                    .iter()
                    .filter(|r| arms.contains(&r.arm))
                    .map(|r| r.number.parse().expect("numeric room"))
                    .collect();
                let relative = relative_for(bin, reader).expect("corridor exits are axis aligned");
                for text in range_texts(&numbers) {
                    entries.push((relative, text));
                }
            }
            entries.sort_by_key(|(r, _)| *r);
            SignSpec { id: i as u32 + 1, position, facing_yaw, entries }
        })
        .collect()
}

pub const DIRECTORY: [(&str, &str); 6] = [
    ("Dr. Alvarez", "3023"),
    ("Dr. Brooks", "3025"),
    ("Dr. Chen", "3027"),
    ("Dr. Dubois", "3029"),
    ("Dr. Okafor", "3031"),
    ("Dr. Patel", "3034"),
];

/// Position, facing, kind and zone of each person; zones drive what they
/// know.
const PEOPLE: [(Point2, f64, NpcKind, Zone); 11] = [
    (p(24.6, 24.0), 0.0, NpcKind::Doctor, Zone::Consultation),
    (p(30.0, 8.6), -FRAC_PI_2, NpcKind::Doctor, Zone::Examination),
    (p(39.4, 27.0), 0.0, NpcKind::Doctor, Zone::Support),
    (p(12.5, 18.6), -FRAC_PI_2, NpcKind::Nurse, Zone::PublicService),
    (p(33.0, 17.4), FRAC_PI_2, NpcKind::Nurse, Zone::Support),
    (p(40.6, 10.0), PI, NpcKind::Nurse, Zone::Stairs),
    (p(25.4, 30.0), PI, NpcKind::Nurse, Zone::Consultation),
    (p(4.0, 17.4), FRAC_PI_2, NpcKind::Patient, Zone::Reception),
    (p(9.4, 28.0), 0.0, NpcKind::Patient, Zone::Waiting),
    (p(10.6, 6.0), PI, NpcKind::Patient, Zone::PublicService),
    (p(18.0, 18.6), -FRAC_PI_2, NpcKind::Patient, Zone::PublicService),
];

/// Nurses know every room and the directory; doctors know the doctors'
/// rooms, their own zone and the directory; patients know the waiting and
/// public service areas only.
fn npcs(rooms: &[Room]) -> Vec<NpcSpec> {
    let all: BTreeSet<String> = rooms.iter().map(|r| r.number.clone()).collect();
    let zone_rooms = |zones: &[Zone]| -> BTreeSet<String> {
        rooms.iter().filter(|r| zones.contains(&r.zone)).map(|r| r.number.clone()).collect()
    };
    PEOPLE
        .iter()
        .enumerate()
        .map(|(i, &(position, yaw, kind, zone))| {
            let (known_rooms, knows_directory) = match kind {
                NpcKind::Nurse => (all.clone(), true),
                NpcKind::Doctor => {
                    let mut known = zone_rooms(&[zone]);
                    known.extend(DIRECTORY.iter().map(|(_, r)| r.to_string()));
                    (known, true)
                }
                _ => (zone_rooms(&[Zone::Waiting, Zone::PublicService]), false),
            };
            NpcSpec { id: i as u32 + 1, position, yaw, kind, known_rooms, knows_directory }
        })
        .collect()
}

const POSTERS: [(Point2, f64); 4] = [
    (p(6.0, 18.95), -FRAC_PI_2),
    (p(20.0, 17.05), FRAC_PI_2),
    (p(24.05, 31.0), 0.0),
    (p(45.0, 18.95), -FRAC_PI_2),
];

/// Random point on a corridor centerline.
fn random_start(rng: &mut ChaCha8Rng) -> Point2 {
    let arms = arms();
    let lengths: Vec<f64> = arms.iter().map(|a| a.from.dist(a.to)).collect();
    let total: f64 = lengths.iter().sum();
    let mut t = rng.random_range(0.0..total);
    for (arm, len) in arms.iter().zip(&lengths) {
        if t < *len {
            let along = t.clamp(END_CLEARANCE + CORRIDOR / 2.0, (len - END_CLEARANCE - CORRIDOR / 2.0).max(END_CLEARANCE + CORRIDOR / 2.0));
            let q = arm.from + (arm.to - arm.from) * (along / len);
            let c = cell_of(q);
            return Point2::new((f64::from(c.x) + 0.5) * RESOLUTION, (f64::from(c.y) + 0.5) * RESOLUTION);
        }
        t -= len;
    }
    arms[0].from
}

/// The hospital with a seed-dependent start pose and goal. One seed in
/// seven asks for a doctor by name instead of a room number.
pub fn hospital_scenario(seed: u64) -> Scenario {
    let rooms = rooms();
    let map = build_map(&rooms);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4b05_9174_a1e3_0c2d);
    let occupant_goal = seed % 7 == 3;
    let (target, goal_room) = if occupant_goal {
        let (name, room) = DIRECTORY[rng.random_range(0..DIRECTORY.len())];
        (GoalTarget::Occupant(name.to_string()), room.to_string())
    } else {
        let room = FIRST_ROOM + rng.random_range(0..ROOM_COUNT);
        (GoalTarget::Room(room.to_string()), room.to_string())
    };
    let goal_position = rooms.iter().find(|r| r.number == goal_room).expect("goal room exists").position;
    let start = loop {
        let candidate = random_start(&mut rng);
        if candidate.dist(goal_position) >= MIN_START_GOAL_DISTANCE {
            break candidate;
        }
    };
    let yaw = [0.0, FRAC_PI_2, -PI, -FRAC_PI_2][rng.random_range(0..4)];

    let mut scenario = Scenario::bare(
        format!("hospital-{seed}"),
        map,
        Pose::new(start.x, start.y, yaw),
        GoalSpec { target, announced: true },
    );
    scenario.doors = rooms
        .iter()
        .enumerate()
        .map(|(i, r)| door(i as u32 + 1, r.position, r.yaw, Some(&r.number)))
        .collect();
    scenario.signs = signs(&rooms);
    scenario.npcs = npcs(&rooms);
    scenario.posters = POSTERS
        .iter()
        .enumerate()
        .map(|(i, &(position, yaw))| PosterSpec { id: i as u32 + 1, position, yaw })
        .collect();
    scenario.directory = DIRECTORY
        .iter()
        .map(|(n, r)| (n.to_string(), r.to_string()))
        .collect::<BTreeMap<_, _>>();
    scenario.validate().expect("generated hospital is valid");
    scenario
}

/// Scenario document for [`hospital_scenario`].
pub fn generate_hospital(seed: u64) -> String {
    hospital_scenario(seed).to_document()
}

/// Hand-checked hospital layout with a fixed start and goal.
pub const REPLICA: &str = include_str!("../../assets/scenarios/hospital_replica.scn");

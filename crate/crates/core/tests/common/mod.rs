//! Independent reference implementations shared by the integration tests.
//! Nothing here calls the code under test except to build inputs.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wayfinder_core::mapping::{Occupancy, OccupancyGrid};
use wayfinder_core::world::{DetectionCategory, DetectionEvent, EntitySource};
use wayfinder_core::{CellIndex, Point2};

// ---------------------------------------------------------------------------
// Exact arithmetic on a + b*sqrt(2)

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Root2 {
    pub a: i64,
    pub b: i64,
}

impl Root2 {
    pub fn add(self, o: Root2) -> Root2 {
        Root2 { a: self.a + o.a, b: self.b + o.b }
    }

    pub fn sub(self, o: Root2) -> Root2 {
        Root2 { a: self.a - o.a, b: self.b - o.b }
    }

    pub fn sign(self) -> i32 {
        let (a, b) = (self.a as i128, self.b as i128);
        if a >= 0 && b >= 0 {
            i32::from(a > 0 || b > 0)
        } else if a <= 0 && b <= 0 {
            -1
        } else if a > 0 {
            (a * a - 2 * b * b).signum() as i32
        } else {
            (2 * b * b - a * a).signum() as i32
        }
    }

    pub fn abs(self) -> Root2 {
        if self.sign() < 0 {
            Root2 { a: -self.a, b: -self.b }
        } else {
            self
        }
    }

    pub fn less(self, o: Root2) -> bool {
        o.sub(self).sign() > 0
    }

    pub fn value(self) -> f64 {
        self.a as f64 + self.b as f64 * std::f64::consts::SQRT_2
    }
}

fn step_cost(from: CellIndex, to: CellIndex) -> Root2 {
    let (dx, dy) = ((to.x - from.x).abs(), (to.y - from.y).abs());
    match (dx, dy) {
        (0, 0) => Root2::default(),
        (1, 0) | (0, 1) => Root2 { a: 1, b: 0 },
        (1, 1) => Root2 { a: 0, b: 1 },
        _ => panic!("non-adjacent cells {from:?} {to:?}"),
    }
}

// ---------------------------------------------------------------------------
// Detection filter

pub struct FilterRow {
    pub category: DetectionCategory,
    pub confidence: f64,
    pub width: Option<(f64, f64)>,
    pub height: Option<(f64, f64)>,
}

/// Thresholds and size windows as published, typed in by hand.
pub fn filter_table() -> Vec<FilterRow> {
    vec![
        FilterRow { category: DetectionCategory::Door, confidence: 0.3, width: Some((0.5, 2.5)), height: Some((0.5, 3.0)) },
        FilterRow { category: DetectionCategory::RoomLabel, confidence: 0.04, width: Some((0.0, 0.4)), height: Some((0.0, 0.15)) },
        FilterRow { category: DetectionCategory::Sign, confidence: 0.03, width: Some((0.35, 0.5)), height: Some((0.2, 0.5)) },
        FilterRow { category: DetectionCategory::Person, confidence: 0.3, width: None, height: None },
    ]
}

pub fn detection(category: DetectionCategory, confidence: f64, width: f64, height: f64) -> DetectionEvent {
    DetectionEvent {
        frame_index: 0,
        category,
        confidence,
        box_width: width,
        box_height: height,
        position: Point2::new(0.0, 0.0),
        approach_yaw: 0.0,
        source: EntitySource::Clutter,
    }
}

// ---------------------------------------------------------------------------
// Promotion

fn landmark_kind(category: DetectionCategory) -> Option<u8> {
    match category {
        DetectionCategory::Door => Some(0),
        DetectionCategory::Person => Some(1),
        DetectionCategory::Sign => Some(2),
        DetectionCategory::RoomLabel => None,
    }
}

struct OracleTrack {
    kind: u8,
    points: Vec<Point2>,
    frames: Vec<u64>,
    promoted: bool,
}

impl OracleTrack {
    fn mean(&self) -> Point2 {
        let n = self.points.len() as f64;
        let (sx, sy) = self.points.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x, y + p.y));
        Point2::new(sx / n, sy / n)
    }
}

/// A promotion observed at some frame: `(frame, kind, x, y)`.
pub type Promotion = (u64, u8, f64, f64);

/// Brute force: a track is promoted once three of its hits fall in the 20
/// frames ending at the current one. Events of a frame are matched to
/// tracks of the same kind within 1 m by repeatedly taking the globally
/// closest free pair.
pub fn oracle_promotions(frames: &[(u64, Vec<DetectionEvent>)]) -> Vec<Promotion> {
    let mut tracks: Vec<OracleTrack> = Vec::new();
    let mut out = Vec::new();
    for (frame, events) in frames {
        let frame = *frame;
        tracks.retain(|t| t.promoted || t.frames.iter().any(|f| f + 20 > frame));
        for kind in 0..3u8 {
            let ev: Vec<&DetectionEvent> =
                events.iter().filter(|e| landmark_kind(e.category) == Some(kind)).collect();
            let tr: Vec<usize> = (0..tracks.len()).filter(|&t| tracks[t].kind == kind).collect();
            let means: Vec<Point2> = tr.iter().map(|&t| tracks[t].mean()).collect();
            let mut ev_free = vec![true; ev.len()];
            let mut tr_free = vec![true; tr.len()];
            let mut matched = Vec::new();
            loop {
                let mut best: Option<(f64, usize, usize)> = None;
                for (i, e) in ev.iter().enumerate() {
                    for (j, m) in means.iter().enumerate() {
                        if !ev_free[i] || !tr_free[j] {
                            continue;
                        }
                        let d = ((e.position.x - m.x).powi(2) + (e.position.y - m.y).powi(2)).sqrt();
                        if d <= 1.0 && best.is_none_or(|(bd, bi, bj)| (d, i, j) < (bd, bi, bj)) {
                            best = Some((d, i, j));
                        }
                    }
                }
                let Some((_, i, j)) = best else { break };
                ev_free[i] = false;
                tr_free[j] = false;
                matched.push((i, tr[j]));
            }
            let mut touched = Vec::new();
            for (i, t) in matched {
                tracks[t].points.push(ev[i].position);
                tracks[t].frames.push(frame);
                touched.push(t);
            }
            for (i, e) in ev.iter().enumerate() {
                if ev_free[i] {
                    tracks.push(OracleTrack { kind, points: vec![e.position], frames: vec![frame], promoted: false });
                    touched.push(tracks.len() - 1);
                }
            }
            for t in touched {
                let recent = tracks[t].frames.iter().filter(|f| *f + 20 > frame).count();
                if !tracks[t].promoted && recent >= 3 {
                    tracks[t].promoted = true;
                    let m = tracks[t].mean();
                    out.push((frame, kind, m.x, m.y));
                }
            }
        }
    }
    out
}

/// Seeded stream of detections around a few true objects, with gaps.
pub fn random_detection_stream(seed: u64) -> Vec<(u64, Vec<DetectionEvent>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objects: Vec<(DetectionCategory, Point2)> = (0..rng.random_range(1..6))
        .map(|_| {
            let category = [DetectionCategory::Door, DetectionCategory::Person, DetectionCategory::Sign, DetectionCategory::RoomLabel]
                [rng.random_range(0..4)];
            (category, Point2::new(rng.random_range(0.0..6.0), rng.random_range(0.0..6.0)))
        })
        .collect();
    let noise = rng.random_range(0.05..0.8);
    let mut frame = 0u64;
    let mut out = Vec::new();
    for _ in 0..rng.random_range(5..60) {
        frame += rng.random_range(1..6);
        let mut events = Vec::new();
        for (category, p) in &objects {
            if rng.random_bool(0.45) {
                let position = Point2::new(p.x + rng.random_range(-noise..noise), p.y + rng.random_range(-noise..noise));
                let mut e = detection(*category, 0.9, 1.0, 2.0);
                e.frame_index = frame;
                e.position = position;
                events.push(e);
            }
        }
        if rng.random_bool(0.2) {
            let mut e = detection(DetectionCategory::Door, 0.9, 1.0, 2.0);
            e.frame_index = frame;
            e.position = Point2::new(rng.random_range(0.0..6.0), rng.random_range(0.0..6.0));
            events.push(e);
        }
        out.push((frame, events));
    }
    out
}

// ---------------------------------------------------------------------------
// Frontiers

/// A boundary edge: `cell` is explored, the neighbor across the side is not.
/// `dir` is the travel direction with the explored cell on the left
/// (0 east along the south side, 1 north along the east side, 2 west along
/// the north side, 3 south along the west side).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct BEdge {
    cell: CellIndex,
    dir: usize,
}

const FWD: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

fn add(c: CellIndex, d: (i32, i32)) -> CellIndex {
    CellIndex::new(c.x + d.0, c.y + d.1)
}

fn right_of(dir: usize) -> (i32, i32) {
    FWD[(dir + 3) % 4]
}

fn successor(edge: BEdge, explored: &dyn Fn(CellIndex) -> bool) -> BEdge {
    let ahead = add(edge.cell, FWD[edge.dir]);
    if !explored(ahead) {
        return BEdge { cell: edge.cell, dir: (edge.dir + 1) % 4 };
    }
    let diagonal = add(ahead, right_of(edge.dir));
    if !explored(diagonal) {
        BEdge { cell: ahead, dir: edge.dir }
    } else {
        BEdge { cell: diagonal, dir: (edge.dir + 3) % 4 }
    }
}

pub struct OracleLoop {
    pub cells: Vec<CellIndex>,
    pub outer: bool,
}

/// Boundary loops, outer loops first, then north-most and west-most start.
pub fn oracle_loops(grid: &OccupancyGrid) -> Vec<OracleLoop> {
    let explored = |c: CellIndex| matches!(grid.get(c), Occupancy::Free | Occupancy::Occupied);
    let mut edges = Vec::new();
    for (cell, value) in grid.cells() {
        if value == Occupancy::Unknown {
            continue;
        }
        for dir in 0..4 {
            if !explored(add(cell, right_of(dir))) {
                edges.push(BEdge { cell, dir });
            }
        }
    }
    let mut done: HashSet<BEdge> = HashSet::new();
    let mut loops = Vec::new();
    for &e0 in &edges {
        if done.contains(&e0) {
            continue;
        }
        let mut cycle = vec![e0];
        done.insert(e0);
        let mut e = successor(e0, &explored);
        while e != e0 {
            assert!(done.insert(e), "successor is not a permutation at {e:?}");
            cycle.push(e);
            e = successor(e, &explored);
        }
        // Turning number: +1 per left turn, -1 per right turn.
        let mut turns = 0i32;
        for k in 0..cycle.len() {
            let (d0, d1) = (cycle[k].dir, cycle[(k + 1) % cycle.len()].dir);
            if d1 == (d0 + 1) % 4 {
                turns += 1;
            } else if d1 == (d0 + 3) % 4 {
                turns -= 1;
            }
        }
        let side_rank = |dir: usize| [2usize, 3, 0, 1].iter().position(|d| *d == dir).unwrap();
        let start = (0..cycle.len())
            .min_by_key(|&k| (-cycle[k].cell.y, cycle[k].cell.x, side_rank(cycle[k].dir)))
            .unwrap();
        let mut cells: Vec<CellIndex> = Vec::new();
        for k in 0..cycle.len() {
            let c = cycle[(start + k) % cycle.len()].cell;
            if cells.last() != Some(&c) {
                cells.push(c);
            }
        }
        while cells.len() > 1 && cells.first() == cells.last() {
            cells.pop();
        }
        loops.push(OracleLoop { cells, outer: turns > 0 });
    }
    loops.sort_by_key(|l| (!l.outer, -l.cells[0].y, l.cells[0].x));
    loops
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleFrontier {
    pub midpoint_cell: CellIndex,
    pub cells: Vec<CellIndex>,
    pub length: Root2,
}

pub fn oracle_frontiers(grid: &OccupancyGrid, blocked: &dyn Fn(CellIndex) -> bool, min_length: f64) -> Vec<OracleFrontier> {
    let res = grid.resolution();
    let mut claimed = HashSet::new();
    let mut runs: Vec<Vec<CellIndex>> = Vec::new();
    for lp in oracle_loops(grid) {
        let n = lp.cells.len();
        let ok: Vec<bool> = lp
            .cells
            .iter()
            .map(|c| grid.get(*c) == Occupancy::Free && !blocked(*c) && claimed.insert(*c))
            .collect();
        if ok.iter().all(|b| *b) {
            runs.push(lp.cells.clone());
            continue;
        }
        let first_gap = ok.iter().position(|b| !b).unwrap();
        let mut run = Vec::new();
        for k in 1..=n {
            let i = (first_gap + k) % n;
            if ok[i] {
                run.push(lp.cells[i]);
            } else if !run.is_empty() {
                runs.push(std::mem::take(&mut run));
            }
        }
        if !run.is_empty() {
            runs.push(run);
        }
    }
    let mut out: Vec<OracleFrontier> = runs
        .into_iter()
        .filter_map(|cells| {
            let mut prefix = vec![Root2::default()];
            for w in cells.windows(2) {
                prefix.push(prefix.last().unwrap().add(step_cost(w[0], w[1])));
            }
            let total = *prefix.last().unwrap();
            if (total.value() + 1.0) * res < min_length - 1e-9 {
                return None;
            }
            let mut mid = 0;
            for i in 1..prefix.len() {
                let gap = |k: usize| prefix[k].add(prefix[k]).sub(total).abs();
                if gap(i).less(gap(mid)) {
                    mid = i;
                }
            }
            Some(OracleFrontier { midpoint_cell: cells[mid], cells, length: total })
        })
        .collect();
    out.sort_by(|a, b| {
        let longer = if b.length.less(a.length) {
            std::cmp::Ordering::Less
        } else if a.length.less(b.length) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        };
        longer.then((a.midpoint_cell.y, a.midpoint_cell.x).cmp(&(b.midpoint_cell.y, b.midpoint_cell.x)))
    });
    out
}

/// Random partially explored 32x32 map: explored rectangles of free space
/// with scattered and wall-like obstacles.
pub fn random_partial_map(seed: u64) -> OccupancyGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 32;
    let mut grid = OccupancyGrid::with_window(0.1, CellIndex::new(0, 0), n, n);
    for _ in 0..rng.random_range(1..7) {
        let (x0, y0) = (rng.random_range(0..n as i32), rng.random_range(0..n as i32));
        let (w, h) = (rng.random_range(1..16), rng.random_range(1..16));
        for y in y0..(y0 + h).min(n as i32) {
            for x in x0..(x0 + w).min(n as i32) {
                grid.set(CellIndex::new(x, y), Occupancy::Free);
            }
        }
    }
    let p_obstacle = rng.random_range(0.0..0.2);
    for y in 0..n as i32 {
        for x in 0..n as i32 {
            let c = CellIndex::new(x, y);
            if grid.get(c) == Occupancy::Free && rng.random_bool(p_obstacle) {
                grid.set(c, Occupancy::Occupied);
            }
        }
    }
    for _ in 0..rng.random_range(0..4) {
        let (x, y) = (rng.random_range(0..n as i32), rng.random_range(0..n as i32));
        let horizontal = rng.random_bool(0.5);
        for k in 0..rng.random_range(2..12) {
            let c = if horizontal { CellIndex::new(x + k, y) } else { CellIndex::new(x, y + k) };
            if grid.get(c) != Occupancy::Unknown {
                grid.set(c, Occupancy::Occupied);
            }
        }
    }
    grid
}

// ---------------------------------------------------------------------------
// Path planning

/// Cells whose center is within `radius` of some occupied cell center.
pub fn oracle_inflation(grid: &OccupancyGrid, radius: f64) -> HashSet<CellIndex> {
    let res = grid.resolution();
    let occupied: Vec<CellIndex> = grid.cells().filter(|(_, v)| *v == Occupancy::Occupied).map(|(c, _)| c).collect();
    let mut out = HashSet::new();
    for (cell, _) in grid.cells() {
        for o in &occupied {
            let d = f64::from((cell.x - o.x).pow(2) + (cell.y - o.y).pow(2)).sqrt() * res;
            if d <= radius + 1e-9 {
                out.insert(cell);
                break;
            }
        }
    }
    out
}

/// Label-setting Dijkstra without a heap: repeatedly settle the cheapest
/// open cell. 8-connected; diagonal moves need both side cells passable.
pub fn oracle_shortest(passable: &dyn Fn(CellIndex) -> bool, start: CellIndex, goal: CellIndex) -> Option<Root2> {
    let mut dist: HashMap<CellIndex, Root2> = HashMap::new();
    let mut settled: HashSet<CellIndex> = HashSet::new();
    dist.insert(start, Root2::default());
    loop {
        let current = dist
            .iter()
            .filter(|(c, _)| !settled.contains(*c))
            .min_by(|(ca, a), (cb, b)| {
                if a.less(**b) {
                    std::cmp::Ordering::Less
                } else if b.less(**a) {
                    std::cmp::Ordering::Greater
                } else {
                    (ca.x, ca.y).cmp(&(cb.x, cb.y))
                }
            })
            .map(|(c, d)| (*c, *d));
        let (cell, d) = current?;
        if cell == goal {
            return Some(d);
        }
        settled.insert(cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let next = CellIndex::new(cell.x + dx, cell.y + dy);
                if !passable(next) || settled.contains(&next) {
                    continue;
                }
                if dx != 0 && dy != 0 && !(passable(CellIndex::new(cell.x + dx, cell.y)) && passable(CellIndex::new(cell.x, cell.y + dy))) {
                    continue;
                }
                let candidate = d.add(step_cost(cell, next));
                if dist.get(&next).is_none_or(|old| candidate.less(*old)) {
                    dist.insert(next, candidate);
                }
            }
        }
    }
}

/// Random fully explored maze-like map: outer wall, random wall segments and
/// scattered blocks.
pub fn random_maze(seed: u64) -> OccupancyGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (rng.random_range(12..30), rng.random_range(12..30));
    let mut grid = OccupancyGrid::with_window(0.1, CellIndex::new(0, 0), w, h);
    for y in 0..h as i32 {
        for x in 0..w as i32 {
            let border = x == 0 || y == 0 || x == w as i32 - 1 || y == h as i32 - 1;
            grid.set(CellIndex::new(x, y), if border { Occupancy::Occupied } else { Occupancy::Free });
        }
    }
    for _ in 0..rng.random_range(0..8) {
        let (x, y) = (rng.random_range(0..w as i32), rng.random_range(0..h as i32));
        let horizontal = rng.random_bool(0.5);
        for k in 0..rng.random_range(3..20) {
            let c = if horizontal { CellIndex::new(x + k, y) } else { CellIndex::new(x, y + k) };
            if grid.contains(c) {
                grid.set(c, Occupancy::Occupied);
            }
        }
    }
    let p = rng.random_range(0.0..0.15);
    for y in 1..h as i32 - 1 {
        for x in 1..w as i32 - 1 {
            if rng.random_bool(p) {
                grid.set(CellIndex::new(x, y), Occupancy::Occupied);
            }
        }
    }
    grid
}

// ---------------------------------------------------------------------------
// Prompt text

/// Converts a LaTeX prompt listing to plain prompt text: drops the listing
/// indent, turns line breaks (`\\`) into empty lines, inserts the legend
/// glyphs for embedded icons in order, expands `\quad` and unescapes
/// `\{ \} \_ \#`.
pub fn latex_to_prompt(latex: &str, icons: &[&str]) -> String {
    let mut icons = icons.iter();
    let mut lines = Vec::new();
    for raw in latex.lines() {
        let line = raw.strip_prefix("    ").unwrap_or(raw);
        if line.trim().is_empty() || line.trim() == "\\\\" || line.trim() == "\\\\\\\\" {
            lines.push(String::new());
            continue;
        }
        let mut text = String::new();
        let mut rest = line;
        while let Some(pos) = rest.find("\\includegraphics") {
            text.push_str(&rest[..pos]);
            let after = &rest[pos..];
            let close = after.find('}').expect("graphic has a closing brace");
            text.push_str(icons.next().expect("an icon for every graphic"));
            rest = &after[close + 1..];
        }
        text.push_str(rest);
        let text = text
            .replace("\\quad ", "    ")
            .replace("\\{", "{")
            .replace("\\}", "}")
            .replace("\\_", "_")
            .replace("\\#", "#");
        lines.push(text);
    }
    lines.join("\n")
}

/// Python-style `str.format` with named fields.
pub fn python_format(template: &str, fields: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, _) in fields {
        out = out.replace(&format!("{{{name}}}"), &format!("\u{0}{name}\u{0}"));
    }
    out = out.replace("{{", "{").replace("}}", "}");
    for (name, value) in fields {
        out = out.replace(&format!("\u{0}{name}\u{0}"), value);
    }
    out
}

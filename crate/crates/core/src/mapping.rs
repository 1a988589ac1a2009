//! Online occupancy grid, explored-region contour and obstacle dilation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geom::{cell_center, cell_of, traverse_cells, CellIndex, Point2};
use crate::world::LidarScan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Occupancy {
    #[default]
    Unknown,
    Free,
    Occupied,
}

impl Occupancy {
    pub fn is_explored(self) -> bool {
        self != Occupancy::Unknown
    }
}

/// A free cell turns occupied only after this many hits in separate scans.
pub const OCCUPIED_CONFIRMATIONS: u8 = 2;

/// Cells added around the scan footprint whenever the grid has to grow.
const GROWTH_MARGIN: i32 = 20;

/// Occupancy map on the global lattice. Cells outside the stored window are
/// unknown; the window grows as scans reach further.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    resolution: f64,
    origin_cell: CellIndex,
    width: usize,
    height: usize,
    cells: Vec<Occupancy>,
    hits: Vec<u8>,
}

impl OccupancyGrid {
    pub fn new(resolution: f64) -> Self {
        Self {
            resolution,
            origin_cell: CellIndex::new(0, 0),
            width: 0,
            height: 0,
            cells: Vec::new(),
            hits: Vec::new(),
        }
    }

    /// An all-unknown grid covering `width x height` cells from `origin_cell`.
    pub fn with_window(resolution: f64, origin_cell: CellIndex, width: usize, height: usize) -> Self {
        Self {
            resolution,
            origin_cell,
            width,
            height,
            cells: vec![Occupancy::Unknown; width * height],
            hits: vec![0; width * height],
        }
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin_cell(&self) -> CellIndex {
        self.origin_cell
    }

    /// World coordinates of the lower-left corner of the stored window.
    pub fn origin(&self) -> Point2 {
        Point2::new(
            f64::from(self.origin_cell.x) * self.resolution,
            f64::from(self.origin_cell.y) * self.resolution,
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn index(&self, cell: CellIndex) -> Option<usize> {
        let x = cell.x - self.origin_cell.x;
        let y = cell.y - self.origin_cell.y;
        (x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height)
            .then(|| y as usize * self.width + x as usize)
    }

    pub fn contains(&self, cell: CellIndex) -> bool {
        self.index(cell).is_some()
    }

    pub fn get(&self, cell: CellIndex) -> Occupancy {
        self.index(cell).map_or(Occupancy::Unknown, |i| self.cells[i])
    }

    /// Writes a cell directly, growing the window if needed.
    pub fn set(&mut self, cell: CellIndex, value: Occupancy) {
        self.ensure_window(cell, cell);
        let i = self.index(cell).expect("window covers cell");
        self.cells[i] = value;
        self.hits[i] = 0;
    }

    pub fn cell_of(&self, point: Point2) -> CellIndex {
        cell_of(point, self.resolution)
    }

    pub fn cell_center(&self, cell: CellIndex) -> Point2 {
        cell_center(cell, self.resolution)
    }

    /// Every stored cell with its state, row by row from the south.
    pub fn cells(&self) -> impl Iterator<Item = (CellIndex, Occupancy)> + '_ {
        self.cells.iter().enumerate().map(move |(i, value)| {
            (
                CellIndex::new(
                    self.origin_cell.x + (i % self.width) as i32,
                    self.origin_cell.y + (i / self.width) as i32,
                ),
                *value,
            )
        })
    }

    pub fn explored_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_explored()).count()
    }

    pub fn count(&self, value: Occupancy) -> usize {
        self.cells.iter().filter(|c| **c == value).count()
    }

    /// Inclusive cell bounds of explored cells, if any.
    pub fn explored_bounds(&self) -> Option<(CellIndex, CellIndex)> {
        let mut bounds: Option<(CellIndex, CellIndex)> = None;
        for (cell, value) in self.cells() {
            if value.is_explored() {
                bounds = Some(match bounds {
                    None => (cell, cell),
                    Some((lo, hi)) => (
                        CellIndex::new(lo.x.min(cell.x), lo.y.min(cell.y)),
                        CellIndex::new(hi.x.max(cell.x), hi.y.max(cell.y)),
                    ),
                });
            }
        }
        bounds
    }

    fn ensure_window(&mut self, lo: CellIndex, hi: CellIndex) {
        if self.contains(lo) && self.contains(hi) {
            return;
        }
        let (new_lo, new_hi) = if self.width == 0 {
            (lo.offset(-GROWTH_MARGIN, -GROWTH_MARGIN), hi.offset(GROWTH_MARGIN, GROWTH_MARGIN))
        } else {
            let old_hi = self
                .origin_cell
                .offset(self.width as i32 - 1, self.height as i32 - 1);
            let grow_lo = |current: i32, wanted: i32| {
                if wanted < current {
                    wanted - GROWTH_MARGIN
                } else {
                    current
                }
            };
            let grow_hi = |current: i32, wanted: i32| {
                if wanted > current {
                    wanted + GROWTH_MARGIN
                } else {
                    current
                }
            };
            (
                CellIndex::new(grow_lo(self.origin_cell.x, lo.x), grow_lo(self.origin_cell.y, lo.y)),
                CellIndex::new(grow_hi(old_hi.x, hi.x), grow_hi(old_hi.y, hi.y)),
            )
        };
        let width = (new_hi.x - new_lo.x + 1) as usize;
        let height = (new_hi.y - new_lo.y + 1) as usize;
        let mut grown = OccupancyGrid::with_window(self.resolution, new_lo, width, height);
        for y in 0..self.height {
            for x in 0..self.width {
                let cell = self.origin_cell.offset(x as i32, y as i32);
                let from = y * self.width + x;
                let to = grown.index(cell).expect("grown window covers old one");
                grown.cells[to] = self.cells[from];
                grown.hits[to] = self.hits[from];
            }
        }
        *self = grown;
    }

    /// Marks the cells crossed by each ray free and the cell just past each
    /// hit occupied. Within one scan occupied wins over free.
    pub fn integrate_scan(&mut self, scan: &LidarScan) {
        let origin = scan.pose.position();
        let reach = scan.max_range + self.resolution;
        self.ensure_window(
            self.cell_of(origin - Point2::new(reach, reach)),
            self.cell_of(origin + Point2::new(reach, reach)),
        );
        let (free, occupied) = scan_cells(scan, self.resolution);
        // Mark scan membership: 1 = free, 2 = occupied (wins).
        let mut touched: Vec<usize> = Vec::with_capacity(free.len() + occupied.len());
        let mut stamp = vec![0u8; self.cells.len()];
        for cell in free {
            if let Some(i) = self.index(cell) {
                if stamp[i] == 0 {
                    touched.push(i);
                }
                stamp[i] = stamp[i].max(1);
            }
        }
        for cell in occupied {
            if let Some(i) = self.index(cell) {
                if stamp[i] == 0 {
                    touched.push(i);
                }
                stamp[i] = 2;
            }
        }
        for i in touched {
            match stamp[i] {
                2 => match self.cells[i] {
                    Occupancy::Occupied => {}
                    Occupancy::Unknown => {
                        self.cells[i] = Occupancy::Occupied;
                        self.hits[i] = 0;
                    }
                    Occupancy::Free => {
                        self.hits[i] += 1;
                        if self.hits[i] >= OCCUPIED_CONFIRMATIONS {
                            self.cells[i] = Occupancy::Occupied;
                            self.hits[i] = 0;
                        }
                    }
                },
                _ => {
                    self.cells[i] = Occupancy::Free;
                    self.hits[i] = 0;
                }
            }
        }
    }

    /// Portable graymap, northern row first: unknown 205, free 254, occupied 0.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for y in (0..self.height).rev() {
            for x in 0..self.width {
                out.push(match self.cells[y * self.width + x] {
                    Occupancy::Unknown => 205,
                    Occupancy::Free => 254,
                    Occupancy::Occupied => 0,
                });
            }
        }
        out
    }

    /// Sidecar for [`OccupancyGrid::to_pgm`].
    pub fn pgm_metadata(&self, image_name: &str) -> String {
        let origin = self.origin();
        let mut out = String::new();
        let _ = writeln!(out, "image: {image_name}");
        let _ = writeln!(out, "resolution: {}", self.resolution);
        let _ = writeln!(out, "origin: [{}, {}, 0.0]", origin.x, origin.y);
        let _ = writeln!(out, "width: {}", self.width);
        let _ = writeln!(out, "height: {}", self.height);
        out
    }
}

/// Free and hit cells of a scan, before any conflict resolution. Cells the
/// ray only touches at a corner are skipped; the hit cell is the one
/// containing the point just beyond the measured range.
pub fn scan_cells(scan: &LidarScan, resolution: f64) -> (Vec<CellIndex>, Vec<CellIndex>) {
    let origin = scan.pose.position();
    let mut free = Vec::new();
    let mut occupied = Vec::new();
    let epsilon = resolution * 1e-6;
    for ray in &scan.rays {
        let length = ray.range.unwrap_or(scan.max_range);
        traverse_cells(resolution, origin, ray.angle, length, |cell, t_enter, t_exit| {
            if t_exit - t_enter > 1e-9 && t_enter < length {
                free.push(cell);
            }
            true
        });
        if let Some(range) = ray.range {
            let beyond = origin + Point2::from_polar(range + epsilon, ray.angle);
            occupied.push(cell_of(beyond, resolution));
        }
    }
    (free, occupied)
}

/// Boolean layer aligned with an [`OccupancyGrid`] window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    origin_cell: CellIndex,
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(origin_cell: CellIndex, width: usize, height: usize) -> Self {
        Self {
            origin_cell,
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn for_grid(grid: &OccupancyGrid) -> Self {
        Self::new(grid.origin_cell, grid.width, grid.height)
    }

    pub fn shape(&self) -> (CellIndex, usize, usize) {
        (self.origin_cell, self.width, self.height)
    }

    pub fn matches(&self, grid: &OccupancyGrid) -> bool {
        self.shape() == (grid.origin_cell, grid.width, grid.height)
    }

    fn index(&self, cell: CellIndex) -> Option<usize> {
        let x = cell.x - self.origin_cell.x;
        let y = cell.y - self.origin_cell.y;
        (x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height)
            .then(|| y as usize * self.width + x as usize)
    }

    /// False outside the window.
    pub fn get(&self, cell: CellIndex) -> bool {
        self.index(cell).is_some_and(|i| self.bits[i])
    }

    pub fn set(&mut self, cell: CellIndex, value: bool) {
        if let Some(i) = self.index(cell) {
            self.bits[i] = value;
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn iter_set(&self) -> impl Iterator<Item = CellIndex> + '_ {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(move |(i, _)| {
            CellIndex::new(
                self.origin_cell.x + (i % self.width) as i32,
                self.origin_cell.y + (i / self.width) as i32,
            )
        })
    }

    /// Cells set in `self` but not in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.iter_set().all(|c| other.get(c))
    }
}

/// Offsets (in cells) of the disk of the given radius in meters.
pub fn disk_offsets(radius: f64, resolution: f64) -> Vec<(i32, i32)> {
    let r = radius / resolution;
    let limit = r * r + 1e-9;
    let reach = r.floor() as i32 + 1;
    let mut offsets = Vec::new();
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            if f64::from(dx * dx + dy * dy) <= limit {
                offsets.push((dx, dy));
            }
        }
    }
    offsets
}

/// Cells whose center lies within `radius` of an occupied cell center.
pub fn dilate_obstacles(grid: &OccupancyGrid, radius: f64) -> BinaryMask {
    let mut mask = BinaryMask::for_grid(grid);
    let offsets = disk_offsets(radius.max(0.0), grid.resolution);
    for (cell, value) in grid.cells() {
        if value == Occupancy::Occupied {
            for (dx, dy) in &offsets {
                mask.set(cell.offset(*dx, *dy), true);
            }
        }
    }
    mask
}

/// One closed boundary between explored and unknown space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    /// Explored cells along the boundary in traversal order (explored side
    /// on the left), consecutive duplicates removed.
    pub cells: Vec<CellIndex>,
    /// Number of unit cell edges in the loop.
    pub edge_count: usize,
    /// Counter-clockwise loop around an explored region (as opposed to a
    /// hole of unknown space inside it).
    pub is_outer: bool,
}

// Directions E, N, W, S.
const DIRS: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

/// Cell to the left of the directed unit edge leaving `vertex` along `dir`.
fn edge_cell(vertex: (i32, i32), dir: usize) -> CellIndex {
    let (vx, vy) = vertex;
    match dir {
        0 => CellIndex::new(vx, vy),
        1 => CellIndex::new(vx - 1, vy),
        2 => CellIndex::new(vx - 1, vy - 1),
        _ => CellIndex::new(vx, vy - 1),
    }
}

/// Traces every explored/unknown boundary as closed loops. Loops are
/// ordered outer loops first, then by the start cell's row (north first)
/// and column (west first). Each loop starts at its northernmost, then
/// westernmost cell.
pub fn explored_contour(grid: &OccupancyGrid) -> Vec<Contour> {
    if grid.width == 0 || grid.height == 0 {
        return Vec::new();
    }
    let ox = grid.origin_cell.x;
    let oy = grid.origin_cell.y;
    let vw = grid.width + 1;
    let vh = grid.height + 1;
    let vertex_index = |v: (i32, i32)| -> usize {
        (v.1 - oy) as usize * vw + (v.0 - ox) as usize
    };
    let mut present = vec![0u8; vw * vh];
    let explored = |c: CellIndex| grid.get(c).is_explored();
    let mut edges: Vec<((i32, i32), usize)> = Vec::new();
    for (cell, value) in grid.cells() {
        if !value.is_explored() {
            continue;
        }
        let (x, y) = (cell.x, cell.y);
        let sides = [
            (CellIndex::new(x, y - 1), (x, y), 0usize),
            (CellIndex::new(x + 1, y), (x + 1, y), 1),
            (CellIndex::new(x, y + 1), (x + 1, y + 1), 2),
            (CellIndex::new(x - 1, y), (x, y + 1), 3),
        ];
        for (neighbor, vertex, dir) in sides {
            if !explored(neighbor) {
                present[vertex_index(vertex)] |= 1 << dir;
                edges.push((vertex, dir));
            }
        }
    }

    let mut contours = Vec::new();
    for &(start_vertex, start_dir) in &edges {
        if present[vertex_index(start_vertex)] & (1 << start_dir) == 0 {
            continue;
        }
        let mut loop_edges = Vec::new();
        let (mut vertex, mut dir) = (start_vertex, start_dir);
        loop {
            present[vertex_index(vertex)] &= !(1 << dir);
            loop_edges.push((vertex, dir));
            let next = (vertex.0 + DIRS[dir].0, vertex.1 + DIRS[dir].1);
            let mut available = present[vertex_index(next)];
            if next == start_vertex {
                available |= 1 << start_dir;
            }
            let choice = [(dir + 1) % 4, dir, (dir + 3) % 4]
                .into_iter()
                .find(|d| available & (1 << d) != 0);
            match choice {
                Some(d) if (next, d) != (start_vertex, start_dir) => {
                    vertex = next;
                    dir = d;
                }
                _ => break,
            }
        }
        contours.push(finish_loop(loop_edges));
    }
    contours.sort_by(|a, b| {
        let key = |c: &Contour| {
            let s = c.cells[0];
            (!c.is_outer, -s.y, s.x)
        };
        key(a).cmp(&key(b))
    });
    contours
}

fn finish_loop(edges: Vec<((i32, i32), usize)>) -> Contour {
    // Twice the signed area from the vertex sequence.
    let mut area2: i64 = 0;
    for &(v, d) in &edges {
        let (x0, y0) = (i64::from(v.0), i64::from(v.1));
        let (x1, y1) = (x0 + i64::from(DIRS[d].0), y0 + i64::from(DIRS[d].1));
        area2 += x0 * y1 - x1 * y0;
    }
    const PRIORITY: [usize; 4] = [2, 3, 0, 1]; // top, left, bottom, right
    let start = edges
        .iter()
        .enumerate()
        .min_by_key(|(_, &(v, d))| {
            let c = edge_cell(v, d);
            (-c.y, c.x, PRIORITY.iter().position(|p| *p == d))
        })
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut cells: Vec<CellIndex> = Vec::with_capacity(edges.len());
    for k in 0..edges.len() {
        let (v, d) = edges[(start + k) % edges.len()];
        let c = edge_cell(v, d);
        if cells.last() != Some(&c) {
            cells.push(c);
        }
    }
    while cells.len() > 1 && cells.first() == cells.last() {
        cells.pop();
    }
    Contour {
        cells,
        edge_count: edges.len(),
        is_outer: area2 > 0,
    }
}

//! Planar geometry shared by every subsystem.
//!
//! Frame convention: `+x` points East, `+y` points North, yaw is measured
//! counter-clockwise from East. Grid cells live on a global lattice anchored
//! at the world origin: cell `(i, j)` covers `[i*res, (i+1)*res) x [j*res, (j+1)*res)`.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Wraps an angle into `[-pi, pi)`.
pub fn normalize_angle(angle: f64) -> f64 {
    let wrapped = (angle + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if wrapped >= PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

/// Smallest signed difference `a - b`, wrapped into `[-pi, pi)`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(range: f64, angle: f64) -> Self {
        Self::new(range * angle.cos(), range * angle.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Bearing of this vector, CCW from East.
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// Robot pose in the map frame. The yaw is kept in `[-pi, pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: normalize_angle(yaw),
        }
    }

    pub fn at(position: Point2, yaw: f64) -> Self {
        Self::new(position.x, position.y, yaw)
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Index of a cell on the global lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub x: i32,
    pub y: i32,
}

impl CellIndex {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }

    /// 4-neighbours in E, N, W, S order.
    pub fn neighbors4(self) -> [CellIndex; 4] {
        [
            self.offset(1, 0),
            self.offset(0, 1),
            self.offset(-1, 0),
            self.offset(0, -1),
        ]
    }

    pub fn is_8_adjacent(self, other: CellIndex) -> bool {
        let dx = (self.x - other.x).abs();
        let dy = (self.y - other.y).abs();
        dx <= 1 && dy <= 1 && (dx, dy) != (0, 0)
    }

    /// Euclidean distance in cell units.
    pub fn cell_dist(self, other: CellIndex) -> f64 {
        let dx = f64::from(self.x - other.x);
        let dy = f64::from(self.y - other.y);
        dx.hypot(dy)
    }
}

pub fn cell_of(point: Point2, resolution: f64) -> CellIndex {
    CellIndex::new(
        (point.x / resolution).floor() as i32,
        (point.y / resolution).floor() as i32,
    )
}

pub fn cell_center(cell: CellIndex, resolution: f64) -> Point2 {
    Point2::new(
        (f64::from(cell.x) + 0.5) * resolution,
        (f64::from(cell.y) + 0.5) * resolution,
    )
}

/// Visits the lattice cells crossed by the segment that starts at `from`,
/// heads along `angle` and has the given `length` (Amanatides & Woo
/// traversal). The callback receives the cell and the ray parameters at
/// which the ray enters and leaves it; returning `false` stops the walk.
pub fn traverse_cells<F>(resolution: f64, from: Point2, angle: f64, length: f64, mut visit: F)
where
    F: FnMut(CellIndex, f64, f64) -> bool,
{
    let (dy, dx) = angle.sin_cos();
    let mut cell = cell_of(from, resolution);

    let axis = |d: f64, origin: f64, index: i32| -> (i32, f64, f64) {
        if d > 0.0 {
            let boundary = f64::from(index + 1) * resolution;
            (1, (boundary - origin) / d, resolution / d)
        } else if d < 0.0 {
            let boundary = f64::from(index) * resolution;
            (-1, (boundary - origin) / d, -resolution / d)
        } else {
            (0, f64::INFINITY, f64::INFINITY)
        }
    };
    let (step_x, mut t_max_x, t_delta_x) = axis(dx, from.x, cell.x);
    let (step_y, mut t_max_y, t_delta_y) = axis(dy, from.y, cell.y);

    let mut t = 0.0;
    loop {
        let t_exit = t_max_x.min(t_max_y);
        if !visit(cell, t, t_exit.min(length)) || t_exit >= length {
            return;
        }
        if t_max_x < t_max_y {
            cell.x += step_x;
            t = t_max_x;
            t_max_x += t_delta_x;
        } else {
            cell.y += step_y;
            t = t_max_y;
            t_max_y += t_delta_y;
        }
    }
}

/// Exact value `a + b*sqrt(2)` for lattice path lengths, so that equal
/// lengths compare equal regardless of summation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Surd2 {
    pub a: i64,
    pub b: i64,
}

impl Surd2 {
    pub const ZERO: Surd2 = Surd2 { a: 0, b: 0 };
    pub const ONE: Surd2 = Surd2 { a: 1, b: 0 };
    pub const SQRT2: Surd2 = Surd2 { a: 0, b: 1 };

    pub const fn new(a: i64, b: i64) -> Self {
        Self { a, b }
    }

    /// Step cost between two 8-adjacent cells (1 or sqrt 2).
    pub fn step(from: CellIndex, to: CellIndex) -> Self {
        if from.x != to.x && from.y != to.y {
            Self::SQRT2
        } else {
            Self::ONE
        }
    }

    pub fn to_f64(self) -> f64 {
        self.a as f64 + self.b as f64 * std::f64::consts::SQRT_2
    }

    pub fn signum(self) -> i32 {
        let (a, b) = (self.a as i128, self.b as i128);
        if a >= 0 && b >= 0 {
            return i32::from(a > 0 || b > 0);
        }
        if a <= 0 && b <= 0 {
            return -1;
        }
        // Mixed signs: compare a^2 with 2 b^2.
        let lhs = a * a;
        let rhs = 2 * b * b;
        if a > 0 {
            (lhs > rhs) as i32 - (lhs < rhs) as i32
        } else {
            (rhs > lhs) as i32 - (rhs < lhs) as i32
        }
    }

    pub fn abs(self) -> Self {
        if self.signum() < 0 {
            Self::new(-self.a, -self.b)
        } else {
            self
        }
    }
}

impl Add for Surd2 {
    type Output = Surd2;
    fn add(self, rhs: Surd2) -> Surd2 {
        Surd2::new(self.a + rhs.a, self.b + rhs.b)
    }
}

impl Sub for Surd2 {
    type Output = Surd2;
    fn sub(self, rhs: Surd2) -> Surd2 {
        Surd2::new(self.a - rhs.a, self.b - rhs.b)
    }
}

impl Mul<i64> for Surd2 {
    type Output = Surd2;
    fn mul(self, rhs: i64) -> Surd2 {
        Surd2::new(self.a * rhs, self.b * rhs)
    }
}

impl Ord for Surd2 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (*self - *other).signum().cmp(&0)
    }
}

impl PartialOrd for Surd2 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// The eight compass bins, in the fixed order used by landmark directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Cardinal {
    North,
    NorthEast,
    East,
    SouthEast,
    South,
    SouthWest,
    West,
    NorthWest,
}

impl Cardinal {
    pub const ALL: [Cardinal; 8] = [
        Cardinal::North,
        Cardinal::NorthEast,
        Cardinal::East,
        Cardinal::SouthEast,
        Cardinal::South,
        Cardinal::SouthWest,
        Cardinal::West,
        Cardinal::NorthWest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Cardinal::North => "North",
            Cardinal::NorthEast => "North-East",
            Cardinal::East => "East",
            Cardinal::SouthEast => "South-East",
            Cardinal::South => "South",
            Cardinal::SouthWest => "South-West",
            Cardinal::West => "West",
            Cardinal::NorthWest => "North-West",
        }
    }

    pub fn from_name(name: &str) -> Option<Cardinal> {
        Cardinal::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Position in [`Cardinal::ALL`].
    pub fn ordinal(self) -> usize {
        self as usize
    }

    /// Map-frame yaw of the bin center (CCW from East).
    pub fn yaw(self) -> f64 {
        // North is +90 deg and the bins advance clockwise.
        normalize_angle(PI / 2.0 - (self.ordinal() as f64) * PI / 4.0)
    }

    /// Unit vector pointing towards this compass direction.
    pub fn unit(self) -> Point2 {
        Point2::from_polar(1.0, self.yaw())
    }

    /// One compass step clockwise (`North -> North-East`).
    pub fn clockwise(self) -> Cardinal {
        Cardinal::ALL[(self.ordinal() + 1) % 8]
    }

    /// One compass step counter-clockwise (`North -> North-West`).
    pub fn counter_clockwise(self) -> Cardinal {
        Cardinal::ALL[(self.ordinal() + 7) % 8]
    }
}

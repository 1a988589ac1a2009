//! Ground-truth building description and its plain-text scenario format.
//!
//! The grammar is documented in `docs/scenario-format.md` at the repository
//! root. In short: `key: value` header lines, an ASCII map between `MAP` and
//! `ENDMAP` (first row is the northern edge), then one entity per line
//! (`DOOR`, `SIGN`, `NPC`, `POSTER`, `DIRECTORY`). Yaw values in the file are
//! degrees; they are stored as radians.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{cell_center, cell_of, normalize_angle, CellIndex, Point2, Pose};
use crate::mapping::{Occupancy, OccupancyGrid};

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid {field}: {message}")]
    Invariant { field: String, message: String },
}

fn parse_err(line: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse {
        line,
        message: message.into(),
    }
}

fn invariant(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invariant {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Wall,
    Free,
    /// A closed door: opaque and not traversable, drawn distinctly.
    Door,
}

impl CellKind {
    pub fn symbol(self) -> char {
        match self {
            CellKind::Wall => '#',
            CellKind::Free => '.',
            CellKind::Door => 'D',
        }
    }

    pub fn from_symbol(symbol: char) -> Option<CellKind> {
        match symbol {
            '#' => Some(CellKind::Wall),
            '.' => Some(CellKind::Free),
            'D' => Some(CellKind::Door),
            _ => None,
        }
    }

    pub fn is_opaque(self) -> bool {
        !matches!(self, CellKind::Free)
    }
}

/// Ground-truth occupancy of the building. Row 0 is the southern edge.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap {
    width: usize,
    height: usize,
    resolution: f64,
    cells: Vec<CellKind>,
}

impl WorldMap {
    pub fn new(width: usize, height: usize, resolution: f64, fill: CellKind) -> Self {
        Self {
            width,
            height,
            resolution,
            cells: vec![fill; width * height],
        }
    }

    /// Builds a map from ASCII rows, northern row first.
    pub fn from_rows<S: AsRef<str>>(rows: &[S], resolution: f64) -> Result<Self, ScenarioError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().chars().count());
        let mut map = WorldMap::new(width, height, resolution, CellKind::Wall);
        for (row_index, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.chars().count() != width {
                return Err(invariant("map", format!("row {row_index} has a different width")));
            }
            let y = (height - 1 - row_index) as i32;
            for (x, symbol) in row.chars().enumerate() {
                let kind = CellKind::from_symbol(symbol).ok_or_else(|| {
                    invariant("map", format!("unknown symbol {symbol:?} in row {row_index}"))
                })?;
                map.set(CellIndex::new(x as i32, y), kind);
            }
        }
        Ok(map)
    }

    pub fn to_rows(&self) -> Vec<String> {
        (0..self.height)
            .rev()
            .map(|y| {
                (0..self.width)
                    .map(|x| self.cells[y * self.width + x].symbol())
                    .collect()
            })
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Width and height in meters.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.resolution,
            self.height as f64 * self.resolution,
        )
    }

    pub fn contains(&self, cell: CellIndex) -> bool {
        cell.x >= 0 && cell.y >= 0 && (cell.x as usize) < self.width && (cell.y as usize) < self.height
    }

    pub fn kind(&self, cell: CellIndex) -> Option<CellKind> {
        self.contains(cell)
            .then(|| self.cells[cell.y as usize * self.width + cell.x as usize])
    }

    pub fn set(&mut self, cell: CellIndex, kind: CellKind) {
        if self.contains(cell) {
            self.cells[cell.y as usize * self.width + cell.x as usize] = kind;
        }
    }

    /// Walls and closed doors block rays and motion; outside the map is empty space.
    pub fn is_opaque(&self, cell: CellIndex) -> bool {
        self.kind(cell).is_some_and(CellKind::is_opaque)
    }

    pub fn is_free(&self, cell: CellIndex) -> bool {
        self.kind(cell) == Some(CellKind::Free)
    }

    pub fn cell_of(&self, point: Point2) -> CellIndex {
        cell_of(point, self.resolution)
    }

    pub fn cell_center(&self, cell: CellIndex) -> Point2 {
        cell_center(cell, self.resolution)
    }

    /// The whole map as a fully explored occupancy grid; doors count as
    /// occupied.
    pub fn to_occupancy(&self) -> OccupancyGrid {
        let mut grid = OccupancyGrid::with_window(self.resolution, CellIndex::new(0, 0), self.width, self.height);
        for (cell, kind) in self.cells() {
            grid.set(cell, if kind == CellKind::Free { Occupancy::Free } else { Occupancy::Occupied });
        }
        grid
    }

    pub fn cells(&self) -> impl Iterator<Item = (CellIndex, CellKind)> + '_ {
        self.cells.iter().enumerate().map(move |(i, kind)| {
            (
                CellIndex::new((i % self.width) as i32, (i / self.width) as i32),
                *kind,
            )
        })
    }
}

/// Range of viewer bearings (direction from the object to the viewer).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YawInterval {
    pub center: f64,
    pub half_width: f64,
}

impl YawInterval {
    pub fn contains(&self, yaw: f64) -> bool {
        crate::geom::angle_diff(yaw, self.center).abs() <= self.half_width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoorSpec {
    pub id: u32,
    pub position: Point2,
    /// Outward normal of the door face, pointing into the corridor.
    pub yaw: f64,
    pub label_text: Option<String>,
    pub label_visible_from: YawInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelativeDirection {
    Left,
    Right,
    Forward,
    Backwards,
}

impl RelativeDirection {
    pub const ALL: [RelativeDirection; 4] = [
        RelativeDirection::Left,
        RelativeDirection::Right,
        RelativeDirection::Forward,
        RelativeDirection::Backwards,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RelativeDirection::Left => "left",
            RelativeDirection::Right => "right",
            RelativeDirection::Forward => "forward",
            RelativeDirection::Backwards => "backwards",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name() == name)
    }

    /// Rotation from the observer's heading.
    pub fn offset(self) -> f64 {
        use std::f64::consts::{FRAC_PI_2, PI};
        match self {
            RelativeDirection::Forward => 0.0,
            RelativeDirection::Left => FRAC_PI_2,
            RelativeDirection::Backwards => PI,
            RelativeDirection::Right => -FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignSpec {
    pub id: u32,
    pub position: Point2,
    /// Direction the printed face points to; a reader faces the opposite way.
    pub facing_yaw: f64,
    pub entries: Vec<(RelativeDirection, String)>,
}

impl SignSpec {
    /// Heading of someone standing in front of the sign and reading it.
    pub fn reader_heading(&self) -> f64 {
        normalize_angle(self.facing_yaw + std::f64::consts::PI)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NpcKind {
    Doctor,
    Nurse,
    Patient,
    Generic,
}

impl NpcKind {
    pub fn name(self) -> &'static str {
        match self {
            NpcKind::Doctor => "doctor",
            NpcKind::Nurse => "nurse",
            NpcKind::Patient => "patient",
            NpcKind::Generic => "generic",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [NpcKind::Doctor, NpcKind::Nurse, NpcKind::Patient, NpcKind::Generic]
            .into_iter()
            .find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpcSpec {
    pub id: u32,
    pub position: Point2,
    pub yaw: f64,
    pub kind: NpcKind,
    pub known_rooms: BTreeSet<String>,
    pub knows_directory: bool,
}

/// Wall decoration that a detector may mistake for a sign or label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosterSpec {
    pub id: u32,
    pub position: Point2,
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockCosts {
    /// m/s
    pub linear_speed: f64,
    /// rad/s
    pub angular_speed: f64,
    pub scan_360: f64,
    pub vlm_call: f64,
    pub npc_exchange: f64,
}

impl Default for ClockCosts {
    fn default() -> Self {
        Self {
            linear_speed: 0.5,
            angular_speed: 1.0,
            scan_360: 6.0,
            vlm_call: 10.0,
            npc_exchange: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum GoalTarget {
    /// Room number text, e.g. `3012`.
    Room(String),
    /// Occupant name resolved through the directory.
    Occupant(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub target: GoalTarget,
    /// When false the robot starts without a task and has to ask a person.
    pub announced: bool,
}

impl GoalSpec {
    pub fn room(number: impl Into<String>) -> Self {
        Self {
            target: GoalTarget::Room(number.into()),
            announced: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub map: WorldMap,
    pub doors: Vec<DoorSpec>,
    pub signs: Vec<SignSpec>,
    pub npcs: Vec<NpcSpec>,
    pub posters: Vec<PosterSpec>,
    pub directory: BTreeMap<String, String>,
    pub start_pose: Pose,
    pub goal: GoalSpec,
    pub time_limit: f64,
    pub clock_costs: ClockCosts,
    pub footprint_radius: f64,
    pub interaction_radius: f64,
}

pub const DEFAULT_RESOLUTION: f64 = 0.1;
pub const DEFAULT_FOOTPRINT_RADIUS: f64 = 0.3;
pub const DEFAULT_INTERACTION_RADIUS: f64 = 1.5;
pub const DEFAULT_LABEL_HALF_ANGLE_DEG: f64 = 75.0;

impl Scenario {
    /// A scenario with no entities around the given map; useful for tests
    /// and programmatic construction. Call [`Scenario::validate`] after
    /// adding entities.
    pub fn bare(name: impl Into<String>, map: WorldMap, start_pose: Pose, goal: GoalSpec) -> Self {
        Self {
            name: name.into(),
            map,
            doors: Vec::new(),
            signs: Vec::new(),
            npcs: Vec::new(),
            posters: Vec::new(),
            directory: BTreeMap::new(),
            start_pose,
            goal,
            time_limit: 900.0,
            clock_costs: ClockCosts::default(),
            footprint_radius: DEFAULT_FOOTPRINT_RADIUS,
            interaction_radius: DEFAULT_INTERACTION_RADIUS,
        }
    }

    /// Every room number printed on a door label.
    pub fn room_numbers(&self) -> BTreeSet<String> {
        self.doors.iter().filter_map(|d| d.label_text.clone()).collect()
    }

    pub fn door_with_label(&self, label: &str) -> Option<&DoorSpec> {
        self.doors
            .iter()
            .find(|d| d.label_text.as_deref() == Some(label))
    }

    /// Room number the episode ultimately has to reach.
    pub fn goal_room(&self) -> Option<&str> {
        match &self.goal.target {
            GoalTarget::Room(room) => Some(room),
            GoalTarget::Occupant(name) => self.directory.get(name).map(String::as_str),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let res = self.map.resolution();
        if !(res > 0.0 && res.is_finite()) {
            return Err(invariant("resolution", "must be positive"));
        }
        if self.map.width() == 0 || self.map.height() == 0 {
            return Err(invariant("map", "empty map"));
        }
        if !(self.time_limit > 0.0 && self.time_limit.is_finite()) {
            return Err(invariant("time_limit", "must be positive"));
        }
        let costs = &self.clock_costs;
        for (field, value) in [
            ("linear_speed", costs.linear_speed),
            ("angular_speed", costs.angular_speed),
            ("scan_360", costs.scan_360),
            ("vlm_call", costs.vlm_call),
            ("npc_exchange", costs.npc_exchange),
            ("footprint_radius", self.footprint_radius),
            ("interaction_radius", self.interaction_radius),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(invariant(field, "must be positive"));
            }
        }
        if !self.map.is_free(self.map.cell_of(self.start_pose.position())) {
            return Err(invariant("start", "start pose must lie in a free cell"));
        }

        let mut ids = BTreeSet::new();
        for door in &self.doors {
            if !ids.insert(door.id) {
                return Err(invariant(format!("door {}", door.id), "duplicate id"));
            }
            let cell = self.map.cell_of(door.position);
            if !self.map.contains(cell) {
                return Err(invariant(
                    format!("door {}", door.id),
                    format!("position maps to cell ({}, {}) outside the map", cell.x, cell.y),
                ));
            }
            if !self.is_wall_adjacent(cell) {
                return Err(invariant(
                    format!("door {}", door.id),
                    "position is not on or next to a wall",
                ));
            }
            if door.label_text.as_deref().is_some_and(str::is_empty) {
                return Err(invariant(format!("door {}", door.id), "empty label text"));
            }
        }

        let rooms = self.room_numbers();
        ids.clear();
        for sign in &self.signs {
            if !ids.insert(sign.id) {
                return Err(invariant(format!("sign {}", sign.id), "duplicate id"));
            }
            if sign.entries.is_empty() {
                return Err(invariant(format!("sign {}", sign.id), "no entries"));
            }
            if !self.map.contains(self.map.cell_of(sign.position)) {
                return Err(invariant(format!("sign {}", sign.id), "outside the map"));
            }
        }
        ids.clear();
        for npc in &self.npcs {
            if !ids.insert(npc.id) {
                return Err(invariant(format!("npc {}", npc.id), "duplicate id"));
            }
            if !self.map.is_free(self.map.cell_of(npc.position)) {
                return Err(invariant(format!("npc {}", npc.id), "must stand in a free cell"));
            }
            if let Some(unknown) = npc.known_rooms.iter().find(|r| !rooms.contains(*r)) {
                return Err(invariant(
                    format!("npc {}", npc.id),
                    format!("knows unknown room {unknown}"),
                ));
            }
        }
        for (name, room) in &self.directory {
            if !rooms.contains(room) {
                return Err(invariant(
                    "directory",
                    format!("{name} is listed in room {room}, which has no door"),
                ));
            }
        }
        match &self.goal.target {
            GoalTarget::Room(room) if !rooms.contains(room) => {
                return Err(invariant("goal", format!("room {room} has no door")));
            }
            GoalTarget::Occupant(name) if !self.directory.contains_key(name) => {
                return Err(invariant("goal", format!("{name} is not in the directory")));
            }
            _ => {}
        }
        Ok(())
    }

    fn is_wall_adjacent(&self, cell: CellIndex) -> bool {
        match self.map.kind(cell) {
            Some(CellKind::Door | CellKind::Wall) => true,
            Some(CellKind::Free) => cell
                .neighbors4()
                .iter()
                .any(|n| self.map.kind(*n).is_none_or(CellKind::is_opaque)),
            None => false,
        }
    }

    /// Parses and validates a scenario document.
    pub fn parse(document: &str) -> Result<Scenario, ScenarioError> {
        parse_document(document)
    }

    /// Serializes to the scenario format; `parse(to_document())` reproduces
    /// the scenario up to degree/radian rounding of yaw values, and the
    /// document text of a parsed document is stable.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        let deg = yaw_to_degrees;
        let _ = writeln!(out, "name: {}", self.name);
        let _ = writeln!(out, "resolution: {}", self.map.resolution());
        let _ = writeln!(
            out,
            "start: {} {} {}",
            self.start_pose.x,
            self.start_pose.y,
            deg(self.start_pose.yaw)
        );
        let goal = match &self.goal.target {
            GoalTarget::Room(room) => format!("room {room}"),
            GoalTarget::Occupant(name) => format!("occupant {}", quote(name)),
        };
        let hidden = if self.goal.announced { "" } else { " hidden" };
        let _ = writeln!(out, "goal: {goal}{hidden}");
        let _ = writeln!(out, "time_limit: {}", self.time_limit);
        let c = &self.clock_costs;
        let _ = writeln!(out, "linear_speed: {}", c.linear_speed);
        let _ = writeln!(out, "angular_speed: {}", c.angular_speed);
        let _ = writeln!(out, "scan_360: {}", c.scan_360);
        let _ = writeln!(out, "vlm_call: {}", c.vlm_call);
        let _ = writeln!(out, "npc_exchange: {}", c.npc_exchange);
        let _ = writeln!(out, "footprint_radius: {}", self.footprint_radius);
        let _ = writeln!(out, "interaction_radius: {}", self.interaction_radius);
        out.push_str("MAP\n");
        for row in self.map.to_rows() {
            out.push_str(&row);
            out.push('\n');
        }
        out.push_str("ENDMAP\n");

        let rooms = self.room_numbers();
        for door in &self.doors {
            let _ = write!(
                out,
                "DOOR {} {} {} {}",
                door.id,
                door.position.x,
                door.position.y,
                deg(door.yaw)
            );
            if let Some(label) = &door.label_text {
                let _ = write!(out, " label={}", quote(label));
            }
            let _ = writeln!(out, " visible={}", (door.label_visible_from.half_width.to_degrees() * 1e9).round() / 1e9);
        }
        for sign in &self.signs {
            let _ = write!(
                out,
                "SIGN {} {} {} {}",
                sign.id,
                sign.position.x,
                sign.position.y,
                deg(sign.facing_yaw)
            );
            for (direction, text) in &sign.entries {
                let _ = write!(out, " {}={}", direction.name(), quote(text));
            }
            out.push('\n');
        }
        for npc in &self.npcs {
            let knows = if !rooms.is_empty() && npc.known_rooms == rooms {
                "all".to_string()
            } else {
                quote(&npc.known_rooms.iter().cloned().collect::<Vec<_>>().join(","))
            };
            let _ = writeln!(
                out,
                "NPC {} {} {} {} kind={} knows={} directory={}",
                npc.id,
                npc.position.x,
                npc.position.y,
                deg(npc.yaw),
                npc.kind.name(),
                knows,
                if npc.knows_directory { "yes" } else { "no" }
            );
        }
        for poster in &self.posters {
            let _ = writeln!(
                out,
                "POSTER {} {} {} {}",
                poster.id,
                poster.position.x,
                poster.position.y,
                deg(poster.yaw)
            );
        }
        for (name, room) in &self.directory {
            let _ = writeln!(out, "DIRECTORY {} {}", quote(name), quote(room));
        }
        out
    }
}

fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for ch in text.chars() {
        if ch == '"' || ch == '\\' {
            out.push('\\');
        }
        out.push(ch);
    }
    out.push('"');
    out
}

/// Splits a record line into whitespace-separated tokens, honouring double
/// quotes (with `\"` and `\\` escapes). Quotes are removed from the tokens.
fn tokenize(line: &str, line_no: usize) -> Result<Vec<String>, ScenarioError> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut in_token = false;
    let mut chars = line.chars();
    while let Some(ch) = chars.next() {
        match ch {
            '"' => {
                in_token = true;
                loop {
                    match chars.next() {
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some(escaped) => current.push(escaped),
                            None => return Err(parse_err(line_no, "dangling escape")),
                        },
                        Some(other) => current.push(other),
                        None => return Err(parse_err(line_no, "unterminated quote")),
                    }
                }
            }
            c if c.is_whitespace() => {
                if in_token {
                    tokens.push(std::mem::take(&mut current));
                    in_token = false;
                }
            }
            c => {
                in_token = true;
                current.push(c);
            }
        }
    }
    if in_token {
        tokens.push(current);
    }
    Ok(tokens)
}

fn number(token: &str, line: usize, what: &str) -> Result<f64, ScenarioError> {
    let value: f64 = token
        .parse()
        .map_err(|_| parse_err(line, format!("{what}: expected a number, found {token:?}")))?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(parse_err(line, format!("{what}: not finite")))
    }
}

struct Record {
    id: u32,
    position: Point2,
    yaw: f64,
    attributes: Vec<(String, String)>,
}

fn parse_record(tokens: &[String], line: usize) -> Result<Record, ScenarioError> {
    if tokens.len() < 5 {
        return Err(parse_err(line, format!("{} record needs id, x, y and yaw", tokens[0])));
    }
    let id = tokens[1]
        .parse()
        .map_err(|_| parse_err(line, format!("bad id {:?}", tokens[1])))?;
    let x = number(&tokens[2], line, "x")?;
    let y = number(&tokens[3], line, "y")?;
    let yaw = yaw_from_degrees(number(&tokens[4], line, "yaw")?);
    let attributes = tokens[5..]
        .iter()
        .map(|t| {
            t.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| parse_err(line, format!("expected key=value, found {t:?}")))
        })
        .collect::<Result<_, _>>()?;
    Ok(Record {
        id,
        position: Point2::new(x, y),
        yaw: normalize_angle(yaw),
        attributes,
    })
}

enum Knows {
    All,
    Default,
    Listed(BTreeSet<String>),
}

fn parse_document(document: &str) -> Result<Scenario, ScenarioError> {
    let mut header: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut map_rows: Vec<String> = Vec::new();
    let mut in_map = false;
    let mut saw_map = false;
    let mut doors = Vec::new();
    let mut signs = Vec::new();
    let mut npcs: Vec<(NpcSpec, Knows, Option<bool>)> = Vec::new();
    let mut posters = Vec::new();
    let mut directory = BTreeMap::new();

    for (index, raw) in document.lines().enumerate() {
        let line_no = index + 1;
        if in_map {
            let row = raw.trim_end();
            if row == "ENDMAP" {
                in_map = false;
            } else {
                map_rows.push(row.to_string());
            }
            continue;
        }
        let line = raw.trim();
        if line.is_empty() || line.starts_with("//") {
            continue;
        }
        if line == "MAP" {
            if saw_map {
                return Err(parse_err(line_no, "second MAP block"));
            }
            in_map = true;
            saw_map = true;
            continue;
        }
        let keyword = line.split_whitespace().next().unwrap_or_default();
        match keyword {
            "DOOR" | "SIGN" | "NPC" | "POSTER" => {
                let tokens = tokenize(line, line_no)?;
                let record = parse_record(&tokens, line_no)?;
                match keyword {
                    "DOOR" => {
                        let mut label = None;
                        let mut half = DEFAULT_LABEL_HALF_ANGLE_DEG.to_radians();
                        for (key, value) in &record.attributes {
                            match key.as_str() {
                                "label" => label = Some(value.clone()),
                                "visible" => half = number(value, line_no, "visible")?.to_radians(),
                                other => {
                                    return Err(parse_err(line_no, format!("unknown door attribute {other}")))
                                }
                            }
                        }
                        doors.push(DoorSpec {
                            id: record.id,
                            position: record.position,
                            yaw: record.yaw,
                            label_text: label,
                            label_visible_from: YawInterval {
                                center: record.yaw,
                                half_width: half,
                            },
                        });
                    }
                    "SIGN" => {
                        let mut entries = Vec::new();
                        for (key, value) in &record.attributes {
                            let direction = RelativeDirection::from_name(key).ok_or_else(|| {
                                parse_err(line_no, format!("sign entry direction must be left/right/forward/backwards, found {key}"))
                            })?;
                            entries.push((direction, value.clone()));
                        }
                        signs.push(SignSpec {
                            id: record.id,
                            position: record.position,
                            facing_yaw: record.yaw,
                            entries,
                        });
                    }
                    "NPC" => {
                        let mut kind = NpcKind::Generic;
                        let mut knows = Knows::Default;
                        let mut knows_directory = None;
                        for (key, value) in &record.attributes {
                            match key.as_str() {
                                "kind" => {
                                    kind = NpcKind::from_name(value).ok_or_else(|| {
                                        parse_err(line_no, format!("unknown npc kind {value}"))
                                    })?
                                }
                                "knows" if value == "all" => knows = Knows::All,
                                "knows" => {
                                    knows = Knows::Listed(
                                        value
                                            .split(',')
                                            .map(str::trim)
                                            .filter(|s| !s.is_empty())
                                            .map(String::from)
                                            .collect(),
                                    )
                                }
                                "directory" => {
                                    knows_directory = Some(match value.as_str() {
                                        "yes" | "true" => true,
                                        "no" | "false" => false,
                                        _ => return Err(parse_err(line_no, "directory must be yes or no")),
                                    })
                                }
                                other => {
                                    return Err(parse_err(line_no, format!("unknown npc attribute {other}")))
                                }
                            }
                        }
                        npcs.push((
                            NpcSpec {
                                id: record.id,
                                position: record.position,
                                yaw: record.yaw,
                                kind,
                                known_rooms: BTreeSet::new(),
                                knows_directory: false,
                            },
                            knows,
                            knows_directory,
                        ));
                    }
                    _ => {
                        if !record.attributes.is_empty() {
                            return Err(parse_err(line_no, "posters take no attributes"));
                        }
                        posters.push(PosterSpec {
                            id: record.id,
                            position: record.position,
                            yaw: record.yaw,
                        });
                    }
                }
            }
            "DIRECTORY" => {
                let tokens = tokenize(line, line_no)?;
                if tokens.len() != 3 {
                    return Err(parse_err(line_no, "DIRECTORY needs a quoted name and a room"));
                }
                directory.insert(tokens[1].clone(), tokens[2].clone());
            }
            _ => {
                let (key, value) = line
                    .split_once(':')
                    .ok_or_else(|| parse_err(line_no, format!("unrecognised line {line:?}")))?;
                let key = key.trim().to_string();
                if header.contains_key(&key) {
                    return Err(parse_err(line_no, format!("duplicate key {key}")));
                }
                header.insert(key, (line_no, value.trim().to_string()));
            }
        }
    }
    if in_map {
        return Err(parse_err(document.lines().count(), "MAP block is not closed by ENDMAP"));
    }
    if !saw_map {
        return Err(invariant("map", "missing MAP block"));
    }

    let get = |key: &str| header.get(key).map(|(l, v)| (*l, v.as_str()));
    let required = |key: &str| get(key).ok_or_else(|| invariant(key, "missing header key"));
    let header_number = |key: &str, default: Option<f64>| -> Result<f64, ScenarioError> {
        match get(key) {
            Some((line, value)) => number(value, line, key),
            None => default.ok_or_else(|| invariant(key, "missing header key")),
        }
    };

    for (key, (line, _)) in &header {
        const KNOWN: [&str; 12] = [
            "name",
            "resolution",
            "start",
            "goal",
            "time_limit",
            "linear_speed",
            "angular_speed",
            "scan_360",
            "vlm_call",
            "npc_exchange",
            "footprint_radius",
            "interaction_radius",
        ];
        if !KNOWN.contains(&key.as_str()) {
            return Err(parse_err(*line, format!("unknown header key {key}")));
        }
    }

    let name = required("name")?.1.to_string();
    let resolution = header_number("resolution", Some(DEFAULT_RESOLUTION))?;
    if resolution <= 0.0 {
        return Err(invariant("resolution", "must be positive"));
    }
    let map = WorldMap::from_rows(&map_rows, resolution)?;

    let (start_line, start) = required("start")?;
    let parts: Vec<&str> = start.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(parse_err(start_line, "start needs x y yaw"));
    }
    let start_pose = Pose::new(
        number(parts[0], start_line, "start x")?,
        number(parts[1], start_line, "start y")?,
        yaw_from_degrees(number(parts[2], start_line, "start yaw")?),
    );

    let (goal_line, goal_text) = required("goal")?;
    let goal_tokens = tokenize(goal_text, goal_line)?;
    let announced = !goal_tokens.iter().any(|t| t == "hidden");
    let target = match goal_tokens.first().map(String::as_str) {
        Some("room") if goal_tokens.len() >= 2 => GoalTarget::Room(goal_tokens[1].clone()),
        Some("occupant") if goal_tokens.len() >= 2 => GoalTarget::Occupant(goal_tokens[1].clone()),
        _ => {
            return Err(parse_err(
                goal_line,
                "goal must be `room <number>` or `occupant \"<name>\"`, optionally followed by `hidden`",
            ))
        }
    };

    let defaults = ClockCosts::default();
    let clock_costs = ClockCosts {
        linear_speed: header_number("linear_speed", Some(defaults.linear_speed))?,
        angular_speed: header_number("angular_speed", Some(defaults.angular_speed))?,
        scan_360: header_number("scan_360", Some(defaults.scan_360))?,
        vlm_call: header_number("vlm_call", Some(defaults.vlm_call))?,
        npc_exchange: header_number("npc_exchange", Some(defaults.npc_exchange))?,
    };

    let room_numbers: BTreeSet<String> = doors.iter().filter_map(|d: &DoorSpec| d.label_text.clone()).collect();
    let doctor_rooms: BTreeSet<String> = directory.values().cloned().collect();
    let npcs = npcs
        .into_iter()
        .map(|(mut npc, knows, knows_directory)| {
            npc.known_rooms = match knows {
                Knows::All => room_numbers.clone(),
                Knows::Listed(rooms) => rooms,
                Knows::Default => match npc.kind {
                    NpcKind::Nurse => room_numbers.clone(),
                    NpcKind::Doctor => doctor_rooms.clone(),
                    NpcKind::Patient | NpcKind::Generic => BTreeSet::new(),
                },
            };
            npc.knows_directory = knows_directory
                .unwrap_or(matches!(npc.kind, NpcKind::Nurse | NpcKind::Doctor));
            npc
        })
        .collect();

    let scenario = Scenario {
        name,
        map,
        doors,
        signs,
        npcs,
        posters,
        directory,
        start_pose,
        goal: GoalSpec { target, announced },
        time_limit: header_number("time_limit", Some(900.0))?,
        clock_costs,
        footprint_radius: header_number("footprint_radius", Some(DEFAULT_FOOTPRINT_RADIUS))?,
        interaction_radius: header_number("interaction_radius", Some(DEFAULT_INTERACTION_RADIUS))?,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Degrees as written in documents: wrapped into [-180, 180) and rounded
/// to 1e-9 so that a parse/write cycle reproduces the text.
fn yaw_to_degrees(yaw: f64) -> f64 {
    let d = (normalize_angle(yaw).to_degrees() * 1e9).round() / 1e9;
    if d >= 180.0 {
        d - 360.0
    } else {
        d
    }
}

fn yaw_from_degrees(degrees: f64) -> f64 {
    let wrapped = (degrees + 180.0).rem_euclid(360.0) - 180.0;
    if wrapped <= -180.0 {
        -std::f64::consts::PI
    } else {
        normalize_angle(wrapped.to_radians())
    }
}

/// Convenience for building door specs in code.
pub fn door(id: u32, position: Point2, yaw: f64, label: Option<&str>) -> DoorSpec {
    DoorSpec {
        id,
        position,
        yaw: normalize_angle(yaw),
        label_text: label.map(String::from),
        label_visible_from: YawInterval {
            center: normalize_angle(yaw),
            half_width: DEFAULT_LABEL_HALF_ANGLE_DEG.to_radians(),
        },
    }
}

/// World position of a cell center for a map built at `resolution`.
pub fn cell_position(x: i32, y: i32, resolution: f64) -> Point2 {
    cell_center(CellIndex::new(x, y), resolution)
}

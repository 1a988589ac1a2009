//! Landmark memory bank: detections are filtered, matched into tracks and
//! promoted to indexed landmarks; frontiers are refreshed wholesale; visited
//! flags and attachments drive the planner-facing JSON.

mod filter;
mod json;

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontier::Frontier;
use crate::geom::{Cardinal, Point2};
use crate::world::{DetectionCategory, DetectionEvent};

pub use filter::{filter_detection, filter_rule, FilterDecision, FilterRule, RejectReason, FILTER_RULES};
pub use json::{entries_to_json, parse_json, parse_name, LandmarkEntry, ParsedName};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LandmarkCategory {
    Door,
    Person,
    Sign,
    Frontier,
}

impl LandmarkCategory {
    pub const ALL: [LandmarkCategory; 4] = [
        LandmarkCategory::Door,
        LandmarkCategory::Person,
        LandmarkCategory::Sign,
        LandmarkCategory::Frontier,
    ];

    /// Object name used in the planner JSON.
    pub fn object_name(self) -> &'static str {
        match self {
            LandmarkCategory::Door => "a door",
            LandmarkCategory::Person => "a person",
            LandmarkCategory::Sign => "a directions sign",
            LandmarkCategory::Frontier => "a frontier",
        }
    }

    pub fn from_detection(category: DetectionCategory) -> Option<Self> {
        match category {
            DetectionCategory::Door => Some(LandmarkCategory::Door),
            DetectionCategory::Person => Some(LandmarkCategory::Person),
            DetectionCategory::Sign => Some(LandmarkCategory::Sign),
            DetectionCategory::RoomLabel => None,
        }
    }
}

/// Texts grouped into the eight compass bins.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CardinalDirections {
    bins: [Vec<String>; 8],
}

impl CardinalDirections {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bin: Cardinal, text: impl Into<String>) {
        self.bins[bin.ordinal()].push(text.into());
    }

    pub fn get(&self, bin: Cardinal) -> &[String] {
        &self.bins[bin.ordinal()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Cardinal, &[String])> {
        Cardinal::ALL
            .into_iter()
            .map(move |c| (c, self.bins[c.ordinal()].as_slice()))
    }

    pub fn nonempty_bins(&self) -> usize {
        self.bins.iter().filter(|b| !b.is_empty()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.nonempty_bins() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landmark {
    pub index: u32,
    pub category: LandmarkCategory,
    pub position: Point2,
    pub approach_yaw: f64,
    pub visited: bool,
    pub label_text: Option<String>,
    pub directions: Option<CardinalDirections>,
    pub info: Option<String>,
    /// Frames of the most recent detections (at most the promotion window).
    pub detection_history: Vec<u64>,
}

impl Landmark {
    /// Planner-facing name, e.g. `a door` or `Visited_a door_3012`.
    pub fn name(&self) -> String {
        let base = self.category.object_name();
        match (self.visited, &self.label_text) {
            (false, _) => base.to_string(),
            (true, Some(label)) => format!("Visited_{base}_{label}"),
            (true, None) => format!("Visited_{base}"),
        }
    }

    pub fn entry(&self) -> LandmarkEntry {
        LandmarkEntry {
            index: self.index,
            name: self.name(),
            position: self.position,
            directions: self.directions.clone(),
            info: self.info.clone(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MemoryError {
    #[error("no landmark with index {0}")]
    UnknownIndex(u32),
    #[error("landmark {index} is {category:?}; {operation} does not apply")]
    CategoryMismatch {
        index: u32,
        category: LandmarkCategory,
        operation: &'static str,
    },
    #[error("unrecognized landmark name {0:?}")]
    UnknownName(String),
    #[error("index {0} appears twice")]
    DuplicateIndex(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemorySettings {
    pub match_radius: f64,
    pub window: u64,
    pub min_hits: usize,
    pub frontier_suppression_radius: f64,
}

impl Default for MemorySettings {
    fn default() -> Self {
        Self {
            match_radius: 1.0,
            window: 20,
            min_hits: 3,
            frontier_suppression_radius: 0.5,
        }
    }
}

/// A cluster of matched detections, promoted or not.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub category: LandmarkCategory,
    sum: Point2,
    count: u32,
    heading_sum: Point2,
    hits: VecDeque<u64>,
    pub landmark: Option<u32>,
}

impl Track {
    pub fn position(&self) -> Point2 {
        self.sum * (1.0 / f64::from(self.count))
    }

    pub fn approach_yaw(&self) -> f64 {
        self.heading_sum.angle()
    }

    pub fn last_hit(&self) -> Option<u64> {
        self.hits.back().copied()
    }

    pub fn hits(&self) -> impl Iterator<Item = u64> + '_ {
        self.hits.iter().copied()
    }
}

/// Outcome of ingesting one frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub promoted: Vec<u32>,
}

#[derive(Debug, Clone, Default)]
pub struct MemoryBank {
    landmarks: BTreeMap<u32, Landmark>,
    next_index: u32,
    tracks: Vec<Track>,
    suppressed_frontiers: Vec<Point2>,
    settings: MemorySettings,
}

impl MemoryBank {
    pub fn new() -> Self {
        Self::with_settings(MemorySettings::default())
    }

    pub fn with_settings(settings: MemorySettings) -> Self {
        Self {
            settings,
            ..Self::default()
        }
    }

    pub fn settings(&self) -> &MemorySettings {
        &self.settings
    }

    pub fn next_index(&self) -> u32 {
        self.next_index
    }

    pub fn get(&self, index: u32) -> Option<&Landmark> {
        self.landmarks.get(&index)
    }

    pub fn landmarks(&self) -> impl Iterator<Item = &Landmark> {
        self.landmarks.values()
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn unvisited(&self) -> impl Iterator<Item = &Landmark> {
        self.landmarks.values().filter(|l| !l.visited)
    }

    pub fn frontier_indices(&self) -> Vec<u32> {
        self.landmarks
            .values()
            .filter(|l| l.category == LandmarkCategory::Frontier)
            .map(|l| l.index)
            .collect()
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    fn allocate(&mut self) -> u32 {
        let index = self.next_index;
        self.next_index += 1;
        index
    }

    /// Adds a landmark directly (fixtures and replays). Returns its index.
    pub fn insert(&mut self, category: LandmarkCategory, position: Point2, approach_yaw: f64) -> u32 {
        let index = self.allocate();
        self.landmarks.insert(
            index,
            Landmark {
                index,
                category,
                position,
                approach_yaw,
                visited: false,
                label_text: None,
                directions: None,
                info: None,
                detection_history: Vec::new(),
            },
        );
        index
    }

    /// Ingests one filtered detection.
    pub fn ingest_detection(&mut self, event: &DetectionEvent, frame_index: u64) -> IngestReport {
        self.ingest_frame(std::slice::from_ref(event), frame_index)
    }

    /// Ingests the filtered detections of one frame. Within each category,
    /// event/track pairs closer than the match radius are taken greedily by
    /// increasing distance (ties by event then track order), one-to-one.
    /// Unmatched events start new tracks. A track is promoted once it has
    /// `min_hits` hits in the trailing `window` frames; unpromoted tracks
    /// without a hit in that window are dropped.
    pub fn ingest_frame(&mut self, events: &[DetectionEvent], frame_index: u64) -> IngestReport {
        let window = self.settings.window;
        let in_window = |frame: u64| frame + window > frame_index;
        self.tracks
            .retain(|t| t.landmark.is_some() || t.last_hit().is_some_and(in_window));

        let mut hit_tracks = Vec::new();
        for category in LandmarkCategory::ALL {
            let event_ids: Vec<usize> = events
                .iter()
                .enumerate()
                .filter(|(_, e)| LandmarkCategory::from_detection(e.category) == Some(category))
                .map(|(i, _)| i)
                .collect();
            if event_ids.is_empty() {
                continue;
            }
            let track_ids: Vec<usize> = self
                .tracks
                .iter()
                .enumerate()
                .filter(|(_, t)| t.category == category)
                .map(|(i, _)| i)
                .collect();
            let mut pairs = Vec::new();
            for &e in &event_ids {
                for &t in &track_ids {
                    let d = events[e].position.dist(self.tracks[t].position());
                    if d <= self.settings.match_radius {
                        pairs.push((d, e, t));
                    }
                }
            }
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut event_used = vec![false; events.len()];
            let mut track_used = vec![false; self.tracks.len()];
            let mut assignments = Vec::new();
            for (_, e, t) in pairs {
                if !event_used[e] && !track_used[t] {
                    event_used[e] = true;
                    track_used[t] = true;
                    assignments.push((e, t));
                }
            }
            for (e, t) in assignments {
                let event = &events[e];
                let track = &mut self.tracks[t];
                track.sum = track.sum + event.position;
                track.count += 1;
                track.heading_sum = track.heading_sum + Point2::from_polar(1.0, event.approach_yaw);
                track.hits.push_back(frame_index);
                hit_tracks.push(t);
            }
            for &e in &event_ids {
                if !event_used[e] {
                    let event = &events[e];
                    self.tracks.push(Track {
                        category,
                        sum: event.position,
                        count: 1,
                        heading_sum: Point2::from_polar(1.0, event.approach_yaw),
                        hits: VecDeque::from([frame_index]),
                        landmark: None,
                    });
                    hit_tracks.push(self.tracks.len() - 1);
                }
            }
        }

        let mut report = IngestReport::default();
        for t in hit_tracks {
            let track = &mut self.tracks[t];
            while track.hits.front().is_some_and(|f| !in_window(*f)) {
                track.hits.pop_front();
            }
            let position = track.position();
            let yaw = track.approach_yaw();
            let history: Vec<u64> = track.hits.iter().copied().collect();
            match track.landmark {
                Some(index) => {
                    if let Some(landmark) = self.landmarks.get_mut(&index) {
                        landmark.position = position;
                        landmark.approach_yaw = yaw;
                        landmark.detection_history = history;
                    }
                }
                None if track.hits.len() >= self.settings.min_hits => {
                    let category = track.category;
                    let index = self.allocate();
                    self.tracks[t].landmark = Some(index);
                    self.landmarks.insert(
                        index,
                        Landmark {
                            index,
                            category,
                            position,
                            approach_yaw: yaw,
                            visited: false,
                            label_text: None,
                            directions: None,
                            info: None,
                            detection_history: history,
                        },
                    );
                    report.promoted.push(index);
                }
                None => {}
            }
        }
        report
    }

    /// Replaces every frontier landmark with the given frontiers, skipping
    /// those near a frontier point already visited. Returns the new indices.
    pub fn refresh_frontiers(&mut self, frontiers: &[Frontier]) -> Vec<u32> {
        self.landmarks
            .retain(|_, l| l.category != LandmarkCategory::Frontier);
        let radius = self.settings.frontier_suppression_radius;
        let mut added = Vec::new();
        for frontier in frontiers {
            if self
                .suppressed_frontiers
                .iter()
                .any(|p| p.dist(frontier.midpoint) <= radius)
            {
                continue;
            }
            added.push(self.insert(LandmarkCategory::Frontier, frontier.midpoint, 0.0));
        }
        added
    }

    /// Frontier points near `point` are no longer offered.
    pub fn suppress_frontier_point(&mut self, point: Point2) {
        self.suppressed_frontiers.push(point);
    }

    pub fn suppressed_frontier_points(&self) -> &[Point2] {
        &self.suppressed_frontiers
    }

    fn landmark_mut(&mut self, index: u32) -> Result<&mut Landmark, MemoryError> {
        self.landmarks
            .get_mut(&index)
            .ok_or(MemoryError::UnknownIndex(index))
    }

    fn expect_category(
        &mut self,
        index: u32,
        category: LandmarkCategory,
        operation: &'static str,
    ) -> Result<&mut Landmark, MemoryError> {
        let landmark = self.landmark_mut(index)?;
        if landmark.category != category {
            return Err(MemoryError::CategoryMismatch {
                index,
                category: landmark.category,
                operation,
            });
        }
        Ok(landmark)
    }

    pub fn mark_visited(&mut self, index: u32) -> Result<(), MemoryError> {
        let landmark = self.landmark_mut(index)?;
        landmark.visited = true;
        if landmark.category == LandmarkCategory::Frontier {
            let point = landmark.position;
            self.suppressed_frontiers.push(point);
        }
        Ok(())
    }

    /// Records a door's room number; the door counts as visited.
    pub fn attach_label(&mut self, index: u32, text: &str) -> Result<(), MemoryError> {
        let landmark = self.expect_category(index, LandmarkCategory::Door, "attach_label")?;
        landmark.label_text = Some(text.to_string());
        landmark.visited = true;
        Ok(())
    }

    pub fn attach_directions(
        &mut self,
        index: u32,
        directions: CardinalDirections,
    ) -> Result<(), MemoryError> {
        let landmark = self.expect_category(index, LandmarkCategory::Sign, "attach_directions")?;
        landmark.directions = Some(directions);
        Ok(())
    }

    pub fn attach_info(&mut self, index: u32, text: &str) -> Result<(), MemoryError> {
        let landmark = self.expect_category(index, LandmarkCategory::Person, "attach_info")?;
        landmark.info = Some(text.to_string());
        Ok(())
    }

    pub fn entries(&self) -> Vec<LandmarkEntry> {
        self.landmarks.values().map(Landmark::entry).collect()
    }

    pub fn to_json(&self) -> String {
        entries_to_json(&self.entries())
    }

    /// Rebuilds a bank from planner JSON entries, keeping their indices.
    /// Approach yaws are unknown and set to zero.
    pub fn from_entries(entries: &[LandmarkEntry]) -> Result<MemoryBank, MemoryError> {
        let mut bank = MemoryBank::new();
        for entry in entries {
            let parsed = parse_name(&entry.name).ok_or_else(|| MemoryError::UnknownName(entry.name.clone()))?;
            if bank.landmarks.contains_key(&entry.index) {
                return Err(MemoryError::DuplicateIndex(entry.index));
            }
            bank.landmarks.insert(
                entry.index,
                Landmark {
                    index: entry.index,
                    category: parsed.category,
                    position: entry.position,
                    approach_yaw: 0.0,
                    visited: parsed.visited,
                    label_text: parsed.label,
                    directions: entry.directions.clone(),
                    info: entry.info.clone(),
                    detection_history: Vec::new(),
                },
            );
            bank.next_index = bank.next_index.max(entry.index + 1);
        }
        Ok(bank)
    }

    /// Copy keeping only landmarks of the given categories.
    pub fn filtered(&self, keep: impl Fn(LandmarkCategory) -> bool) -> MemoryBank {
        let mut view = self.clone();
        view.landmarks.retain(|_, l| keep(l.category));
        view
    }

    /// Copy with visited flags, labels and attachments cleared: what remains
    /// visible when only positions and categories are known.
    pub fn positions_only(&self) -> MemoryBank {
        let mut view = self.clone();
        for landmark in view.landmarks.values_mut() {
            landmark.visited = false;
            landmark.label_text = None;
            landmark.directions = None;
            landmark.info = None;
        }
        view
    }
}

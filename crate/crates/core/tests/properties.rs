//! Property tests for the invariants of the core data types.

mod common;

use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_4, PI};

use common::*;
use proptest::prelude::*;
use wayfinder_core::frontier::extract_frontiers;
use wayfinder_core::geom::normalize_angle;
use wayfinder_core::harness::hospital_scenario;
use wayfinder_core::harness::metrics::{aggregate, EpisodeMetrics};
use wayfinder_core::mapping::{dilate_obstacles, Occupancy};
use wayfinder_core::memory::{entries_to_json, filter_detection, parse_json, CardinalDirections, FilterDecision, LandmarkCategory, MemoryBank};
use wayfinder_core::nav::plan_path;
use wayfinder_core::primitives::bin_relative_to_cardinal;
use wayfinder_core::render::render_map;
use wayfinder_core::world::RelativeDirection;
use wayfinder_core::{Cardinal, Point2, Pose, Scenario};

fn category() -> impl Strategy<Value = LandmarkCategory> {
    prop::sample::select(LandmarkCategory::ALL.to_vec())
}

#[derive(Debug, Clone)]
struct Spec {
    category: LandmarkCategory,
    x: f64,
    y: f64,
    visited: bool,
    text: String,
    bins: Vec<(usize, String)>,
}

fn landmark_spec() -> impl Strategy<Value = Spec> {
    (
        category(),
        -50.0..50.0f64,
        -50.0..50.0f64,
        any::<bool>(),
        "[A-Za-z0-9 .,'-]{1,24}",
        prop::collection::vec((0usize..8, "Rooms? [0-9]{4}(-[0-9]{4})?"), 0..5),
    )
        .prop_map(|(category, x, y, visited, text, bins)| Spec { category, x, y, visited, text, bins })
}

fn bank_from(specs: &[Spec]) -> MemoryBank {
    let mut bank = MemoryBank::new();
    for s in specs {
        let i = bank.insert(s.category, Point2::new(s.x, s.y), 0.0);
        match s.category {
            LandmarkCategory::Door if s.visited => bank.attach_label(i, &s.text).unwrap(),
            LandmarkCategory::Sign => {
                let mut dirs = CardinalDirections::new();
                for (b, t) in &s.bins {
                    dirs.push(Cardinal::ALL[*b], t.clone());
                }
                bank.attach_directions(i, dirs).unwrap();
            }
            LandmarkCategory::Person if s.visited => {
                bank.attach_info(i, &s.text).unwrap();
                bank.mark_visited(i).unwrap();
            }
            _ if s.visited => bank.mark_visited(i).unwrap(),
            _ => {}
        }
    }
    bank
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn angles_wrap_into_half_open_range(a in -1e4..1e4f64) {
        let n = normalize_angle(a);
        prop_assert!((-PI..PI).contains(&n));
        prop_assert!(((a - n) / (2.0 * PI) - ((a - n) / (2.0 * PI)).round()).abs() < 1e-9);
    }

    #[test]
    fn filter_agrees_with_table(c in 0.0..1.0f64, w in 0.0..4.0f64, h in 0.0..4.0f64, k in 0usize..4) {
        let row = &filter_table()[k];
        let inside = |v: f64, win: Option<(f64, f64)>| win.is_none_or(|(lo, hi)| v > lo && v < hi);
        let expect = c >= row.confidence && inside(w, row.width) && inside(h, row.height);
        let got = filter_detection(&detection(row.category, c, w, h)) == FilterDecision::Accept;
        prop_assert_eq!(got, expect);
    }

    #[test]
    fn promotion_matches_oracle(seed in 10_000u64..1_000_000) {
        let stream = random_detection_stream(seed);
        let mut bank = MemoryBank::new();
        let mut got = 0;
        let mut last_index = None;
        for (frame, events) in &stream {
            for index in bank.ingest_frame(events, *frame).promoted {
                prop_assert!(last_index.is_none_or(|l| index > l), "indices increase");
                last_index = Some(index);
                got += 1;
            }
        }
        prop_assert_eq!(got, oracle_promotions(&stream).len());
        // Object landmarks persist once promoted.
        prop_assert_eq!(bank.len(), got);
    }

    #[test]
    fn frontier_invariants(seed in 0u64..100_000, r in 0usize..3) {
        let grid = random_partial_map(seed);
        let radius = [0.0, 0.1, 0.2][r];
        let mask = dilate_obstacles(&grid, radius);
        let frontiers = extract_frontiers(&grid, &mask, 0.1);
        let mut seen = HashSet::new();
        for f in &frontiers {
            prop_assert!(f.segment_cells.contains(&f.midpoint_cell));
            prop_assert!(f.segment_length > 0.0);
            for c in &f.segment_cells {
                prop_assert!(!mask.get(*c));
                prop_assert_eq!(grid.get(*c), Occupancy::Free);
                prop_assert!(seen.insert(*c), "cell in two frontiers");
            }
        }
        let inflated = oracle_inflation(&grid, radius);
        let expected = oracle_frontiers(&grid, &|c| inflated.contains(&c), 0.1);
        prop_assert_eq!(frontiers.len(), expected.len());
    }

    #[test]
    fn paths_are_connected_clear_and_optimal(seed in 0u64..100_000, a in any::<prop::sample::Index>(), b in any::<prop::sample::Index>()) {
        let grid = random_maze(seed);
        let mask = dilate_obstacles(&grid, 0.1);
        let free: Vec<_> = grid.cells().filter(|(c, v)| *v == Occupancy::Free && !mask.get(*c)).map(|(c, _)| c).collect();
        prop_assume!(free.len() >= 2);
        let (s, g) = (free[a.index(free.len())], free[b.index(free.len())]);
        let passable = |c| grid.get(c) == Occupancy::Free && !mask.get(c);
        match plan_path(&grid, &mask, grid.cell_center(s), grid.cell_center(g)) {
            Ok(path) => {
                let mut length = 0.0;
                for w in path.cells.windows(2) {
                    prop_assert!(w[0].is_8_adjacent(w[1]));
                    length += w[0].cell_dist(w[1]) * grid.resolution();
                }
                for c in &path.cells {
                    prop_assert!(passable(*c));
                }
                prop_assert!((length - path.length).abs() < 1e-9);
                let oracle = oracle_shortest(&passable, s, g).expect("oracle finds the path too");
                prop_assert_eq!((path.cost.a, path.cost.b), (oracle.a, oracle.b));
            }
            Err(_) => prop_assert!(oracle_shortest(&passable, s, g).is_none()),
        }
    }

    #[test]
    fn json_round_trip_is_a_fixpoint(specs in prop::collection::vec(landmark_spec(), 0..12)) {
        let bank = bank_from(&specs);
        let text = bank.to_json();
        let entries = parse_json(&text).unwrap();
        prop_assert_eq!(entries.len(), specs.len());
        prop_assert_eq!(entries_to_json(&entries), text);
        for (e, s) in entries.iter().zip(&specs) {
            prop_assert_eq!(e.directions.is_some(), s.category == LandmarkCategory::Sign);
            prop_assert_eq!(e.info.is_some(), s.category == LandmarkCategory::Person && s.visited);
            if s.category == LandmarkCategory::Door && s.visited {
                prop_assert_eq!(&e.name, &format!("Visited_a door_{}", s.text));
            }
        }
    }

    #[test]
    fn binning_rotates_with_heading(h in -PI..PI, k in 0usize..4) {
        let r = RelativeDirection::ALL[k];
        // Stay clear of bin boundaries, where ties are broken by order.
        let frac = ((h + r.offset()) / FRAC_PI_4).rem_euclid(1.0);
        prop_assume!((frac - 0.5).abs() > 1e-6);
        let base = bin_relative_to_cardinal(r, h);
        prop_assert_eq!(bin_relative_to_cardinal(r, h + FRAC_PI_4), base.counter_clockwise());
        prop_assert_eq!(bin_relative_to_cardinal(r, h - FRAC_PI_4), base.clockwise());
        let forward = bin_relative_to_cardinal(RelativeDirection::Forward, h);
        let backwards = bin_relative_to_cardinal(RelativeDirection::Backwards, h);
        prop_assert_eq!(backwards.ordinal(), (forward.ordinal() + 4) % 8);
    }

    #[test]
    fn render_labels_each_landmark_once(specs in prop::collection::vec(landmark_spec(), 0..15), x in -5.0..5.0f64, y in -5.0..5.0f64) {
        let bank = bank_from(&specs);
        let grid = random_partial_map(specs.len() as u64);
        let img = render_map(&grid, &bank, Pose::new(x, y, 0.3));
        let mut indices: Vec<u32> = img.labels.iter().map(|l| l.index).collect();
        indices.sort_unstable();
        let expected: Vec<u32> = (0..specs.len() as u32).collect();
        prop_assert_eq!(indices, expected);
        for l in &img.labels {
            prop_assert!(l.x < img.width && l.y < img.height);
        }
        prop_assert_eq!(img.pixels.len(), img.width * img.height * 3);
    }

    #[test]
    fn aggregation_penalizes_failures(runs in prop::collection::vec((any::<bool>(), 0.0..900.0f64, 0.0..300.0f64), 1..30)) {
        let metrics: Vec<EpisodeMetrics> = runs.iter().map(|&(success, duration, distance)| EpisodeMetrics { success, duration, distance }).collect();
        let table = aggregate("p", &metrics).unwrap();
        let n = runs.len() as f64;
        let d: f64 = runs.iter().map(|r| if r.0 { r.1 } else { 900.0 }).sum::<f64>() / n;
        let m: f64 = runs.iter().map(|r| if r.0 { r.2 } else { 100.0 }).sum::<f64>() / n;
        prop_assert!((table.avg_duration - d).abs() <= 0.005 + 1e-9);
        prop_assert!((table.avg_distance - m).abs() <= 0.005 + 1e-9);
        prop_assert!((0.0..=100.0).contains(&table.success_rate));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn hospital_documents_round_trip(seed in any::<u64>()) {
        let scenario = hospital_scenario(seed);
        let doc = scenario.to_document();
        let parsed = Scenario::parse(&doc).unwrap();
        prop_assert_eq!(parsed.to_document(), doc);
        prop_assert!(parsed.validate().is_ok());
        prop_assert_eq!(parsed.room_numbers().len(), 41);
    }
}

//! Acceptance suite: one line per criterion, then a single verdict.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use wayfinder_core::frontier::extract_frontiers;
use wayfinder_core::harness::metrics::{aggregate, EpisodeMetrics};
use wayfinder_core::harness::{ablation_configs, hospital_scenario, run_ablation_suite, SuiteReport};
use wayfinder_core::mapping::{dilate_obstacles, Occupancy};
use wayfinder_core::memory::{
    entries_to_json, filter_detection, filter_rule, parse_json, parse_name, CardinalDirections, FilterDecision,
    LandmarkCategory, MemoryBank, RejectReason,
};
use wayfinder_core::nav::{inflation_radius, plan_path};
use wayfinder_core::policy::llm::mock::{MockReply, MockServer};
use wayfinder_core::policy::llm::{llm_choose, AttemptError, HttpTransport, LlmClient, TransportError};
use wayfinder_core::policy::{build_prompt, prompts, PlannerKind, PolicyConfig};
use wayfinder_core::primitives::{bin_relative_to_cardinal, RobotGoal};
use wayfinder_core::world::{DetectionCategory, RelativeDirection};
use wayfinder_core::{Cardinal, CellIndex, Point2};

const SUITE_EPISODES: u64 = 14;

fn below(x: f64) -> f64 {
    if x > 0.0 {
        f64::from_bits(x.to_bits() - 1)
    } else {
        -f64::MIN_POSITIVE
    }
}

fn above(x: f64) -> f64 {
    if x > 0.0 {
        f64::from_bits(x.to_bits() + 1)
    } else {
        f64::MIN_POSITIVE
    }
}

fn criterion_1_filter_constants() {
    for row in filter_table() {
        let rule = filter_rule(row.category);
        assert_eq!(rule.min_confidence, row.confidence, "{:?} threshold", row.category);
        assert_eq!(rule.width, row.width, "{:?} width window", row.category);
        assert_eq!(rule.height, row.height, "{:?} height window", row.category);

        let mid = |w: Option<(f64, f64)>| w.map_or(1.0, |(lo, hi)| (lo + hi) / 2.0);
        let (w, h) = (mid(row.width), mid(row.height));
        let decide = |c: f64, w: f64, h: f64| filter_detection(&detection(row.category, c, w, h));
        assert_eq!(decide(row.confidence, w, h), FilterDecision::Accept);
        assert_eq!(decide(below(row.confidence), w, h), FilterDecision::Reject(RejectReason::Confidence));
        let size_reject = FilterDecision::Reject(RejectReason::Size);
        match row.width {
            Some((lo, hi)) => {
                assert_eq!(decide(1.0, lo, h), size_reject, "{:?} width at {lo}", row.category);
                assert_eq!(decide(1.0, above(lo), h), FilterDecision::Accept);
                assert_eq!(decide(1.0, hi, h), size_reject, "{:?} width at {hi}", row.category);
                assert_eq!(decide(1.0, below(hi), h), FilterDecision::Accept);
            }
            None => {
                assert_eq!(decide(1.0, 0.0, h), FilterDecision::Accept);
                assert_eq!(decide(1.0, 1e6, h), FilterDecision::Accept);
            }
        }
        match row.height {
            Some((lo, hi)) => {
                assert_eq!(decide(1.0, w, lo), size_reject, "{:?} height at {lo}", row.category);
                assert_eq!(decide(1.0, w, above(lo)), FilterDecision::Accept);
                assert_eq!(decide(1.0, w, hi), size_reject, "{:?} height at {hi}", row.category);
                assert_eq!(decide(1.0, w, below(hi)), FilterDecision::Accept);
            }
            None => {
                assert_eq!(decide(1.0, w, 0.0), FilterDecision::Accept);
                assert_eq!(decide(1.0, w, 1e6), FilterDecision::Accept);
            }
        }
    }
    assert_eq!(
        filter_detection(&detection(DetectionCategory::Door, 0.29, 1.0, 2.0)),
        FilterDecision::Reject(RejectReason::Confidence)
    );
}

fn implementation_promotions(frames: &[(u64, Vec<wayfinder_core::world::DetectionEvent>)]) -> Vec<Promotion> {
    let mut bank = MemoryBank::new();
    let mut out = Vec::new();
    for (frame, events) in frames {
        let report = bank.ingest_frame(events, *frame);
        for index in report.promoted {
            let l = bank.get(index).expect("promoted landmark exists");
            let kind = match l.category {
                LandmarkCategory::Door => 0,
                LandmarkCategory::Person => 1,
                LandmarkCategory::Sign => 2,
                LandmarkCategory::Frontier => panic!("frontier promoted from detections"),
            };
            out.push((*frame, kind, l.position.x, l.position.y));
        }
    }
    out
}

fn sorted(mut p: Vec<Promotion>) -> Vec<Promotion> {
    p.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)).then(a.3.total_cmp(&b.3)));
    p
}

fn criterion_2_promotion() {
    let mut promoted = 0;
    for seed in 0..1000 {
        let stream = random_detection_stream(seed);
        let expected = sorted(oracle_promotions(&stream));
        let actual = sorted(implementation_promotions(&stream));
        assert_eq!(actual.len(), expected.len(), "seed {seed}: promotion count");
        for (a, e) in actual.iter().zip(&expected) {
            assert_eq!((a.0, a.1), (e.0, e.1), "seed {seed}");
            assert!((a.2 - e.2).abs() < 1e-9 && (a.3 - e.3).abs() < 1e-9, "seed {seed}: {a:?} vs {e:?}");
        }
        promoted += actual.len();
    }
    assert!(promoted > 1000, "streams exercise promotion ({promoted})");
}

fn criterion_3_frontiers() {
    let mut total = 0;
    for seed in 0..200 {
        let grid = random_partial_map(seed);
        let radius = [0.0, 0.1, 0.15][seed as usize % 3];
        let min_length = [0.1, 0.3, 0.5, 0.8][seed as usize % 4];
        let inflated = oracle_inflation(&grid, radius);
        let mask = dilate_obstacles(&grid, radius);
        let expected = oracle_frontiers(&grid, &|c| inflated.contains(&c), min_length);
        let actual = extract_frontiers(&grid, &mask, min_length);
        let got: Vec<(CellIndex, &[CellIndex])> =
            actual.iter().map(|f| (f.midpoint_cell, f.segment_cells.as_slice())).collect();
        let want: Vec<(CellIndex, &[CellIndex])> =
            expected.iter().map(|f| (f.midpoint_cell, f.cells.as_slice())).collect();
        assert_eq!(got, want, "seed {seed}");
        for (f, e) in actual.iter().zip(&expected) {
            assert!((f.segment_length - (e.length.value() + 1.0) * grid.resolution()).abs() < 1e-9);
            assert_eq!(f.midpoint, grid.cell_center(f.midpoint_cell));
        }
        total += actual.len();
    }
    assert!(total > 200, "maps produce frontiers ({total})");
}

fn criterion_4_planner() {
    let mut solved = 0;
    for seed in 0..100 {
        let grid = random_maze(seed);
        let radius = inflation_radius([0.0, 0.05, 0.1][seed as usize % 3]);
        let inflated = oracle_inflation(&grid, radius);
        let mask = dilate_obstacles(&grid, radius);
        let mask_cells: std::collections::HashSet<CellIndex> = mask.iter_set().filter(|c| grid.contains(*c)).collect();
        assert_eq!(mask_cells, inflated, "seed {seed}: inflation");
        let passable = |c: CellIndex| grid.get(c) == Occupancy::Free && !inflated.contains(&c);
        let free: Vec<CellIndex> = grid.cells().map(|(c, _)| c).filter(|c| passable(*c)).collect();
        if free.len() < 2 {
            continue;
        }
        let start = free[(seed as usize * 7919) % free.len()];
        let goal = free[(seed as usize * 104_729 + 13) % free.len()];
        let expected = oracle_shortest(&passable, start, goal);
        let actual = plan_path(&grid, &mask, grid.cell_center(start), grid.cell_center(goal));
        match (expected, actual) {
            (None, Err(_)) => {}
            (Some(cost), Ok(path)) => {
                assert_eq!((path.cost.a, path.cost.b), (cost.a, cost.b), "seed {seed}: cost");
                assert_eq!(path.cells.first(), Some(&start));
                assert_eq!(path.cells.last(), Some(&goal));
                for c in &path.cells {
                    assert!(passable(*c), "seed {seed}: path crosses {c:?}");
                }
                solved += 1;
            }
            (e, a) => panic!("seed {seed}: oracle {e:?}, planner {:?}", a.map(|p| p.cost)),
        }
    }
    assert!(solved >= 50, "mazes with a path: {solved}");
}

fn criterion_5_metrics() {
    let table = aggregate(
        "synthetic",
        &[
            EpisodeMetrics { success: true, duration: 600.0, distance: 70.0 },
            EpisodeMetrics { success: false, duration: 42.0, distance: 3.0 },
        ],
    )
    .unwrap();
    assert_eq!(table.avg_duration, 750.0);
    assert_eq!(table.avg_distance, 85.0);
    assert_eq!(table.success_rate, 50.0);
}

fn criterion_6_binning() {
    // Compass bins clockwise from North; relative offsets in bins.
    let shift = |r: RelativeDirection| match r {
        RelativeDirection::Forward => 0,
        RelativeDirection::Right => 2,
        RelativeDirection::Backwards => 4,
        RelativeDirection::Left => 6,
    };
    let names = ["North", "North-East", "East", "South-East", "South", "South-West", "West", "North-West"];
    let mut cases = 0;
    for h in 0..8usize {
        let heading_yaw = std::f64::consts::FRAC_PI_2 - h as f64 * std::f64::consts::FRAC_PI_4;
        for r in RelativeDirection::ALL {
            let got = bin_relative_to_cardinal(r, heading_yaw);
            assert_eq!(got.name(), names[(h + shift(r)) % 8], "heading {h}, {r:?}");
            let turned = bin_relative_to_cardinal(r, heading_yaw + std::f64::consts::FRAC_PI_4);
            assert_eq!(turned.name(), names[(h + shift(r) + 7) % 8], "rotated heading {h}, {r:?}");
            assert_eq!(turned, got.counter_clockwise());
            cases += 1;
        }
    }
    assert_eq!(cases, 32);
}

fn contract_bank() -> MemoryBank {
    let mut bank = MemoryBank::new();
    let door = bank.insert(LandmarkCategory::Door, Point2::new(1.04, -2.26), 0.0);
    bank.attach_label(door, "3012").unwrap();
    bank.insert(LandmarkCategory::Door, Point2::new(3.0, 0.5), 1.0);
    let sign = bank.insert(LandmarkCategory::Sign, Point2::new(-4.55, 7.0), 0.0);
    let mut dirs = CardinalDirections::new();
    dirs.push(Cardinal::North, "Rooms 3001-3010");
    dirs.push(Cardinal::SouthWest, "Room 3041");
    bank.attach_directions(sign, dirs).unwrap();
    let person = bank.insert(LandmarkCategory::Person, Point2::new(0.0, 9.99), 0.0);
    bank.attach_info(person, "Note: Room 3012 is to the East, about 10 meters away.").unwrap();
    bank.mark_visited(person).unwrap();
    bank.insert(LandmarkCategory::Frontier, Point2::new(12.0, -0.04), 0.0);
    bank
}

fn criterion_7_json_contract() {
    let bank = contract_bank();
    let first = bank.to_json();
    let reparsed = parse_json(&first).unwrap();
    let second = entries_to_json(&reparsed);
    assert_eq!(first, second, "serialize, parse, serialize is a fixpoint");
    assert_eq!(entries_to_json(&parse_json(&second).unwrap()), second);

    let value: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(value["0"]["name"], "Visited_a door_3012");
    assert_eq!(value["1"]["name"], "a door");
    assert_eq!(value["3"]["name"], "Visited_a person");
    assert_eq!(value["2"]["directions"]["North"][0], "Rooms 3001-3010");
    let parsed = parse_name("Visited_a door_3012").unwrap();
    assert_eq!((parsed.category, parsed.visited, parsed.label.as_deref()), (LandmarkCategory::Door, true, Some("3012")));

    let goal = RobotGoal::Room("3012".into());
    let png = Some(vec![0x89, b'P', b'N', b'G']);
    for config in ablation_configs(PolicyConfig::new(PlannerKind::Oracle)) {
        let policy = &config.episode.policy;
        let view = policy.planner_view(&bank);
        let bundle = build_prompt(&view, png.clone(), &goal, policy);
        let entries = bundle.landmark_json.as_deref().map(|j| parse_json(j).unwrap());
        match config.label.as_str() {
            "No Signs/People" => {
                let entries = entries.unwrap();
                assert!(entries.iter().all(|e| !e.name.contains("sign") && !e.name.contains("person")));
                assert!(entries.iter().all(|e| e.directions.is_none() && e.info.is_none()));
                assert!(!config.episode.sim.detect_signs_people);
            }
            "No Map Image" => {
                assert!(bundle.map_image.is_none());
                assert_eq!(entries.unwrap().len(), 5);
            }
            "No JSON" => {
                assert!(entries.is_none());
                assert!(!bundle.instruction_text.contains("\"name\""));
                assert!(!bundle.instruction_text.ends_with('}'));
                assert!(view.landmarks().all(|l| !l.visited && l.label_text.is_none() && l.info.is_none()));
            }
            label if label.starts_with("Ours") => {
                assert_eq!(entries.unwrap().len(), 5);
                assert!(bundle.map_image.is_some());
            }
            _ => {}
        }
    }
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/prompts").join(format!("{name}.tex"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn criterion_8_prompts() {
    let landmarks = ["▲", "▉", "◆", "●", "★"];
    let goal = RobotGoal::Room("3012".into());
    let json = contract_bank().to_json();

    let expected = python_format(
        &latex_to_prompt(&golden("choose_landmark"), &landmarks),
        &[("target", "Room 3012"), ("vlm_keypt_dict", &json)],
    );
    assert_eq!(prompts::choose_landmark_prompt(&goal, &json), expected);

    let expected = latex_to_prompt(&golden("read_door_label"), &[]);
    assert_eq!(prompts::READ_DOOR_LABEL_PROMPT, expected);

    let expected = latex_to_prompt(&golden("read_sign"), &[]);
    assert_eq!(prompts::READ_SIGN_PROMPT, expected);

    let info = "Room 3012 is to the East";
    let expected = python_format(
        &latex_to_prompt(&golden("interaction_type"), &[]),
        &[("goal", "Room 3012"), ("learned_info", info)],
    );
    assert_eq!(prompts::interaction_type_prompt(&goal, info), expected);
    let none = python_format(&latex_to_prompt(&golden("interaction_type"), &[]), &[("goal", "None"), ("learned_info", "")]);
    assert_eq!(prompts::interaction_type_prompt(&RobotGoal::Unknown, ""), none);

    let history = "Robot: Do you know where Room 3012 is?\nPerson: Go left.";
    let expected = python_format(
        &latex_to_prompt(&golden("record_note"), &landmarks[..1]),
        &[("goal", "Room 3012"), ("robot_facing", "North"), ("conversation_history", history)],
    );
    assert_eq!(prompts::record_note_prompt(&goal, "North", history), expected);

    assert_eq!(prompts::SYSTEM_PROMPT, latex_to_prompt(&golden("system"), &[]));
}

fn suite_scenarios() -> (Vec<wayfinder_core::Scenario>, Vec<u64>) {
    let seeds: Vec<u64> = (0..SUITE_EPISODES).collect();
    (seeds.iter().map(|s| hospital_scenario(*s)).collect(), seeds)
}

fn run_suite() -> SuiteReport {
    let (scenarios, seeds) = suite_scenarios();
    run_ablation_suite(&scenarios, &seeds, &ablation_configs(PolicyConfig::new(PlannerKind::Oracle)))
}

fn mean_distance(report: &SuiteReport, label: &str) -> f64 {
    let d: Vec<f64> = report.episodes.iter().filter(|e| e.config == label).map(|e| e.result.distance).collect();
    d.iter().sum::<f64>() / d.len() as f64
}

fn criterion_9_trends(report: &SuiteReport) {
    let rate = |label: &str| report.table(label).unwrap_or_else(|| panic!("no table {label}")).success_rate;
    print!("{}", indent(&report.to_markdown()));
    let (oracle, closest, random) = (rate("Ours (oracle)"), rate("No VLM (closest)"), rate("No VLM (random)"));
    assert!(oracle >= closest && closest >= random, "ordering {oracle} >= {closest} >= {random}");
    assert_eq!(rate("No JSON"), 0.0);
    let (full, ablated) = (mean_distance(report, "Ours (oracle)"), mean_distance(report, "No Signs/People"));
    assert!(ablated >= full, "No Signs/People distance {ablated:.2} < full {full:.2}");
}

fn indent(text: &str) -> String {
    text.lines().map(|l| format!("      {l}\n")).collect()
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn criterion_10_determinism(first: &SuiteReport) {
    let second = run_suite();
    assert_eq!(first.to_csv(), second.to_csv());
    for (a, b) in first.episodes.iter().zip(&second.episodes) {
        assert_eq!(a.result.event_log_jsonl(), b.result.event_log_jsonl(), "{} seed {}", a.config, a.result.seed);
    }
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    first.write_to(da.path()).unwrap();
    second.write_to(db.path()).unwrap();
    let (ta, tb) = (read_tree(da.path()), read_tree(db.path()));
    assert!(ta.contains_key("results.csv"));
    assert!(ta.keys().filter(|k| k.ends_with("event_log.jsonl")).count() == first.episodes.len());
    assert_eq!(ta, tb);
}

fn choice_bank() -> MemoryBank {
    let mut bank = MemoryBank::new();
    for i in 0..3 {
        bank.insert(LandmarkCategory::Frontier, Point2::new(f64::from(i), 0.0), 0.0);
    }
    bank
}

fn criterion_11_llm_transport() {
    let start = Instant::now();
    let bank = choice_bank();
    let bundle = build_prompt(&bank, Some(vec![0x89, b'P', b'N', b'G']), &RobotGoal::Room("3012".into()), &PolicyConfig::new(PlannerKind::Llm));
    let client = |url: String, timeout: Duration| LlmClient::new(HttpTransport::new(url, None, timeout), "gpt-4o", 2);

    let server = MockServer::start(vec![MockReply::Text("Landmark 1 is closest. [1]".into())]).unwrap();
    let out = llm_choose(&client(server.url(), Duration::from_secs(3)), &bundle, &bank).unwrap();
    assert_eq!((out.choice.landmark_index, out.calls), (1, 1));
    let request = &server.requests()[0];
    let image_url = request.to_string();
    assert!(image_url.contains("data:image/png;base64,iVBORw"), "map image attached as base64");

    let server = MockServer::start(vec![MockReply::Text("no idea".into()), MockReply::Text("[2]".into())]).unwrap();
    let out = llm_choose(&client(server.url(), Duration::from_secs(3)), &bundle, &bank).unwrap();
    assert_eq!((out.choice.landmark_index, out.calls, out.failed_attempts.len()), (2, 2, 1));
    let requests = server.requests();
    let turns = |i: usize| requests[i]["messages"].as_array().unwrap().len();
    assert_eq!(turns(1), turns(0) + 2, "retry carries the reply and a corrective turn");

    let slow = || MockReply::Delayed(Duration::from_secs(3), "[1]".into());
    let server = MockServer::start(vec![slow(), slow(), slow()]).unwrap();
    let failure = llm_choose(&client(server.url(), Duration::from_millis(300)), &bundle, &bank).unwrap_err();
    assert_eq!(failure.attempts.len(), 3);
    assert!(failure.attempts.iter().all(|a| *a == AttemptError::Transport(TransportError::Timeout)));
    assert!(start.elapsed() < Duration::from_secs(5), "took {:?}", start.elapsed());
}

fn run_criterion(results: &mut Vec<bool>, id: u32, title: &str, limit: Duration, body: impl FnOnce()) {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let elapsed = start.elapsed();
    let (ok, note) = match outcome {
        Ok(()) if elapsed <= limit => (true, String::new()),
        Ok(()) => (false, format!(": exceeded {limit:?}")),
        Err(e) => {
            let message = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!(": {message}"))
        }
    };
    println!("{} criterion {id:>2} {title} ({:.2} s){note}", if ok { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
    results.push(ok);
}

fn main() {
    let mut results = Vec::new();
    let secs = Duration::from_secs;
    run_criterion(&mut results, 1, "detection filter constants and boundaries", secs(1), criterion_1_filter_constants);
    run_criterion(&mut results, 2, "promotion matches brute force on 1000 streams", secs(10), criterion_2_promotion);
    run_criterion(&mut results, 3, "frontiers match brute force on 200 maps", secs(10), criterion_3_frontiers);
    run_criterion(&mut results, 4, "planner cost equals Dijkstra oracle on 100 mazes", secs(10), criterion_4_planner);
    run_criterion(&mut results, 5, "metrics failure penalties", secs(1), criterion_5_metrics);
    run_criterion(&mut results, 6, "cardinal binning table and rotation", secs(1), criterion_6_binning);
    run_criterion(&mut results, 7, "landmark JSON contract and ablation stripping", secs(1), criterion_7_json_contract);
    run_criterion(&mut results, 8, "prompt templates byte-match golden text", secs(1), criterion_8_prompts);
    let suite_start = Instant::now();
    let report = run_suite();
    let suite_time = suite_start.elapsed();
    run_criterion(&mut results, 9, "hospital suite trends", secs(300).saturating_sub(suite_time), || criterion_9_trends(&report));
    run_criterion(&mut results, 10, "suite determinism", secs(300), || criterion_10_determinism(&report));
    run_criterion(&mut results, 11, "LLM transport retry contract on mock server", secs(5), criterion_11_llm_transport);
    println!("suite run: {:.2} s", suite_time.as_secs_f64());
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

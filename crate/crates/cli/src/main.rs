//! `wayfinder`: run episodes and ablation suites, generate hospital floors,
//! render landmark maps and check scenario files.

use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use wayfinder_core::harness::hospital::REPLICA;
use wayfinder_core::harness::{
    ablation_configs, generate_hospital, hospital_scenario, run_ablation_suite, run_episode_with, write_episode,
    EpisodeConfig, EpisodeHooks,
};
use wayfinder_core::memory::{parse_json, MemoryBank};
use wayfinder_core::policy::llm::{HttpTransport, LlmClient, ENDPOINT_ENV, KEY_ENV};
use wayfinder_core::policy::{LlmSettings, PlannerKind, PolicyConfig};
use wayfinder_core::render::{encode_image, render_map, ImageFormat, MapImage};
use wayfinder_core::{load_scenario, Pose, Scenario};

type CliResult<T = ()> = Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(name = "wayfinder", version, about = "Landmark-driven navigation simulator and evaluation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and print its result as JSON.
    Run(RunArgs),
    /// Run the ablation configurations over a set of episodes.
    Suite(SuiteArgs),
    /// Write a generated hospital scenario.
    GenHospital(GenArgs),
    /// Render a landmark bank (planner JSON) over a scenario's floor plan.
    Render(RenderArgs),
    /// Parse and validate a scenario file.
    Validate {
        scenario: PathBuf,
    },
}

#[derive(Args)]
struct LlmArgs {
    /// Chat-completions endpoint for the llm planner (default: $WAYFINDER_LLM_ENDPOINT).
    #[arg(long)]
    llm_endpoint: Option<String>,
    #[arg(long)]
    llm_model: Option<String>,
    /// Seconds per request.
    #[arg(long, default_value_t = 60.0)]
    llm_timeout: f64,
    #[arg(long, default_value_t = 2)]
    llm_retries: u32,
}

impl LlmArgs {
    fn settings(&self) -> LlmSettings {
        let defaults = LlmSettings::default();
        LlmSettings {
            endpoint: self
                .llm_endpoint
                .clone()
                .or_else(|| std::env::var(ENDPOINT_ENV).ok())
                .unwrap_or_default(),
            model: self.llm_model.clone().unwrap_or(defaults.model),
            timeout: self.llm_timeout,
            max_retries: self.llm_retries,
        }
    }

    fn apply(&self, policy: PolicyConfig) -> PolicyConfig {
        if policy.planner == PlannerKind::Llm {
            policy.with_llm(self.settings())
        } else {
            policy
        }
    }
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    #[arg(long, default_value = "oracle", value_parser = parse_planner)]
    policy: PlannerKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_signs_people: bool,
    #[arg(long)]
    no_map_image: bool,
    #[arg(long)]
    no_json: bool,
    /// Directory for event_log.jsonl, result.json and step images.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    llm: LlmArgs,
}

#[derive(Args)]
struct SuiteArgs {
    /// Directory of `.scn` files, used in name order; generated hospital
    /// floors when absent.
    #[arg(long)]
    scenarios: Option<PathBuf>,
    #[arg(long, default_value_t = 14)]
    episodes: u64,
    /// Seed of the first episode; episode i uses first_seed + i.
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    /// Planner behind the full method and its ablations (oracle or llm).
    #[arg(long, default_value = "oracle", value_parser = parse_planner)]
    planner: PlannerKind,
    /// Markdown report path; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Directory for results.csv, report.md and per-episode logs.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    llm: LlmArgs,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit the fixed replica layout instead of a generated one.
    #[arg(long)]
    replica: bool,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    scenario: PathBuf,
    bank: PathBuf,
    /// Output image; `.ppm` selects PPM, anything else PNG.
    #[arg(short, long)]
    output: PathBuf,
    /// Robot pose as `x,y,yaw_degrees`; the scenario start by default.
    #[arg(long, value_parser = parse_pose)]
    pose: Option<Pose>,
}

fn parse_planner(s: &str) -> Result<PlannerKind, String> {
    s.parse().map_err(|e: wayfinder_core::policy::PolicyError| e.to_string())
}

fn parse_pose(s: &str) -> Result<Pose, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number {p:?}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, yaw] => Ok(Pose::new(x, y, yaw.to_radians())),
        _ => Err("expected x,y,yaw".into()),
    }
}

fn read_scenario(path: &Path) -> CliResult<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let scenario = load_scenario(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    scenario.validate().map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(scenario)
}

fn image_format(path: &Path) -> ImageFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("ppm") => ImageFormat::Ppm,
        _ => ImageFormat::Png,
    }
}

fn write_image(path: &Path, image: &MapImage) -> CliResult {
    fs::write(path, encode_image(image, image_format(path))?)?;
    Ok(())
}

fn run(args: RunArgs) -> CliResult {
    let scenario = read_scenario(&args.scenario)?;
    let mut policy = args.llm.apply(PolicyConfig::new(args.policy));
    if args.no_signs_people {
        policy = policy.without_signs_people();
    }
    if args.no_map_image {
        policy = policy.without_map_image();
    }
    if args.no_json {
        policy = policy.without_json();
    }
    policy.validate()?;
    let config = EpisodeConfig::new(policy);

    let client = config.policy.llm.as_ref().map(|s| {
        let transport = HttpTransport::new(
            s.endpoint.clone(),
            std::env::var(KEY_ENV).ok(),
            Duration::from_secs_f64(s.timeout),
        );
        LlmClient::new(transport, s.model.clone(), s.max_retries)
    });
    let steps_dir = args.out.as_ref().map(|d| d.join("steps"));
    if let Some(dir) = &steps_dir {
        fs::create_dir_all(dir)?;
    }
    let mut image_error = None;
    let mut save_step = |step: u32, image: &MapImage| {
        if let Some(dir) = &steps_dir {
            if image_error.is_none() {
                image_error = write_image(&dir.join(format!("step_{step:04}.png")), image).err();
            }
        }
    };
    let mut hooks = EpisodeHooks {
        llm: client.as_ref(),
        on_step: steps_dir.is_some().then_some(&mut save_step as &mut dyn FnMut(u32, &MapImage)),
    };
    let result = run_episode_with(&scenario, &config, args.seed, &mut hooks);
    if let Some(e) = image_error {
        return Err(format!("writing step image: {e}").into());
    }
    if let Some(dir) = &args.out {
        write_episode(dir, &result)?;
    }
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn scenario_files(dir: &Path) -> CliResult<Vec<Scenario>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|entry| entry.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "scn"));
    paths.sort();
    if paths.is_empty() {
        return Err(format!("no .scn files in {}", dir.display()).into());
    }
    paths.iter().map(|p| read_scenario(p)).collect()
}

fn suite(args: SuiteArgs) -> CliResult {
    if args.episodes == 0 {
        return Err("--episodes must be at least 1".into());
    }
    let seeds: Vec<u64> = (0..args.episodes).map(|i| args.first_seed + i).collect();
    let scenarios = match &args.scenarios {
        Some(dir) => scenario_files(dir)?,
        None => seeds.iter().map(|&s| hospital_scenario(s)).collect(),
    };
    let planner = args.llm.apply(PolicyConfig::new(args.planner));
    if !planner.planner.uses_prompt() {
        return Err("the suite planner must be oracle or llm".into());
    }
    planner.validate()?;
    let report = run_ablation_suite(&scenarios, &seeds, &ablation_configs(planner));
    let markdown = report.to_markdown();
    if let Some(dir) = &args.out {
        report.write_to(dir)?;
    }
    match &args.report {
        Some(path) => fs::write(path, &markdown)?,
        None => print!("{markdown}"),
    }
    Ok(())
}

fn gen_hospital(args: GenArgs) -> CliResult {
    let document = if args.replica { REPLICA.to_string() } else { generate_hospital(args.seed) };
    match &args.output {
        Some(path) => fs::write(path, document)?,
        None => print!("{document}"),
    }
    Ok(())
}

fn render(args: RenderArgs) -> CliResult {
    let scenario = read_scenario(&args.scenario)?;
    let text = fs::read_to_string(&args.bank).map_err(|e| format!("{}: {e}", args.bank.display()))?;
    let entries = parse_json(&text).map_err(|e| format!("{}: {e}", args.bank.display()))?;
    let bank = MemoryBank::from_entries(&entries)?;
    let image = render_map(&scenario.map.to_occupancy(), &bank, args.pose.unwrap_or(scenario.start_pose));
    write_image(&args.output, &image)
}

fn validate(path: &Path) -> CliResult {
    let scenario = read_scenario(path)?;
    println!(
        "{}: ok ({}x{} cells, {} doors, {} rooms, {} signs, {} people)",
        scenario.name,
        scenario.map.width(),
        scenario.map.height(),
        scenario.doors.len(),
        scenario.room_numbers().len(),
        scenario.signs.len(),
        scenario.npcs.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Suite(args) => suite(args),
        Command::GenHospital(args) => gen_hospital(args),
        Command::Render(args) => render(args),
        Command::Validate { scenario } => validate(&scenario),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

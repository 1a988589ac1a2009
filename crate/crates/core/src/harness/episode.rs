//! The sense, choose, execute loop for one episode.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{classify_failure, EpisodeMetrics, FailureCause};
use crate::policy::llm::{llm_choose, AttemptError, HttpTransport, LlmClient};
use crate::policy::{build_prompt, choose_closest, choose_oracle, choose_random, Choice, PlannerKind, PolicyConfig, PolicyError};
use crate::primitives::{self, EpisodeContext, Event, EventKind, OutcomeKind, SimConfig};
use crate::render::{encode_image, render_map, ImageFormat, MapImage};
use crate::world::Scenario;

/// Simulated seconds charged for a heuristic (closest/random) decision.
pub const HEURISTIC_DECISION_COST: f64 = 1.0;
/// Guard against runaway loops; the clock normally ends episodes first.
pub const DEFAULT_MAX_STEPS: u32 = 2000;
/// Mixed into the episode seed for the random planner's own stream.
const RANDOM_PLANNER_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeConfig {
    pub policy: PolicyConfig,
    pub sim: SimConfig,
    pub max_steps: u32,
}

impl EpisodeConfig {
    /// Default simulation settings for a policy; sign and person detection
    /// follow the policy's `include_signs_people`.
    pub fn new(policy: PolicyConfig) -> Self {
        let sim = SimConfig { detect_signs_people: policy.include_signs_people, ..SimConfig::default() };
        Self { policy, sim, max_steps: DEFAULT_MAX_STEPS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    GoalReached,
    /// The robot stopped at a door it misread as the goal.
    WrongDoor,
    Timeout,
    Exhausted,
    PolicyFailure,
    StepLimit,
}

impl EndReason {
    pub fn name(self) -> &'static str {
        match self {
            EndReason::GoalReached => "goal_reached",
            EndReason::WrongDoor => "wrong_door",
            EndReason::Timeout => "timeout",
            EndReason::Exhausted => "exhausted",
            EndReason::PolicyFailure => "policy_failure",
            EndReason::StepLimit => "step_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeResult {
    pub scenario: String,
    pub seed: u64,
    pub success: bool,
    pub reason: EndReason,
    /// Simulated seconds; timeouts record the time limit.
    pub duration: f64,
    pub distance: f64,
    /// Planner decisions taken.
    pub steps: u32,
    pub failure_causes: Vec<FailureCause>,
    /// JSON snapshot of the episode configuration.
    pub config: String,
    #[serde(skip)]
    pub events: Vec<Event>,
}

impl EpisodeResult {
    pub fn metrics(&self) -> EpisodeMetrics {
        EpisodeMetrics { success: self.success, duration: self.duration, distance: self.distance }
    }

    /// One JSON object per line.
    pub fn event_log_jsonl(&self) -> String {
        let mut out = String::new();
        for event in &self.events {
            out.push_str(&serde_json::to_string(event).expect("events serialize"));
            out.push('\n');
        }
        out
    }

    /// Conversation lines (`speaker: text`) in order.
    pub fn transcript(&self) -> Vec<String> {
        self.events
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::Utterance { speaker, text } => Some(format!("{speaker}: {text}")),
                _ => None,
            })
            .collect()
    }
}

/// Called with the step number and the planner-view map before a decision.
pub type StepObserver<'h> = &'h mut dyn FnMut(u32, &MapImage);

/// Optional collaborators for [`run_episode_with`].
#[derive(Default)]
pub struct EpisodeHooks<'h> {
    /// Required by the llm planner.
    pub llm: Option<&'h LlmClient>,
    /// Receives the planner-view map before every decision.
    pub on_step: Option<StepObserver<'h>>,
}

enum Stop {
    End(EndReason),
}

fn decide(
    ctx: &mut EpisodeContext<'_>,
    config: &PolicyConfig,
    planner_rng: &mut ChaCha8Rng,
    hooks: &mut EpisodeHooks<'_>,
) -> Result<Choice, Stop> {
    let view = config.planner_view(&ctx.bank);
    let needs_image = config.planner == PlannerKind::Llm && config.include_map_image;
    let image = (needs_image || hooks.on_step.is_some()).then(|| render_map(&ctx.grid, &view, ctx.pose));
    if let (Some(on_step), Some(image)) = (hooks.on_step.as_mut(), image.as_ref()) {
        on_step(ctx.step, image);
    }
    let costs = ctx.scenario.clock_costs;
    let result = match config.planner {
        PlannerKind::Closest => {
            ctx.charge("decision", HEURISTIC_DECISION_COST);
            choose_closest(&view, ctx.pose)
        }
        PlannerKind::Random => {
            ctx.charge("decision", HEURISTIC_DECISION_COST);
            choose_random(&view, planner_rng)
        }
        PlannerKind::Oracle => {
            ctx.charge("vlm_call", costs.vlm_call);
            choose_oracle(&view, ctx.scenario, &ctx.goal, ctx.pose, config.include_json).map(|(c, _)| c)
        }
        PlannerKind::Llm => {
            let Some(client) = hooks.llm else {
                ctx.log(EventKind::PolicyFailure { message: "no llm client configured".into() });
                return Err(Stop::End(EndReason::PolicyFailure));
            };
            if view.unvisited().next().is_none() {
                Err(PolicyError::Exhausted)
            } else {
                let png = image
                    .as_ref()
                    .map(|img| encode_image(img, ImageFormat::Png).expect("png encoding of a valid image"));
                let bundle = build_prompt(&view, png, &ctx.goal, config);
                match llm_choose(client, &bundle, &view) {
                    Ok(out) => {
                        for failed in &out.failed_attempts {
                            ctx.log(EventKind::ChoiceRejected { reason: attempt_reason(failed) });
                        }
                        ctx.charge("vlm_call", costs.vlm_call * f64::from(out.calls));
                        Ok(out.choice)
                    }
                    Err(failure) => {
                        for failed in &failure.attempts {
                            ctx.log(EventKind::ChoiceRejected { reason: attempt_reason(failed) });
                        }
                        ctx.charge("vlm_call", costs.vlm_call * failure.attempts.len() as f64);
                        ctx.log(EventKind::PolicyFailure { message: failure.to_string() });
                        return Err(Stop::End(EndReason::PolicyFailure));
                    }
                }
            }
        }
    };
    result.map_err(|e| match e {
        PolicyError::Exhausted => {
            ctx.log(EventKind::Exhausted);
            Stop::End(EndReason::Exhausted)
        }
        PolicyError::Config(message) => {
            ctx.log(EventKind::PolicyFailure { message });
            Stop::End(EndReason::PolicyFailure)
        }
    })
}

fn attempt_reason(attempt: &AttemptError) -> String {
    match attempt {
        AttemptError::Transport(e) => format!("transport: {e}"),
        AttemptError::Parse { reply, error } => format!("{error}: {reply:?}"),
    }
}

/// Runs one episode with the offline planners, or with an HTTP client built
/// from the llm settings (key from `WAYFINDER_LLM_KEY`).
pub fn run_episode(scenario: &Scenario, config: &EpisodeConfig, seed: u64) -> EpisodeResult {
    let client = config.policy.llm.as_ref().filter(|_| config.policy.planner == PlannerKind::Llm).map(|s| {
        let transport = HttpTransport::new(
            s.endpoint.clone(),
            std::env::var(crate::policy::llm::KEY_ENV).ok(),
            std::time::Duration::from_secs_f64(s.timeout),
        );
        LlmClient::new(transport, s.model.clone(), s.max_retries)
    });
    let mut hooks = EpisodeHooks { llm: client.as_ref(), on_step: None };
    run_episode_with(scenario, config, seed, &mut hooks)
}

pub fn run_episode_with(
    scenario: &Scenario,
    config: &EpisodeConfig,
    seed: u64,
    hooks: &mut EpisodeHooks<'_>,
) -> EpisodeResult {
    let config_json = serde_json::to_string(config).expect("config serializes");
    let mut ctx = EpisodeContext::new(scenario, config.sim.clone(), seed);
    let mut planner_rng = ChaCha8Rng::seed_from_u64(seed ^ RANDOM_PLANNER_SALT);
    ctx.log(EventKind::EpisodeStart {
        scenario: scenario.name.clone(),
        seed,
        config: config_json.clone(),
        goal: ctx.goal.clone(),
    });
    ctx.scan_360();

    let limit = scenario.time_limit;
    let reason = loop {
        if ctx.clock > limit {
            break EndReason::Timeout;
        }
        if ctx.step >= config.max_steps {
            break EndReason::StepLimit;
        }
        ctx.refresh_frontiers();
        ctx.step += 1;
        let choice = match decide(&mut ctx, &config.policy, &mut planner_rng, hooks) {
            Ok(choice) => choice,
            Err(Stop::End(reason)) => break reason,
        };
        let index = choice.landmark_index;
        let (name, visited) = ctx
            .bank
            .get(index)
            .map(|l| (l.name(), l.visited))
            .unwrap_or_else(|| (String::new(), true));
        ctx.log(EventKind::Decision {
            planner: config.policy.planner.name().to_string(),
            index,
            name,
            rationale: choice.rationale,
        });
        if visited {
            ctx.log(EventKind::VisitedChoice { index });
            continue;
        }
        let outcome = match primitives::execute(&mut ctx, index) {
            Ok(outcome) => outcome,
            Err(e) => {
                ctx.log(EventKind::PolicyFailure { message: e.to_string() });
                break EndReason::PolicyFailure;
            }
        };
        if let OutcomeKind::GoalFound { truth, .. } = &outcome.kind {
            break if ctx.clock > limit {
                EndReason::Timeout
            } else if truth.as_deref().is_some_and(|t| Some(t) == scenario.goal_room()) {
                EndReason::GoalReached
            } else {
                EndReason::WrongDoor
            };
        }
    };

    if let Some(goal_door) = scenario.goal_room().and_then(|r| scenario.door_with_label(r)) {
        let truth = format!("door {}", goal_door.id);
        let promoted = ctx
            .events()
            .iter()
            .any(|e| matches!(&e.kind, EventKind::Promoted { truth: t, .. } if *t == truth));
        if ctx.goal_door_sighted() && !promoted {
            ctx.log(EventKind::GoalDoorMissed { door: goal_door.id });
        }
    }

    let success = reason == EndReason::GoalReached;
    let duration = if reason == EndReason::Timeout { limit } else { ctx.clock };
    let (distance, steps) = (ctx.distance, ctx.step);
    ctx.log(EventKind::EpisodeEnd { success, reason: reason.name().to_string(), duration, distance, steps });
    let events = ctx.into_events();
    let failure_causes = if success { Vec::new() } else { classify_failure(&events) };
    EpisodeResult {
        scenario: scenario.name.clone(),
        seed,
        success,
        reason,
        duration,
        distance,
        steps,
        failure_causes,
        config: config_json,
        events,
    }
}

//! Evaluation episodes for planning agents.
//!
//! Optimal mode asks for the whole plan in one turn and scores it against the
//! unique optimal path. Reachable mode interleaves observations and single
//! actions until the agent reaches the goal, steps into a pit, emits an
//! unparseable action or exhausts the step budget.

mod agents;
mod bridge;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agents::{
    AgentKind, DfsAgent, DfsChoice, OracleAgent, PlanEntry, RandomValidAgent, ScriptedAgent,
};
pub use bridge::{serve, BridgeAgent, BridgeConfig, Transport, DEFAULT_TIMEOUT};

use crate::cogmap::parse_plan;
use crate::exec::Exec;
use crate::grid::{GridSpec, Trajectory, TransitionResult};
use crate::paths::optimal_path;
use crate::text::{parse_action, render_instruction, render_observation, PromptText};

pub const DEFAULT_MAX_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Fail,
    Deadend,
    MaxStep,
    Invalid,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [
        Outcome::Success,
        Outcome::Fail,
        Outcome::Deadend,
        Outcome::MaxStep,
        Outcome::Invalid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Fail => "fail",
            Outcome::Deadend => "deadend",
            Outcome::MaxStep => "max_step",
            Outcome::Invalid => "invalid",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Optimal,
    Reachable,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimal" => Ok(Mode::Optimal),
            "reachable" => Ok(Mode::Reachable),
            _ => Err(format!(
                "unknown mode {s:?} (expected optimal or reachable)"
            )),
        }
    }
}

/// Transport or protocol failure; never an outcome of the episode itself.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("agent timed out after {0} attempts")]
    Timeout(usize),
    #[error("agent transport failed: {0}")]
    Transport(String),
    #[error("agent protocol violation: {0}")]
    Protocol(String),
    #[error("agent unavailable: {0}")]
    Unavailable(String),
}

/// Maps the conversation so far to the next response text.
pub trait Agent: Send {
    fn respond(&mut self, messages: &[PromptText]) -> Result<String, AgentError>;

    /// Called once when the episode closes.
    fn finish(&mut self, _outcome: Outcome) {}
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    pub steps: usize,
    pub transcript: Vec<PromptText>,
    pub optimal_len: usize,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("episode aborted: {error}")]
pub struct EpisodeAbort {
    pub error: AgentError,
    pub transcript: Vec<PromptText>,
}

/// Replays `actions` from the start; stops at a pit or the goal.
fn replay(spec: &GridSpec, actions: &[crate::grid::Action]) -> Trajectory {
    let mut pos = spec.start;
    let mut steps = Vec::with_capacity(actions.len());
    for &a in actions {
        match spec
            .transition(pos, a)
            .expect("replay stays on legal cells")
        {
            TransitionResult::Moved(p) => pos = p,
            TransitionResult::BlockedWall | TransitionResult::BlockedBounds => {}
            TransitionResult::Pit => {
                steps.push((a, pos.step(a)));
                break;
            }
            TransitionResult::ReachedGoal(p) => {
                steps.push((a, p));
                break;
            }
        }
        steps.push((a, pos));
    }
    Trajectory {
        origin: spec.start,
        steps,
    }
}

/// Scores a single-turn response: success iff its plan is exactly the optimal path.
pub fn evaluate_optimal(spec: &GridSpec, response: &str) -> EpisodeResult {
    let mut transcript = render_instruction(spec);
    transcript.push(PromptText::gpt(response));
    let optimal = optimal_path(spec);
    let (outcome, steps, trajectory) = match parse_plan(response) {
        Ok(plan) => {
            let outcome = if plan.actions == optimal.actions() {
                Outcome::Success
            } else {
                Outcome::Fail
            };
            (outcome, plan.actions.len(), replay(spec, &plan.actions))
        }
        Err(_) => (
            Outcome::Fail,
            0,
            Trajectory {
                origin: spec.start,
                steps: Vec::new(),
            },
        ),
    };
    EpisodeResult {
        outcome,
        steps,
        transcript,
        optimal_len: optimal.len(),
        trajectory,
    }
}

pub fn run_optimal(spec: &GridSpec, agent: &mut dyn Agent) -> Result<EpisodeResult, EpisodeAbort> {
    let transcript = render_instruction(spec);
    let response = agent.respond(&transcript).map_err(|error| EpisodeAbort {
        error,
        transcript: transcript.clone(),
    })?;
    let result = evaluate_optimal(spec, &response);
    agent.finish(result.outcome);
    Ok(result)
}

/// The action line of a reply: the last non-empty line on the first turn
/// (earlier lines are the thought), the whole reply afterwards.
fn action_line(reply: &str, first_turn: bool) -> &str {
    if first_turn {
        reply
            .lines()
            .rev()
            .find(|l| !l.trim().is_empty())
            .unwrap_or("")
    } else {
        reply
    }
}

pub fn run_reachable(
    spec: &GridSpec,
    agent: &mut dyn Agent,
    max_steps: usize,
) -> Result<EpisodeResult, EpisodeAbort> {
    let mut transcript = render_instruction(spec);
    let mut pos = spec.start;
    let mut trajectory = Trajectory {
        origin: spec.start,
        steps: Vec::new(),
    };
    let mut first_turn = true;
    let outcome = loop {
        if trajectory.len() >= max_steps {
            break Outcome::MaxStep;
        }
        let reply = match agent.respond(&transcript) {
            Ok(r) => r,
            Err(error) => return Err(EpisodeAbort { error, transcript }),
        };
        let parsed = parse_action(action_line(&reply, first_turn));
        transcript.push(PromptText::gpt(reply));
        first_turn = false;
        let Ok(action) = parsed else {
            break Outcome::Invalid;
        };
        match spec
            .transition(pos, action)
            .expect("agent position stays legal")
        {
            TransitionResult::Moved(p) => pos = p,
            TransitionResult::BlockedWall | TransitionResult::BlockedBounds => {}
            TransitionResult::Pit => {
                trajectory.steps.push((action, pos.step(action)));
                break Outcome::Deadend;
            }
            TransitionResult::ReachedGoal(p) => {
                trajectory.steps.push((action, p));
                break Outcome::Success;
            }
        }
        trajectory.steps.push((action, pos));
        transcript.push(PromptText::human(render_observation(spec, pos)));
    };
    agent.finish(outcome);
    Ok(EpisodeResult {
        outcome,
        steps: trajectory.len(),
        transcript,
        optimal_len: optimal_path(spec).len(),
        trajectory,
    })
}

/// What an agent factory knows about the episode it serves.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeContext<'a> {
    pub episode: usize,
    pub record_index: u64,
    pub spec: &'a GridSpec,
    pub mode: Mode,
    pub seed: u64,
}

pub trait AgentFactory: Sync {
    fn create(&self, ctx: &EpisodeContext<'_>) -> Result<Box<dyn Agent>, AgentError>;
}

#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    pub mode: Mode,
    pub max_steps: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Reachable,
            max_steps: DEFAULT_MAX_STEPS,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

/// One environment to evaluate.
#[derive(Debug, Clone)]
pub struct EvalItem {
    pub record_index: u64,
    pub spec: GridSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub record_index: u64,
    pub size_x: i32,
    pub size_y: i32,
    pub outcome: Option<Outcome>,
    pub steps: usize,
    pub optimal_len: usize,
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regression {
    pub n: usize,
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares fit of `y` on `x`; `None` when `x` has no spread.
pub fn least_squares(points: &[(f64, f64)]) -> Option<Regression> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(Regression {
        n,
        slope,
        intercept: my - slope * mx,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub mode: Mode,
    pub max_steps: usize,
    pub episodes: usize,
    pub completed: usize,
    pub aborted: usize,
    pub counts: BTreeMap<Outcome, usize>,
    /// Over completed episodes; aborted ones are excluded from the denominator.
    pub rates: BTreeMap<Outcome, f64>,
    /// Steps against optimal length over successful episodes.
    pub step_regression: Option<Regression>,
    pub results: Vec<EpisodeSummary>,
}

pub struct BatchOutput {
    pub report: BatchReport,
    /// Per-episode transcripts in episode order; aborted episodes keep the partial transcript.
    pub transcripts: Vec<Vec<PromptText>>,
}

pub fn evaluate_batch(
    items: &[EvalItem],
    factory: &dyn AgentFactory,
    config: &EvalConfig,
) -> BatchOutput {
    let runs = config.exec.map_range(items.len(), |episode| {
        let item = &items[episode];
        let ctx = EpisodeContext {
            episode,
            record_index: item.record_index,
            spec: &item.spec,
            mode: config.mode,
            seed: config.seed,
        };
        let run = factory
            .create(&ctx)
            .map_err(|error| EpisodeAbort {
                error,
                transcript: Vec::new(),
            })
            .and_then(|mut agent| match config.mode {
                Mode::Optimal => run_optimal(&item.spec, agent.as_mut()),
                Mode::Reachable => run_reachable(&item.spec, agent.as_mut(), config.max_steps),
            });
        (episode, run)
    });
    aggregate(items, config, runs)
}

fn aggregate(
    items: &[EvalItem],
    config: &EvalConfig,
    runs: Vec<(usize, Result<EpisodeResult, EpisodeAbort>)>,
) -> BatchOutput {
    let mut counts: BTreeMap<Outcome, usize> = Outcome::ALL.iter().map(|o| (*o, 0)).collect();
    let mut results = Vec::with_capacity(runs.len());
    let mut transcripts = Vec::with_capacity(runs.len());
    let mut points = Vec::new();
    for (episode, run) in runs {
        let item = &items[episode];
        let mut summary = EpisodeSummary {
            episode,
            record_index: item.record_index,
            size_x: item.spec.size_x,
            size_y: item.spec.size_y,
            outcome: None,
            steps: 0,
            optimal_len: optimal_path(&item.spec).len(),
            aborted: None,
        };
        match run {
            Ok(r) => {
                *counts.get_mut(&r.outcome).expect("all outcomes present") += 1;
                if r.outcome == Outcome::Success {
                    points.push((r.optimal_len as f64, r.steps as f64));
                }
                summary.outcome = Some(r.outcome);
                summary.steps = r.steps;
                transcripts.push(r.transcript);
            }
            Err(abort) => {
                summary.aborted = Some(abort.error.to_string());
                transcripts.push(abort.transcript);
            }
        }
        results.push(summary);
    }
    let completed: usize = counts.values().sum();
    let rates = counts
        .iter()
        .map(|(o, c)| {
            (
                *o,
                if completed == 0 {
                    0.0
                } else {
                    *c as f64 / completed as f64
                },
            )
        })
        .collect();
    BatchOutput {
        report: BatchReport {
            mode: config.mode,
            max_steps: config.max_steps,
            episodes: items.len(),
            completed,
            aborted: items.len() - completed,
            counts,
            rates,
            step_regression: least_squares(&points),
            results,
        },
        transcripts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cogmap::{
        build_search_trace, serialize_thought, CotVariant, Direction, Fidelity, Verbosity,
    };
    use crate::grid::reference_env;

    struct Canned(Vec<&'static str>, usize);

    impl Agent for Canned {
        fn respond(&mut self, _: &[PromptText]) -> Result<String, AgentError> {
            let r = self.0.get(self.1).or(self.0.last()).copied().unwrap_or("");
            self.1 += 1;
            Ok(r.to_string())
        }
    }

    struct Broken;

    impl Agent for Broken {
        fn respond(&mut self, _: &[PromptText]) -> Result<String, AgentError> {
            Err(AgentError::Transport("connection refused".into()))
        }
    }

    #[test]
    fn optimal_success_from_backward_cot() {
        let env = reference_env();
        let trace = build_search_trace(&env, Direction::Bwd);
        let cot = serialize_thought(
            &trace,
            CotVariant::new(Direction::Bwd, Verbosity::EmptySteps, true),
            Fidelity::Uniform,
        )
        .unwrap();
        let r = evaluate_optimal(&env, &cot);
        assert_eq!(r.outcome, Outcome::Success);
        assert_eq!(r.optimal_len, 5);
        assert_eq!(r.trajectory.last_state(), env.goal);
    }

    #[test]
    fn optimal_failures() {
        let env = reference_env();
        assert_eq!(
            evaluate_optimal(&env, "up\nright\nright\nup\nright").outcome,
            Outcome::Fail
        );
        assert_eq!(
            evaluate_optimal(&env, "right\nright\nup\nright\nup\nleft").outcome,
            Outcome::Fail
        );
        assert_eq!(
            evaluate_optimal(&env, "Thought:\ngarbage").outcome,
            Outcome::Fail
        );
        assert_eq!(
            evaluate_optimal(&env, "right\nright\nup\nright\nup").outcome,
            Outcome::Success
        );
    }

    #[test]
    fn reachable_outcomes() {
        let env = reference_env();
        let r = run_reachable(&env, &mut Canned(vec!["jump"], 0), 200).unwrap();
        assert_eq!((r.outcome, r.steps), (Outcome::Invalid, 0));
        let r = run_reachable(&env, &mut Canned(vec!["up"], 0), 200).unwrap();
        assert_eq!((r.outcome, r.steps), (Outcome::MaxStep, 200));
        let r = run_reachable(&env, &mut Canned(vec!["right", "right", "right"], 0), 200).unwrap();
        assert_eq!((r.outcome, r.steps), (Outcome::Deadend, 3));
        let r = run_reachable(
            &env,
            &mut Canned(vec!["right", "right", "up", "right", "up"], 0),
            200,
        )
        .unwrap();
        assert_eq!((r.outcome, r.steps), (Outcome::Success, 5));
        // Ends on the agent's winning move, no trailing observation.
        assert_eq!(r.transcript.last().unwrap(), &PromptText::gpt("up"));
    }

    #[test]
    fn blocked_moves_repeat_observation() {
        let env = reference_env();
        let r = run_reachable(&env, &mut Canned(vec!["down", "jump"], 0), 200).unwrap();
        assert_eq!((r.outcome, r.steps), (Outcome::Invalid, 1));
        assert_eq!(r.transcript[4].text, render_observation(&env, env.start));
    }

    #[test]
    fn budget_boundary_allows_final_winning_step() {
        let env = reference_env();
        let plan = vec!["right", "right", "up", "right", "up"];
        let r = run_reachable(&env, &mut Canned(plan.clone(), 0), 5).unwrap();
        assert_eq!(r.outcome, Outcome::Success);
        let r = run_reachable(&env, &mut Canned(plan, 0), 4).unwrap();
        assert_eq!((r.outcome, r.steps), (Outcome::MaxStep, 4));
    }

    #[test]
    fn first_turn_thought_is_kept() {
        let env = reference_env();
        let r = run_reachable(
            &env,
            &mut Canned(
                vec!["Thought:\nStep 1:\nright", "right", "up", "right", "up"],
                0,
            ),
            200,
        )
        .unwrap();
        assert_eq!(r.outcome, Outcome::Success);
        assert!(r.transcript[3].text.starts_with("Thought:"));
        // Later turns must be a bare action.
        let r = run_reachable(&env, &mut Canned(vec!["right", "ok\nright"], 0), 200).unwrap();
        assert_eq!(r.outcome, Outcome::Invalid);
    }

    #[test]
    fn transport_failure_aborts() {
        let env = reference_env();
        let err = run_reachable(&env, &mut Broken, 200).unwrap_err();
        assert!(matches!(err.error, AgentError::Transport(_)));
        assert!(run_optimal(&env, &mut Broken).is_err());
    }

    #[test]
    fn regression_fit() {
        let r = least_squares(&[(1.0, 3.0), (2.0, 5.0), (3.0, 7.0)]).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-12 && (r.intercept - 1.0).abs() < 1e-12);
        assert!(least_squares(&[(1.0, 1.0), (1.0, 2.0)]).is_none());
    }
}

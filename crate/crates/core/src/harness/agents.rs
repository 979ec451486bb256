//! Scripted reference agents and the agent selector used by the CLI.

use std::collections::{HashMap, HashSet};
use std::str::FromStr;

use rand::seq::IndexedRandom;
use serde::Deserialize;

use super::{Agent, AgentError, AgentFactory, BridgeAgent, BridgeConfig, EpisodeContext, Mode};
use crate::cogmap::{parse_plan, serialize_plan};
use crate::grid::{Action, GridSpec, Position};
use crate::paths::optimal_path;
use crate::rng::{derive_named, rng_from_seed, GridRng};
use crate::text::{parse_observation, Observation, PromptText, Role};

fn last_observation(messages: &[PromptText]) -> Result<Observation, AgentError> {
    let text = messages
        .iter()
        .rev()
        .find(|m| m.role == Role::Human)
        .map(|m| m.text.as_str())
        .ok_or_else(|| AgentError::Protocol("no observation in transcript".into()))?;
    parse_observation(text).map_err(|e| AgentError::Protocol(e.to_string()))
}

/// Emits the optimal plan: whole in optimal mode, one action per turn otherwise.
pub struct OracleAgent {
    mode: Mode,
    plan: Vec<Action>,
    next: usize,
    text: String,
}

impl OracleAgent {
    pub fn new(spec: &GridSpec, mode: Mode) -> Self {
        Self {
            mode,
            plan: optimal_path(spec).actions(),
            next: 0,
            text: serialize_plan(spec),
        }
    }
}

impl Agent for OracleAgent {
    fn respond(&mut self, _messages: &[PromptText]) -> Result<String, AgentError> {
        if self.mode == Mode::Optimal {
            return Ok(self.text.clone());
        }
        let action = self.plan.get(self.next).copied();
        self.next += 1;
        Ok(action.map_or_else(String::new, |a| a.word().to_string()))
    }
}

/// Picks uniformly among the moves listed in the latest observation.
pub struct RandomValidAgent {
    rng: GridRng,
}

impl RandomValidAgent {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: rng_from_seed(seed),
        }
    }
}

impl Agent for RandomValidAgent {
    fn respond(&mut self, messages: &[PromptText]) -> Result<String, AgentError> {
        let obs = last_observation(messages)?;
        let (action, _) = obs
            .possible
            .choose(&mut self.rng)
            .ok_or_else(|| AgentError::Protocol("observation lists no moves".into()))?;
        Ok(action.word().to_string())
    }
}

/// How the DFS agent picks among unvisited neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfsChoice {
    Random(u64),
    /// The first unvisited move in observation order.
    First,
}

/// Online depth-first search from observations: advance to an unvisited
/// neighbor when one exists, otherwise step back to the parent.
pub struct DfsAgent {
    rng: Option<GridRng>,
    visited: HashSet<Position>,
    parent: HashMap<Position, Position>,
}

impl DfsAgent {
    pub fn new(choice: DfsChoice) -> Self {
        let rng = match choice {
            DfsChoice::Random(seed) => Some(rng_from_seed(seed)),
            DfsChoice::First => None,
        };
        Self {
            rng,
            visited: HashSet::new(),
            parent: HashMap::new(),
        }
    }
}

impl Agent for DfsAgent {
    fn respond(&mut self, messages: &[PromptText]) -> Result<String, AgentError> {
        let obs = last_observation(messages)?;
        let here = obs.current;
        self.visited.insert(here);
        let fresh: Vec<(Action, Position)> = obs
            .possible
            .iter()
            .copied()
            .filter(|(_, p)| !self.visited.contains(p))
            .collect();
        let pick = match &mut self.rng {
            Some(rng) => fresh.choose(rng).copied(),
            None => fresh.first().copied(),
        };
        if let Some((action, dest)) = pick {
            self.parent.insert(dest, here);
            return Ok(action.word().to_string());
        }
        let parent = self
            .parent
            .get(&here)
            .copied()
            .ok_or_else(|| AgentError::Protocol(format!("search exhausted at {here}")))?;
        Action::between(here, parent)
            .map(|a| a.word().to_string())
            .ok_or_else(|| {
                AgentError::Protocol(format!("parent {parent} is not adjacent to {here}"))
            })
    }
}

/// Replays fixed responses, then answers with an empty string.
pub struct ScriptedAgent {
    responses: Vec<String>,
    next: usize,
}

impl ScriptedAgent {
    pub fn new(responses: Vec<String>) -> Self {
        Self { responses, next: 0 }
    }

    pub fn constant(word: &str) -> ConstantAgent {
        ConstantAgent(word.to_string())
    }
}

impl Agent for ScriptedAgent {
    fn respond(&mut self, _messages: &[PromptText]) -> Result<String, AgentError> {
        let r = self.responses.get(self.next).cloned().unwrap_or_default();
        self.next += 1;
        Ok(r)
    }
}

pub struct ConstantAgent(String);

impl Agent for ConstantAgent {
    fn respond(&mut self, _messages: &[PromptText]) -> Result<String, AgentError> {
        Ok(self.0.clone())
    }
}

/// One line of a plans file: a single-turn `text`, explicit reachable `turns`, or both.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct PlanEntry {
    pub index: u64,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub turns: Option<Vec<String>>,
}

impl PlanEntry {
    fn responses(&self, mode: Mode) -> Vec<String> {
        match (mode, &self.text, &self.turns) {
            (Mode::Optimal, Some(text), _) => vec![text.clone()],
            (Mode::Optimal, None, Some(turns)) => vec![turns.join("\n")],
            (Mode::Reachable, _, Some(turns)) => turns.clone(),
            (Mode::Reachable, Some(text), None) => match parse_plan(text) {
                // Thought and first action share the first turn.
                Ok(plan) => plan
                    .actions
                    .iter()
                    .enumerate()
                    .map(|(i, a)| match (&plan.thought, i) {
                        (Some(t), 0) => format!("{t}\n{a}"),
                        _ => a.to_string(),
                    })
                    .collect(),
                Err(_) => vec![text.clone()],
            },
            (_, None, None) => Vec::new(),
        }
    }
}

/// Agent selector: `oracle`, `random`, `dfs`, `const:WORD`, `plans:FILE`, `bridge:URL`,
/// or `bridge:stdio:COMMAND [ARGS..]`.
#[derive(Debug, Clone)]
pub enum AgentKind {
    Oracle,
    Random,
    Dfs,
    Constant(String),
    Plans(HashMap<u64, PlanEntry>),
    Bridge(BridgeConfig),
}

impl AgentKind {
    pub fn plans_from_jsonl(content: &str) -> Result<Self, String> {
        let mut table = HashMap::new();
        for (i, line) in content
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let entry: PlanEntry =
                serde_json::from_str(line).map_err(|e| format!("plans line {}: {e}", i + 1))?;
            table.insert(entry.index, entry);
        }
        Ok(AgentKind::Plans(table))
    }
}

impl FromStr for AgentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => return Ok(AgentKind::Oracle),
            "random" => return Ok(AgentKind::Random),
            "dfs" => return Ok(AgentKind::Dfs),
            _ => {}
        }
        if let Some(word) = s.strip_prefix("const:") {
            return Ok(AgentKind::Constant(word.to_string()));
        }
        if let Some(path) = s.strip_prefix("plans:") {
            let content = std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
            return AgentKind::plans_from_jsonl(&content);
        }
        if let Some(target) = s.strip_prefix("bridge:") {
            return target.parse().map(AgentKind::Bridge);
        }
        Err(format!("unknown agent {s:?}"))
    }
}

impl AgentFactory for AgentKind {
    fn create(&self, ctx: &EpisodeContext<'_>) -> Result<Box<dyn Agent>, AgentError> {
        let seed = derive_named(ctx.seed, "agent", ctx.record_index);
        Ok(match self {
            AgentKind::Oracle => Box::new(OracleAgent::new(ctx.spec, ctx.mode)),
            AgentKind::Random => Box::new(RandomValidAgent::new(seed)),
            AgentKind::Dfs => Box::new(DfsAgent::new(DfsChoice::Random(seed))),
            AgentKind::Constant(word) => Box::new(ScriptedAgent::constant(word)),
            AgentKind::Plans(table) => {
                let entry = table.get(&ctx.record_index).ok_or_else(|| {
                    AgentError::Unavailable(format!("no plan for index {}", ctx.record_index))
                })?;
                Box::new(ScriptedAgent::new(entry.responses(ctx.mode)))
            }
            AgentKind::Bridge(config) => Box::new(BridgeAgent::connect(
                config,
                format!("episode-{}", ctx.record_index),
            )?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::reference_env;
    use crate::harness::{run_optimal, run_reachable, Outcome};
    use crate::text::render_instruction;

    #[test]
    fn oracle_both_modes() {
        let env = reference_env();
        let r = run_reachable(&env, &mut OracleAgent::new(&env, Mode::Reachable), 200).unwrap();
        assert_eq!((r.outcome, r.steps), (Outcome::Success, 5));
        let r = run_optimal(&env, &mut OracleAgent::new(&env, Mode::Optimal)).unwrap();
        assert_eq!(r.outcome, Outcome::Success);
    }

    #[test]
    fn dfs_first_choice_reproduces_reference_transcript() {
        let env = reference_env();
        let r = run_reachable(&env, &mut DfsAgent::new(DfsChoice::First), 200).unwrap();
        assert_eq!(r.outcome, Outcome::Success);
        let moves: Vec<&str> = r.transcript[3..]
            .iter()
            .filter(|m| m.role == Role::Gpt)
            .map(|m| m.text.as_str())
            .collect();
        assert_eq!(
            moves,
            ["up", "up", "right", "left", "down", "down", "right", "right", "up", "right", "up"]
        );
        assert_eq!(
            r.transcript[6].text,
            "Current:\n(0, 2)\nPossible:\n(0, 1)\ndown\n(1, 2)\nright"
        );
        assert_eq!(
            r.transcript[8].text,
            "Current:\n(1, 2)\nPossible:\n(0, 2)\nleft"
        );
    }

    #[test]
    fn dfs_random_always_succeeds_on_reference() {
        let env = reference_env();
        for seed in 0..50 {
            let r = run_reachable(&env, &mut DfsAgent::new(DfsChoice::Random(seed)), 200).unwrap();
            assert_eq!(r.outcome, Outcome::Success);
            assert!(r.steps >= 5);
        }
    }

    #[test]
    fn random_agent_stays_on_listed_moves() {
        let env = reference_env();
        let mut agent = RandomValidAgent::new(3);
        let r = run_reachable(&env, &mut agent, 200).unwrap();
        assert_ne!(r.outcome, Outcome::Invalid);
        assert_ne!(r.outcome, Outcome::Deadend);
        for w in r.transcript[2..].windows(2) {
            if w[0].role == Role::Human && w[1].role == Role::Gpt {
                let obs = parse_observation(&w[0].text).unwrap();
                assert!(obs.possible.iter().any(|(a, _)| a.word() == w[1].text));
            }
        }
    }

    #[test]
    fn agent_selectors() {
        assert!(matches!(
            "oracle".parse::<AgentKind>(),
            Ok(AgentKind::Oracle)
        ));
        assert!(matches!("const:up".parse::<AgentKind>(), Ok(AgentKind::Constant(w)) if w == "up"));
        assert!(matches!(
            "bridge:http://127.0.0.1:9/act".parse::<AgentKind>(),
            Ok(AgentKind::Bridge(_))
        ));
        assert!("wizard".parse::<AgentKind>().is_err());
    }

    #[test]
    fn plans_entries_in_both_modes() {
        let kind = AgentKind::plans_from_jsonl(
            "{\"index\":0,\"text\":\"right\\nright\\nup\\nright\\nup\"}\n{\"index\":1,\"turns\":[\"up\",\"jump\"]}\n",
        )
        .unwrap();
        let env = reference_env();
        let ctx = |i, mode| EpisodeContext {
            episode: 0,
            record_index: i,
            spec: &env,
            mode,
            seed: 0,
        };
        let mut a = kind.create(&ctx(0, Mode::Optimal)).unwrap();
        assert_eq!(
            run_optimal(&env, a.as_mut()).unwrap().outcome,
            Outcome::Success
        );
        let mut a = kind.create(&ctx(0, Mode::Reachable)).unwrap();
        assert_eq!(
            run_reachable(&env, a.as_mut(), 200).unwrap().outcome,
            Outcome::Success
        );
        let mut a = kind.create(&ctx(1, Mode::Reachable)).unwrap();
        let r = run_reachable(&env, a.as_mut(), 200).unwrap();
        assert_eq!((r.outcome, r.steps), (Outcome::Invalid, 1));
        assert!(kind.create(&ctx(7, Mode::Optimal)).is_err());
        // Thought text reaches the first reachable turn.
        let _ = render_instruction(&env);
    }
}

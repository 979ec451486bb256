//! Cognitive maps: layered breadth-first search traces and their
//! chain-of-thought serializations.
//!
//! A trace is rooted at the start (forward) or at the goal (backward). Each
//! layer expands the states kept by the previous one; every expansion records
//! its four neighbors in canonical order with a keep/cut verdict. Backward
//! traces label a neighbor with the action that moves from the neighbor into
//! the expanded state.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Action, GridSpec, Position, Trajectory};
use crate::paths::optimal_path;
use crate::text::parse_position;

pub const CUT: &str = "cut";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Fwd,
    Bwd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CutReason {
    OutOfBounds,
    Wall,
    Pit,
    Visited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Kept,
    Cut(CutReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NeighborRecord {
    pub neighbor: Position,
    pub label: Action,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expansion {
    pub expanded: Position,
    pub records: [NeighborRecord; 4],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchTrace {
    pub direction: Direction,
    pub layers: Vec<Vec<Expansion>>,
    /// The solution, always oriented start to goal.
    pub path: Trajectory,
}

pub fn build_search_trace(spec: &GridSpec, direction: Direction) -> SearchTrace {
    let (root, target) = match direction {
        Direction::Fwd => (spec.start, spec.goal),
        Direction::Bwd => (spec.goal, spec.start),
    };
    let mut visited = HashSet::from([root]);
    let mut frontier = vec![root];
    let mut layers = Vec::new();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        let mut layer = Vec::with_capacity(frontier.len());
        for &expanded in &frontier {
            let records = Action::ALL.map(|action| {
                let neighbor = expanded.step(action);
                let label = match direction {
                    Direction::Fwd => action,
                    Direction::Bwd => action.inverse(),
                };
                let verdict = if !spec.in_bounds(neighbor) {
                    Verdict::Cut(CutReason::OutOfBounds)
                } else if spec.is_wall(neighbor) {
                    Verdict::Cut(CutReason::Wall)
                } else if spec.is_pit(neighbor) {
                    Verdict::Cut(CutReason::Pit)
                } else if !visited.insert(neighbor) {
                    Verdict::Cut(CutReason::Visited)
                } else {
                    next.push(neighbor);
                    Verdict::Kept
                };
                NeighborRecord {
                    neighbor,
                    label,
                    verdict,
                }
            });
            layer.push(Expansion { expanded, records });
        }
        layers.push(layer);
        if visited.contains(&target) {
            break;
        }
        frontier = next;
    }
    SearchTrace {
        direction,
        layers,
        path: optimal_path(spec),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verbosity {
    None,
    EmptySteps,
    Survivors,
    AllUnmarked,
    AllMarked,
}

/// One chain-of-thought configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CotVariant {
    pub direction: Direction,
    pub verbosity: Verbosity,
    pub backtrack: bool,
}

const PRESETS: [(&str, Verbosity, bool); 8] = [
    ("none", Verbosity::None, false),
    ("cot", Verbosity::EmptySteps, true),
    ("wo-all-backtrack", Verbosity::Survivors, false),
    ("wo-all", Verbosity::Survivors, true),
    ("unmark-wo-backtrack", Verbosity::AllUnmarked, false),
    ("unmark", Verbosity::AllUnmarked, true),
    ("mark-wo-backtrack", Verbosity::AllMarked, false),
    ("mark", Verbosity::AllMarked, true),
];

impl CotVariant {
    /// `backtrack` is meaningless without a thought and is normalized away.
    pub fn new(direction: Direction, verbosity: Verbosity, backtrack: bool) -> Self {
        Self {
            direction,
            verbosity,
            backtrack: backtrack && verbosity != Verbosity::None,
        }
    }

    /// The sixteen dataset configurations, forward first.
    pub fn all() -> Vec<CotVariant> {
        [Direction::Fwd, Direction::Bwd]
            .into_iter()
            .flat_map(|d| {
                PRESETS
                    .iter()
                    .map(move |&(_, v, bt)| CotVariant::new(d, v, bt))
            })
            .collect()
    }

    pub fn name(&self) -> String {
        let dir = match self.direction {
            Direction::Fwd => "fwd",
            Direction::Bwd => "bwd",
        };
        let body = PRESETS
            .iter()
            .find(|&&(_, v, bt)| v == self.verbosity && bt == self.backtrack)
            .map(|&(n, _, _)| n.to_string())
            .unwrap_or_else(|| "cot-wo-backtrack".to_string());
        format!("{dir}-{body}")
    }
}

impl fmt::Display for CotVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for CotVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (dir, body) = s
            .split_once('-')
            .ok_or_else(|| format!("unknown variant {s:?}"))?;
        let direction = match dir {
            "fwd" => Direction::Fwd,
            "bwd" => Direction::Bwd,
            _ => return Err(format!("unknown direction in variant {s:?}")),
        };
        if body == "cot-wo-backtrack" {
            return Ok(CotVariant::new(direction, Verbosity::EmptySteps, false));
        }
        PRESETS
            .iter()
            .find(|(n, _, _)| *n == body)
            .map(|&(_, v, bt)| CotVariant::new(direction, v, bt))
            .ok_or_else(|| format!("unknown variant {s:?}"))
    }
}

impl Serialize for CotVariant {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for CotVariant {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How the first backtrack entry of a forward trace is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fidelity {
    /// Every entry as `(pos)\naction`.
    #[default]
    Uniform,
    /// Reproduces the published forward strings, whose first entry is `(pos)action`.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CogmapError {
    #[error("variant direction {variant:?} does not match trace direction {trace:?}")]
    DirectionMismatch {
        variant: Direction,
        trace: Direction,
    },
}

fn backtrack_lines(trace: &SearchTrace, fidelity: Fidelity) -> Vec<String> {
    let path = &trace.path;
    let mut lines = Vec::with_capacity(2 * path.len() + 1);
    match trace.direction {
        Direction::Fwd => {
            // Goal back to start, each state with the action that reached it.
            for (i, (action, state)) in path.steps.iter().enumerate().rev() {
                if i + 1 == path.len() && fidelity == Fidelity::Strict {
                    lines.push(format!("{state}{action}"));
                } else {
                    lines.push(state.to_string());
                    lines.push(action.to_string());
                }
            }
            lines.push(path.origin.to_string());
        }
        Direction::Bwd => {
            // Start to goal, each state with the action to take next.
            let mut current = path.origin;
            for (action, state) in &path.steps {
                lines.push(current.to_string());
                lines.push(action.to_string());
                current = *state;
            }
            lines.push(current.to_string());
        }
    }
    lines
}

pub fn serialize_thought(
    trace: &SearchTrace,
    variant: CotVariant,
    fidelity: Fidelity,
) -> Result<String, CogmapError> {
    if variant.direction != trace.direction {
        return Err(CogmapError::DirectionMismatch {
            variant: variant.direction,
            trace: trace.direction,
        });
    }
    if variant.verbosity == Verbosity::None {
        return Ok(String::new());
    }
    let mut lines = vec!["Thought:".to_string()];
    for (k, layer) in trace.layers.iter().enumerate() {
        lines.push(format!("Step {}:", k + 1));
        for record in layer.iter().flat_map(|e| e.records.iter()) {
            let kept = record.verdict == Verdict::Kept;
            let word = match variant.verbosity {
                Verbosity::None | Verbosity::EmptySteps => continue,
                Verbosity::Survivors if !kept => continue,
                Verbosity::AllMarked if !kept => CUT,
                _ => record.label.word(),
            };
            lines.push(record.neighbor.to_string());
            lines.push(word.to_string());
        }
    }
    if variant.backtrack {
        lines.push("Backtrack:".to_string());
        lines.extend(backtrack_lines(trace, fidelity));
    }
    Ok(lines.join("\n"))
}

/// Newline-separated action words of the optimal path.
pub fn serialize_plan(spec: &GridSpec) -> String {
    optimal_path(spec)
        .actions()
        .iter()
        .map(|a| a.word())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Thought followed by the plan, separated by a newline; just the plan when
/// the variant carries no thought.
pub fn serialize_target(spec: &GridSpec, variant: CotVariant, fidelity: Fidelity) -> String {
    let plan = serialize_plan(spec);
    if variant.verbosity == Verbosity::None {
        return plan;
    }
    let trace = build_search_trace(spec, variant.direction);
    let thought =
        serialize_thought(&trace, variant, fidelity).expect("direction taken from variant");
    format!("{thought}\n{plan}")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("invalid plan at line {line}: {reason}")]
    Invalid { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPlan {
    pub thought: Option<String>,
    pub actions: Vec<Action>,
}

fn invalid(line: usize, reason: impl Into<String>) -> PlanError {
    PlanError::Invalid {
        line: line + 1,
        reason: reason.into(),
    }
}

/// A backtrack entry: `(x, y)` alone or fused with its action as `(x, y)word`.
fn split_fused(line: &str) -> Option<(Position, Option<Action>)> {
    if let Some(p) = parse_position(line) {
        return Some((p, None));
    }
    let close = line.find(')')?;
    let p = parse_position(&line[..=close])?;
    let a = Action::from_word(&line[close + 1..])?;
    Some((p, Some(a)))
}

/// Actions recovered from a backtrack chain, whichever way it runs.
fn backtrack_actions(states: &[Position], actions: &[Action]) -> Option<Vec<Action>> {
    let forward = actions
        .iter()
        .enumerate()
        .all(|(i, a)| states[i].step(*a) == states[i + 1]);
    if forward {
        return Some(actions.to_vec());
    }
    let reversed = actions
        .iter()
        .enumerate()
        .all(|(i, a)| states[i + 1].step(*a) == states[i]);
    reversed.then(|| actions.iter().rev().copied().collect())
}

/// Extracts the action sequence from a model response.
///
/// A response is either a bare list of action words or a `Thought:` block
/// (step headers with `(pos)\nlabel` bodies, optionally a `Backtrack:` chain)
/// followed by an optional action list. The trailing action list wins when
/// present; otherwise the actions are read off the backtrack chain.
pub fn parse_plan(text: &str) -> Result<ParsedPlan, PlanError> {
    let lines: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    if lines.is_empty() {
        return Err(invalid(0, "empty response"));
    }
    let bare = |from: usize| -> Result<Vec<Action>, PlanError> {
        lines[from..]
            .iter()
            .enumerate()
            .map(|(i, l)| {
                Action::from_word(l)
                    .ok_or_else(|| invalid(from + i, format!("expected an action, found {l:?}")))
            })
            .collect()
    };
    if lines[0] != "Thought:" {
        return Ok(ParsedPlan {
            thought: None,
            actions: bare(0)?,
        });
    }

    let mut i = 1;
    let mut step = 1;
    while lines.get(i) == Some(&format!("Step {step}:").as_str()) {
        i += 1;
        step += 1;
        while lines.get(i).and_then(|l| parse_position(l)).is_some() {
            let label = lines.get(i + 1).copied();
            if !matches!(label, Some(l) if l == CUT || Action::from_word(l).is_some()) {
                return Err(invalid(i + 1, "expected an action or cut label"));
            }
            i += 2;
        }
    }
    if step == 1 {
        return Err(invalid(i, "expected \"Step 1:\""));
    }

    let mut chain: Option<(Vec<Position>, Vec<Action>)> = None;
    if lines.get(i) == Some(&"Backtrack:") {
        i += 1;
        let (first, fused) = lines
            .get(i)
            .and_then(|l| split_fused(l))
            .ok_or_else(|| invalid(i, "expected a backtrack position"))?;
        i += 1;
        let mut states = vec![first];
        let mut actions = Vec::new();
        let mut pending = fused;
        loop {
            let action = match pending.take() {
                Some(a) => a,
                None => match lines.get(i).and_then(|l| Action::from_word(l)) {
                    Some(a) if lines.get(i + 1).and_then(|l| parse_position(l)).is_some() => {
                        i += 1;
                        a
                    }
                    _ => break,
                },
            };
            let next = lines
                .get(i)
                .and_then(|l| parse_position(l))
                .ok_or_else(|| invalid(i, "expected a backtrack position"))?;
            i += 1;
            actions.push(action);
            states.push(next);
        }
        chain = Some((states, actions));
    }

    let thought = Some(lines[..i].join("\n"));
    let suffix = bare(i)?;
    if !suffix.is_empty() {
        return Ok(ParsedPlan {
            thought,
            actions: suffix,
        });
    }
    match chain {
        Some((states, actions)) if !actions.is_empty() => {
            let actions = backtrack_actions(&states, &actions)
                .ok_or_else(|| invalid(i, "backtrack chain is not a connected path"))?;
            Ok(ParsedPlan { thought, actions })
        }
        _ => Err(invalid(i, "no actions after the thought")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::reference_env;
    use Action::*;

    fn p(x: i32, y: i32) -> Position {
        Position::new(x, y)
    }

    #[test]
    fn forward_first_layer() {
        let trace = build_search_trace(&reference_env(), Direction::Fwd);
        assert_eq!(trace.layers.len(), 5);
        let first = &trace.layers[0][0];
        assert_eq!(first.expanded, p(0, 0));
        assert_eq!(
            first.records,
            [
                NeighborRecord {
                    neighbor: p(0, 1),
                    label: Up,
                    verdict: Verdict::Kept
                },
                NeighborRecord {
                    neighbor: p(0, -1),
                    label: Down,
                    verdict: Verdict::Cut(CutReason::OutOfBounds)
                },
                NeighborRecord {
                    neighbor: p(-1, 0),
                    label: Left,
                    verdict: Verdict::Cut(CutReason::OutOfBounds)
                },
                NeighborRecord {
                    neighbor: p(1, 0),
                    label: Right,
                    verdict: Verdict::Kept
                },
            ]
        );
        // Second layer: (0,0) is cut as visited from both parents, (1,1) as a wall twice.
        let second: Vec<_> = trace.layers[1].iter().flat_map(|e| e.records).collect();
        assert_eq!(second[1].verdict, Verdict::Cut(CutReason::Visited));
        assert_eq!(second[3].verdict, Verdict::Cut(CutReason::Wall));
        assert_eq!(second[4].verdict, Verdict::Cut(CutReason::Wall));
        assert_eq!(second[6].verdict, Verdict::Cut(CutReason::Visited));
    }

    #[test]
    fn backward_first_layer() {
        let trace = build_search_trace(&reference_env(), Direction::Bwd);
        assert_eq!(trace.layers.len(), 5);
        let first = &trace.layers[0][0];
        assert_eq!(first.expanded, p(3, 2));
        assert_eq!(
            first.records,
            [
                NeighborRecord {
                    neighbor: p(3, 3),
                    label: Down,
                    verdict: Verdict::Cut(CutReason::OutOfBounds)
                },
                NeighborRecord {
                    neighbor: p(3, 1),
                    label: Up,
                    verdict: Verdict::Kept
                },
                NeighborRecord {
                    neighbor: p(2, 2),
                    label: Right,
                    verdict: Verdict::Cut(CutReason::Wall)
                },
                NeighborRecord {
                    neighbor: p(4, 2),
                    label: Left,
                    verdict: Verdict::Cut(CutReason::OutOfBounds)
                },
            ]
        );
        assert_eq!(
            trace.layers[1][0].records[1].verdict,
            Verdict::Cut(CutReason::Pit)
        );
    }

    #[test]
    fn corridor_has_one_expansion_per_layer() {
        let env =
            GridSpec::new(p(0, 0), 2, 5, p(0, 0), p(0, 4), (0..5).map(|y| p(1, y)), []).unwrap();
        for dir in [Direction::Fwd, Direction::Bwd] {
            let trace = build_search_trace(&env, dir);
            assert_eq!(trace.layers.len(), 4);
            for layer in &trace.layers {
                assert_eq!(layer.len(), 1);
                let kept = layer[0]
                    .records
                    .iter()
                    .filter(|r| r.verdict == Verdict::Kept)
                    .count();
                assert_eq!(kept, 1);
            }
        }
    }

    #[test]
    fn backward_cot_string() {
        let trace = build_search_trace(&reference_env(), Direction::Bwd);
        let v = CotVariant::new(Direction::Bwd, Verbosity::EmptySteps, true);
        assert_eq!(
            serialize_thought(&trace, v, Fidelity::Uniform).unwrap(),
            "Thought:\nStep 1:\nStep 2:\nStep 3:\nStep 4:\nStep 5:\nBacktrack:\n(0, 0)\nright\n(1, 0)\nright\n(2, 0)\nup\n(2, 1)\nright\n(3, 1)\nup\n(3, 2)"
        );
    }

    #[test]
    fn strict_fidelity_fuses_first_forward_entry() {
        let trace = build_search_trace(&reference_env(), Direction::Fwd);
        let v = CotVariant::new(Direction::Fwd, Verbosity::EmptySteps, true);
        let strict = serialize_thought(&trace, v, Fidelity::Strict).unwrap();
        let uniform = serialize_thought(&trace, v, Fidelity::Uniform).unwrap();
        assert!(strict.contains("Backtrack:\n(3, 2)up\n(3, 1)\nright"));
        assert_eq!(uniform.replace("(3, 2)\nup", "(3, 2)up"), strict);
    }

    #[test]
    fn none_and_mismatch() {
        let trace = build_search_trace(&reference_env(), Direction::Fwd);
        let none = CotVariant::new(Direction::Fwd, Verbosity::None, true);
        assert!(!none.backtrack);
        assert_eq!(
            serialize_thought(&trace, none, Fidelity::Uniform).unwrap(),
            ""
        );
        let bwd = CotVariant::new(Direction::Bwd, Verbosity::AllMarked, true);
        assert!(matches!(
            serialize_thought(&trace, bwd, Fidelity::Uniform),
            Err(CogmapError::DirectionMismatch { .. })
        ));
    }

    #[test]
    fn plan_serialization() {
        assert_eq!(
            serialize_plan(&reference_env()),
            "right\nright\nup\nright\nup"
        );
        let one = GridSpec::new(p(0, 0), 2, 2, p(0, 0), p(0, 1), [p(1, 0), p(1, 1)], []).unwrap();
        assert_eq!(serialize_plan(&one), "up");
        let parsed = parse_plan(&serialize_plan(&reference_env())).unwrap();
        assert_eq!(
            parsed,
            ParsedPlan {
                thought: None,
                actions: vec![Right, Right, Up, Right, Up]
            }
        );
    }

    #[test]
    fn parses_backtrack_chains_both_ways() {
        let env = reference_env();
        for dir in [Direction::Fwd, Direction::Bwd] {
            let trace = build_search_trace(&env, dir);
            for fidelity in [Fidelity::Uniform, Fidelity::Strict] {
                let v = CotVariant::new(dir, Verbosity::AllMarked, true);
                let thought = serialize_thought(&trace, v, fidelity).unwrap();
                let parsed = parse_plan(&thought).unwrap();
                assert_eq!(parsed.actions, vec![Right, Right, Up, Right, Up]);
                assert_eq!(parsed.thought.as_deref(), Some(thought.as_str()));
            }
        }
    }

    #[test]
    fn trailing_plan_wins() {
        let trace = build_search_trace(&reference_env(), Direction::Bwd);
        let v = CotVariant::new(Direction::Bwd, Verbosity::Survivors, true);
        let thought = serialize_thought(&trace, v, Fidelity::Uniform).unwrap();
        let parsed = parse_plan(&format!("{thought}\nup\nup")).unwrap();
        assert_eq!(parsed.actions, vec![Up, Up]);
        assert_eq!(parsed.thought.unwrap(), thought);
    }

    #[test]
    fn malformed_plans() {
        assert!(parse_plan("Thought:\ngarbage").is_err());
        assert!(parse_plan("").is_err());
        assert!(parse_plan("up\njump").is_err());
        assert!(parse_plan("Thought:\nStep 1:\n(0, 1)\nup").is_err());
        assert!(parse_plan("Thought:\nStep 1:\n(0, 1)\nhop\nup").is_err());
        assert!(parse_plan("Thought:\nStep 2:\nup").is_err());
        // Chain whose hops are not adjacent.
        assert!(parse_plan("Thought:\nStep 1:\nBacktrack:\n(0, 0)\nup\n(5, 5)").is_err());
    }

    #[test]
    fn variant_names_round_trip() {
        let all = CotVariant::all();
        assert_eq!(all.len(), 16);
        for v in &all {
            assert_eq!(&v.name().parse::<CotVariant>().unwrap(), v);
        }
        assert_eq!(all[7].name(), "fwd-mark");
        assert_eq!(all[13].name(), "bwd-unmark");
        let odd = CotVariant::new(Direction::Bwd, Verbosity::EmptySteps, false);
        assert_eq!(odd.name().parse::<CotVariant>().unwrap(), odd);
        assert!("sideways-mark".parse::<CotVariant>().is_err());
    }
}

//! Instruction prompts, observations and action parsing.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Action, GridSpec, Position};

pub const RULES: &str = "You are given a rectangular gridworld, where you can move up, down, left, or right as long as each of your x, y coordinates are within 0 to the x, y size of the grid. If you move up, your y coordinate increases by 1. If you move down, your y coordinate decreases by 1. If you move left, your x coordinate decreases by 1. If you move right, your x coordinate increases by 1.\n\nYou will interact with the gridworld environment to reach the goal state, while avoiding the pit and the wall. You cannot move through the wall or move outside the grid. If you fall into the pit, you lose. If you reach the goal, you win. For each of your turn, you will be given the possible moves.\n\nYou should respond your move with either one of 'up', 'down', 'left', or 'right'.";

pub const ACK: &str = "OK";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Human,
    Gpt,
}

/// One conversation turn.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptText {
    pub role: Role,
    pub text: String,
}

impl PromptText {
    pub fn human(text: impl Into<String>) -> Self {
        Self {
            role: Role::Human,
            text: text.into(),
        }
    }

    pub fn gpt(text: impl Into<String>) -> Self {
        Self {
            role: Role::Gpt,
            text: text.into(),
        }
    }
}

impl fmt::Display for PromptText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let role = match self.role {
            Role::Human => "human",
            Role::Gpt => "gpt",
        };
        write!(f, "{role}: {}", self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("invalid action {0:?}")]
    InvalidAction(String),
    #[error("malformed observation: {0}")]
    MalformedObservation(String),
    #[error("malformed environment description: {0}")]
    MalformedEnvironment(String),
}

/// "P1", "P1, and P2", "P1, P2, and P3": the serial comma appears even for two.
fn join_positions(cells: impl IntoIterator<Item = Position>) -> Option<String> {
    let items: Vec<String> = cells.into_iter().map(|p| p.to_string()).collect();
    match items.as_slice() {
        [] => None,
        [one] => Some(one.clone()),
        [init @ .., last] => Some(format!("{}, and {last}", init.join(", "))),
    }
}

/// Obstacle sentences; an empty category is omitted.
fn obstacle_line(spec: &GridSpec) -> Option<String> {
    let mut sentences = Vec::new();
    if let Some(pits) = join_positions(spec.pits.iter().copied()) {
        sentences.push(format!("The pit is at {pits}."));
    }
    if let Some(walls) = join_positions(spec.walls.iter().copied()) {
        sentences.push(format!("The wall is at {walls}."));
    }
    (!sentences.is_empty()).then(|| sentences.join(" "))
}

/// The environment description that opens the third turn.
pub fn render_environment(spec: &GridSpec) -> String {
    let mut out = format!(
        "Grid is from {} to {}. Goal: {}\nCurrent: {}",
        spec.min_corner,
        spec.max_corner(),
        spec.goal,
        spec.start
    );
    if let Some(line) = obstacle_line(spec) {
        out.push('\n');
        out.push_str(&line);
    }
    out
}

pub fn render_observation(spec: &GridSpec, pos: Position) -> String {
    let mut out = format!("Current:\n{pos}\nPossible:");
    for (action, dest) in spec.valid_actions(pos).expect("observed position is legal") {
        out.push_str(&format!("\n{dest}\n{action}"));
    }
    out
}

/// Rules, acknowledgement, then environment description with the first observation.
pub fn render_instruction(spec: &GridSpec) -> Vec<PromptText> {
    vec![
        PromptText::human(RULES),
        PromptText::gpt(ACK),
        PromptText::human(format!(
            "{}\n{}",
            render_environment(spec),
            render_observation(spec, spec.start)
        )),
    ]
}

/// Trims surrounding whitespace, then requires one of the four lowercase words.
pub fn parse_action(text: &str) -> Result<Action, ParseError> {
    let word = text.trim();
    Action::from_word(word).ok_or_else(|| ParseError::InvalidAction(word.to_string()))
}

pub fn parse_position(text: &str) -> Option<Position> {
    let inner = text.trim().strip_prefix('(')?.strip_suffix(')')?;
    let (x, y) = inner.split_once(", ")?;
    Some(Position::new(x.parse().ok()?, y.parse().ok()?))
}

fn positions_in(text: &str) -> Option<Vec<Position>> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('(') {
        let close = open + rest[open..].find(')')?;
        out.push(parse_position(&rest[open..=close])?);
        rest = &rest[close + 1..];
    }
    Some(out)
}

/// Rebuilds a spec from the text produced by [`render_environment`]; anything
/// after the environment lines (such as an observation) is ignored.
pub fn parse_environment(text: &str) -> Result<GridSpec, ParseError> {
    let bad = |m: &str| ParseError::MalformedEnvironment(m.to_string());
    let from = text
        .find("Grid is from ")
        .ok_or_else(|| bad("no grid line"))?;
    let mut lines = text[from..].lines();
    let head = lines.next().unwrap_or_default();
    let corners = positions_in(head)
        .filter(|v| v.len() == 3)
        .ok_or_else(|| bad("grid line"))?;
    let (min, max, goal) = (corners[0], corners[1], corners[2]);
    let start = lines
        .next()
        .and_then(|l| l.strip_prefix("Current: "))
        .and_then(parse_position)
        .ok_or_else(|| bad("current line"))?;
    let (mut pits, mut walls) = (Vec::new(), Vec::new());
    if let Some(line) = lines.next().filter(|l| l.starts_with("The ")) {
        for sentence in line.split_inclusive(". ") {
            let cells = positions_in(sentence).ok_or_else(|| bad("obstacle cells"))?;
            if sentence.starts_with("The pit is at ") {
                pits = cells;
            } else if sentence.starts_with("The wall is at ") {
                walls = cells;
            } else {
                return Err(bad("unknown obstacle sentence"));
            }
        }
    }
    GridSpec::new(
        min,
        max.x - min.x + 1,
        max.y - min.y + 1,
        start,
        goal,
        walls,
        pits,
    )
    .map_err(|e| bad(&e.to_string()))
}

/// A parsed `Current:/Possible:` block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub current: Position,
    pub possible: Vec<(Action, Position)>,
}

/// Parses the last observation block contained in `text`.
pub fn parse_observation(text: &str) -> Result<Observation, ParseError> {
    let bad = |m: &str| ParseError::MalformedObservation(m.to_string());
    let start = text
        .rfind("Current:\n")
        .ok_or_else(|| bad("no Current: block"))?;
    let mut lines = text[start..].lines();
    lines.next();
    let current = lines
        .next()
        .and_then(parse_position)
        .ok_or_else(|| bad("missing current position"))?;
    if lines.next() != Some("Possible:") {
        return Err(bad("missing Possible: header"));
    }
    let mut possible = Vec::new();
    while let Some(line) = lines.next() {
        let dest = parse_position(line).ok_or_else(|| bad("expected a position"))?;
        let action = lines
            .next()
            .and_then(Action::from_word)
            .ok_or_else(|| bad("expected an action word"))?;
        possible.push((action, dest));
    }
    Ok(Observation { current, possible })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::reference_env;

    fn p(x: i32, y: i32) -> Position {
        Position::new(x, y)
    }

    #[test]
    fn environment_round_trip() {
        let env = reference_env();
        let turns = render_instruction(&env);
        assert_eq!(parse_environment(&turns[2].text).unwrap(), env);
        let bare = GridSpec::new(p(2, 3), 2, 2, p(2, 3), p(3, 4), [], []).unwrap();
        assert_eq!(parse_environment(&render_environment(&bare)).unwrap(), bare);
        assert!(parse_environment("hello").is_err());
    }

    #[test]
    fn reference_environment_line() {
        assert_eq!(
            render_environment(&reference_env()),
            "Grid is from (0, 0) to (3, 2). Goal: (3, 2)\nCurrent: (0, 0)\nThe pit is at (3, 0). The wall is at (1, 1), and (2, 2)."
        );
    }

    #[test]
    fn zero_pits_omits_sentence() {
        let mut env = reference_env();
        env.pits.clear();
        assert!(render_environment(&env)
            .ends_with("Current: (0, 0)\nThe wall is at (1, 1), and (2, 2)."));
        env.walls.clear();
        assert_eq!(
            render_environment(&env),
            "Grid is from (0, 0) to (3, 2). Goal: (3, 2)\nCurrent: (0, 0)"
        );
    }

    #[test]
    fn three_walls_use_serial_comma() {
        let mut env = reference_env();
        env.walls.insert(p(0, 2));
        assert!(render_environment(&env).ends_with("The wall is at (0, 2), (1, 1), and (2, 2)."));
    }

    #[test]
    fn observations() {
        let env = reference_env();
        assert_eq!(
            render_observation(&env, p(0, 0)),
            "Current:\n(0, 0)\nPossible:\n(0, 1)\nup\n(1, 0)\nright"
        );
        let open = GridSpec::new(p(10, 3), 3, 3, p(11, 4), p(12, 5), [], []).unwrap();
        assert_eq!(
            render_observation(&open, p(11, 4)),
            "Current:\n(11, 4)\nPossible:\n(11, 5)\nup\n(11, 3)\ndown\n(10, 4)\nleft\n(12, 4)\nright"
        );
        let corridor =
            GridSpec::new(p(10, 3), 3, 3, p(11, 4), p(12, 4), [p(11, 5)], [p(11, 3)]).unwrap();
        assert_eq!(
            render_observation(&corridor, p(11, 4)),
            "Current:\n(11, 4)\nPossible:\n(10, 4)\nleft\n(12, 4)\nright"
        );
    }

    #[test]
    fn action_parsing() {
        assert_eq!(parse_action("up"), Ok(Action::Up));
        assert_eq!(parse_action("  right\n"), Ok(Action::Right));
        assert_eq!(
            parse_action("jump"),
            Err(ParseError::InvalidAction("jump".into()))
        );
        assert!(parse_action("Up").is_err());
        assert!(parse_action("").is_err());
    }

    #[test]
    fn observation_round_trip() {
        let env = reference_env();
        for pos in env.cells().filter(|c| env.is_open(*c)) {
            let obs = parse_observation(&render_observation(&env, pos)).unwrap();
            assert_eq!(obs.current, pos);
            assert_eq!(obs.possible, env.valid_actions(pos).unwrap());
        }
        let turns = render_instruction(&env);
        assert_eq!(parse_observation(&turns[2].text).unwrap().current, p(0, 0));
    }

    #[test]
    fn negative_coordinates_parse() {
        assert_eq!(parse_position("(0, -1)"), Some(p(0, -1)));
        assert_eq!(parse_position("(0,-1)"), None);
    }
}

//! Gridworld state space and transition semantics.
//!
//! Coordinates are absolute: a grid of `size_x × size_y` cells starts at its
//! `min_corner` offset. `Up` increases `y`, `Right` increases `x`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::paths;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("position {0} is not a legal agent position")]
    IllegalPosition(Position),
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
}

/// A grid coordinate. Out-of-bounds positions are representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Position {
    pub x: i32,
    pub y: i32,
}

impl Position {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn step(self, action: Action) -> Self {
        let (dx, dy) = action.delta();
        Self::new(self.x + dx, self.y + dy)
    }

    pub fn translate(self, dx: i32, dy: i32) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

impl From<[i32; 2]> for Position {
    fn from([x, y]: [i32; 2]) -> Self {
        Self::new(x, y)
    }
}

impl From<Position> for [i32; 2] {
    fn from(p: Position) -> Self {
        [p.x, p.y]
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    /// Canonical order used by every observation and search trace.
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub const fn delta(self) -> (i32, i32) {
        match self {
            Action::Up => (0, 1),
            Action::Down => (0, -1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
        }
    }

    pub const fn inverse(self) -> Action {
        match self {
            Action::Up => Action::Down,
            Action::Down => Action::Up,
            Action::Left => Action::Right,
            Action::Right => Action::Left,
        }
    }

    pub const fn word(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
        }
    }

    /// Exact, case-sensitive match against the four action words.
    pub fn from_word(word: &str) -> Option<Action> {
        match word {
            "up" => Some(Action::Up),
            "down" => Some(Action::Down),
            "left" => Some(Action::Left),
            "right" => Some(Action::Right),
            _ => None,
        }
    }

    /// The action that moves `from` onto the orthogonally adjacent `to`.
    pub fn between(from: Position, to: Position) -> Option<Action> {
        Action::ALL.into_iter().find(|a| from.step(*a) == to)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.word())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionResult {
    Moved(Position),
    BlockedWall,
    BlockedBounds,
    Pit,
    ReachedGoal(Position),
}

/// Ordered `(action, state)` pairs following `origin`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub origin: Position,
    pub steps: Vec<(Action, Position)>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn actions(&self) -> Vec<Action> {
        self.steps.iter().map(|(a, _)| *a).collect()
    }

    /// Every state, origin first.
    pub fn states(&self) -> Vec<Position> {
        std::iter::once(self.origin)
            .chain(self.steps.iter().map(|(_, s)| *s))
            .collect()
    }

    pub fn last_state(&self) -> Position {
        self.steps.last().map_or(self.origin, |(_, s)| *s)
    }
}

/// One environment instance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridSpec {
    pub min_corner: Position,
    pub size_x: i32,
    pub size_y: i32,
    pub start: Position,
    pub goal: Position,
    pub walls: BTreeSet<Position>,
    pub pits: BTreeSet<Position>,
    /// Environment seed when the spec was sampled; `None` for hand-built specs.
    pub seed: Option<u64>,
}

impl GridSpec {
    /// Builds a spec and checks its structural invariants (not path uniqueness).
    pub fn new(
        min_corner: Position,
        size_x: i32,
        size_y: i32,
        start: Position,
        goal: Position,
        walls: impl IntoIterator<Item = Position>,
        pits: impl IntoIterator<Item = Position>,
    ) -> Result<Self, GridError> {
        let spec = Self {
            min_corner,
            size_x,
            size_y,
            start,
            goal,
            walls: walls.into_iter().collect(),
            pits: pits.into_iter().collect(),
            seed: None,
        };
        spec.check_structure()?;
        Ok(spec)
    }

    pub fn max_corner(&self) -> Position {
        self.min_corner.translate(self.size_x - 1, self.size_y - 1)
    }

    pub fn in_bounds(&self, p: Position) -> bool {
        let max = self.max_corner();
        p.x >= self.min_corner.x && p.x <= max.x && p.y >= self.min_corner.y && p.y <= max.y
    }

    pub fn is_wall(&self, p: Position) -> bool {
        self.walls.contains(&p)
    }

    pub fn is_pit(&self, p: Position) -> bool {
        self.pits.contains(&p)
    }

    /// In bounds and neither wall nor pit.
    pub fn is_open(&self, p: Position) -> bool {
        self.in_bounds(p) && !self.is_wall(p) && !self.is_pit(p)
    }

    pub fn cells(&self) -> impl Iterator<Item = Position> + '_ {
        let min = self.min_corner;
        (0..self.size_y).flat_map(move |dy| (0..self.size_x).map(move |dx| min.translate(dx, dy)))
    }

    pub fn open_cells(&self) -> usize {
        self.cells().filter(|p| self.is_open(*p)).count()
    }

    fn check_legal(&self, pos: Position) -> Result<(), GridError> {
        if self.is_open(pos) {
            Ok(())
        } else {
            Err(GridError::IllegalPosition(pos))
        }
    }

    pub fn transition(&self, pos: Position, action: Action) -> Result<TransitionResult, GridError> {
        self.check_legal(pos)?;
        let dest = pos.step(action);
        Ok(if !self.in_bounds(dest) {
            TransitionResult::BlockedBounds
        } else if self.is_wall(dest) {
            TransitionResult::BlockedWall
        } else if self.is_pit(dest) {
            TransitionResult::Pit
        } else if dest == self.goal {
            TransitionResult::ReachedGoal(dest)
        } else {
            TransitionResult::Moved(dest)
        })
    }

    /// Non-deadend moves from `pos` in canonical order; the goal is always listed.
    pub fn valid_actions(&self, pos: Position) -> Result<Vec<(Action, Position)>, GridError> {
        self.check_legal(pos)?;
        Ok(Action::ALL
            .into_iter()
            .map(|a| (a, pos.step(a)))
            .filter(|(_, dest)| self.is_open(*dest))
            .collect())
    }

    /// Shifts the whole environment by `(dx, dy)`.
    pub fn translate(&self, dx: i32, dy: i32) -> Self {
        Self {
            min_corner: self.min_corner.translate(dx, dy),
            size_x: self.size_x,
            size_y: self.size_y,
            start: self.start.translate(dx, dy),
            goal: self.goal.translate(dx, dy),
            walls: self.walls.iter().map(|p| p.translate(dx, dy)).collect(),
            pits: self.pits.iter().map(|p| p.translate(dx, dy)).collect(),
            seed: self.seed,
        }
    }

    pub fn check_structure(&self) -> Result<(), GridError> {
        let bad = |msg: String| Err(GridError::InvalidSpec(msg));
        if self.size_x < 1 || self.size_y < 1 {
            return bad(format!(
                "grid size {}x{} is empty",
                self.size_x, self.size_y
            ));
        }
        if self.start == self.goal {
            return bad(format!("start and goal coincide at {}", self.start));
        }
        for (name, p) in [("start", self.start), ("goal", self.goal)] {
            if !self.in_bounds(p) {
                return bad(format!("{name} {p} is out of bounds"));
            }
            if self.is_wall(p) || self.is_pit(p) {
                return bad(format!("{name} {p} is an obstacle"));
            }
        }
        if let Some(p) = self.walls.intersection(&self.pits).next() {
            return bad(format!("{p} is both a wall and a pit"));
        }
        if let Some(p) = self
            .walls
            .iter()
            .chain(&self.pits)
            .find(|p| !self.in_bounds(**p))
        {
            return bad(format!("obstacle {p} is out of bounds"));
        }
        Ok(())
    }

    /// Full validation: structure plus exactly one simple start-goal path.
    pub fn validate(&self) -> Result<(), GridError> {
        self.check_structure()?;
        if !paths::has_unique_path(self) {
            return Err(GridError::InvalidSpec(
                "start and goal are not joined by exactly one simple path".into(),
            ));
        }
        Ok(())
    }

    /// Whether the whole grid lies in `[0, max_coord]²`.
    pub fn fits_within(&self, max_coord: i32) -> bool {
        let max = self.max_corner();
        self.min_corner.x >= 0 && self.min_corner.y >= 0 && max.x <= max_coord && max.y <= max_coord
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("grid spec serialization is infallible")
    }
}

#[derive(Serialize, Deserialize)]
struct GridSpecWire {
    min_x: i32,
    min_y: i32,
    size_x: i32,
    size_y: i32,
    start: Position,
    goal: Position,
    walls: Vec<Position>,
    pits: Vec<Position>,
    seed: Option<u64>,
}

impl Serialize for GridSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        GridSpecWire {
            min_x: self.min_corner.x,
            min_y: self.min_corner.y,
            size_x: self.size_x,
            size_y: self.size_y,
            start: self.start,
            goal: self.goal,
            walls: self.walls.iter().copied().collect(),
            pits: self.pits.iter().copied().collect(),
            seed: self.seed,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GridSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let w = GridSpecWire::deserialize(deserializer)?;
        Ok(GridSpec {
            min_corner: Position::new(w.min_x, w.min_y),
            size_x: w.size_x,
            size_y: w.size_y,
            start: w.start,
            goal: w.goal,
            walls: w.walls.into_iter().collect(),
            pits: w.pits.into_iter().collect(),
            seed: w.seed,
        })
    }
}

/// The 4×3 environment used throughout the reference prompts.
pub fn reference_env() -> GridSpec {
    GridSpec::new(
        Position::new(0, 0),
        4,
        3,
        Position::new(0, 0),
        Position::new(3, 2),
        [Position::new(1, 1), Position::new(2, 2)],
        [Position::new(3, 0)],
    )
    .expect("reference environment is well formed")
}

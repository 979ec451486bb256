//! Environment sampling with a unique start-goal path.
//!
//! Open cells are grown as an induced tree of the grid graph: a closed cell is
//! opened only while it touches exactly one open cell, so the open cells never
//! contain a cycle and any two of them are joined by exactly one simple path.
//! Every cell left closed is an obstacle; obstacles bordering the solution path
//! are turned into pits at `pit_density`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complexity::complexity;
use crate::grid::{Action, GridSpec, Position};
use crate::paths;
use crate::rng::{derive_seed, rng_from_seed, GridRng};

/// Attempts per environment before generation gives up.
pub const RETRY_BUDGET: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("no unique-path environment after {attempts} attempts (seed {seed})")]
    RetryExhausted { attempts: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    /// Disjoint stream ranges keep train and test environments apart.
    fn stream_base(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Test => 1 << 63,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split {s:?} (expected train or test)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub size_min: i32,
    pub size_max: i32,
    pub global_max_coord: i32,
    /// Probability that a cell eligible for opening is sealed as a wall instead.
    pub wall_density: f64,
    /// Probability that an obstacle bordering the solution path is a pit.
    pub pit_density: f64,
    pub seed: u64,
}

impl GenParams {
    pub const DEFAULT_WALL_DENSITY: f64 = 0.1;
    pub const DEFAULT_PIT_DENSITY: f64 = 0.3;

    pub fn train(seed: u64) -> Self {
        Self {
            size_min: 2,
            size_max: 10,
            global_max_coord: 19,
            wall_density: Self::DEFAULT_WALL_DENSITY,
            pit_density: Self::DEFAULT_PIT_DENSITY,
            seed,
        }
    }

    pub fn test(seed: u64) -> Self {
        Self {
            size_max: 20,
            ..Self::train(seed)
        }
    }

    pub fn for_split(split: Split, seed: u64) -> Self {
        match split {
            Split::Train => Self::train(seed),
            Split::Test => Self::test(seed),
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::InvalidParams(m));
        if self.size_min < 2 {
            return bad(format!("size_min {} < 2", self.size_min));
        }
        if self.size_max < self.size_min {
            return bad(format!(
                "size_max {} < size_min {}",
                self.size_max, self.size_min
            ));
        }
        if self.size_max > self.global_max_coord + 1 {
            return bad(format!(
                "size_max {} exceeds the coordinate range 0..={}",
                self.size_max, self.global_max_coord
            ));
        }
        for (name, d) in [
            ("wall_density", self.wall_density),
            ("pit_density", self.pit_density),
        ] {
            if !(0.0..=1.0).contains(&d) {
                return bad(format!("{name} {d} outside [0, 1]"));
            }
        }
        Ok(())
    }

    /// Seed of environment `index` within `split`.
    pub fn env_seed(&self, split: Split, index: u64) -> u64 {
        derive_seed(self.seed, split.stream_base() | index)
    }
}

/// Samples one environment from `rng`.
pub fn generate_environment(params: &GenParams, rng: &mut GridRng) -> Result<GridSpec, GenError> {
    params.validate()?;
    for _ in 0..RETRY_BUDGET {
        if let Some(spec) = attempt(params, rng) {
            return Ok(spec);
        }
    }
    Err(GenError::RetryExhausted {
        attempts: RETRY_BUDGET,
        seed: params.seed,
    })
}

/// Samples the environment identified by `env_seed`; the seed is recorded in the spec.
pub fn generate_seeded(params: &GenParams, env_seed: u64) -> Result<GridSpec, GenError> {
    let mut rng = rng_from_seed(env_seed);
    let mut spec = generate_environment(params, &mut rng).map_err(|e| match e {
        GenError::RetryExhausted { attempts, .. } => GenError::RetryExhausted {
            attempts,
            seed: env_seed,
        },
        other => other,
    })?;
    spec.seed = Some(env_seed);
    Ok(spec)
}

/// Environment `index` of `split`.
pub fn generate_indexed(
    params: &GenParams,
    split: Split,
    index: u64,
) -> Result<GridSpec, GenError> {
    generate_seeded(params, params.env_seed(split, index))
}

struct Cells {
    width: i32,
    height: i32,
    open: Vec<bool>,
    sealed: Vec<bool>,
}

impl Cells {
    fn idx(&self, x: i32, y: i32) -> usize {
        (y * self.width + x) as usize
    }

    fn neighbors(&self, x: i32, y: i32) -> impl Iterator<Item = (i32, i32)> + '_ {
        Action::ALL.into_iter().filter_map(move |a| {
            let (dx, dy) = a.delta();
            let (nx, ny) = (x + dx, y + dy);
            (nx >= 0 && ny >= 0 && nx < self.width && ny < self.height).then_some((nx, ny))
        })
    }

    fn open_degree(&self, x: i32, y: i32) -> usize {
        self.neighbors(x, y)
            .filter(|&(nx, ny)| self.open[self.idx(nx, ny)])
            .count()
    }

    /// Grows the open set from `root` until no closed cell touches exactly one open cell.
    fn grow(&mut self, root: (i32, i32), wall_density: f64, rng: &mut GridRng) {
        // Closed, unsealed cells next to the open set, in row-major order. A cell
        // touching two open cells can never become eligible again and is dropped.
        let mut frontier = BTreeSet::new();
        let open_cell =
            |cells: &mut Self, frontier: &mut BTreeSet<(i32, i32)>, (x, y): (i32, i32)| {
                let i = cells.idx(x, y);
                cells.open[i] = true;
                frontier.remove(&(y, x));
                for (nx, ny) in cells.neighbors(x, y).collect::<Vec<_>>() {
                    let n = cells.idx(nx, ny);
                    if !cells.open[n] && !cells.sealed[n] {
                        frontier.insert((ny, nx));
                    }
                }
            };
        open_cell(self, &mut frontier, root);
        loop {
            frontier.retain(|&(y, x)| self.open_degree(x, y) == 1);
            let eligible: Vec<(i32, i32)> = frontier.iter().map(|&(y, x)| (x, y)).collect();
            let Some(&(x, y)) = eligible.choose(rng) else {
                break;
            };
            if rng.random_bool(wall_density) {
                let i = self.idx(x, y);
                self.sealed[i] = true;
                frontier.remove(&(y, x));
            } else {
                open_cell(self, &mut frontier, (x, y));
            }
        }
    }
}

fn attempt(params: &GenParams, rng: &mut GridRng) -> Option<GridSpec> {
    let size_x = rng.random_range(params.size_min..=params.size_max);
    let size_y = rng.random_range(params.size_min..=params.size_max);
    let span = params.global_max_coord + 1;
    let min = Position::new(
        rng.random_range(0..=span - size_x),
        rng.random_range(0..=span - size_y),
    );

    let n = (size_x * size_y) as usize;
    let mut cells = Cells {
        width: size_x,
        height: size_y,
        open: vec![false; n],
        sealed: vec![false; n],
    };
    let root = (rng.random_range(0..size_x), rng.random_range(0..size_y));
    cells.grow(root, params.wall_density, rng);

    let open: Vec<Position> = (0..size_y)
        .flat_map(|y| (0..size_x).map(move |x| (x, y)))
        .filter(|&(x, y)| cells.open[cells.idx(x, y)])
        .map(|(x, y)| min.translate(x, y))
        .collect();
    if open.len() < 2 {
        return None;
    }
    let leaves: Vec<Position> = open
        .iter()
        .copied()
        .filter(|p| cells.open_degree(p.x - min.x, p.y - min.y) <= 1)
        .collect();
    let pool = if leaves.len() >= 2 { &leaves } else { &open };
    let picked: Vec<Position> = pool.choose_multiple(rng, 2).copied().collect();
    let (start, goal) = (picked[0], picked[1]);

    let obstacles: BTreeSet<Position> = (0..size_y)
        .flat_map(|y| (0..size_x).map(move |x| (x, y)))
        .filter(|&(x, y)| !cells.open[cells.idx(x, y)])
        .map(|(x, y)| min.translate(x, y))
        .collect();
    let mut spec = GridSpec {
        min_corner: min,
        size_x,
        size_y,
        start,
        goal,
        walls: obstacles,
        pits: BTreeSet::new(),
        seed: None,
    };

    let path = paths::shortest_path(&spec)?;
    let on_path: BTreeSet<Position> = path.states().into_iter().collect();
    let bordering: BTreeSet<Position> = on_path
        .iter()
        .flat_map(|p| Action::ALL.map(|a| p.step(a)))
        .filter(|q| spec.walls.contains(q))
        .collect();
    for cell in bordering {
        if rng.random_bool(params.pit_density) {
            spec.walls.remove(&cell);
            spec.pits.insert(cell);
        }
    }

    // A fully forced path (every decision has a single option) is degenerate.
    if complexity(&spec).value() == 0.0 {
        return None;
    }
    spec.validate().ok()?;
    Some(spec)
}

//! Shortest paths and path-uniqueness checks over the open cells of a grid.

use std::collections::{HashMap, VecDeque};

use crate::grid::{Action, GridSpec, Position, Trajectory};

fn open_neighbors(spec: &GridSpec, p: Position) -> impl Iterator<Item = (Action, Position)> + '_ {
    Action::ALL
        .into_iter()
        .map(move |a| (a, p.step(a)))
        .filter(|(_, q)| spec.is_open(*q))
}

/// Breadth-first parents from `start`, skipping the undirected edge `skip`.
fn bfs_parents(
    spec: &GridSpec,
    start: Position,
    skip: Option<(Position, Position)>,
) -> HashMap<Position, Option<(Action, Position)>> {
    let mut parents = HashMap::new();
    parents.insert(start, None);
    let mut queue = VecDeque::from([start]);
    while let Some(cur) = queue.pop_front() {
        for (a, next) in open_neighbors(spec, cur) {
            if let Some((u, v)) = skip {
                if (cur == u && next == v) || (cur == v && next == u) {
                    continue;
                }
            }
            if let std::collections::hash_map::Entry::Vacant(e) = parents.entry(next) {
                e.insert(Some((a, cur)));
                queue.push_back(next);
            }
        }
    }
    parents
}

/// Shortest start-to-goal trajectory, ties broken by canonical action order.
pub fn shortest_path(spec: &GridSpec) -> Option<Trajectory> {
    let parents = bfs_parents(spec, spec.start, None);
    let mut cur = spec.goal;
    let mut steps = Vec::new();
    loop {
        match parents.get(&cur)? {
            None => break,
            Some((a, prev)) => {
                steps.push((*a, cur));
                cur = *prev;
            }
        }
    }
    steps.reverse();
    Some(Trajectory {
        origin: spec.start,
        steps,
    })
}

/// The unique optimal trajectory k* of a valid spec.
///
/// Panics if start and goal are disconnected, which a validated spec rules out.
pub fn optimal_path(spec: &GridSpec) -> Trajectory {
    shortest_path(spec).expect("valid grid spec has a start-goal path")
}

/// Number of open cells reachable from the start (start included).
pub fn reachable_cells(spec: &GridSpec) -> usize {
    bfs_parents(spec, spec.start, None).len()
}

/// True iff exactly one simple path joins start and goal.
///
/// The path is unique exactly when every edge of a shortest path is a bridge of
/// the open-cell graph; each edge is tested by a BFS that avoids it.
pub fn has_unique_path(spec: &GridSpec) -> bool {
    if !spec.is_open(spec.start) || !spec.is_open(spec.goal) {
        return false;
    }
    let Some(path) = shortest_path(spec) else {
        return false;
    };
    let states = path.states();
    states.windows(2).all(|w| {
        let (u, v) = (w[0], w[1]);
        !bfs_parents(spec, u, Some((u, v))).contains_key(&v)
    })
}

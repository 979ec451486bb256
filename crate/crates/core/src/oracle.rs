//! Brute-force reference computations over raw spec fields. Slow by design;
//! for cross-checking the library in tests.

use crate::grid::GridSpec;

struct Board {
    w: usize,
    h: usize,
    open: Vec<bool>,
    start: usize,
    goal: usize,
}

impl Board {
    fn new(spec: &GridSpec) -> Self {
        let (w, h) = (spec.size_x as usize, spec.size_y as usize);
        let idx = |x: i32, y: i32| {
            ((y - spec.min_corner.y) as usize) * w + (x - spec.min_corner.x) as usize
        };
        let mut open = vec![true; w * h];
        for p in spec.walls.iter().chain(spec.pits.iter()) {
            open[idx(p.x, p.y)] = false;
        }
        Board {
            w,
            h,
            open,
            start: idx(spec.start.x, spec.start.y),
            goal: idx(spec.goal.x, spec.goal.y),
        }
    }

    fn neighbors(&self, c: usize) -> Vec<usize> {
        let (x, y) = (c % self.w, c / self.w);
        let mut out = Vec::with_capacity(4);
        if y + 1 < self.h {
            out.push(c + self.w);
        }
        if y > 0 {
            out.push(c - self.w);
        }
        if x > 0 {
            out.push(c - 1);
        }
        if x + 1 < self.w {
            out.push(c + 1);
        }
        out.retain(|&n| self.open[n]);
        out
    }
}

/// Counts simple start-to-goal paths, stopping once `cap` is reached.
pub fn count_simple_paths(spec: &GridSpec, cap: usize) -> usize {
    let b = Board::new(spec);
    let mut seen = vec![false; b.w * b.h];
    fn go(b: &Board, c: usize, seen: &mut [bool], count: &mut usize, cap: usize) {
        if *count >= cap {
            return;
        }
        if c == b.goal {
            *count += 1;
            return;
        }
        seen[c] = true;
        for n in b.neighbors(c) {
            if !seen[n] {
                go(b, n, seen, count, cap);
            }
        }
        seen[c] = false;
    }
    let mut count = 0;
    go(&b, b.start, &mut seen, &mut count, cap);
    count
}

/// Every simple start-to-goal path as a cell sequence (row-major indices).
pub fn simple_paths(spec: &GridSpec) -> Vec<Vec<usize>> {
    let b = Board::new(spec);
    let mut out = Vec::new();
    let mut stack = vec![b.start];
    fn go(b: &Board, stack: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let c = *stack.last().unwrap();
        if c == b.goal {
            out.push(stack.clone());
            return;
        }
        for n in b.neighbors(c) {
            if !stack.contains(&n) {
                stack.push(n);
                go(b, stack, out);
                stack.pop();
            }
        }
    }
    go(&b, &mut stack, &mut out);
    out
}

/// Shortest start-to-goal length in moves via Dijkstra with unit weights.
pub fn shortest_len(spec: &GridSpec) -> Option<usize> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let b = Board::new(spec);
    let mut dist = vec![usize::MAX; b.w * b.h];
    let mut heap = BinaryHeap::from([Reverse((0usize, b.start))]);
    dist[b.start] = 0;
    while let Some(Reverse((d, c))) = heap.pop() {
        if c == b.goal {
            return Some(d);
        }
        if d > dist[c] {
            continue;
        }
        for n in b.neighbors(c) {
            if d + 1 < dist[n] {
                dist[n] = d + 1;
                heap.push(Reverse((d + 1, n)));
            }
        }
    }
    None
}

/// Sum of ln(open-neighbor count) over the states of the unique path, goal excluded.
/// Panics unless exactly one simple path exists.
pub fn complexity(spec: &GridSpec) -> f64 {
    let paths = simple_paths(spec);
    assert_eq!(paths.len(), 1, "complexity oracle needs a unique path");
    let b = Board::new(spec);
    let path = &paths[0];
    path[..path.len() - 1]
        .iter()
        .map(|&c| (b.neighbors(c).len() as f64).ln())
        .sum()
}

//! Environment complexity: the negative log-probability that a policy choosing
//! uniformly among valid actions follows the optimal path.

use serde::{Deserialize, Serialize};

use crate::grid::GridSpec;
use crate::paths::optimal_path;

/// Complexity in nats.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComplexityValue(f64);

impl ComplexityValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `Σ ln A_s` over the on-path decision states (start through the state before
/// the goal), `A_s` being the number of valid actions at `s`.
pub fn complexity(spec: &GridSpec) -> ComplexityValue {
    let path = optimal_path(spec);
    let states = path.states();
    let c = states[..states.len() - 1]
        .iter()
        .map(|s| {
            let options = spec
                .valid_actions(*s)
                .expect("on-path states are legal")
                .len();
            (options as f64).ln()
        })
        .sum();
    ComplexityValue(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{reference_env, Position};

    fn p(x: i32, y: i32) -> Position {
        Position::new(x, y)
    }

    #[test]
    fn reference_is_five_ln_two() {
        let c = complexity(&reference_env()).value();
        assert!((c - 5.0 * 2f64.ln()).abs() < 1e-12, "{c}");
    }

    #[test]
    fn forced_single_step_is_zero() {
        let env = GridSpec::new(p(0, 0), 2, 2, p(0, 0), p(0, 1), [p(1, 0), p(1, 1)], []).unwrap();
        assert_eq!(complexity(&env).value(), 0.0);
    }

    #[test]
    fn translation_invariant() {
        let env = reference_env();
        let c = complexity(&env).value();
        for (dx, dy) in [(1, 0), (0, 7), (16, 17)] {
            assert_eq!(complexity(&env.translate(dx, dy)).value(), c);
        }
    }

    #[test]
    fn wall_on_a_branch_lowers_complexity() {
        let env = reference_env();
        let base = complexity(&env).value();
        // (0,1) is a non-path option at the start.
        let mut blocked = env.clone();
        blocked.walls.insert(p(0, 1));
        assert!(complexity(&blocked).value() < base);
        // (1,2) is off-path and not adjacent to any on-path state.
        let mut elsewhere = env.clone();
        elsewhere.walls.insert(p(1, 2));
        assert_eq!(complexity(&elsewhere).value(), base);
    }
}

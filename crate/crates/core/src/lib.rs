//! Textualized gridworld planning: environment generation, cognitive-map
//! chain-of-thought serialization, dataset statistics and agent evaluation.

pub mod cogmap;
pub mod complexity;
pub mod dataset;
pub mod exec;
pub mod generate;
pub mod grid;
pub mod harness;
pub mod paths;
pub mod rng;
pub mod stats;
pub mod text;

#[cfg(any(test, feature = "oracle"))]
pub mod oracle;

pub use grid::{Action, GridSpec, Position};

//! Landmark-driven indoor navigation: a deterministic building simulator,
//! an online mapping and landmark memory stack, behavior primitives, planners
//! and an evaluation harness.

pub mod frontier;
pub mod geom;
pub mod harness;
pub mod mapping;
pub mod memory;
pub mod nav;
pub mod policy;
pub mod primitives;
pub mod render;
pub mod world;

pub use geom::{Cardinal, CellIndex, Point2, Pose};
pub use world::{load_scenario, Scenario, ScenarioError};

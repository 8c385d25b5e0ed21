//! Multi-robot gas-source localization library: RBF gas fields with binary
//! sensing, collaborative particle fusion, budget-constrained coverage
//! planning, boids swarm control, divergence-driven active sensing, and a
//! deterministic simulator plus experiment harness.

pub mod coverage;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod field;
pub mod geom;
pub mod metrics;
pub mod mission;
pub mod presets;
pub mod runner;
pub mod scalar;
pub mod sensing;
pub mod swarm;
pub mod world;

pub use error::{Error, Result};
pub use scalar::Real;

/// Concrete scalar used by the simulator, runner, and CLI.
pub type Scalar = f64;
/// 2-D vector over the default scalar.
pub type Vec2f = geom::Vec2<Scalar>;
/// Axis-aligned rectangle over the default scalar.
pub type Rectf = geom::Rect<Scalar>;

//! Streaming analysis of joint-angle trajectories for exercise coaching.
//!
//! The library turns a per-frame stream of 46 joint angles (plus optional
//! body-shape coefficients) into repetition cycles, per-cycle quality scores,
//! form-constraint violations, and rendered text context for a downstream
//! language model. It also ships a small cross-attention fusion block and a
//! salience classifier that are trained from scratch in the test suite.
//!
//! Modules roughly follow the processing order:
//!
//! * [`skeleton`]: the 24-joint / 46-DoF kinematic layout, exercise
//!   configuration, and reference trajectories.
//! * [`preprocess`]: smoothing, window assembly, morphometrics.
//! * [`cycles`]: peak detection and repetition / phase / hold segmentation.
//! * [`alignment`]: cycle-to-reference resampling and quality scoring.
//! * [`constraints`]: static and dynamic form-constraint evaluation.
//! * [`context`]: deterministic text rendering of poses and violations.
//! * [`salience`]: per-joint relevance classifier.
//! * [`fusion`]: cross-attention fusion block and its training loop.
//! * [`engine`]: the streaming orchestrator emitting timestamped events.
//! * [`generate`]: synthetic session generator with ground truth.
//! * [`eval`]: temporal F-score for event alignment.

pub mod alignment;
pub mod constraints;
pub mod context;
pub mod cycles;
pub mod engine;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod generate;
pub mod mat;
pub mod preprocess;
pub mod salience;
pub mod skeleton;

pub use error::{Error, Result};

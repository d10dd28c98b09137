//! Gaze-driven head-movement controllers and the tooling to train and
//! evaluate them.
//!
//! - [`geometry`]: vectors, gaze rays, focal points, head orientation.
//! - [`dataset`]: trajectory files, splits, and the synthetic task generator.
//! - [`nn`]: dense and LSTM networks with exact gradients, and Adam.
//! - [`controllers`]: quadrant, vector-law, MLP and LSTM controllers behind
//!   one interface.
//! - [`training`]: teacher-forced fitting and scoring.
//! - [`rollout`]: closed-loop evaluation against recorded head motion.
//! - [`exosim`]: the filtered, rate-limited, clamped exoskeleton loop.
//! - [`checkpoint`], [`report`]: controller files and result summaries.
//!
//! Frame convention: right-handed, `x` right, `y` up, `z` forward.

pub mod checkpoint;
pub mod controllers;
pub mod dataset;
pub mod error;
pub mod exosim;
pub mod geometry;
pub mod nn;
pub mod report;
pub mod rollout;
pub mod seed;
pub mod training;

pub use controllers::{ControllerParams, ControllerSpec, ControllerState, Family, GazeInput, HeadDelta, HeadPolicy};
pub use dataset::{GazeSample, SplitSpec, Task, Trajectory};
pub use geometry::{FocalPoint, HeadOrientation, Ray, Vec3};
pub use rollout::{RolloutConfig, RolloutResult, SuiteReport};
pub use training::{ModelSpec, TrainConfig, TrainReport};

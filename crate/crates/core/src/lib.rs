//! Detail-fidelity tooling for subject-driven image generation.
//!
//! The crate measures how many geometrically verified keypoint matches a
//! generated image shares with its reference subject, drives crop-based
//! refinement through an external refiner with Poisson paste-back, and
//! synthesizes degraded/clean training pairs.

pub mod bench;
pub mod cropblend;
pub mod degrade;
pub mod imgcore;

pub use imgcore::{FloatMap, Image, ImageError};
pub mod keypoints;
pub mod matching;
pub mod metrics;
pub mod process;
pub mod synth;

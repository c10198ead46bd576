//! Online evaluation harness for pedestrian motion prediction.
//!
//! Scenes are replayed as a timed stream of noisy detections. A tracker turns
//! detections into smoothed histories, predictors are invoked once per tick
//! under a deadline, and every prediction is scored against ground truth once
//! its full horizon has elapsed. Scores are the dynamic displacement metrics
//! (min-over-candidates ADE/FDE computed at every prediction instant, averaged
//! per agent, per scene and per dataset).
//!
//! The main entry points:
//!
//! - [`scene_source`]: dataset ingestion, resampling, density filtering,
//!   synthetic scenes and the observation model.
//! - [`tracker`]: EMA tracker producing bounded history windows.
//! - [`predictors`]: the predictor contract and the CVM-family baselines.
//! - [`replay`]: the tick loop with deadline enforcement.
//! - [`metrics`]: ADE/FDE, Best-of-N minima and streaming accumulators.
//! - [`bridge`]: line-delimited JSON client for out-of-process predictors.
//! - [`harness`]: k-sweeps, history ablations, repeatability runs and reports.

pub mod bridge;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod predictors;
pub mod replay;
pub mod scene_source;
pub mod seed;
pub mod tracker;

pub use geometry::Vec2;
pub use scene_source::{AgentId, ObservationModel, ObservedFrame, Scene, Track, TrackPoint};

//! Eating-event detection from passive smartphone sensing.
//!
//! The crate turns raw sensor streams and retrospective food-intake
//! self-reports into labeled event windows, extracts a fixed 40-feature
//! vector per event, runs the eating vs non-eating statistical comparison,
//! and evaluates population, hybrid and personal models.
//!
//! Pipeline order:
//!
//! 1. [`ingest`] parses CSV streams into [`ingest::SensorBundle`]s and
//!    [`ingest::SelfReport`]s.
//! 2. [`anchor`] derives eating anchors and samples non-eating anchors.
//! 3. [`featurize`] builds the [`featurize::FeatureTable`].
//! 4. [`stats`] compares the two classes feature by feature.
//! 5. [`eval`] runs the BASE / PERS1 / PERS2 protocols on top of [`learn`].
//!
//! [`synth`] generates a seeded cohort that exercises the whole pipeline.
//!
//! Data-parallel loops go through [`exec`]; with the `parallel` feature
//! disabled every loop runs sequentially and results are unchanged.

pub mod anchor;
pub mod error;
pub mod eval;
pub mod exec;
pub mod features;
pub mod featurize;
pub mod ingest;
pub mod learn;
pub mod seed;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use exec::Execution;

/// Milliseconds since the Unix epoch, UTC.
pub type Timestamp = i64;

pub const MS_PER_MINUTE: i64 = 60_000;

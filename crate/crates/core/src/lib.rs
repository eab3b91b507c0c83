//! Black-box auditing toolkit for detecting unauthorized LLM training on
//! laundered (stylistically rewritten) proprietary text.
//!
//! The pipeline reverse-engineers the unknown rewrite transformation as a
//! goal+details prompt in two stages - register identification, then
//! iterative detail refinement - and re-runs standard membership detectors
//! on the reversed surrogates. Fully offline operation is supported through
//! deterministic simulators: an n-gram memorizer target and a scripted
//! auxiliary rewriter.

pub mod config;
pub mod corpus;
pub mod detectors;
pub mod error;
pub mod gateway;
pub mod metrics;
pub mod prompt;
pub mod registers;
pub mod report;
pub mod scenario;
pub mod search;
pub mod seeding;

pub use error::{Error, Result};

/// The concrete score scalar used throughout the pipeline. The metric
/// kernels in [`metrics`] stay generic over any float.
pub type Score = f64;

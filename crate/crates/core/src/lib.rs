//! Trace-driven toolkit for studying intra-session throughput stability,
//! predicting near-term throughput, and measuring what those predictions are
//! worth inside a chunked video player.
//!
//! The crate is organized around the lifecycle of a throughput trace:
//!
//! * [`trace`] - session traces, stability analytics, CSV I/O, and synthetic
//!   corpus generation.
//! * [`predictors`] - history-window predictors (last-sample, arithmetic and
//!   harmonic means) and fitted AR / ARMA models, plus the relative-error
//!   metric and its two-stage aggregation.
//! * [`hmm`] - Gaussian-emission hidden Markov models: Baum-Welch fitting,
//!   causal forward filtering, multi-step prediction, model-size sweeps, and
//!   the online evaluation protocol.
//! * [`sim`] - a chunk-based playback simulator with buffer-based, MPC, and
//!   offline-optimal bitrate policies scored by a linear QoE model.
//!
//! All randomized entry points take explicit seeds and produce identical
//! results for identical inputs.

pub mod error;
pub mod hmm;
pub mod persist;
pub mod predictors;
pub mod sim;
pub mod stats;
pub mod trace;

pub use error::{Error, Result};

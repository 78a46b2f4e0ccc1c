//! Throughput predictors over a session's observed history.
//!
//! Every predictor consumes a [`HistoryWindow`] (the samples seen so far plus
//! a forecast horizon) and emits one prediction per future slot. Simple
//! predictors repeat a summary of the recent past; [`ArModel`] / [`ArmaModel`]
//! run fitted linear recursions; the HMM predictor lives in [`crate::hmm`]
//! and plugs in through the same [`Predictor`] trait.
//!
//! All predictions are clamped below at [`MIN_PREDICTION_KBPS`] so downstream
//! consumers never divide by zero or schedule against a nonpositive rate.

mod ar;
mod metrics;

pub use ar::{fit_ar, fit_arma, ArModel, ArmaModel};
pub use metrics::{aggregate_errors, compute_error, records_to_csv, PredictionRecord};

use crate::{Error, Result};

/// Floor applied to every prediction, in kbps.
pub const MIN_PREDICTION_KBPS: f64 = 1.0;

/// Default lookback window for the mean predictors and default AR order.
pub const DEFAULT_WINDOW: usize = 5;

/// Observed history plus the number of future slots to predict.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryWindow {
    values: Vec<f64>,
    horizon: usize,
}

impl HistoryWindow {
    pub fn new(values: Vec<f64>, horizon: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument("history must be nonempty".into()));
        }
        if horizon == 0 {
            return Err(Error::Argument("horizon must be at least 1".into()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Argument(format!(
                    "history value {v} at index {i} must be positive and finite"
                )));
            }
        }
        Ok(Self { values, horizon })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    fn last(&self) -> f64 {
        *self.values.last().expect("validated nonempty")
    }

    /// The most recent `min(window, len)` values: predictors shrink their
    /// lookback early in a session instead of refusing to predict.
    fn tail(&self, window: usize) -> &[f64] {
        let k = window.min(self.values.len());
        &self.values[self.values.len() - k..]
    }
}

fn clamped(value: f64, horizon: usize) -> Vec<f64> {
    vec![value.max(MIN_PREDICTION_KBPS); horizon]
}

/// Repeats the most recent sample across the horizon.
pub fn predict_last_sample(window: &HistoryWindow) -> Vec<f64> {
    clamped(window.last(), window.horizon())
}

/// Repeats the arithmetic mean of the last `lookback` samples.
pub fn predict_arithmetic_mean(window: &HistoryWindow, lookback: usize) -> Result<Vec<f64>> {
    if lookback == 0 {
        return Err(Error::Argument("lookback must be at least 1".into()));
    }
    let tail = window.tail(lookback);
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    Ok(clamped(mean, window.horizon()))
}

/// Repeats the harmonic mean `k / sum(1/x)` of the last `lookback` samples,
/// which discounts short throughput spikes harder than the arithmetic mean.
pub fn predict_harmonic_mean(window: &HistoryWindow, lookback: usize) -> Result<Vec<f64>> {
    if lookback == 0 {
        return Err(Error::Argument("lookback must be at least 1".into()));
    }
    let tail = window.tail(lookback);
    let reciprocal_sum: f64 = tail.iter().map(|&x| 1.0 / x).sum();
    Ok(clamped(tail.len() as f64 / reciprocal_sum, window.horizon()))
}

/// A throughput predictor usable by the online evaluation protocol and by
/// the MPC simulator policy.
pub trait Predictor: Send + Sync {
    /// One prediction per slot of `window.horizon()`, all at least
    /// [`MIN_PREDICTION_KBPS`].
    fn forecast(&self, window: &HistoryWindow) -> Result<Vec<f64>>;
}

/// Last-sample predictor.
#[derive(Debug, Clone, Copy, Default)]
pub struct LastSample;

impl Predictor for LastSample {
    fn forecast(&self, window: &HistoryWindow) -> Result<Vec<f64>> {
        Ok(predict_last_sample(window))
    }
}

/// Arithmetic-mean predictor over a fixed lookback.
#[derive(Debug, Clone, Copy)]
pub struct ArithmeticMean {
    pub lookback: usize,
}

impl Default for ArithmeticMean {
    fn default() -> Self {
        Self { lookback: DEFAULT_WINDOW }
    }
}

impl Predictor for ArithmeticMean {
    fn forecast(&self, window: &HistoryWindow) -> Result<Vec<f64>> {
        predict_arithmetic_mean(window, self.lookback)
    }
}

/// Harmonic-mean predictor over a fixed lookback.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicMean {
    pub lookback: usize,
}

impl Default for HarmonicMean {
    fn default() -> Self {
        Self { lookback: DEFAULT_WINDOW }
    }
}

impl Predictor for HarmonicMean {
    fn forecast(&self, window: &HistoryWindow) -> Result<Vec<f64>> {
        predict_harmonic_mean(window, self.lookback)
    }
}

/// Reference predictor that replays a session's own future, keyed by how
/// much history the caller has seen; slots past the session's end hold its
/// last sample. Useful as an upper bound on what any forecaster can achieve.
#[derive(Debug, Clone)]
pub struct PerfectForesight {
    samples: Vec<f64>,
}

impl PerfectForesight {
    pub fn from_trace(trace: &crate::trace::SessionTrace) -> Self {
        Self { samples: trace.samples().to_vec() }
    }
}

impl Predictor for PerfectForesight {
    fn forecast(&self, window: &HistoryWindow) -> Result<Vec<f64>> {
        let seen = window.values().len();
        let last = *self.samples.last().expect("trace samples are nonempty");
        Ok((0..window.horizon())
            .map(|ahead| self.samples.get(seen + ahead).copied().unwrap_or(last))
            .collect())
    }
}

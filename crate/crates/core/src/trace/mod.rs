//! Session throughput traces and intra-session stability analytics.
//!
//! A [`SessionTrace`] is one client session's average throughput per
//! fixed-length epoch. Stability is summarized per session by
//! [`compute_stability`] (spread and lagged autocorrelation) and across
//! sessions by [`bin_normalized_stddev`], which buckets sessions by mean
//! throughput and averages the coefficient of variation inside each bucket.

mod csv;
mod synth;

pub use csv::{parse_traces_csv, read_traces_csv, serialize_traces_csv, write_traces_csv};
pub use synth::generate_synthetic;

use crate::{stats, Error, Result};

/// Epoch length assumed when none is given explicitly.
pub const DEFAULT_EPOCH_SECONDS: u32 = 60;

/// Per-epoch average throughput for one streaming session.
///
/// Samples are kbps, strictly positive and finite; the list is never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    session_id: String,
    epoch_seconds: u32,
    samples: Vec<f64>,
}

impl SessionTrace {
    /// Builds a trace, validating every documented invariant.
    pub fn new(session_id: impl Into<String>, epoch_seconds: u32, samples: Vec<f64>) -> Result<Self> {
        let session_id = session_id.into();
        if session_id.is_empty() {
            return Err(Error::Validation("session_id must be nonempty".into()));
        }
        if session_id.contains(',') || session_id.contains('\n') || session_id.contains('\r') {
            return Err(Error::Validation(format!(
                "session_id {session_id:?} contains a comma or line break"
            )));
        }
        if epoch_seconds == 0 {
            return Err(Error::Validation("epoch_seconds must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::Validation(format!(
                "session {session_id}: samples must be nonempty"
            )));
        }
        for (i, &s) in samples.iter().enumerate() {
            if !s.is_finite() || s <= 0.0 {
                return Err(Error::Validation(format!(
                    "session {session_id}, epoch {i}: throughput {s} is not a positive finite kbps value"
                )));
            }
        }
        Ok(Self { session_id, epoch_seconds, samples })
    }

    /// Builds a trace with the default 60-second epoch.
    pub fn with_default_epoch(session_id: impl Into<String>, samples: Vec<f64>) -> Result<Self> {
        Self::new(session_id, DEFAULT_EPOCH_SECONDS, samples)
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn epoch_seconds(&self) -> u32 {
        self.epoch_seconds
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // samples are validated nonempty
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 * self.epoch_seconds as f64
    }

    pub fn mean_kbps(&self) -> f64 {
        stats::mean(&self.samples)
    }
}

/// Per-session stability summary produced by [`compute_stability`].
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub session_id: String,
    pub mean_kbps: f64,
    /// Population standard deviation (divide by the sample count).
    pub stddev_kbps: f64,
    /// stddev / mean; 0 for constant sessions.
    pub coeff_variation: f64,
    /// 75th minus 25th percentile of the samples.
    pub iqr_spread_kbps: f64,
    /// Autocorrelation at lags `1..=max_lag`; all zeros when `degenerate`.
    pub autocorr: Vec<f64>,
    /// True when the session is constant (stddev is exactly zero), in which
    /// case autocorrelation is undefined and reported as zero.
    pub degenerate: bool,
}

/// Sessions bucketed by mean throughput, produced by [`bin_normalized_stddev`].
#[derive(Debug, Clone, PartialEq)]
pub struct BinSummary {
    pub bin_low_kbps: f64,
    pub bin_width_kbps: f64,
    /// Mean over the bin's sessions of stddev / mean.
    pub mean_coeff_variation: f64,
    pub session_count: usize,
}

/// Keeps sessions with strictly more than `min_epochs` samples, preserving
/// input order.
pub fn filter_by_duration(traces: Vec<SessionTrace>, min_epochs: usize) -> Vec<SessionTrace> {
    traces.into_iter().filter(|t| t.len() > min_epochs).collect()
}

/// Summarizes one session's throughput spread and short-range memory.
///
/// Autocorrelation at lag `tau` is the lagged self-covariance divided by the
/// sample count (not by `T - tau`) and normalized by the population variance:
/// `R(tau) = (1/T) * sum_{t} (x_t - m)(x_{t+tau} - m) / var`. The trace must
/// contain at least `max_lag + 1` samples.
pub fn compute_stability(trace: &SessionTrace, max_lag: usize) -> Result<StabilityReport> {
    let samples = trace.samples();
    let n = samples.len();
    if n < max_lag + 1 {
        return Err(Error::Argument(format!(
            "session {}: {} samples cannot support autocorrelation lag {}",
            trace.session_id(),
            n,
            max_lag
        )));
    }

    let mean = stats::mean(samples);
    let variance = stats::population_variance(samples);
    let stddev = variance.sqrt();

    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr_spread =
        stats::percentile_sorted(&sorted, 75.0)? - stats::percentile_sorted(&sorted, 25.0)?;

    let degenerate = stddev == 0.0;
    let autocorr = if degenerate {
        vec![0.0; max_lag]
    } else {
        (1..=max_lag)
            .map(|tau| {
                let lagged_cov = samples[..n - tau]
                    .iter()
                    .zip(&samples[tau..])
                    .map(|(&a, &b)| (a - mean) * (b - mean))
                    .sum::<f64>()
                    / n as f64;
                lagged_cov / variance
            })
            .collect()
    };

    Ok(StabilityReport {
        session_id: trace.session_id().to_string(),
        mean_kbps: mean,
        stddev_kbps: stddev,
        coeff_variation: if degenerate { 0.0 } else { stddev / mean },
        iqr_spread_kbps: iqr_spread,
        autocorr,
        degenerate,
    })
}

/// Buckets sessions by mean throughput and averages the coefficient of
/// variation inside each bucket.
///
/// A session with mean `m` lands in the bin starting at
/// `floor(m / bin_width) * bin_width`. Empty bins are omitted; bins are
/// returned in ascending order of `bin_low_kbps`.
pub fn bin_normalized_stddev(traces: &[SessionTrace], bin_width_kbps: f64) -> Result<Vec<BinSummary>> {
    if !bin_width_kbps.is_finite() || bin_width_kbps <= 0.0 {
        return Err(Error::Argument(format!(
            "bin width {bin_width_kbps} must be a positive finite kbps value"
        )));
    }

    use std::collections::BTreeMap;
    let mut bins: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for trace in traces {
        let mean = trace.mean_kbps();
        let stddev = stats::population_stddev(trace.samples());
        let cov = if stddev == 0.0 { 0.0 } else { stddev / mean };
        let index = (mean / bin_width_kbps).floor() as i64;
        let entry = bins.entry(index).or_insert((0.0, 0));
        entry.0 += cov;
        entry.1 += 1;
    }

    Ok(bins
        .into_iter()
        .map(|(index, (cov_sum, count))| BinSummary {
            bin_low_kbps: index as f64 * bin_width_kbps,
            bin_width_kbps,
            mean_coeff_variation: cov_sum / count as f64,
            session_count: count,
        })
        .collect())
}

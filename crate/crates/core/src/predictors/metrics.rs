//! Relative prediction error and its two-stage aggregation.

use std::collections::BTreeMap;

use crate::{stats, Error, Result};

/// One scored prediction: what was predicted for a slot, what actually
/// happened, and the relative error between them.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub session_id: String,
    /// 0-based epoch index the prediction targeted.
    pub slot: usize,
    pub predicted_kbps: f64,
    pub actual_kbps: f64,
    /// `|predicted - actual| / actual`.
    pub err: f64,
}

/// Relative prediction error `|predicted - actual| / actual`.
pub fn compute_error(predicted_kbps: f64, actual_kbps: f64) -> Result<f64> {
    if !actual_kbps.is_finite() || actual_kbps <= 0.0 {
        return Err(Error::Argument(format!(
            "actual throughput {actual_kbps} must be positive and finite"
        )));
    }
    if !predicted_kbps.is_finite() {
        return Err(Error::Argument(format!("prediction {predicted_kbps} must be finite")));
    }
    Ok((predicted_kbps - actual_kbps).abs() / actual_kbps)
}

/// Two-stage error aggregation: the `within_percentile` of each session's
/// errors first, then the `across_percentile` of those per-session values.
///
/// The headline convention is `(90, 50)`: the median across sessions of each
/// session's 90th-percentile (tail) error. Sessions aggregate independently
/// first so long sessions cannot drown out short ones.
pub fn aggregate_errors(
    records: &[PredictionRecord],
    within_percentile: f64,
    across_percentile: f64,
) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Argument("aggregate_errors requires at least one record".into()));
    }
    let mut by_session: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for record in records {
        by_session.entry(&record.session_id).or_default().push(record.err);
    }
    let per_session: Vec<f64> = by_session
        .values()
        .map(|errs| stats::percentile(errs, within_percentile))
        .collect::<Result<_>>()?;
    stats::percentile(&per_session, across_percentile)
}

/// Renders records as CSV in the documented column order.
pub fn records_to_csv(records: &[PredictionRecord]) -> String {
    let mut out = String::from("session_id,slot,predicted_kbps,actual_kbps,err\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.session_id, r.slot, r.predicted_kbps, r.actual_kbps, r.err
        ));
    }
    out
}

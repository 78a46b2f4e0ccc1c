//! Online evaluation protocol: walk each test session causally, predict every
//! slot from the history before it, and aggregate relative errors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_hmm, forward_filter, predict_hmm, HmmModel, TrainOptions};
use crate::predictors::{
    aggregate_errors, compute_error, HistoryWindow, PredictionRecord, Predictor,
    MIN_PREDICTION_KBPS,
};
use crate::trace::SessionTrace;
use crate::{Error, Result};

impl Predictor for HmmModel {
    /// Filters the history causally, then propagates the posterior through
    /// `P^(tau+1)` for each horizon slot and reports the MAP state's mean.
    fn forecast(&self, window: &HistoryWindow) -> Result<Vec<f64>> {
        let posterior = forward_filter(self, window.values())?;
        (0..window.horizon())
            .map(|tau| predict_hmm(self, &posterior, tau).map(|v| v.max(MIN_PREDICTION_KBPS)))
            .collect()
    }
}

/// Evaluation knobs shared by [`evaluate_online`] callers and
/// [`sweep_model_size`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalProtocol {
    /// Slots before this 0-based index are never scored (they seed the
    /// history). Must be at least 1 so every prediction has context.
    pub warmup: usize,
    /// Forecast horizon requested from the predictor; only the first element
    /// (the next slot) is scored.
    pub horizon: usize,
    /// Percentile taken within each session's errors.
    pub within_percentile: f64,
    /// Percentile taken across the per-session summaries.
    pub across_percentile: f64,
}

impl Default for EvalProtocol {
    /// The headline aggregation: median across sessions of each session's
    /// 90th-percentile error, with predictions starting at the second slot.
    fn default() -> Self {
        Self { warmup: 1, horizon: 5, within_percentile: 90.0, across_percentile: 50.0 }
    }
}

/// Scores `predictor` on one session, slot by slot.
///
/// For each slot `t` in `warmup..len`, the predictor sees exactly
/// `samples[..t]` and is scored on its next-slot prediction against
/// `samples[t]`.
pub fn evaluate_online(
    predictor: &dyn Predictor,
    session: &SessionTrace,
    warmup: usize,
    horizon: usize,
) -> Result<Vec<PredictionRecord>> {
    if warmup == 0 {
        return Err(Error::Argument("warmup must be at least 1".into()));
    }
    if horizon == 0 {
        return Err(Error::Argument("horizon must be at least 1".into()));
    }
    let samples = session.samples();
    if samples.len() <= warmup {
        return Err(Error::Argument(format!(
            "session {} has {} samples; online evaluation needs more than the {warmup}-slot warmup",
            session.session_id(),
            samples.len()
        )));
    }

    let mut records = Vec::with_capacity(samples.len() - warmup);
    for t in warmup..samples.len() {
        let window = HistoryWindow::new(samples[..t].to_vec(), horizon)?;
        let forecast = predictor.forecast(&window)?;
        let predicted = forecast[0];
        let actual = samples[t];
        records.push(PredictionRecord {
            session_id: session.session_id().to_string(),
            slot: t,
            predicted_kbps: predicted,
            actual_kbps: actual,
            err: compute_error(predicted, actual)?,
        });
    }
    Ok(records)
}

/// Scores a predictor across many sessions and pools the records.
pub fn evaluate_sessions(
    predictor: &dyn Predictor,
    sessions: &[SessionTrace],
    warmup: usize,
    horizon: usize,
) -> Result<Vec<PredictionRecord>> {
    let per_session: Vec<Vec<PredictionRecord>> = sessions
        .par_iter()
        .map(|s| evaluate_online(predictor, s, warmup, horizon))
        .collect::<Result<_>>()?;
    Ok(per_session.into_iter().flatten().collect())
}

/// Fits one HMM per candidate state count on `train`, scores each on `test`,
/// and returns `(num_states, aggregated error)` in candidate order.
pub fn sweep_model_size(
    train: &[SessionTrace],
    test: &[SessionTrace],
    candidates: &[usize],
    protocol: &EvalProtocol,
    options: &TrainOptions,
) -> Result<Vec<(usize, f64)>> {
    if candidates.is_empty() {
        return Err(Error::Argument("sweep needs at least one candidate state count".into()));
    }
    if test.is_empty() {
        return Err(Error::Argument("sweep needs at least one test session".into()));
    }
    let mut results = Vec::with_capacity(candidates.len());
    for &num_states in candidates {
        let (model, _) = fit_hmm(train, num_states, options)?;
        let records = evaluate_sessions(&model, test, protocol.warmup, protocol.horizon)?;
        let error =
            aggregate_errors(&records, protocol.within_percentile, protocol.across_percentile)?;
        results.push((num_states, error));
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictors::LastSample;
    use crate::trace::generate_synthetic;
    use approx::assert_abs_diff_eq;

    fn two_state() -> HmmModel {
        HmmModel::new(
            2,
            vec![0.5, 0.5],
            vec![0.9, 0.1, 0.1, 0.9],
            vec![1000.0, 3000.0],
            vec![10000.0, 10000.0],
        )
        .unwrap()
    }

    fn constant_session(value: f64, len: usize) -> SessionTrace {
        SessionTrace::with_default_epoch("const", vec![value; len]).unwrap()
    }

    #[test]
    fn validates_warmup_and_horizon() {
        let s = constant_session(1000.0, 5);
        assert!(evaluate_online(&LastSample, &s, 0, 1).is_err());
        assert!(evaluate_online(&LastSample, &s, 1, 0).is_err());
        assert!(evaluate_online(&LastSample, &s, 5, 1).is_err());
    }

    #[test]
    fn last_sample_is_exact_on_constant_sessions() {
        let s = constant_session(1234.5, 10);
        let records = evaluate_online(&LastSample, &s, 1, 5).unwrap();
        assert_eq!(records.len(), 9);
        for (i, r) in records.iter().enumerate() {
            assert_eq!(r.slot, i + 1);
            assert_eq!(r.err, 0.0);
            assert_eq!(r.predicted_kbps, 1234.5);
        }
    }

    #[test]
    fn hmm_prediction_error_on_constant_session_is_quantization_bias() {
        // A constant 1100 kbps session pins the posterior on the 1000 kbps
        // state, so every prediction errs by exactly |1000 - 1100| / 1100.
        let model = two_state();
        let s = constant_session(1100.0, 8);
        let records = evaluate_online(&model, &s, 1, 3).unwrap();
        for r in &records {
            assert_abs_diff_eq!(r.err, 100.0 / 1100.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn sweep_with_single_candidate_matches_direct_fit() {
        let corpus = generate_synthetic(&two_state(), 12, 40, 21).unwrap();
        let (train, test) = corpus.split_at(6);
        let protocol = EvalProtocol::default();
        let options = TrainOptions::default();

        let sweep = sweep_model_size(train, test, &[1], &protocol, &options).unwrap();
        assert_eq!(sweep.len(), 1);
        assert_eq!(sweep[0].0, 1);

        let (model, _) = fit_hmm(train, 1, &options).unwrap();
        let records =
            evaluate_sessions(&model, test, protocol.warmup, protocol.horizon).unwrap();
        let direct =
            aggregate_errors(&records, protocol.within_percentile, protocol.across_percentile)
                .unwrap();
        assert_eq!(sweep[0].1, direct);
    }

    #[test]
    fn sweep_is_deterministic() {
        let corpus = generate_synthetic(&two_state(), 10, 30, 33).unwrap();
        let (train, test) = corpus.split_at(5);
        let protocol = EvalProtocol::default();
        let options = TrainOptions::default();
        let a = sweep_model_size(train, test, &[1, 2], &protocol, &options).unwrap();
        let b = sweep_model_size(train, test, &[1, 2], &protocol, &options).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_validates_inputs() {
        let corpus = generate_synthetic(&two_state(), 4, 20, 1).unwrap();
        let (train, test) = corpus.split_at(2);
        let protocol = EvalProtocol::default();
        let options = TrainOptions::default();
        assert!(sweep_model_size(train, test, &[], &protocol, &options).is_err());
        assert!(sweep_model_size(train, &[], &[2], &protocol, &options).is_err());
    }
}

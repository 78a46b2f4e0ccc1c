//! Seeded synthetic corpus generation from a ground-truth HMM.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::SessionTrace;
use crate::hmm::HmmModel;
use crate::{Error, Result};

/// Samples thrown below this are clamped so traces stay strictly positive.
const MIN_SAMPLE_KBPS: f64 = 1.0;

/// Draws `num_sessions` independent sessions of `session_length` epochs from
/// `model`: a state path from the initial distribution and transition matrix,
/// then one Gaussian emission per step, clamped at 1 kbps.
///
/// A pure function of its arguments: the same `(model, num_sessions,
/// session_length, seed)` always produces the identical corpus. Session ids
/// are `syn-00000`, `syn-00001`, ...
pub fn generate_synthetic(
    model: &HmmModel,
    num_sessions: usize,
    session_length: usize,
    seed: u64,
) -> Result<Vec<SessionTrace>> {
    if num_sessions == 0 || session_length == 0 {
        return Err(Error::Argument(
            "num_sessions and session_length must be positive".into(),
        ));
    }

    let normals: Vec<Normal<f64>> = model
        .emission_means()
        .iter()
        .zip(model.emission_variances())
        .map(|(&mean, &var)| {
            Normal::new(mean, var.sqrt())
                .map_err(|e| Error::Argument(format!("invalid emission parameters: {e}")))
        })
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut traces = Vec::with_capacity(num_sessions);
    for session in 0..num_sessions {
        let mut samples = Vec::with_capacity(session_length);
        let mut state = sample_categorical(model.initial(), &mut rng);
        for step in 0..session_length {
            if step > 0 {
                let row_start = state * model.num_states();
                let row = &model.transition()[row_start..row_start + model.num_states()];
                state = sample_categorical(row, &mut rng);
            }
            let value = normals[state].sample(&mut rng);
            samples.push(value.max(MIN_SAMPLE_KBPS));
        }
        traces.push(SessionTrace::with_default_epoch(format!("syn-{session:05}"), samples)?);
    }
    Ok(traces)
}

fn sample_categorical(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let draw: f64 = rng.random();
    let mut cumulative = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cumulative += p;
        if draw < cumulative {
            return i;
        }
    }
    probs.len() - 1 // guard against rounding at the top of the range
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

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

    #[test]
    fn rejects_zero_counts() {
        let m = two_state();
        assert!(generate_synthetic(&m, 0, 10, 1).is_err());
        assert!(generate_synthetic(&m, 10, 0, 1).is_err());
    }

    #[test]
    fn same_seed_reproduces_the_corpus() {
        let m = two_state();
        let a = generate_synthetic(&m, 5, 20, 42).unwrap();
        let b = generate_synthetic(&m, 5, 20, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&m, 5, 20, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sessions_have_requested_shape_and_positive_samples() {
        let traces = generate_synthetic(&two_state(), 7, 13, 9).unwrap();
        assert_eq!(traces.len(), 7);
        for (i, t) in traces.iter().enumerate() {
            assert_eq!(t.session_id(), format!("syn-{i:05}"));
            assert_eq!(t.len(), 13);
            assert!(t.samples().iter().all(|&s| s >= 1.0));
        }
    }

    #[test]
    fn single_state_model_emits_near_constant_traces() {
        let m = HmmModel::new(1, vec![1.0], vec![1.0], vec![500.0], vec![1e-6]).unwrap();
        let traces = generate_synthetic(&m, 3, 50, 0).unwrap();
        for t in traces {
            for &s in t.samples() {
                assert!((s - 500.0).abs() < 1.0, "sample {s} strayed from the mean");
            }
        }
    }

    #[test]
    fn pooled_moments_approach_the_mixture() {
        // Symmetric two-state mixture: pooled mean near 2000 by the law of
        // large numbers.
        let traces = generate_synthetic(&two_state(), 200, 100, 17).unwrap();
        let pooled: Vec<f64> =
            traces.iter().flat_map(|t| t.samples().iter().copied()).collect();
        let mean = stats::mean(&pooled);
        assert!((mean - 2000.0).abs() / 2000.0 < 0.02, "pooled mean {mean}");
    }
}

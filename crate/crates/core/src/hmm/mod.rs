//! Gaussian-emission hidden Markov models over throughput sequences.
//!
//! States are discrete throughput regimes; each state emits a Gaussian
//! observation in kbps. The transition matrix is row-stochastic and
//! distributions are propagated as row vectors: `next = dist * P`, i.e.
//! `P[i][j]` is the probability of moving from state `i` to state `j`.
//!
//! Filtering is causal: [`forward_filter`] runs the scaled forward recursion
//! only, so the posterior for the final slot never looks at later data.
//! Prediction propagates that posterior through powers of `P` and reports the
//! emission mean of the most probable state.

mod eval;
mod fit;

pub use eval::{evaluate_online, evaluate_sessions, sweep_model_size, EvalProtocol};
pub use fit::{fit_hmm, TrainOptions};

use crate::{Error, Result};

/// Hard lower bound on emission variances, in kbps^2. The fitting floor is
/// relative to the pooled data variance but never below this, so a Gaussian
/// emission can always be evaluated.
pub const MIN_EMISSION_VARIANCE: f64 = 1e-6;

const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// A Gaussian-emission HMM with `num_states` throughput regimes.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    num_states: usize,
    initial: Vec<f64>,
    /// Row-major `num_states x num_states`, each row summing to 1.
    transition: Vec<f64>,
    emission_means: Vec<f64>,
    emission_variances: Vec<f64>,
}

impl HmmModel {
    /// Builds and validates a model. `transition` is row-major with
    /// `num_states^2` entries.
    pub fn new(
        num_states: usize,
        initial: Vec<f64>,
        transition: Vec<f64>,
        emission_means: Vec<f64>,
        emission_variances: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 {
            return Err(Error::Validation("num_states must be at least 1".into()));
        }
        if initial.len() != num_states {
            return Err(Error::Validation(format!(
                "initial distribution has {} entries, expected {num_states}",
                initial.len()
            )));
        }
        if transition.len() != num_states * num_states {
            return Err(Error::Validation(format!(
                "transition matrix has {} entries, expected {}",
                transition.len(),
                num_states * num_states
            )));
        }
        if emission_means.len() != num_states || emission_variances.len() != num_states {
            return Err(Error::Validation(
                "emission parameter lists must have one entry per state".into(),
            ));
        }
        check_simplex(&initial, "initial distribution")?;
        for (i, row) in transition.chunks(num_states).enumerate() {
            check_simplex(row, &format!("transition row {i}"))?;
        }
        for (i, (&m, &v)) in emission_means.iter().zip(&emission_variances).enumerate() {
            if !m.is_finite() || m <= 0.0 {
                return Err(Error::Validation(format!(
                    "state {i}: emission mean {m} must be positive and finite"
                )));
            }
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Validation(format!(
                    "state {i}: emission variance {v} must be positive and finite"
                )));
            }
        }
        Ok(Self { num_states, initial, transition, emission_means, emission_variances })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Row-major transition matrix.
    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    pub fn transition_prob(&self, from: usize, to: usize) -> f64 {
        self.transition[from * self.num_states + to]
    }

    pub fn emission_means(&self) -> &[f64] {
        &self.emission_means
    }

    pub fn emission_variances(&self) -> &[f64] {
        &self.emission_variances
    }

    /// Log-density of observing `x` in state `state`.
    pub(crate) fn emission_log_density(&self, state: usize, x: f64) -> f64 {
        let mean = self.emission_means[state];
        let var = self.emission_variances[state];
        let d = x - mean;
        -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + d * d / var)
    }

    /// One row-vector step: `out = dist * P`.
    fn propagate(&self, dist: &[f64]) -> Vec<f64> {
        let m = self.num_states;
        let mut out = vec![0.0; m];
        for (i, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let row = &self.transition[i * m..(i + 1) * m];
            for (o, &a) in out.iter_mut().zip(row) {
                *o += p * a;
            }
        }
        out
    }
}

fn check_simplex(probs: &[f64], what: &str) -> Result<()> {
    let mut sum = 0.0;
    for &p in probs {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::Validation(format!("{what}: entry {p} is not a probability")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::Validation(format!("{what}: entries sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Filtered state distribution after observing a prefix of a session.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePosterior {
    /// `P(X_t = i | observations so far)`, length `num_states`.
    pub probabilities: Vec<f64>,
    /// 0-based index of the last observed slot.
    pub as_of_slot: usize,
}

/// Result of one scaled forward pass. `alphas` holds the normalized filtered
/// distribution per step (row-major `T x M`); `weights` are the per-step
/// max-shifted emission densities and `norms` the per-step normalizers, which
/// the backward recursion of the EM fit reuses so both directions share one
/// scaling scheme.
pub(crate) struct ForwardPass {
    pub alphas: Vec<f64>,
    pub weights: Vec<f64>,
    pub norms: Vec<f64>,
    pub log_likelihood: f64,
}

/// Scaled forward recursion over `observations`, normalizing each step and
/// shifting emission log-densities by their per-step maximum so that
/// far-from-mean observations cannot underflow the whole step.
pub(crate) fn forward_pass(model: &HmmModel, observations: &[f64]) -> Result<ForwardPass> {
    let m = model.num_states();
    let t_len = observations.len();
    let mut alphas = vec![0.0; t_len * m];
    let mut weights = vec![0.0; t_len * m];
    let mut norms = vec![0.0; t_len];
    let mut log_likelihood = 0.0;

    for (t, &x) in observations.iter().enumerate() {
        if !x.is_finite() || x <= 0.0 {
            return Err(Error::Argument(format!(
                "observation {x} at slot {t} must be positive and finite"
            )));
        }
        let w_row = &mut weights[t * m..(t + 1) * m];
        let mut max_log = f64::NEG_INFINITY;
        for (i, w) in w_row.iter_mut().enumerate() {
            *w = model.emission_log_density(i, x);
            max_log = max_log.max(*w);
        }
        for w in w_row.iter_mut() {
            *w = (*w - max_log).exp();
        }

        let (prev, curr) = alphas.split_at_mut(t * m);
        let curr = &mut curr[..m];
        if t == 0 {
            for i in 0..m {
                curr[i] = model.initial()[i] * w_row[i];
            }
        } else {
            let prev = &prev[(t - 1) * m..];
            for j in 0..m {
                let mut pred = 0.0;
                for (i, &p) in prev.iter().take(m).enumerate() {
                    pred += p * model.transition_prob(i, j);
                }
                curr[j] = pred * w_row[j];
            }
        }

        let norm: f64 = curr.iter().sum();
        if !norm.is_finite() || norm <= 0.0 {
            return Err(Error::Numerical(format!(
                "forward recursion lost all probability mass at slot {t}"
            )));
        }
        for v in curr.iter_mut() {
            *v /= norm;
        }
        norms[t] = norm;
        log_likelihood += max_log + norm.ln();
    }

    Ok(ForwardPass { alphas, weights, norms, log_likelihood })
}

/// Causal filtered posterior for the last slot of `observations`.
///
/// Only the forward recursion runs; no future data is consulted, so this is
/// exactly the information available to an online predictor.
pub fn forward_filter(model: &HmmModel, observations: &[f64]) -> Result<StatePosterior> {
    if observations.is_empty() {
        return Err(Error::Argument("forward_filter requires at least one observation".into()));
    }
    let pass = forward_pass(model, observations)?;
    let m = model.num_states();
    let last = observations.len() - 1;
    Ok(StatePosterior {
        probabilities: pass.alphas[last * m..(last + 1) * m].to_vec(),
        as_of_slot: last,
    })
}

/// Log-likelihood of `observations` under `model`.
pub fn log_likelihood(model: &HmmModel, observations: &[f64]) -> Result<f64> {
    Ok(forward_pass(model, observations)?.log_likelihood)
}

/// Predicts throughput `tau` slots past the next one.
///
/// With a posterior for slot `t - 1`, the state distribution for slot
/// `t + tau` is `posterior * P^(tau+1)`. The prediction is the emission mean
/// of the most probable state; ties resolve to the lowest state index.
pub fn predict_hmm(model: &HmmModel, posterior: &StatePosterior, tau: usize) -> Result<f64> {
    if posterior.probabilities.len() != model.num_states() {
        return Err(Error::Argument(format!(
            "posterior has {} entries for a {}-state model",
            posterior.probabilities.len(),
            model.num_states()
        )));
    }
    check_simplex(&posterior.probabilities, "posterior").map_err(|_| {
        Error::Argument("posterior probabilities must form a distribution".into())
    })?;

    let mut dist = posterior.probabilities.clone();
    for _ in 0..=tau {
        dist = model.propagate(&dist);
    }

    let mut best = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p > dist[best] {
            best = i;
        }
    }
    Ok(model.emission_means()[best])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    pub(crate) fn two_state(self_p: f64) -> HmmModel {
        HmmModel::new(
            2,
            vec![0.5, 0.5],
            vec![self_p, 1.0 - self_p, 1.0 - self_p, self_p],
            vec![1000.0, 3000.0],
            vec![100.0 * 100.0, 100.0 * 100.0],
        )
        .unwrap()
    }

    /// Exact filtered posterior by brute force: sum the joint density of
    /// every state path, then condition on the path's final state.
    fn enumerated_posterior(model: &HmmModel, obs: &[f64]) -> Vec<f64> {
        fn density(model: &HmmModel, state: usize, x: f64) -> f64 {
            let mean = model.emission_means()[state];
            let var = model.emission_variances()[state];
            let d = x - mean;
            (-d * d / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
        }
        let m = model.num_states();
        let t = obs.len();
        let mut weights = vec![0.0; m];
        let paths = m.pow(t as u32);
        for code in 0..paths {
            let mut c = code;
            let mut path = Vec::with_capacity(t);
            for _ in 0..t {
                path.push(c % m);
                c /= m;
            }
            let mut w = model.initial()[path[0]] * density(model, path[0], obs[0]);
            for s in 1..t {
                w *= model.transition_prob(path[s - 1], path[s]) * density(model, path[s], obs[s]);
            }
            weights[path[t - 1]] += w;
        }
        let total: f64 = weights.iter().sum();
        weights.iter().map(|w| w / total).collect()
    }

    #[test]
    fn model_validation_rejects_bad_parameters() {
        assert!(HmmModel::new(0, vec![], vec![], vec![], vec![]).is_err());
        // Non-stochastic row.
        assert!(HmmModel::new(
            2,
            vec![0.5, 0.5],
            vec![0.9, 0.2, 0.1, 0.9],
            vec![1.0, 2.0],
            vec![1.0, 1.0]
        )
        .is_err());
        // Negative probability.
        assert!(HmmModel::new(
            2,
            vec![1.1, -0.1],
            vec![0.5, 0.5, 0.5, 0.5],
            vec![1.0, 2.0],
            vec![1.0, 1.0]
        )
        .is_err());
        // Non-positive mean / variance.
        assert!(HmmModel::new(1, vec![1.0], vec![1.0], vec![0.0], vec![1.0]).is_err());
        assert!(HmmModel::new(1, vec![1.0], vec![1.0], vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn single_state_posterior_is_trivial() {
        let model = HmmModel::new(1, vec![1.0], vec![1.0], vec![500.0], vec![100.0]).unwrap();
        let post = forward_filter(&model, &[450.0, 520.0, 480.0]).unwrap();
        assert_eq!(post.probabilities, vec![1.0]);
        assert_eq!(post.as_of_slot, 2);
    }

    #[test]
    fn forward_filter_matches_path_enumeration() {
        let model = two_state(0.8);
        let obs = [950.0, 1100.0, 2900.0, 3050.0];
        let post = forward_filter(&model, &obs).unwrap();
        let oracle = enumerated_posterior(&model, &obs);
        for (a, b) in post.probabilities.iter().zip(&oracle) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        assert_eq!(post.as_of_slot, 3);
    }

    #[test]
    fn identical_emissions_yield_symmetric_posterior() {
        let model = HmmModel::new(
            2,
            vec![0.5, 0.5],
            vec![0.7, 0.3, 0.3, 0.7],
            vec![2000.0, 2000.0],
            vec![500.0, 500.0],
        )
        .unwrap();
        let post = forward_filter(&model, &[1800.0, 2100.0, 2000.0]).unwrap();
        assert_abs_diff_eq!(post.probabilities[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(post.probabilities[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn forward_filter_survives_far_out_observations() {
        // With tiny variances a plain density product would underflow to zero.
        let model = HmmModel::new(
            2,
            vec![0.5, 0.5],
            vec![0.9, 0.1, 0.1, 0.9],
            vec![1000.0, 3000.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let post = forward_filter(&model, &[2000.0, 2000.0]).unwrap();
        let sum: f64 = post.probabilities.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn forward_filter_rejects_bad_observations() {
        let model = two_state(0.9);
        assert!(forward_filter(&model, &[]).is_err());
        assert!(forward_filter(&model, &[1000.0, -5.0]).is_err());
        assert!(forward_filter(&model, &[1000.0, f64::NAN]).is_err());
    }

    #[test]
    fn prediction_propagates_two_steps_for_tau_one() {
        // Self-transition 0.9 and a posterior pinned on state 0: two powers
        // of P give [0.82, 0.18], so the state-0 mean is predicted.
        let model = two_state(0.9);
        let posterior =
            StatePosterior { probabilities: vec![1.0, 0.0], as_of_slot: 0 };
        let predicted = predict_hmm(&model, &posterior, 1).unwrap();
        assert_eq!(predicted, 1000.0);

        let mut dist = posterior.probabilities.clone();
        for _ in 0..2 {
            dist = model.propagate(&dist);
        }
        assert_abs_diff_eq!(dist[0], 0.82, epsilon = 1e-12);
        assert_abs_diff_eq!(dist[1], 0.18, epsilon = 1e-12);
    }

    #[test]
    fn identity_transition_freezes_the_posterior() {
        let model = HmmModel::new(
            2,
            vec![0.5, 0.5],
            vec![1.0, 0.0, 0.0, 1.0],
            vec![1000.0, 3000.0],
            vec![1e4, 1e4],
        )
        .unwrap();
        let posterior = StatePosterior { probabilities: vec![0.3, 0.7], as_of_slot: 5 };
        for tau in 0..20 {
            assert_eq!(predict_hmm(&model, &posterior, tau).unwrap(), 3000.0);
        }
    }

    #[test]
    fn argmax_ties_resolve_to_lowest_state() {
        // A uniform transition matrix maps any posterior to [0.5, 0.5].
        let model = HmmModel::new(
            2,
            vec![0.5, 0.5],
            vec![0.5, 0.5, 0.5, 0.5],
            vec![1000.0, 3000.0],
            vec![1e4, 1e4],
        )
        .unwrap();
        let posterior = StatePosterior { probabilities: vec![0.1, 0.9], as_of_slot: 0 };
        assert_eq!(predict_hmm(&model, &posterior, 0).unwrap(), 1000.0);
    }

    #[test]
    fn propagated_distribution_stays_on_the_simplex() {
        let model = two_state(0.95);
        let mut dist = vec![1.0, 0.0];
        for _ in 0..=100 {
            dist = model.propagate(&dist);
            let sum: f64 = dist.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(dist.iter().all(|&p| (-1e-12..=1.0 + 1e-12).contains(&p)));
        }
    }

    #[test]
    fn predict_rejects_mismatched_posterior()
    {
        let model = two_state(0.9);
        let posterior = StatePosterior { probabilities: vec![1.0], as_of_slot: 0 };
        assert!(predict_hmm(&model, &posterior, 0).is_err());
        let bad = StatePosterior { probabilities: vec![0.7, 0.7], as_of_slot: 0 };
        assert!(predict_hmm(&model, &bad, 0).is_err());
    }
}

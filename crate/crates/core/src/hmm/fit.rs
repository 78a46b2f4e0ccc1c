//! Baum-Welch (EM) fitting over collections of independent sequences.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{forward_pass, HmmModel, MIN_EMISSION_VARIANCE};
use crate::trace::SessionTrace;
use crate::{stats, Error, Result};

/// Relative variance floor: after every M-step each emission variance is at
/// least this fraction of the pooled data variance (or
/// [`MIN_EMISSION_VARIANCE`], whichever is larger), so no state can collapse
/// onto a single observation.
const VARIANCE_FLOOR_SCALE: f64 = 1e-6;

/// Knobs for [`fit_hmm`]. Identical options and sequences give bit-identical
/// results.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    /// Maximum number of E-steps; the log-likelihood trace never exceeds
    /// this length.
    pub max_iters: usize,
    /// Stop once a full EM iteration improves log-likelihood by less than
    /// this.
    pub tol: f64,
    /// Seeds the jittered initialization.
    pub seed: u64,
    /// Number of independently seeded runs (`seed`, `seed + 1`, ...); the
    /// run with the best final log-likelihood wins.
    pub restarts: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { max_iters: 200, tol: 1e-6, seed: 0, restarts: 1 }
    }
}

/// Fits a `num_states`-state Gaussian-emission HMM to the pooled sequences.
///
/// Returns the fitted model and the per-iteration log-likelihood trace
/// (non-decreasing up to floating-point tolerance, by the EM guarantee). The
/// returned model is always the last one scored, so the final trace entry is
/// its log-likelihood.
///
/// Initialization places emission means at evenly spaced quantiles of the
/// pooled data with 1% seeded jitter, variances at the pooled variance, and
/// transitions at uniform-plus-diagonal-bias.
pub fn fit_hmm(
    sequences: &[SessionTrace],
    num_states: usize,
    options: &TrainOptions,
) -> Result<(HmmModel, Vec<f64>)> {
    if sequences.is_empty() {
        return Err(Error::Argument("fit_hmm requires at least one sequence".into()));
    }
    if num_states == 0 {
        return Err(Error::Argument("num_states must be at least 1".into()));
    }
    if options.max_iters == 0 || options.restarts == 0 {
        return Err(Error::Argument("max_iters and restarts must be at least 1".into()));
    }
    if !options.tol.is_finite() || options.tol < 0.0 {
        return Err(Error::Argument(format!("tolerance {} must be nonnegative", options.tol)));
    }

    let mut pooled: Vec<f64> = sequences.iter().flat_map(|s| s.samples().iter().copied()).collect();
    pooled.sort_by(f64::total_cmp);
    let distinct = count_distinct(&pooled);
    if num_states > distinct {
        return Err(Error::DegenerateFit(format!(
            "{num_states} states cannot be supported by {distinct} distinct observation values"
        )));
    }
    let pooled_variance = stats::population_variance(&pooled);
    let variance_floor = (VARIANCE_FLOOR_SCALE * pooled_variance).max(MIN_EMISSION_VARIANCE);

    let mut best: Option<(HmmModel, Vec<f64>)> = None;
    for restart in 0..options.restarts {
        let init = initial_model(
            &pooled,
            num_states,
            pooled_variance.max(MIN_EMISSION_VARIANCE),
            options.seed.wrapping_add(restart as u64),
        )?;
        let run = run_em(init, sequences, options, variance_floor)?;
        let better = match &best {
            None => true,
            Some((_, trace)) => run.1.last() > trace.last(),
        };
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn count_distinct(sorted: &[f64]) -> usize {
    let mut count = 0;
    let mut prev = f64::NAN;
    for &v in sorted {
        if v != prev {
            count += 1;
            prev = v;
        }
    }
    count
}

/// Quantile-seeded starting point. Means sit at the `(i + 0.5) / M` quantiles
/// of the pooled data with 1% multiplicative jitter so symmetric states break
/// apart; every state starts with the pooled variance.
fn initial_model(
    pooled_sorted: &[f64],
    num_states: usize,
    pooled_variance: f64,
    seed: u64,
) -> Result<HmmModel> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);

    let m = num_states;
    let mut means = Vec::with_capacity(m);
    for i in 0..m {
        let q = (i as f64 + 0.5) / m as f64 * 100.0;
        let base = stats::percentile_sorted(pooled_sorted, q)?;
        let jitter = 1.0 + 0.01 * (rng.random::<f64>() * 2.0 - 1.0);
        means.push(base * jitter);
    }

    let self_bias = 0.5;
    let mut transition = vec![(1.0 - self_bias) / m as f64; m * m];
    for i in 0..m {
        transition[i * m + i] += self_bias;
    }

    HmmModel::new(
        m,
        vec![1.0 / m as f64; m],
        transition,
        means,
        vec![pooled_variance; m],
    )
}

/// Expected sufficient statistics of one sequence under the current model.
struct SeqStats {
    log_likelihood: f64,
    gamma_first: Vec<f64>,
    gamma_sum: Vec<f64>,
    gamma_obs: Vec<f64>,
    gamma_obs_sq: Vec<f64>,
    trans_num: Vec<f64>,
    trans_den: Vec<f64>,
}

fn run_em(
    mut model: HmmModel,
    sequences: &[SessionTrace],
    options: &TrainOptions,
    variance_floor: f64,
) -> Result<(HmmModel, Vec<f64>)> {
    let mut trace = Vec::new();
    for iter in 0..options.max_iters {
        // E-steps are independent per sequence; the reduction below runs in
        // input order, so parallelism cannot change the result.
        let stats: Vec<SeqStats> = sequences
            .par_iter()
            .map(|seq| e_step(&model, seq.samples()))
            .collect::<Result<_>>()
            .map_err(|e| Error::Numerical(format!("EM iteration {iter}: {e}")))?;

        let log_likelihood: f64 = stats.iter().map(|s| s.log_likelihood).sum();
        if !log_likelihood.is_finite() {
            return Err(Error::Numerical(format!(
                "EM iteration {iter}: log-likelihood is not finite"
            )));
        }
        trace.push(log_likelihood);

        let converged = iter > 0 && log_likelihood - trace[iter - 1] < options.tol;
        if converged || iter + 1 == options.max_iters {
            break;
        }
        model = m_step(&model, &stats, variance_floor)
            .map_err(|e| Error::Numerical(format!("EM iteration {iter}: {e}")))?;
    }
    Ok((model, trace))
}

fn e_step(model: &HmmModel, observations: &[f64]) -> Result<SeqStats> {
    let m = model.num_states();
    let t_len = observations.len();
    let fwd = forward_pass(model, observations)?;

    // Backward recursion under the forward pass's scaling: beta of the last
    // slot is 1 and each earlier slot divides by the matching forward norm,
    // which keeps gamma = alpha * beta normalized per slot.
    let mut betas = vec![0.0; t_len * m];
    betas[(t_len - 1) * m..].fill(1.0);
    for t in (0..t_len - 1).rev() {
        for i in 0..m {
            let mut acc = 0.0;
            for j in 0..m {
                acc += model.transition_prob(i, j)
                    * fwd.weights[(t + 1) * m + j]
                    * betas[(t + 1) * m + j];
            }
            betas[t * m + i] = acc / fwd.norms[t + 1];
        }
    }

    let mut out = SeqStats {
        log_likelihood: fwd.log_likelihood,
        gamma_first: vec![0.0; m],
        gamma_sum: vec![0.0; m],
        gamma_obs: vec![0.0; m],
        gamma_obs_sq: vec![0.0; m],
        trans_num: vec![0.0; m * m],
        trans_den: vec![0.0; m],
    };

    let mut gamma = vec![0.0; m];
    for t in 0..t_len {
        let mut total = 0.0;
        for (i, g) in gamma.iter_mut().enumerate() {
            *g = fwd.alphas[t * m + i] * betas[t * m + i];
            total += *g;
        }
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::Numerical(format!("state posterior vanished at slot {t}")));
        }
        let x = observations[t];
        for (i, &raw) in gamma.iter().enumerate() {
            let g = raw / total;
            out.gamma_sum[i] += g;
            out.gamma_obs[i] += g * x;
            out.gamma_obs_sq[i] += g * x * x;
            if t == 0 {
                out.gamma_first[i] = g;
            }
            if t + 1 < t_len {
                out.trans_den[i] += g;
            }
        }

        if t + 1 < t_len {
            let mut xi_total = 0.0;
            let mut xi = vec![0.0; m * m];
            for i in 0..m {
                let a = fwd.alphas[t * m + i];
                if a == 0.0 {
                    continue;
                }
                for j in 0..m {
                    let v = a
                        * model.transition_prob(i, j)
                        * fwd.weights[(t + 1) * m + j]
                        * betas[(t + 1) * m + j]
                        / fwd.norms[t + 1];
                    xi[i * m + j] = v;
                    xi_total += v;
                }
            }
            if !xi_total.is_finite() || xi_total <= 0.0 {
                return Err(Error::Numerical(format!(
                    "transition posterior vanished at slot {t}"
                )));
            }
            for (acc, v) in out.trans_num.iter_mut().zip(&xi) {
                *acc += v / xi_total;
            }
        }
    }

    Ok(out)
}

/// Pools expected counts across sequences and re-estimates every parameter.
/// States with (numerically) zero occupancy keep their previous parameters;
/// variances are floored.
fn m_step(model: &HmmModel, stats: &[SeqStats], variance_floor: f64) -> Result<HmmModel> {
    let m = model.num_states();
    const OCCUPANCY_EPS: f64 = 1e-12;

    let mut initial = vec![0.0; m];
    let mut gamma_sum = vec![0.0; m];
    let mut gamma_obs = vec![0.0; m];
    let mut gamma_obs_sq = vec![0.0; m];
    let mut trans_num = vec![0.0; m * m];
    let mut trans_den = vec![0.0; m];
    for s in stats {
        for i in 0..m {
            initial[i] += s.gamma_first[i];
            gamma_sum[i] += s.gamma_sum[i];
            gamma_obs[i] += s.gamma_obs[i];
            gamma_obs_sq[i] += s.gamma_obs_sq[i];
            trans_den[i] += s.trans_den[i];
        }
        for (acc, v) in trans_num.iter_mut().zip(&s.trans_num) {
            *acc += v;
        }
    }

    let init_total: f64 = initial.iter().sum();
    for v in initial.iter_mut() {
        *v /= init_total;
    }

    let mut transition = vec![0.0; m * m];
    for i in 0..m {
        if trans_den[i] <= OCCUPANCY_EPS {
            for j in 0..m {
                transition[i * m + j] = model.transition_prob(i, j);
            }
            continue;
        }
        let row = &mut transition[i * m..(i + 1) * m];
        let mut row_sum = 0.0;
        for j in 0..m {
            row[j] = trans_num[i * m + j] / trans_den[i];
            row_sum += row[j];
        }
        for v in row.iter_mut() {
            *v /= row_sum;
        }
    }

    let mut means = Vec::with_capacity(m);
    let mut variances = Vec::with_capacity(m);
    for i in 0..m {
        if gamma_sum[i] <= OCCUPANCY_EPS {
            means.push(model.emission_means()[i]);
            variances.push(model.emission_variances()[i]);
            continue;
        }
        let mean = gamma_obs[i] / gamma_sum[i];
        let var = gamma_obs_sq[i] / gamma_sum[i] - mean * mean;
        means.push(mean);
        variances.push(var.max(variance_floor));
    }

    HmmModel::new(m, initial, transition, means, variances)
}

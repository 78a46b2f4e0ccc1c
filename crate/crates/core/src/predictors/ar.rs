//! Fitted linear models: AR via Yule-Walker, ARMA via Hannan-Rissanen.
//!
//! Both fits pool every training sequence into one global model. Data is
//! centered by the pooled mean; lagged products never cross sequence
//! boundaries. The intercept is reconstructed afterwards so the fitted
//! model's stationary mean equals the pooled sample mean.

use nalgebra::{DMatrix, DVector};

use super::{HistoryWindow, Predictor, MIN_PREDICTION_KBPS};
use crate::trace::SessionTrace;
use crate::{Error, Result};

/// Autoregressive model `W_t = a0 + sum_i a_i W_{t-i} + e_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArModel {
    intercept: f64,
    coeffs: Vec<f64>,
    noise_variance: f64,
}

impl ArModel {
    pub fn new(intercept: f64, coeffs: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Validation("AR order must be at least 1".into()));
        }
        if !intercept.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("AR parameters must be finite".into()));
        }
        if !noise_variance.is_finite() || noise_variance < 0.0 {
            return Err(Error::Validation(format!(
                "noise variance {noise_variance} must be nonnegative"
            )));
        }
        Ok(Self { intercept, coeffs, noise_variance })
    }

    pub fn order_p(&self) -> usize {
        self.coeffs.len()
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Multi-step forecast by recursive substitution: each step applies the
    /// recursion with the noise term at its mean (zero), then feeds the
    /// clamped prediction back as a pseudo-observation.
    pub fn forecast(&self, window: &HistoryWindow) -> Result<Vec<f64>> {
        let p = self.order_p();
        if window.values().len() < p {
            return Err(Error::Argument(format!(
                "AR({p}) forecast needs at least {p} history values, got {}",
                window.values().len()
            )));
        }
        let mut extended = window.values().to_vec();
        let mut out = Vec::with_capacity(window.horizon());
        for _ in 0..window.horizon() {
            let n = extended.len();
            let mut value = self.intercept;
            for (i, &a) in self.coeffs.iter().enumerate() {
                value += a * extended[n - 1 - i];
            }
            let value = value.max(MIN_PREDICTION_KBPS);
            extended.push(value);
            out.push(value);
        }
        Ok(out)
    }
}

impl Predictor for ArModel {
    /// Online-evaluation adapter: histories shorter than the model order
    /// cannot seed the recursion, so they fall back to repeating the last
    /// sample. The inherent [`ArModel::forecast`] keeps its strict length
    /// precondition.
    fn forecast(&self, window: &HistoryWindow) -> Result<Vec<f64>> {
        if window.values().len() < self.order_p() {
            return Ok(crate::predictors::predict_last_sample(window));
        }
        ArModel::forecast(self, window)
    }
}

/// ARMA model `W_t = a0 + sum_i a_i W_{t-i} + sum_j b_j e_{t-j} + e_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmaModel {
    intercept: f64,
    ar_coeffs: Vec<f64>,
    ma_coeffs: Vec<f64>,
    noise_variance: f64,
}

impl ArmaModel {
    pub fn new(
        intercept: f64,
        ar_coeffs: Vec<f64>,
        ma_coeffs: Vec<f64>,
        noise_variance: f64,
    ) -> Result<Self> {
        if ar_coeffs.is_empty() || ma_coeffs.is_empty() {
            return Err(Error::Validation("ARMA orders must both be at least 1".into()));
        }
        if !intercept.is_finite()
            || ar_coeffs.iter().chain(&ma_coeffs).any(|c| !c.is_finite())
        {
            return Err(Error::Validation("ARMA parameters must be finite".into()));
        }
        if !noise_variance.is_finite() || noise_variance < 0.0 {
            return Err(Error::Validation(format!(
                "noise variance {noise_variance} must be nonnegative"
            )));
        }
        Ok(Self { intercept, ar_coeffs, ma_coeffs, noise_variance })
    }

    pub fn order_p(&self) -> usize {
        self.ar_coeffs.len()
    }

    pub fn order_q(&self) -> usize {
        self.ma_coeffs.len()
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn ar_coeffs(&self) -> &[f64] {
        &self.ar_coeffs
    }

    pub fn ma_coeffs(&self) -> &[f64] {
        &self.ma_coeffs
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Innovation estimates over the history: zero while AR lags are missing,
    /// then the one-step-ahead residual of the recursion.
    fn filter_innovations(&self, values: &[f64]) -> Vec<f64> {
        let p = self.order_p();
        let mut innovations = vec![0.0; values.len()];
        for t in p..values.len() {
            let mut fitted = self.intercept;
            for (i, &a) in self.ar_coeffs.iter().enumerate() {
                fitted += a * values[t - 1 - i];
            }
            for (j, &b) in self.ma_coeffs.iter().enumerate() {
                if t > j {
                    fitted += b * innovations[t - 1 - j];
                }
            }
            innovations[t] = values[t] - fitted;
        }
        innovations
    }

    /// Multi-step forecast: innovations are estimated over the observed
    /// history and treated as zero beyond it; predictions feed back
    /// recursively as pseudo-observations.
    pub fn forecast(&self, window: &HistoryWindow) -> Result<Vec<f64>> {
        let need = self.order_p().max(self.order_q());
        if window.values().len() < need {
            return Err(Error::Argument(format!(
                "ARMA({},{}) forecast needs at least {need} history values, got {}",
                self.order_p(),
                self.order_q(),
                window.values().len()
            )));
        }
        let mut extended = window.values().to_vec();
        let mut innovations = self.filter_innovations(window.values());
        let mut out = Vec::with_capacity(window.horizon());
        for _ in 0..window.horizon() {
            let n = extended.len();
            let mut value = self.intercept;
            for (i, &a) in self.ar_coeffs.iter().enumerate() {
                value += a * extended[n - 1 - i];
            }
            for (j, &b) in self.ma_coeffs.iter().enumerate() {
                if n > j {
                    value += b * innovations[n - 1 - j];
                }
            }
            let value = value.max(MIN_PREDICTION_KBPS);
            extended.push(value);
            innovations.push(0.0);
            out.push(value);
        }
        Ok(out)
    }
}

impl Predictor for ArmaModel {
    /// Online-evaluation adapter: histories shorter than the model needs
    /// fall back to repeating the last sample, mirroring the
    /// [`ArModel`](struct.ArModel.html) adapter.
    fn forecast(&self, window: &HistoryWindow) -> Result<Vec<f64>> {
        if window.values().len() < self.order_p().max(self.order_q()) {
            return Ok(crate::predictors::predict_last_sample(window));
        }
        ArmaModel::forecast(self, window)
    }
}

/// Pooled autocovariances of the sequences after centering by the pooled
/// mean. `gamma[k]` sums lagged products within each sequence (never across
/// boundaries) and divides by the total observation count, so the implied
/// Toeplitz matrix stays positive semidefinite.
fn pooled_autocovariances(
    sequences: &[SessionTrace],
    max_lag: usize,
) -> Result<(Vec<f64>, f64)> {
    let total: usize = sequences.iter().map(|s| s.len()).sum();
    let pooled_mean =
        sequences.iter().map(|s| s.samples().iter().sum::<f64>()).sum::<f64>() / total as f64;

    let mut gamma = vec![0.0; max_lag + 1];
    for seq in sequences {
        let x = seq.samples();
        for (k, g) in gamma.iter_mut().enumerate() {
            if x.len() <= k {
                continue;
            }
            *g += x[..x.len() - k]
                .iter()
                .zip(&x[k..])
                .map(|(&a, &b)| (a - pooled_mean) * (b - pooled_mean))
                .sum::<f64>();
        }
    }
    for g in gamma.iter_mut() {
        *g /= total as f64;
    }

    if gamma[0] <= 1e-12 * pooled_mean * pooled_mean + f64::MIN_POSITIVE {
        return Err(Error::DegenerateFit(
            "training data has (numerically) zero variance".into(),
        ));
    }
    Ok((gamma, pooled_mean))
}

/// Solves the Yule-Walker system `T a = r` where `T[i][j] = gamma[|i-j|]`
/// and `r[i] = gamma[i+1]`.
fn solve_yule_walker(gamma: &[f64], order: usize) -> Result<Vec<f64>> {
    let t = DMatrix::from_fn(order, order, |i, j| gamma[i.abs_diff(j)]);
    let r = DVector::from_fn(order, |i, _| gamma[i + 1]);
    let solution = t
        .clone()
        .cholesky()
        .map(|c| c.solve(&r))
        .or_else(|| t.lu().solve(&r))
        .ok_or_else(|| {
            Error::DegenerateFit("Yule-Walker system is singular".into())
        })?;
    let coeffs: Vec<f64> = solution.iter().copied().collect();
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::DegenerateFit("Yule-Walker solution is not finite".into()));
    }
    Ok(coeffs)
}

fn validate_fit_inputs(sequences: &[SessionTrace], min_len: usize, points_needed: usize) -> Result<()> {
    if sequences.is_empty() {
        return Err(Error::Argument("fitting requires at least one sequence".into()));
    }
    for seq in sequences {
        if seq.len() <= min_len {
            return Err(Error::Argument(format!(
                "session {} has {} samples; fitting needs more than {min_len}",
                seq.session_id(),
                seq.len()
            )));
        }
    }
    let total: usize = sequences.iter().map(|s| s.len()).sum();
    if total < points_needed {
        return Err(Error::Argument(format!(
            "{total} pooled samples are too few; need at least {points_needed}"
        )));
    }
    Ok(())
}

/// Fits an AR(`order_p`) model by solving the Yule-Walker equations on the
/// pooled autocovariances.
///
/// The noise variance comes from the Yule-Walker residual identity
/// `sigma^2 = gamma_0 - sum_j a_j gamma_j`, and the intercept is
/// `mean * (1 - sum_j a_j)` so the stationary mean matches the data.
pub fn fit_ar(sequences: &[SessionTrace], order_p: usize) -> Result<ArModel> {
    if order_p == 0 {
        return Err(Error::Argument("AR order must be at least 1".into()));
    }
    validate_fit_inputs(sequences, order_p, 10 * order_p)?;

    let (gamma, pooled_mean) = pooled_autocovariances(sequences, order_p)?;
    let coeffs = solve_yule_walker(&gamma, order_p)?;

    let noise_variance =
        (gamma[0] - coeffs.iter().enumerate().map(|(j, &a)| a * gamma[j + 1]).sum::<f64>())
            .max(0.0);
    let coeff_sum: f64 = coeffs.iter().sum();
    ArModel::new(pooled_mean * (1.0 - coeff_sum), coeffs, noise_variance)
}

/// Fits an ARMA(`order_p`, `order_q`) model with the two-stage
/// Hannan-Rissanen procedure: a long AR fit estimates the innovation series,
/// then least squares regresses each value on its lagged values and lagged
/// innovation estimates.
pub fn fit_arma(sequences: &[SessionTrace], order_p: usize, order_q: usize) -> Result<ArmaModel> {
    if order_p == 0 {
        return Err(Error::Argument("ARMA AR order must be at least 1".into()));
    }
    if order_q == 0 {
        return Err(Error::Argument(
            "ARMA MA order must be at least 1; use fit_ar for pure AR models".into(),
        ));
    }
    validate_fit_inputs(sequences, order_p, 10 * (order_p + order_q))?;

    // Stage 1: long AR fit on centered data to estimate innovations. The
    // long order trades approximation quality against the regression rows
    // it consumes at the start of each (possibly short) sequence.
    let shortest = sequences.iter().map(|s| s.len()).min().expect("nonempty");
    let long_order = (2 * (order_p + order_q))
        .max(8)
        .min(shortest.saturating_sub(2));
    if long_order < order_p.max(order_q) {
        return Err(Error::DegenerateFit(format!(
            "sequences of length {shortest} are too short to estimate innovations for ARMA({order_p},{order_q})"
        )));
    }
    let (gamma, pooled_mean) = pooled_autocovariances(sequences, long_order)?;
    let long_ar = solve_yule_walker(&gamma, long_order)?;

    let innovations: Vec<Vec<f64>> = sequences
        .iter()
        .map(|seq| {
            let x = seq.samples();
            let mut inn = vec![0.0; x.len()];
            for t in long_order..x.len() {
                let mut fitted = 0.0;
                for (i, &a) in long_ar.iter().enumerate() {
                    fitted += a * (x[t - 1 - i] - pooled_mean);
                }
                inn[t] = (x[t] - pooled_mean) - fitted;
            }
            inn
        })
        .collect();

    // Stage 2: least squares of centered values on an intercept, lagged
    // centered values, and lagged innovation estimates. Rows start where
    // every regressor is defined.
    let k = 1 + order_p + order_q;
    let row_start = order_p.max(long_order + order_q);
    let mut xtx = DMatrix::<f64>::zeros(k, k);
    let mut xty = DVector::<f64>::zeros(k);
    let mut rows = 0usize;
    let mut row = vec![0.0; k];
    let fill_row = |row: &mut Vec<f64>, x: &[f64], inn: &[f64], t: usize| {
        row[0] = 1.0;
        for i in 0..order_p {
            row[1 + i] = x[t - 1 - i] - pooled_mean;
        }
        for j in 0..order_q {
            row[1 + order_p + j] = inn[t - 1 - j];
        }
    };
    for (seq, inn) in sequences.iter().zip(&innovations) {
        let x = seq.samples();
        for t in row_start..x.len() {
            fill_row(&mut row, x, inn, t);
            let y = x[t] - pooled_mean;
            for a in 0..k {
                for b in a..k {
                    xtx[(a, b)] += row[a] * row[b];
                }
                xty[a] += row[a] * y;
            }
            rows += 1;
        }
    }
    if rows < 2 * k {
        return Err(Error::DegenerateFit(format!(
            "{rows} usable regression rows are too few for {k} ARMA parameters"
        )));
    }
    for a in 0..k {
        for b in 0..a {
            xtx[(a, b)] = xtx[(b, a)];
        }
    }

    let beta = xtx
        .clone()
        .cholesky()
        .map(|c| c.solve(&xty))
        .or_else(|| xtx.lu().solve(&xty))
        .ok_or_else(|| Error::DegenerateFit("ARMA regression is singular".into()))?;
    if beta.iter().any(|c| !c.is_finite()) {
        return Err(Error::DegenerateFit("ARMA regression produced non-finite parameters".into()));
    }

    let centered_intercept = beta[0];
    let ar_coeffs: Vec<f64> = (0..order_p).map(|i| beta[1 + i]).collect();
    let ma_coeffs: Vec<f64> = (0..order_q).map(|j| beta[1 + order_p + j]).collect();

    // Residual variance of the stage-2 regression.
    let mut rss = 0.0;
    for (seq, inn) in sequences.iter().zip(&innovations) {
        let x = seq.samples();
        for t in row_start..x.len() {
            fill_row(&mut row, x, inn, t);
            let fitted: f64 = row.iter().zip(beta.iter()).map(|(r, b)| r * b).sum();
            let resid = (x[t] - pooled_mean) - fitted;
            rss += resid * resid;
        }
    }

    let ar_sum: f64 = ar_coeffs.iter().sum();
    let intercept = centered_intercept + pooled_mean * (1.0 - ar_sum);
    ArmaModel::new(intercept, ar_coeffs, ma_coeffs, rss / rows as f64)
}

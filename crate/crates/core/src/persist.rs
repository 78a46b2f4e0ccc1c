//! Fitted-model files: a tagged JSON representation that survives exact
//! round-trips and re-validates through the normal constructors on load.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::hmm::HmmModel;
use crate::predictors::{ArModel, ArmaModel, Predictor};
use crate::{Error, Result};

/// On-disk form of any fitted model, tagged by `model_type`.
///
/// Parameters are stored verbatim (JSON numbers preserve `f64` exactly), so
/// save followed by load reproduces the model bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_type", rename_all = "snake_case", deny_unknown_fields)]
pub enum StoredModel {
    Hmm {
        num_states: usize,
        /// Initial state distribution, length `num_states`.
        initial: Vec<f64>,
        /// Row-major transition matrix, length `num_states^2`; row `i` holds
        /// the probabilities of moving from state `i`.
        transition: Vec<f64>,
        emission_means: Vec<f64>,
        emission_variances: Vec<f64>,
    },
    Ar {
        order_p: usize,
        intercept: f64,
        /// Lag coefficients, most recent lag first, length `order_p`.
        coeffs: Vec<f64>,
        noise_variance: f64,
    },
    Arma {
        order_p: usize,
        order_q: usize,
        intercept: f64,
        coeffs: Vec<f64>,
        ma_coeffs: Vec<f64>,
        noise_variance: f64,
    },
}

impl From<&HmmModel> for StoredModel {
    fn from(model: &HmmModel) -> Self {
        StoredModel::Hmm {
            num_states: model.num_states(),
            initial: model.initial().to_vec(),
            transition: model.transition().to_vec(),
            emission_means: model.emission_means().to_vec(),
            emission_variances: model.emission_variances().to_vec(),
        }
    }
}

impl From<&ArModel> for StoredModel {
    fn from(model: &ArModel) -> Self {
        StoredModel::Ar {
            order_p: model.order_p(),
            intercept: model.intercept(),
            coeffs: model.coeffs().to_vec(),
            noise_variance: model.noise_variance(),
        }
    }
}

impl From<&ArmaModel> for StoredModel {
    fn from(model: &ArmaModel) -> Self {
        StoredModel::Arma {
            order_p: model.order_p(),
            order_q: model.order_q(),
            intercept: model.intercept(),
            coeffs: model.ar_coeffs().to_vec(),
            ma_coeffs: model.ma_coeffs().to_vec(),
            noise_variance: model.noise_variance(),
        }
    }
}

impl StoredModel {
    /// Short tag naming the model family, as written in `model_type`.
    pub fn kind(&self) -> &'static str {
        match self {
            StoredModel::Hmm { .. } => "hmm",
            StoredModel::Ar { .. } => "ar",
            StoredModel::Arma { .. } => "arma",
        }
    }

    /// Rebuilds the concrete model as a forecasting trait object,
    /// re-running full parameter validation.
    pub fn to_predictor(&self) -> Result<Box<dyn Predictor>> {
        match self {
            StoredModel::Hmm { .. } => Ok(Box::new(self.to_hmm()?)),
            StoredModel::Ar { .. } => Ok(Box::new(self.to_ar()?)),
            StoredModel::Arma { .. } => Ok(Box::new(self.to_arma()?)),
        }
    }

    pub fn to_hmm(&self) -> Result<HmmModel> {
        match self {
            StoredModel::Hmm {
                num_states,
                initial,
                transition,
                emission_means,
                emission_variances,
            } => HmmModel::new(
                *num_states,
                initial.clone(),
                transition.clone(),
                emission_means.clone(),
                emission_variances.clone(),
            ),
            other => Err(Error::Argument(format!(
                "expected a state-model file, found model_type \"{}\"",
                other.kind()
            ))),
        }
    }

    pub fn to_ar(&self) -> Result<ArModel> {
        match self {
            StoredModel::Ar { order_p, intercept, coeffs, noise_variance } => {
                if *order_p != coeffs.len() {
                    return Err(Error::Validation(format!(
                        "order_p is {order_p} but {} coefficients are stored",
                        coeffs.len()
                    )));
                }
                ArModel::new(*intercept, coeffs.clone(), *noise_variance)
            }
            other => Err(Error::Argument(format!(
                "expected an autoregressive model file, found model_type \"{}\"",
                other.kind()
            ))),
        }
    }

    pub fn to_arma(&self) -> Result<ArmaModel> {
        match self {
            StoredModel::Arma { order_p, order_q, intercept, coeffs, ma_coeffs, noise_variance } => {
                if *order_p != coeffs.len() || *order_q != ma_coeffs.len() {
                    return Err(Error::Validation(format!(
                        "orders ({order_p},{order_q}) disagree with stored coefficient counts ({},{})",
                        coeffs.len(),
                        ma_coeffs.len()
                    )));
                }
                ArmaModel::new(*intercept, coeffs.clone(), ma_coeffs.clone(), *noise_variance)
            }
            other => Err(Error::Argument(format!(
                "expected a moving-average model file, found model_type \"{}\"",
                other.kind()
            ))),
        }
    }
}

/// Writes a model as pretty-printed JSON, creating parent directories.
pub fn save_model(model: &StoredModel, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut text = serde_json::to_string_pretty(model)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Reads a model file written by [`save_model`].
pub fn load_model(path: &Path) -> Result<StoredModel> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

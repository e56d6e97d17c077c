//! Gradient-based counterfactual search.
//!
//! A copy of the input window is moved by Adam steps on the masked band loss
//! `Σ v_i [(f_i - α_i)² + (f_i - β_i)²]` until every forecast step lies in
//! `[α_i, β_i]` or the iteration budget runs out. The mask `v` is recomputed
//! after each step, so steps that leave the band re-enter the loss.

use serde::{Deserialize, Serialize};

use crate::bounds::TrajectoryBounds;
use crate::error::{check_len, Error, Result};
use crate::forecaster::ForecastModel;
use crate::optim::{AdamConfig, AdamState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub learning_rate: f64,
    pub max_iter: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            max_iter: 100,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.max_iter >= 1
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.epsilon > 0.0;
        if !ok {
            return Err(Error::InvalidConfig(format!("invalid search config {self:?}")));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualResult {
    pub original: Vec<f64>,
    pub counterfactual: Vec<f64>,
    pub forecast: Vec<f64>,
    pub iterations_used: usize,
    pub fully_valid: bool,
    /// 1 where the forecast step is still outside the band.
    pub final_mask: Vec<u8>,
}

/// `v_i = 0` when `α_i <= f_i <= β_i`, else 1.
pub fn mask(forecast: &[f64], bounds: &TrajectoryBounds) -> Result<Vec<u8>> {
    check_len("mask forecast", bounds.len(), forecast.len())?;
    Ok(forecast
        .iter()
        .enumerate()
        .map(|(i, &f)| u8::from(!bounds.contains(i, f)))
        .collect())
}

pub fn band_loss(forecast: &[f64], bounds: &TrajectoryBounds, v: &[u8]) -> Result<f64> {
    check_len("band loss forecast", bounds.len(), forecast.len())?;
    check_len("band loss mask", bounds.len(), v.len())?;
    Ok(forecast
        .iter()
        .zip(bounds.alpha.iter().zip(&bounds.beta))
        .zip(v)
        .filter(|(_, &vi)| vi != 0)
        .map(|((f, (a, b)), _)| (f - a).powi(2) + (f - b).powi(2))
        .sum())
}

/// `∂L/∂f_i = v_i (2(f_i - α_i) + 2(f_i - β_i))`.
fn loss_forecast_gradient(forecast: &[f64], bounds: &TrajectoryBounds, v: &[u8]) -> Vec<f64> {
    forecast
        .iter()
        .zip(bounds.alpha.iter().zip(&bounds.beta))
        .zip(v)
        .map(
            |((f, (a, b)), &vi)| {
                if vi == 0 {
                    0.0
                } else {
                    2.0 * (f - a) + 2.0 * (f - b)
                }
            },
        )
        .collect()
}

/// Gradient of `band_loss(predict(x), bounds, v)` with respect to `x`, the
/// mask held fixed.
pub fn loss_input_gradient(
    model: &dyn ForecastModel,
    x: &[f64],
    bounds: &TrajectoryBounds,
    v: &[u8],
) -> Result<Vec<f64>> {
    check_len("mask", bounds.len(), v.len())?;
    let forecast = model.predict(x)?;
    check_len("model horizon", bounds.len(), forecast.len())?;
    let upstream = loss_forecast_gradient(&forecast, bounds, v);
    model.input_gradient(x, &upstream)
}

/// One bias-corrected Adam update. `state.t` counts updates already applied.
pub fn adam_step(x: &[f64], g: &[f64], state: &AdamState, config: &SearchConfig) -> Result<(Vec<f64>, AdamState)> {
    let mut x = x.to_vec();
    let mut state = state.clone();
    if state.m.is_empty() && state.s.is_empty() {
        state = AdamState::zeros(x.len());
    }
    state.step(&mut x, g, &config.adam())?;
    Ok((x, state))
}

/// Runs the search from `x` toward `bounds`. Returns the last iterate even
/// when it is not fully valid.
pub fn generate(
    model: &dyn ForecastModel,
    x: &[f64],
    bounds: &TrajectoryBounds,
    config: &SearchConfig,
) -> Result<CounterfactualResult> {
    config.validate()?;
    check_len("counterfactual input", model.back_horizon(), x.len())?;
    check_len("bounds horizon", model.horizon(), bounds.len())?;

    let adam = config.adam();
    let mut current = x.to_vec();
    let mut state = AdamState::zeros(x.len());
    let mut forecast = model.predict(&current)?;
    let mut v = mask(&forecast, bounds)?;
    let mut iterations = 0;

    while v.iter().any(|&vi| vi != 0) && iterations < config.max_iter {
        let upstream = loss_forecast_gradient(&forecast, bounds, &v);
        let grad = model.input_gradient(&current, &upstream)?;
        state.step(&mut current, &grad, &adam)?;
        if current.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("counterfactual search"));
        }
        forecast = model.predict(&current)?;
        if forecast.iter().any(|f| !f.is_finite()) {
            return Err(Error::NonFinite("counterfactual forecast"));
        }
        v = mask(&forecast, bounds)?;
        iterations += 1;
    }

    let fully_valid = v.iter().all(|&vi| vi == 0);
    Ok(CounterfactualResult {
        original: x.to_vec(),
        counterfactual: current,
        forecast,
        iterations_used: iterations,
        fully_valid,
        final_mask: v,
    })
}

//! Differentiable forecasters.
//!
//! The counterfactual search only needs [`ForecastModel`]: a forward map from
//! a `d`-step window to a `T`-step forecast and its vector-Jacobian product
//! with respect to the input. Two trainable implementations ship here, a
//! linear autoregressive map and a one-hidden-layer tanh MLP, both with
//! hand-written reverse-mode gradients.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::optim::{AdamConfig, AdamState};
use crate::series::WindowPair;

pub trait ForecastModel: Send + Sync {
    /// Input length `d`.
    fn back_horizon(&self) -> usize;

    /// Output length `T`.
    fn horizon(&self) -> usize;

    fn predict(&self, input: &[f64]) -> Result<Vec<f64>>;

    /// `∂(upstream · f(input)) / ∂input`, i.e. `upstreamᵀ J`.
    fn input_gradient(&self, input: &[f64], upstream: &[f64]) -> Result<Vec<f64>>;
}

/// A model whose flat parameter vector can be fitted by [`train`].
pub trait Trainable: ForecastModel {
    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    /// Adds `∂(upstream · f(input)) / ∂params` into `grad`.
    fn accumulate_param_gradient(&self, input: &[f64], upstream: &[f64], grad: &mut [f64]) -> Result<()>;
}

fn check_io(model: &dyn ForecastModel, input: &[f64], upstream: Option<&[f64]>) -> Result<()> {
    check_len("forecaster input", model.back_horizon(), input.len())?;
    if let Some(u) = upstream {
        check_len("forecaster upstream", model.horizon(), u.len())?;
    }
    if input.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("forecaster input"));
    }
    Ok(())
}

fn fan_in_uniform(rng: &mut ChaCha8Rng, fan_in: usize, out: &mut [f64]) {
    let limit = 1.0 / (fan_in as f64).sqrt();
    for p in out {
        *p = rng.random_range(-limit..=limit);
    }
}

/// `y = W x + b` with `W` of shape `T x d`, stored row-major, then `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearAr {
    back_horizon: usize,
    horizon: usize,
    params: Vec<f64>,
}

impl LinearAr {
    pub fn zeros(back_horizon: usize, horizon: usize) -> Self {
        Self {
            back_horizon,
            horizon,
            params: vec![0.0; horizon * back_horizon + horizon],
        }
    }

    pub fn seeded(back_horizon: usize, horizon: usize, seed: u64) -> Self {
        let mut model = Self::zeros(back_horizon, horizon);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        fan_in_uniform(&mut rng, back_horizon, &mut model.params);
        model
    }

    pub fn from_parts(weights: &[Vec<f64>], bias: &[f64]) -> Result<Self> {
        let horizon = weights.len();
        if horizon == 0 {
            return Err(Error::Empty("weight matrix"));
        }
        let back_horizon = weights[0].len();
        check_len("linear bias", horizon, bias.len())?;
        let mut params = Vec::with_capacity(horizon * back_horizon + horizon);
        for row in weights {
            check_len("linear weight row", back_horizon, row.len())?;
            params.extend_from_slice(row);
        }
        params.extend_from_slice(bias);
        Ok(Self {
            back_horizon,
            horizon,
            params,
        })
    }

    /// Every output copies the last input value.
    pub fn repeat_last(back_horizon: usize, horizon: usize) -> Self {
        let mut model = Self::zeros(back_horizon, horizon);
        for j in 0..horizon {
            model.params[j * back_horizon + back_horizon - 1] = 1.0;
        }
        model
    }

    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.params[out * self.back_horizon + inp]
    }

    fn from_params(back_horizon: usize, horizon: usize, params: Vec<f64>) -> Result<Self> {
        check_len("linear parameters", horizon * back_horizon + horizon, params.len())?;
        Ok(Self {
            back_horizon,
            horizon,
            params,
        })
    }
}

impl ForecastModel for LinearAr {
    fn back_horizon(&self) -> usize {
        self.back_horizon
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_io(self, input, None)?;
        let d = self.back_horizon;
        let (w, b) = self.params.split_at(self.horizon * d);
        Ok(w.chunks_exact(d)
            .zip(b)
            .map(|(row, bias)| row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>() + bias)
            .collect())
    }

    fn input_gradient(&self, input: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        check_io(self, input, Some(upstream))?;
        let d = self.back_horizon;
        let mut grad = vec![0.0; d];
        for (row, u) in self.params[..self.horizon * d].chunks_exact(d).zip(upstream) {
            for (g, w) in grad.iter_mut().zip(row) {
                *g += w * u;
            }
        }
        Ok(grad)
    }
}

impl Trainable for LinearAr {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn accumulate_param_gradient(&self, input: &[f64], upstream: &[f64], grad: &mut [f64]) -> Result<()> {
        check_io(self, input, Some(upstream))?;
        check_len("parameter gradient", self.params.len(), grad.len())?;
        let d = self.back_horizon;
        let (gw, gb) = grad.split_at_mut(self.horizon * d);
        for ((row, b), u) in gw.chunks_exact_mut(d).zip(gb.iter_mut()).zip(upstream) {
            for (g, x) in row.iter_mut().zip(input) {
                *g += u * x;
            }
            *b += u;
        }
        Ok(())
    }
}

/// One hidden tanh layer: `y = W2 tanh(W1 x + b1) + b2`.
///
/// Parameter layout: `W1 (h x d)`, `b1 (h)`, `W2 (T x h)`, `b2 (T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    back_horizon: usize,
    horizon: usize,
    hidden: usize,
    params: Vec<f64>,
}

struct MlpLayout {
    w1: std::ops::Range<usize>,
    b1: std::ops::Range<usize>,
    w2: std::ops::Range<usize>,
    b2: std::ops::Range<usize>,
}

impl Mlp {
    fn layout_for(d: usize, h: usize, t: usize) -> MlpLayout {
        let w1 = 0..h * d;
        let b1 = w1.end..w1.end + h;
        let w2 = b1.end..b1.end + t * h;
        let b2 = w2.end..w2.end + t;
        MlpLayout { w1, b1, w2, b2 }
    }

    fn layout(&self) -> MlpLayout {
        Self::layout_for(self.back_horizon, self.hidden, self.horizon)
    }

    pub fn param_count(back_horizon: usize, hidden: usize, horizon: usize) -> usize {
        Self::layout_for(back_horizon, hidden, horizon).b2.end
    }

    /// Fan-in uniform initialisation per layer, biases included.
    pub fn seeded(back_horizon: usize, hidden: usize, horizon: usize, seed: u64) -> Self {
        let mut params = vec![0.0; Self::param_count(back_horizon, hidden, horizon)];
        let layout = Self::layout_for(back_horizon, hidden, horizon);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        fan_in_uniform(&mut rng, back_horizon, &mut params[layout.w1.start..layout.b1.end]);
        fan_in_uniform(&mut rng, hidden, &mut params[layout.w2.start..layout.b2.end]);
        Self {
            back_horizon,
            horizon,
            hidden,
            params,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn from_params(back_horizon: usize, hidden: usize, horizon: usize, params: Vec<f64>) -> Result<Self> {
        check_len(
            "mlp parameters",
            Self::param_count(back_horizon, hidden, horizon),
            params.len(),
        )?;
        Ok(Self {
            back_horizon,
            horizon,
            hidden,
            params,
        })
    }

    fn hidden_activations(&self, input: &[f64]) -> Vec<f64> {
        let l = self.layout();
        let w1 = &self.params[l.w1];
        let b1 = &self.params[l.b1];
        w1.chunks_exact(self.back_horizon)
            .zip(b1)
            .map(|(row, b)| (row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b).tanh())
            .collect()
    }

    /// Returns `∂/∂z` of `upstream · y` where `z` is the hidden pre-activation.
    fn hidden_gradient(&self, act: &[f64], upstream: &[f64]) -> Vec<f64> {
        let l = self.layout();
        let w2 = &self.params[l.w2];
        let mut g = vec![0.0; self.hidden];
        for (row, u) in w2.chunks_exact(self.hidden).zip(upstream) {
            for (gk, w) in g.iter_mut().zip(row) {
                *gk += w * u;
            }
        }
        for (gk, a) in g.iter_mut().zip(act) {
            *gk *= 1.0 - a * a;
        }
        g
    }
}

impl ForecastModel for Mlp {
    fn back_horizon(&self) -> usize {
        self.back_horizon
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_io(self, input, None)?;
        let act = self.hidden_activations(input);
        let l = self.layout();
        let w2 = &self.params[l.w2];
        let b2 = &self.params[l.b2];
        Ok(w2
            .chunks_exact(self.hidden)
            .zip(b2)
            .map(|(row, b)| row.iter().zip(&act).map(|(w, a)| w * a).sum::<f64>() + b)
            .collect())
    }

    fn input_gradient(&self, input: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        check_io(self, input, Some(upstream))?;
        let act = self.hidden_activations(input);
        let gz = self.hidden_gradient(&act, upstream);
        let w1 = &self.params[self.layout().w1];
        let mut grad = vec![0.0; self.back_horizon];
        for (row, g) in w1.chunks_exact(self.back_horizon).zip(&gz) {
            for (gx, w) in grad.iter_mut().zip(row) {
                *gx += w * g;
            }
        }
        Ok(grad)
    }
}

impl Trainable for Mlp {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn accumulate_param_gradient(&self, input: &[f64], upstream: &[f64], grad: &mut [f64]) -> Result<()> {
        check_io(self, input, Some(upstream))?;
        check_len("parameter gradient", self.params.len(), grad.len())?;
        let act = self.hidden_activations(input);
        let gz = self.hidden_gradient(&act, upstream);
        let l = self.layout();
        for (row, g) in grad[l.w1].chunks_exact_mut(self.back_horizon).zip(&gz) {
            for (gw, x) in row.iter_mut().zip(input) {
                *gw += g * x;
            }
        }
        for (gb, g) in grad[l.b1].iter_mut().zip(&gz) {
            *gb += g;
        }
        for (row, u) in grad[l.w2].chunks_exact_mut(self.hidden).zip(upstream) {
            for (gw, a) in row.iter_mut().zip(&act) {
                *gw += u * a;
            }
        }
        for (gb, u) in grad[l.b2].iter_mut().zip(upstream) {
            *gb += u;
        }
        Ok(())
    }
}

/// Repeats the last observed season: `y_j = x[d - m + (j mod m)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeasonalNaive {
    back_horizon: usize,
    horizon: usize,
    period: usize,
}

impl SeasonalNaive {
    pub fn new(back_horizon: usize, horizon: usize, period: usize) -> Result<Self> {
        if period == 0 || period > back_horizon {
            return Err(Error::InvalidConfig(format!(
                "seasonal period must lie in 1..={back_horizon}, got {period}"
            )));
        }
        Ok(Self {
            back_horizon,
            horizon,
            period,
        })
    }

    fn source(&self, j: usize) -> usize {
        self.back_horizon - self.period + j % self.period
    }
}

impl ForecastModel for SeasonalNaive {
    fn back_horizon(&self) -> usize {
        self.back_horizon
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_io(self, input, None)?;
        Ok((0..self.horizon).map(|j| input[self.source(j)]).collect())
    }

    fn input_gradient(&self, input: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        check_io(self, input, Some(upstream))?;
        let mut grad = vec![0.0; self.back_horizon];
        for (j, u) in upstream.iter().enumerate() {
            grad[self.source(j)] += u;
        }
        Ok(grad)
    }
}

/// Mean absolute seasonal difference `|x_j - x_{j-m}|` over a whole window.
pub fn seasonal_naive_error(window: &[f64], period: usize) -> Result<f64> {
    if period == 0 {
        return Err(Error::InvalidConfig("seasonal period must be positive".into()));
    }
    if window.len() <= period {
        return Err(Error::LengthMismatch {
            context: "seasonal naive window",
            expected: period + 1,
            got: window.len(),
        });
    }
    let total: f64 = window
        .iter()
        .skip(period)
        .zip(window)
        .map(|(cur, prev)| (cur - prev).abs())
        .sum();
    Ok(total / (window.len() - period) as f64)
}

/// Central-difference estimate of [`ForecastModel::input_gradient`].
pub fn fd_gradient(model: &dyn ForecastModel, input: &[f64], upstream: &[f64], step: f64) -> Result<Vec<f64>> {
    check_io(model, input, Some(upstream))?;
    if !(step > 0.0) {
        return Err(Error::InvalidConfig("finite-difference step must be positive".into()));
    }
    let dot = |x: &[f64]| -> Result<f64> { Ok(model.predict(x)?.iter().zip(upstream).map(|(f, u)| f * u).sum()) };
    let mut probe = input.to_vec();
    let mut grad = Vec::with_capacity(input.len());
    for i in 0..input.len() {
        probe[i] = input[i] + step;
        let plus = dot(&probe)?;
        probe[i] = input[i] - step;
        let minus = dot(&probe)?;
        probe[i] = input[i];
        grad.push((plus - minus) / (2.0 * step));
    }
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Mlp,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ModelKind::Linear),
            "mlp" => Ok(ModelKind::Mlp),
            other => Err(Error::InvalidConfig(format!("unknown model kind `{other}`"))),
        }
    }
}

/// The built-in trainable forecasters behind one type.
#[derive(Debug, Clone, PartialEq)]
pub enum Forecaster {
    Linear(LinearAr),
    Mlp(Mlp),
}

impl Forecaster {
    pub fn new(kind: ModelKind, back_horizon: usize, horizon: usize, hidden: usize, seed: u64) -> Self {
        match kind {
            ModelKind::Linear => Forecaster::Linear(LinearAr::seeded(back_horizon, horizon, seed)),
            ModelKind::Mlp => Forecaster::Mlp(Mlp::seeded(back_horizon, hidden, horizon, seed)),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Forecaster::Linear(_) => ModelKind::Linear,
            Forecaster::Mlp(_) => ModelKind::Mlp,
        }
    }

    fn inner(&self) -> &dyn Trainable {
        match self {
            Forecaster::Linear(m) => m,
            Forecaster::Mlp(m) => m,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Trainable {
        match self {
            Forecaster::Linear(m) => m,
            Forecaster::Mlp(m) => m,
        }
    }
}

impl ForecastModel for Forecaster {
    fn back_horizon(&self) -> usize {
        self.inner().back_horizon()
    }

    fn horizon(&self) -> usize {
        self.inner().horizon()
    }

    fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.inner().predict(input)
    }

    fn input_gradient(&self, input: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        self.inner().input_gradient(input, upstream)
    }
}

impl Trainable for Forecaster {
    fn params(&self) -> &[f64] {
        self.inner().params()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        self.inner_mut().params_mut()
    }

    fn accumulate_param_gradient(&self, input: &[f64], upstream: &[f64], grad: &mut [f64]) -> Result<()> {
        self.inner().accumulate_param_gradient(input, upstream, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 128,
            max_epochs: 100,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::InvalidConfig(
                "batch_size, max_epochs and patience must be positive".into(),
            ));
        }
        if self.patience > self.max_epochs {
            return Err(Error::InvalidConfig("patience must not exceed max_epochs".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_mae: f64,
    pub val_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Pooled validation MAE before the first update.
    pub initial_val_mae: f64,
    pub history: Vec<EpochLoss>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_mae: f64,
}

/// Pooled MAE over every step of every window.
pub fn mean_absolute_error<M: ForecastModel + ?Sized>(model: &M, windows: &[WindowPair]) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::Empty("window set"));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for w in windows {
        let forecast = model.predict(&w.input)?;
        check_len("window target", forecast.len(), w.target.len())?;
        total += forecast.iter().zip(&w.target).map(|(f, y)| (f - y).abs()).sum::<f64>();
        count += forecast.len();
    }
    Ok(total / count as f64)
}

/// Mini-batch Adam on the MAE loss with early stopping on pooled validation
/// MAE. On return the model holds the parameters of the best epoch.
pub fn train<M: Trainable + ?Sized>(
    model: &mut M,
    train_windows: &[WindowPair],
    val_windows: &[WindowPair],
    config: &TrainConfig,
) -> Result<TrainReport> {
    use rand::seq::SliceRandom;

    config.validate()?;
    if train_windows.is_empty() {
        return Err(Error::Empty("training window set"));
    }
    if val_windows.is_empty() {
        return Err(Error::Empty("validation window set"));
    }

    let adam = AdamConfig::with_learning_rate(config.learning_rate);
    let n_params = model.params().len();
    let mut state = AdamState::zeros(n_params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_windows.len()).collect();
    let mut grad = vec![0.0; n_params];

    let initial_val_mae = mean_absolute_error(model, val_windows)?;
    let mut best_params = model.params().to_vec();
    let mut best_val_mae = initial_val_mae;
    let mut best_epoch = 0;
    let mut history = Vec::new();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut abs_total = 0.0;
        let mut abs_count = 0usize;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let horizon = model.horizon();
            let scale = 1.0 / (batch.len() * horizon) as f64;
            for &idx in batch {
                let w = &train_windows[idx];
                let forecast = model.predict(&w.input)?;
                check_len("window target", horizon, w.target.len())?;
                let upstream: Vec<f64> = forecast
                    .iter()
                    .zip(&w.target)
                    .map(|(f, y)| {
                        abs_total += (f - y).abs();
                        // d|r|/dr, with 0 at the kink.
                        let r = f - y;
                        if r > 0.0 {
                            scale
                        } else if r < 0.0 {
                            -scale
                        } else {
                            0.0
                        }
                    })
                    .collect();
                abs_count += horizon;
                model.accumulate_param_gradient(&w.input, &upstream, &mut grad)?;
            }
            state.step(model.params_mut(), &grad, &adam)?;
        }
        if model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("training"));
        }

        let val_mae = mean_absolute_error(model, val_windows)?;
        history.push(EpochLoss {
            epoch,
            train_mae: abs_total / abs_count as f64,
            val_mae,
        });
        if best_epoch == 0 || val_mae < best_val_mae {
            best_val_mae = val_mae;
            best_epoch = epoch;
            best_params.copy_from_slice(model.params());
        } else if epoch - best_epoch >= config.patience {
            log::debug!("early stop at epoch {epoch}, best epoch {best_epoch}");
            break;
        }
    }

    model.params_mut().copy_from_slice(&best_params);
    Ok(TrainReport {
        initial_val_mae,
        history,
        best_epoch,
        best_val_mae,
    })
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized form of a trained [`Forecaster`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub kind: ModelKind,
    pub back_horizon: usize,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    pub params: Vec<f64>,
    pub seed: u64,
    pub train_config: TrainConfig,
}

impl Checkpoint {
    pub fn from_model(model: &Forecaster, seed: u64, train_config: TrainConfig) -> Self {
        let hidden = match model {
            Forecaster::Linear(_) => None,
            Forecaster::Mlp(m) => Some(m.hidden()),
        };
        Self {
            format_version: CHECKPOINT_VERSION,
            kind: model.kind(),
            back_horizon: model.back_horizon(),
            horizon: model.horizon(),
            hidden,
            params: model.params().to_vec(),
            seed,
            train_config,
        }
    }

    pub fn to_model(&self) -> Result<Forecaster> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {}",
                self.format_version
            )));
        }
        let params = self.params.clone();
        match self.kind {
            ModelKind::Linear => Ok(Forecaster::Linear(LinearAr::from_params(
                self.back_horizon,
                self.horizon,
                params,
            )?)),
            ModelKind::Mlp => {
                let hidden = self
                    .hidden
                    .ok_or_else(|| Error::Checkpoint("mlp checkpoint without `hidden`".into()))?;
                Ok(Forecaster::Mlp(Mlp::from_params(
                    self.back_horizon,
                    hidden,
                    self.horizon,
                    params,
                )?))
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn window(input: Vec<f64>, target: Vec<f64>) -> WindowPair {
        WindowPair {
            series_id: "s".into(),
            input,
            target,
            origin_index: 0,
        }
    }

    #[test]
    fn zero_linear_predicts_zero() {
        let m = LinearAr::zeros(3, 2);
        assert_eq!(m.predict(&[1.0, -4.0, 9.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn repeat_last_value() {
        let m = LinearAr::repeat_last(2, 3);
        assert_eq!(m.predict(&[0.2, 0.7]).unwrap(), vec![0.7, 0.7, 0.7]);
    }

    #[test]
    fn predict_rejects_wrong_length() {
        let m = LinearAr::zeros(3, 2);
        assert!(matches!(m.predict(&[1.0]), Err(Error::LengthMismatch { .. })));
        assert!(m.input_gradient(&[1.0, 2.0, 3.0], &[1.0]).is_err());
    }

    #[test]
    fn mlp_is_deterministic() {
        let a = Mlp::seeded(5, 8, 3, 7);
        let b = Mlp::seeded(5, 8, 3, 7);
        let x = [0.1, -0.3, 0.5, 0.9, 0.0];
        let first = a.predict(&x).unwrap();
        assert_eq!(first, a.predict(&x).unwrap());
        assert_eq!(first, b.predict(&x).unwrap());
    }

    #[test]
    fn linear_gradient_is_transposed_weights() {
        let m = LinearAr::from_parts(&[vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.0]], &[0.1, 0.2, 0.3]).unwrap();
        let g = m.input_gradient(&[9.0, 9.0], &[1.0, 2.0, -2.0]).unwrap();
        // Wᵀu = [1 + 6 - 1, 2 - 2 + 0]
        assert_eq!(g, vec![6.0, 0.0]);

        let fd = fd_gradient(&m, &[0.3, -0.7], &[1.0, 2.0, -2.0], 1e-5).unwrap();
        for (a, b) in fd.iter().zip(&g) {
            assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let m = Mlp::seeded(4, 6, 3, 1);
        assert_eq!(
            m.input_gradient(&[0.1, 0.2, 0.3, 0.4], &[0.0; 3]).unwrap(),
            vec![0.0; 4]
        );
    }

    #[test]
    fn constant_model_has_zero_fd_gradient() {
        let m = LinearAr::from_parts(&[vec![0.0, 0.0]], &[3.5]).unwrap();
        assert_eq!(fd_gradient(&m, &[1.0, 2.0], &[1.0], 1e-5).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let m = Mlp::seeded(6, 10, 4, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = vec![1.0; 4];
        let exact = m.input_gradient(&x, &u).unwrap();
        let fd = fd_gradient(&m, &x, &u, 1e-5).unwrap();
        for (a, b) in exact.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-4 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn mlp_param_gradient_matches_finite_differences() {
        let mut m = Mlp::seeded(3, 4, 2, 3);
        let x = [0.3, -0.2, 0.8];
        let u = [0.7, -1.3];
        let mut grad = vec![0.0; m.params().len()];
        m.accumulate_param_gradient(&x, &u, &mut grad).unwrap();
        let h = 1e-6;
        for (i, &g) in grad.iter().enumerate() {
            let orig = m.params()[i];
            m.params_mut()[i] = orig + h;
            let plus: f64 = m.predict(&x).unwrap().iter().zip(&u).map(|(f, u)| f * u).sum();
            m.params_mut()[i] = orig - h;
            let minus: f64 = m.predict(&x).unwrap().iter().zip(&u).map(|(f, u)| f * u).sum();
            m.params_mut()[i] = orig;
            let fd = (plus - minus) / (2.0 * h);
            assert!((g - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "param {i}: {g} vs {fd}");
        }
    }

    #[test]
    fn seasonal_naive_examples() {
        assert_eq!(seasonal_naive_error(&[1.0, 2.0, 3.0, 4.0], 1).unwrap(), 1.0);
        assert_eq!(seasonal_naive_error(&[5.0; 6], 3).unwrap(), 0.0);
        assert_eq!(seasonal_naive_error(&[1.0, 2.0, 1.0, 2.0], 2).unwrap(), 0.0);
        assert!(seasonal_naive_error(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn seasonal_naive_forecaster_repeats_season() {
        let m = SeasonalNaive::new(4, 5, 2).unwrap();
        assert_eq!(m.predict(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![3.0, 4.0, 3.0, 4.0, 3.0]);
        let fd = fd_gradient(&m, &[1.0, 2.0, 3.0, 4.0], &[1.0; 5], 1e-5).unwrap();
        let exact = m.input_gradient(&[1.0, 2.0, 3.0, 4.0], &[1.0; 5]).unwrap();
        assert_eq!(exact, vec![0.0, 0.0, 3.0, 2.0]);
        for (a, b) in fd.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn training_improves_constant_target() {
        let windows: Vec<_> = (0..40)
            .map(|i| window(vec![0.1 * (i % 5) as f64, 0.3, 0.2], vec![0.5, 0.5]))
            .collect();
        let mut m = LinearAr::seeded(3, 2, 1);
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 8,
            max_epochs: 30,
            patience: 5,
            seed: 3,
        };
        let report = train(&mut m, &windows[..30], &windows[30..], &cfg).unwrap();
        assert!(report.best_val_mae < report.initial_val_mae);
        assert_eq!(mean_absolute_error(&m, &windows[30..]).unwrap(), report.best_val_mae);
    }

    #[test]
    fn training_is_deterministic() {
        let windows: Vec<_> = (0..50)
            .map(|i| {
                let x = (i as f64 * 0.37).sin();
                window(vec![x, x * 0.5, -x], vec![x + 0.1, x - 0.2])
            })
            .collect();
        let cfg = TrainConfig {
            learning_rate: 1e-3,
            batch_size: 16,
            max_epochs: 10,
            patience: 10,
            seed: 9,
        };
        let run = || {
            let mut m = Mlp::seeded(3, 5, 2, 4);
            let r = train(&mut m, &windows[..40], &windows[40..], &cfg).unwrap();
            (r, m)
        };
        let (r1, m1) = run();
        let (r2, m2) = run();
        assert_eq!(r1, r2);
        assert_eq!(m1, m2);
    }

    #[test]
    fn training_rejects_empty_sets() {
        let w = vec![window(vec![0.0], vec![0.0])];
        let mut m = LinearAr::zeros(1, 1);
        assert!(train(&mut m, &[], &w, &TrainConfig::default()).is_err());
        assert!(train(&mut m, &w, &[], &TrainConfig::default()).is_err());
    }

    /// Parameter `p` rises by ~learning_rate per batch under a constant
    /// negative gradient, so with one batch per epoch and lr = 1 it tracks
    /// the epoch number. The forecast reads a scripted value for that epoch.
    struct ScriptedModel {
        params: Vec<f64>,
        schedule: Vec<f64>,
    }

    impl ForecastModel for ScriptedModel {
        fn back_horizon(&self) -> usize {
            1
        }
        fn horizon(&self) -> usize {
            1
        }
        fn predict(&self, _input: &[f64]) -> Result<Vec<f64>> {
            let epoch = self.params[0].round() as usize;
            Ok(vec![self.schedule[epoch.min(self.schedule.len() - 1)]])
        }
        fn input_gradient(&self, _input: &[f64], _upstream: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![0.0])
        }
    }

    impl Trainable for ScriptedModel {
        fn params(&self) -> &[f64] {
            &self.params
        }
        fn params_mut(&mut self) -> &mut [f64] {
            &mut self.params
        }
        fn accumulate_param_gradient(&self, _input: &[f64], _upstream: &[f64], grad: &mut [f64]) -> Result<()> {
            grad[0] -= 1.0;
            Ok(())
        }
    }

    #[test]
    fn early_stopping_keeps_best_epoch() {
        // val MAE by epoch: 0 -> 9, 1 -> 5, 2 -> 4, 3 -> 1, then worse.
        let mut m = ScriptedModel {
            params: vec![0.0],
            schedule: vec![9.0, 5.0, 4.0, 1.0, 2.0, 3.0, 0.5, 0.5, 0.5],
        };
        let data = vec![window(vec![0.0], vec![0.0])];
        let cfg = TrainConfig {
            learning_rate: 1.0,
            batch_size: 1,
            max_epochs: 8,
            patience: 2,
            seed: 0,
        };
        let report = train(&mut m, &data, &data, &cfg).unwrap();
        assert_eq!(report.history.len(), 5);
        assert_eq!(report.best_epoch, 3);
        assert_eq!(report.best_val_mae, 1.0);
        assert_eq!(m.params[0].round(), 3.0);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let model = Forecaster::new(ModelKind::Mlp, 6, 3, 7, 21);
        let ckpt = Checkpoint::from_model(&model, 21, TrainConfig::default());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap().to_model().unwrap();
        assert_eq!(loaded, model);
        let x = [0.11, 0.23, -0.5, 0.7, 0.0, 1.0];
        assert_eq!(loaded.predict(&x).unwrap(), model.predict(&x).unwrap());
    }

    fn arb_model() -> impl Strategy<Value = Forecaster> {
        (1usize..8, 1usize..6, 1usize..10, any::<u64>(), any::<bool>()).prop_map(|(d, t, h, seed, mlp)| {
            let kind = if mlp { ModelKind::Mlp } else { ModelKind::Linear };
            Forecaster::new(kind, d, t, h, seed)
        })
    }

    proptest! {
        #[test]
        fn vjp_is_linear_in_upstream(model in arb_model(), seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = model.back_horizon();
            let t = model.horizon();
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u: Vec<f64> = (0..t).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..t).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mixed: Vec<f64> = u.iter().zip(&w).map(|(u, w)| a * u + b * w).collect();
            let lhs = model.input_gradient(&x, &mixed).unwrap();
            let gu = model.input_gradient(&x, &u).unwrap();
            let gw = model.input_gradient(&x, &w).unwrap();
            for i in 0..d {
                prop_assert!((lhs[i] - (a * gu[i] + b * gw[i])).abs() <= 1e-9);
            }
        }

        #[test]
        fn output_length_is_horizon(model in arb_model(), scale in -5.0f64..5.0) {
            let x = vec![scale; model.back_horizon()];
            prop_assert_eq!(model.predict(&x).unwrap().len(), model.horizon());
        }
    }
}

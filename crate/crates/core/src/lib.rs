//! Counterfactual explanations for multi-step time series forecasters.
//!
//! Given a trained forecaster and a back-horizon window, [`search::generate`]
//! perturbs the window until the model's forecast falls inside a desired
//! lower/upper trajectory built by [`bounds`]. [`baselines`] provides two
//! model-free comparison generators and [`metrics`] scores all of them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bounds;
pub mod error;
pub mod forecaster;
pub mod metrics;
pub mod optim;
pub mod search;
pub mod series;

pub use baselines::{base_nn, base_shift, TrainingBank};
pub use bounds::{build_bounds, limited_bounds, polynomial_bounds, BoundSpec, Center, TrajectoryBounds};
pub use error::{Error, Result};
pub use forecaster::{
    fd_gradient, seasonal_naive_error, train, Checkpoint, ForecastModel, Forecaster, LinearAr, Mlp, ModelKind,
    SeasonalNaive, TrainConfig, TrainReport, Trainable,
};
pub use metrics::{EvalSample, EvaluationReport};
pub use search::{adam_step, band_loss, generate, loss_input_gradient, mask, CounterfactualResult, SearchConfig};
pub use series::{chronological_split, load_csv, make_windows, Chunk, Scaler, SplitSpec, TimeSeries, WindowPair};

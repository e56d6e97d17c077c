//! Desired-trajectory bounds over the forecast horizon.
//!
//! The polynomial-trend family starts the band at
//! `c(x) * (1 + s ∓ fr * σ(x))`, moves both edges by `c(x) * cp` over the
//! horizon along a power curve of order `poly_order`, and optionally clamps
//! the result to hard limits.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Center {
    Median,
    Max,
    Min,
    Mean,
    Last,
}

impl Center {
    /// Panics on an empty slice.
    pub fn of(self, x: &[f64]) -> f64 {
        assert!(!x.is_empty());
        match self {
            Center::Median => {
                let mut sorted = x.to_vec();
                sorted.sort_by(f64::total_cmp);
                let mid = sorted.len() / 2;
                if sorted.len().is_multiple_of(2) {
                    0.5 * (sorted[mid - 1] + sorted[mid])
                } else {
                    sorted[mid]
                }
            }
            Center::Max => x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Center::Min => x.iter().copied().fold(f64::INFINITY, f64::min),
            Center::Mean => x.iter().sum::<f64>() / x.len() as f64,
            Center::Last => x[x.len() - 1],
        }
    }
}

impl std::str::FromStr for Center {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median" => Ok(Center::Median),
            "max" => Ok(Center::Max),
            "min" => Ok(Center::Min),
            "mean" => Ok(Center::Mean),
            "last" => Ok(Center::Last),
            other => Err(Error::InvalidConfig(format!("unknown center `{other}`"))),
        }
    }
}

/// Population standard deviation.
pub fn population_std(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundSpec {
    pub center: Center,
    pub shift: f64,
    pub fraction: f64,
    pub change_percent: f64,
    pub poly_order: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<(f64, f64)>,
}

impl Default for BoundSpec {
    fn default() -> Self {
        Self {
            center: Center::Median,
            shift: 0.0,
            fraction: 1.0,
            change_percent: 0.1,
            poly_order: 1,
            limits: None,
        }
    }
}

impl BoundSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.fraction >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "fraction must be non-negative, got {}",
                self.fraction
            )));
        }
        if self.poly_order == 0 {
            return Err(Error::InvalidConfig("poly_order must be at least 1".into()));
        }
        if !self.shift.is_finite() || !self.change_percent.is_finite() {
            return Err(Error::InvalidConfig("shift and change_percent must be finite".into()));
        }
        if let Some((lo, hi)) = self.limits {
            if !(lo <= hi) {
                return Err(Error::InvalidConfig(format!(
                    "limits must satisfy l_alpha <= l_beta, got ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBounds {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl TrajectoryBounds {
    /// Validates `alpha_t <= beta_t` everywhere.
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        check_len("trajectory bounds", alpha.len(), beta.len())?;
        if alpha.is_empty() {
            return Err(Error::Empty("trajectory bounds"));
        }
        for (step, (&a, &b)) in alpha.iter().zip(&beta).enumerate() {
            if !(a <= b) {
                return Err(Error::CrossedBounds {
                    step,
                    alpha: a,
                    beta: b,
                });
            }
        }
        Ok(Self { alpha, beta })
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// `(alpha + beta) / 2` per step.
    pub fn midpoint(&self) -> Vec<f64> {
        self.alpha.iter().zip(&self.beta).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains(&self, step: usize, value: f64) -> bool {
        self.alpha[step] <= value && value <= self.beta[step]
    }
}

/// Polynomial-trend bounds without limits (`spec.limits` is ignored).
pub fn polynomial_bounds(input: &[f64], horizon: usize, spec: &BoundSpec) -> Result<TrajectoryBounds> {
    if input.is_empty() {
        return Err(Error::Empty("bound input window"));
    }
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be positive".into()));
    }
    spec.validate()?;

    let c = spec.center.of(input);
    let sigma = population_std(input);
    let mut alpha_start = c * (1.0 + spec.shift - spec.fraction * sigma);
    let mut beta_start = c * (1.0 + spec.shift + spec.fraction * sigma);
    if alpha_start > beta_start {
        log::debug!("negative center {c} inverted the band start; swapping alpha and beta");
        std::mem::swap(&mut alpha_start, &mut beta_start);
    }
    let rise = c * spec.change_percent;

    let ramp = |t: usize| -> f64 {
        if horizon == 1 {
            0.0
        } else {
            (t as f64 / (horizon - 1) as f64).powi(spec.poly_order as i32)
        }
    };
    let alpha = (0..horizon).map(|t| alpha_start + rise * ramp(t)).collect();
    let beta = (0..horizon).map(|t| beta_start + rise * ramp(t)).collect();
    TrajectoryBounds::new(alpha, beta)
}

/// Clamps `alpha` from below at `l_alpha` and `beta` from above at `l_beta`.
pub fn limited_bounds(bounds: &TrajectoryBounds, l_alpha: f64, l_beta: f64) -> Result<TrajectoryBounds> {
    if !(l_alpha <= l_beta) {
        return Err(Error::InvalidConfig(format!(
            "limits must satisfy l_alpha <= l_beta, got ({l_alpha}, {l_beta})"
        )));
    }
    let alpha = bounds
        .alpha
        .iter()
        .map(|&a| if a <= l_alpha { l_alpha } else { a })
        .collect();
    let beta = bounds
        .beta
        .iter()
        .map(|&b| if b >= l_beta { l_beta } else { b })
        .collect();
    TrajectoryBounds::new(alpha, beta)
}

/// Polynomial bounds followed by the limits in `spec`, if any.
pub fn build_bounds(input: &[f64], horizon: usize, spec: &BoundSpec) -> Result<TrajectoryBounds> {
    let bounds = polynomial_bounds(input, horizon, spec)?;
    match spec.limits {
        Some((lo, hi)) => limited_bounds(&bounds, lo, hi),
        None => Ok(bounds),
    }
}

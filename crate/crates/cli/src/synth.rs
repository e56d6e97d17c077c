//! Seeded trend + seasonal + noise series.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use tscf_core::TimeSeries;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_series: usize,
    pub length: usize,
    /// Series baseline at `t = 0`.
    pub level: f64,
    /// Per-series slope is drawn uniformly from `[slope_min, slope_max]`.
    pub slope_min: f64,
    pub slope_max: f64,
    pub amplitude: f64,
    pub period: f64,
    /// Standard deviation of additive Gaussian noise.
    pub noise: f64,
    /// Overrides the experiment seed when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self::fixture()
    }
}

impl SyntheticSpec {
    pub fn fixture() -> Self {
        Self {
            n_series: 20,
            length: 200,
            level: 10.0,
            slope_min: -0.005,
            slope_max: 0.005,
            amplitude: 0.5,
            period: 12.0,
            noise: 1.0,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_series == 0 {
            return Err(CliError::Config("synthetic.n_series must be positive".into()));
        }
        if self.length == 0 {
            return Err(CliError::Config("synthetic.length must be positive".into()));
        }
        if !(self.slope_min <= self.slope_max) {
            return Err(CliError::Config("synthetic.slope_min must not exceed slope_max".into()));
        }
        if !(self.period > 0.0 && self.period < self.length as f64) {
            return Err(CliError::Config("synthetic.period must lie in (0, length)".into()));
        }
        if !(self.amplitude >= 0.0 && self.noise >= 0.0) {
            return Err(CliError::Config(
                "synthetic.amplitude and noise must be non-negative".into(),
            ));
        }
        if !self.level.is_finite() {
            return Err(CliError::Config("synthetic.level must be finite".into()));
        }
        Ok(())
    }

    /// Phase offset of series `i`, spread evenly over one cycle.
    pub fn phase(&self, i: usize) -> f64 {
        std::f64::consts::TAU * i as f64 / self.n_series as f64
    }

    /// Noise-free value of series `i` at time `t` given its slope.
    pub fn deterministic_value(&self, i: usize, slope: f64, t: usize) -> f64 {
        let angle = std::f64::consts::TAU * t as f64 / self.period + self.phase(i);
        self.level + slope * t as f64 + self.amplitude * angle.sin()
    }
}

/// One generated series and the slope it was drawn with.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSeries {
    pub series: TimeSeries,
    pub slope: f64,
}

pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<Vec<GeneratedSeries>, CliError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.unwrap_or(seed));
    let noise = Normal::new(0.0, spec.noise).map_err(|e| CliError::Config(e.to_string()))?;
    let width = spec.n_series.to_string().len();
    (0..spec.n_series)
        .map(|i| {
            let slope = if spec.slope_min == spec.slope_max {
                spec.slope_min
            } else {
                rng.random_range(spec.slope_min..=spec.slope_max)
            };
            let values = (0..spec.length)
                .map(|t| {
                    let base = spec.deterministic_value(i, slope, t);
                    if spec.noise > 0.0 {
                        base + noise.sample(&mut rng)
                    } else {
                        base
                    }
                })
                .collect();
            let series = TimeSeries::new(format!("s{i:0width$}"), values)?;
            Ok(GeneratedSeries { series, slope })
        })
        .collect()
}

pub fn series_only(generated: Vec<GeneratedSeries>) -> Vec<TimeSeries> {
    generated.into_iter().map(|g| g.series).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_series_is_trend_plus_season() {
        let spec = SyntheticSpec {
            n_series: 3,
            length: 50,
            noise: 0.0,
            ..SyntheticSpec::fixture()
        };
        for g in generate(&spec, 1).unwrap() {
            let i: usize = g.series.id()[1..].parse().unwrap();
            for (t, v) in g.series.values().iter().enumerate() {
                let angle = std::f64::consts::TAU * t as f64 / spec.period + std::f64::consts::TAU * i as f64 / 3.0;
                let expected = spec.level + g.slope * t as f64 + spec.amplitude * angle.sin();
                assert_eq!(*v, expected);
            }
        }
    }

    #[test]
    fn same_seed_same_series() {
        let spec = SyntheticSpec::fixture();
        assert_eq!(generate(&spec, 42).unwrap(), generate(&spec, 42).unwrap());
        assert_ne!(generate(&spec, 42).unwrap(), generate(&spec, 43).unwrap());
    }

    #[test]
    fn zero_series_is_rejected() {
        let spec = SyntheticSpec {
            n_series: 0,
            ..SyntheticSpec::fixture()
        };
        assert_eq!(generate(&spec, 0).unwrap_err().exit_code(), 1);
    }
}

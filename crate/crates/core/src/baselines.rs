//! Model-free comparison generators: nearest-neighbour retrieval from the
//! training windows and multiplicative shifting of the input.

use crate::bounds::TrajectoryBounds;
use crate::error::{check_len, Error, Result};
use crate::series::WindowPair;

/// Training windows searched by [`base_nn`], in normalized units.
#[derive(Debug, Clone, Default)]
pub struct TrainingBank {
    windows: Vec<WindowPair>,
}

impl TrainingBank {
    pub fn new(windows: Vec<WindowPair>) -> Self {
        Self { windows }
    }

    pub fn windows(&self) -> &[WindowPair] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Index of the bank window whose target is closest (Euclidean) to the band
/// midpoint. Ties go to the lowest index.
pub fn nearest_index(bank: &TrainingBank, bounds: &TrajectoryBounds) -> Result<usize> {
    if bank.is_empty() {
        return Err(Error::Empty("training bank"));
    }
    let mid = bounds.midpoint();
    let d = bank.windows[0].input.len();
    let mut best = (0, f64::INFINITY);
    for (i, w) in bank.windows.iter().enumerate() {
        check_len("bank window target", mid.len(), w.target.len())?;
        check_len("bank window input", d, w.input.len())?;
        let dist = squared_distance(&w.target, &mid);
        if dist < best.1 {
            best = (i, dist);
        }
    }
    Ok(best.0)
}

/// The back-horizon of the nearest training window, verbatim.
pub fn base_nn(bank: &TrainingBank, bounds: &TrajectoryBounds) -> Result<Vec<f64>> {
    let idx = nearest_index(bank, bounds)?;
    Ok(bank.windows[idx].input.clone())
}

/// `x_i * (1 + cp)`.
pub fn base_shift(x: &[f64], change_percent: f64) -> Vec<f64> {
    let factor = 1.0 + change_percent;
    x.iter().map(|v| v * factor).collect()
}

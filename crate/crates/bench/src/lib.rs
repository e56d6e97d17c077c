//! Inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tscf_core::{build_bounds, BoundSpec, TrajectoryBounds, WindowPair};

/// `n` windows of noisy sine segments in roughly `[0, 1]`.
pub fn windows(n: usize, back_horizon: usize, horizon: usize, seed: u64) -> Vec<WindowPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let mut values = (0..back_horizon + horizon)
                .map(|t| 0.5 + 0.3 * (t as f64 * 0.5 + phase).sin() + rng.random_range(-0.05..0.05));
            WindowPair {
                series_id: format!("b{i}"),
                input: values.by_ref().take(back_horizon).collect(),
                target: values.collect(),
                origin_index: 0,
            }
        })
        .collect()
}

/// Default bounds for every window's input.
pub fn bounds_for(windows: &[WindowPair], horizon: usize) -> Vec<TrajectoryBounds> {
    let spec = BoundSpec::default();
    windows
        .iter()
        .map(|w| build_bounds(&w.input, horizon, &spec).expect("valid bounds"))
        .collect()
}

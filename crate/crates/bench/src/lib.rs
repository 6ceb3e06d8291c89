//! Shared fixtures for the benchmarks.

use omori_core::omori::Side;
use omori_core::synth::{simulate_omori, OmoriProcessSpec};

/// Per-stock after-side curves of a simulated ensemble.
pub fn ensemble_curves(n_stocks: usize, omega: f64, events: f64, horizon: u32) -> Vec<Vec<f64>> {
    (0..n_stocks as u64)
        .map(|k| {
            let spec = OmoriProcessSpec::with_expected_count(omega, events, horizon, Side::After, k)
                .expect("valid process spec");
            simulate_omori(&spec).expect("simulation runs").curve()
        })
        .collect()
}

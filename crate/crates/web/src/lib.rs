//! WebAssembly bindings for the AIMD demo page in `www/`.

pub mod demo;

use wasm_bindgen::prelude::*;

/// `[T, x1*, x2*, t0, x1, x2, ...]`: limit cycle, then the rate path vertices.
#[wasm_bindgen]
pub fn sawtooth(
    capacity: f64,
    alpha1: f64,
    beta1: f64,
    alpha2: f64,
    beta2: f64,
    drops: usize,
) -> Result<Vec<f64>, JsError> {
    demo::sawtooth(capacity, (alpha1, beta1), (alpha2, beta2), drops).map_err(|e| JsError::new(&e))
}

/// `[lo, hi, lambda0, p0, regime0, ...]`.
#[wasm_bindgen]
pub fn regime_curve(
    capacity: f64,
    alpha1: f64,
    beta1: f64,
    alpha2: f64,
    beta2: f64,
    lambda_max: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    demo::regime_curve(
        capacity,
        (alpha1, beta1),
        (alpha2, beta2),
        lambda_max,
        points,
    )
    .map_err(|e| JsError::new(&e))
}

/// `[outcome, t0, x1, x2, x3, ...]`.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn replicator_shares(
    lambda: f64,
    gain: f64,
    delay: f64,
    triple: bool,
    horizon: f64,
    x1: f64,
    x2: f64,
    x3: f64,
) -> Result<Vec<f64>, JsError> {
    demo::replicator_shares(lambda, gain, delay, triple, horizon, [x1, x2, x3])
        .map_err(|e| JsError::new(&e))
}

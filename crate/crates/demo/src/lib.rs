//! Browser bindings. Each export returns a flat `Float64Array`; the page in
//! `www/` draws them on canvases.
//!
//! The plain functions are the ones tested natively; the `#[wasm_bindgen]`
//! wrappers only convert errors.

use qwalk::transfer::one_step_matrix;
use qwalk::walk::{moment_series, ScaleGrid, DEFAULT_TAIL_TOL};
use qwalk::{CoinAngles, CoinSequence, Mat2, SpectralParameter, WalkModel};
use wasm_bindgen::prelude::*;

/// Longest evolution the page may request.
pub const MAX_STEPS: usize = 2000;
/// Largest `L` on the moment curve.
pub const MAX_SCALE: f64 = 400.0;
pub const MAX_SPAN: usize = 1 << 14;

fn model(theta: f64, phi: f64, sequence: &str, offset: usize) -> Result<WalkModel, String> {
    let angles = CoinAngles::new(theta, phi).map_err(|e| e.to_string())?;
    let sequence: CoinSequence = sequence.parse().map_err(|e: qwalk::Error| e.to_string())?;
    Ok(WalkModel::pattern(sequence, offset, angles))
}

/// `a(n, l)` for `n = −l ..= l`, started from `δ₀ ⊗ e₊`.
pub fn profile(theta: f64, phi: f64, sequence: &str, offset: usize, steps: usize) -> Result<Vec<f64>, String> {
    if steps > MAX_STEPS {
        return Err(format!("at most {MAX_STEPS} steps"));
    }
    let profiles = model(theta, phi, sequence, offset)?.profiles(steps).map_err(|e| e.to_string())?;
    let last = profiles.last().ok_or("no profile")?;
    let l = steps as i64;
    Ok((-l..=l).map(|n| last.at(n)).collect())
}

/// Interleaved `[L₀, M₀, L₁, M₁, …]` of the time-averaged `p`-th moment.
pub fn moments(
    theta: f64,
    phi: f64,
    sequence: &str,
    p: f64,
    start: f64,
    ratio: f64,
    count: usize,
) -> Result<Vec<f64>, String> {
    let grid = ScaleGrid::new(start, ratio, count).map_err(|e| e.to_string())?.values();
    if grid.last().is_some_and(|&l| l > MAX_SCALE) {
        return Err(format!("largest L must not exceed {MAX_SCALE}"));
    }
    let points =
        moment_series(&model(theta, phi, sequence, 0)?, &grid, &[p], DEFAULT_TAIL_TOL).map_err(|e| e.to_string())?;
    Ok(points.iter().flat_map(|m| [m.scale, m.moment]).collect())
}

/// `‖T_x(k, 0; z)‖` for `k = 1 ..= span` at `z = e^{η + iτ}`.
pub fn transfer_norms(
    theta: f64,
    phi: f64,
    sequence: &str,
    offset: usize,
    tau: f64,
    eta: f64,
    span: usize,
) -> Result<Vec<f64>, String> {
    if span == 0 || span > MAX_SPAN {
        return Err(format!("span must lie in 1..={MAX_SPAN}"));
    }
    let angles = CoinAngles::new(theta, phi).map_err(|e| e.to_string())?;
    let sequence: CoinSequence = sequence.parse().map_err(|e: qwalk::Error| e.to_string())?;
    let x = sequence.window(offset, 0, span as i64).map_err(|e| e.to_string())?;
    let z = SpectralParameter::from_phase(tau, eta).map_err(|e| e.to_string())?;
    let mut t = Mat2::identity();
    let mut norms = Vec::with_capacity(span);
    for k in 0..span as i64 {
        let symbol = x.symbol_at(k).map_err(|e| e.to_string())?;
        let step = one_step_matrix(angles.for_symbol(symbol), &z).map_err(|e| e.to_string())?;
        t = step.0 * t;
        norms.push(t.operator_norm());
    }
    Ok(norms)
}

fn js(r: Result<Vec<f64>, String>) -> Result<Vec<f64>, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = walkProfile)]
pub fn walk_profile(theta: f64, phi: f64, sequence: &str, offset: usize, steps: usize) -> Result<Vec<f64>, JsValue> {
    js(profile(theta, phi, sequence, offset, steps))
}

#[wasm_bindgen(js_name = momentCurve)]
pub fn moment_curve(
    theta: f64,
    phi: f64,
    sequence: &str,
    p: f64,
    start: f64,
    ratio: f64,
    count: usize,
) -> Result<Vec<f64>, JsValue> {
    js(moments(theta, phi, sequence, p, start, ratio, count))
}

#[wasm_bindgen(js_name = transferNorms)]
pub fn transfer_norms_js(
    theta: f64,
    phi: f64,
    sequence: &str,
    offset: usize,
    tau: f64,
    eta: f64,
    span: usize,
) -> Result<Vec<f64>, JsValue> {
    js(transfer_norms(theta, phi, sequence, offset, tau, eta, span))
}

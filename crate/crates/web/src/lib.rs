//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export returns a flat `Float64Array`; the page slices it into
//! points. The plain Rust functions behind them are usable natively.

use rickerpp::orbit::{lyapunov1, sweep, SweepOptions, DEFAULT_TRANSIENT, MIN_LYAPUNOV_N};
use rickerpp::{iterate, Coefficients, State};
use wasm_bindgen::prelude::*;

/// Upper bounds that keep a single call interactive.
pub const MAX_ORBIT_POINTS: usize = 1_000_000;
pub const MAX_SWEEP_POINTS: usize = 2_000_000;
pub const MAX_LYAPUNOV_WORK: usize = 200_000_000;

fn coefficients(b0: f64, gamma: f64, c: f64, s: f64) -> Result<Coefficients, String> {
    Coefficients::new(b0, gamma, c, s).map_err(|e| e.to_string())
}

/// Iterates `transient + 1 ..= transient + n` from `(x0, y0)`, as `[x, y, x, y, ...]`.
#[allow(clippy::too_many_arguments)]
pub fn orbit_points(
    r: f64,
    b0: f64,
    gamma: f64,
    c: f64,
    s: f64,
    x0: f64,
    y0: f64,
    n: usize,
    transient: usize,
) -> Result<Vec<f64>, String> {
    if n > MAX_ORBIT_POINTS {
        return Err(format!("n = {n} exceeds {MAX_ORBIT_POINTS}"));
    }
    let p = coefficients(b0, gamma, c, s)?.at(r).map_err(|e| e.to_string())?;
    let start = State::new(x0, y0).map_err(|e| e.to_string())?;
    let orbit = iterate(&p, start, n, transient).map_err(|e| e.to_string())?;
    Ok(orbit.samples.iter().flat_map(|q| [q.x, q.y]).collect())
}

/// Bifurcation diagram data as `[r, x, r, x, ...]`: the last `m` prey
/// values at each of `steps` parameters.
#[allow(clippy::too_many_arguments)]
pub fn bifurcation_points(
    b0: f64,
    gamma: f64,
    c: f64,
    s: f64,
    r_from: f64,
    r_to: f64,
    steps: usize,
    m: usize,
    transient: usize,
) -> Result<Vec<f64>, String> {
    if steps.saturating_mul(m) > MAX_SWEEP_POINTS {
        return Err(format!("steps * m exceeds {MAX_SWEEP_POINTS}"));
    }
    let k = coefficients(b0, gamma, c, s)?;
    let opts = SweepOptions {
        transient,
        with_period: false,
        parallel: false,
        ..SweepOptions::default()
    };
    let rows = sweep(&k, r_from, r_to, steps, m, &opts).map_err(|e| e.to_string())?;
    Ok(rows
        .iter()
        .flat_map(|row| row.attractor_samples.iter().flat_map(move |q| [row.r, q.x]))
        .collect())
}

/// `[r, λ1, r, λ1, ...]` on a uniform grid; failed points give NaN.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_points(
    b0: f64,
    gamma: f64,
    c: f64,
    s: f64,
    r_from: f64,
    r_to: f64,
    steps: usize,
    n: usize,
) -> Result<Vec<f64>, String> {
    if steps < 2 {
        return Err("steps must be at least 2".into());
    }
    if n < MIN_LYAPUNOV_N {
        return Err(format!("n must be at least {MIN_LYAPUNOV_N}"));
    }
    if steps.saturating_mul(n) > MAX_LYAPUNOV_WORK {
        return Err(format!("steps * n exceeds {MAX_LYAPUNOV_WORK}"));
    }
    let k = coefficients(b0, gamma, c, s)?;
    let mut out = Vec::with_capacity(2 * steps);
    for i in 0..steps {
        let r = if i + 1 == steps {
            r_to
        } else {
            r_from + (r_to - r_from) * i as f64 / (steps - 1) as f64
        };
        let lam = k
            .at(r)
            .and_then(|p| lyapunov1(&p, rickerpp::orbit::DEFAULT_START, n, DEFAULT_TRANSIENT))
            .map_or(f64::NAN, |e| e.lambda1);
        out.extend([r, lam]);
    }
    Ok(out)
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn orbit(
    r: f64,
    b0: f64,
    gamma: f64,
    c: f64,
    s: f64,
    x0: f64,
    y0: f64,
    n: usize,
    transient: usize,
) -> Result<Vec<f64>, JsError> {
    orbit_points(r, b0, gamma, c, s, x0, y0, n, transient).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn bifurcation(
    b0: f64,
    gamma: f64,
    c: f64,
    s: f64,
    r_from: f64,
    r_to: f64,
    steps: usize,
    m: usize,
    transient: usize,
) -> Result<Vec<f64>, JsError> {
    bifurcation_points(b0, gamma, c, s, r_from, r_to, steps, m, transient).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_curve(
    b0: f64,
    gamma: f64,
    c: f64,
    s: f64,
    r_from: f64,
    r_to: f64,
    steps: usize,
    n: usize,
) -> Result<Vec<f64>, JsError> {
    lyapunov_points(b0, gamma, c, s, r_from, r_to, steps, n).map_err(|e| JsError::new(&e))
}

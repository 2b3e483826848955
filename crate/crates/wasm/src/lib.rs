//! Flat `Float64Array` views of the core computations for a static web page.

use beb_core::analysis::{attractor_points, sweep_gamma_l, SweepConfig};
use beb_core::onedmap::{eval_f_power, grid};
use beb_core::{ReturnMap, Settings, SystemParams};
use wasm_bindgen::prelude::*;

fn map_for(gamma_l: f64, mu: f64) -> Result<ReturnMap, String> {
    let params = SystemParams { gamma_l, mu, ..SystemParams::default() };
    ReturnMap::new(params, Settings::default()).map_err(|e| e.to_string())
}

/// `[x0, d0, x1, d1, ...]` for `n` iterates after a transient of 500.
pub fn attractor_xd(gamma_l: f64, mu: f64, n: usize) -> Result<Vec<f64>, String> {
    let map = map_for(gamma_l, mu)?;
    let start = map.g(-0.001 * mu).map_err(|e| e.to_string())?;
    let pts = attractor_points(&map, start, 500, n).map_err(|e| e.to_string())?;
    Ok(pts.iter().flat_map(|&p| {
        let (x, d) = map.plot_coords(p);
        [x, d]
    }).collect())
}

/// `[x, f(x), f^k(x)]` triples on a grid over `[a, b]`; failed points are NaN.
pub fn profile(gamma_l: f64, a: f64, b: f64, n: usize, power: usize) -> Result<Vec<f64>, String> {
    if !(a < b) || n < 2 {
        return Err("need a < b and at least two grid points".into());
    }
    let map = map_for(gamma_l, 1.0)?;
    Ok(grid(a, b, n)
        .into_iter()
        .flat_map(|x| {
            let f1 = eval_f_power(&map, x, 1).unwrap_or(f64::NAN);
            let fk = eval_f_power(&map, x, power).unwrap_or(f64::NAN);
            [x, f1, fk]
        })
        .collect())
}

/// `[param, x]` pairs of a `gamma_L` bifurcation diagram at `mu = 1`.
pub fn sweep(a: f64, b: f64, steps: usize, n_transient: usize, n_keep: usize) -> Result<Vec<f64>, String> {
    if !(0.0 < a && a < b) || steps < 2 {
        return Err("need 0 < a < b and at least two steps".into());
    }
    let cfg = SweepConfig { n_transient, n_keep, lyapunov_n: 0, chunks: 1, ..SweepConfig::default() };
    let recs = sweep_gamma_l(SystemParams::default(), Settings::default(), (a, b), steps, &cfg);
    Ok(recs.iter().flat_map(|r| r.samples.iter().flat_map(move |&x| [r.param, x])).collect())
}

#[wasm_bindgen]
pub fn attractor(gamma_l: f64, mu: f64, n: usize) -> Result<Vec<f64>, JsError> {
    attractor_xd(gamma_l, mu, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn map_profile(gamma_l: f64, a: f64, b: f64, n: usize, power: usize) -> Result<Vec<f64>, JsError> {
    profile(gamma_l, a, b, n, power).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn gamma_sweep(a: f64, b: f64, steps: usize, n_transient: usize, n_keep: usize) -> Result<Vec<f64>, JsError> {
    sweep(a, b, steps, n_transient, n_keep).map_err(|e| JsError::new(&e))
}

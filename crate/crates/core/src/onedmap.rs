//! The one-dimensional reduction `f(x) = e1 · P(g(x))` and its diagnostics.

use crate::error::Result;
use crate::retmap::ReturnMap;
use crate::rootfind::golden_min;
use serde::{Deserialize, Serialize};
use std::io::Write;

pub fn eval_f(map: &ReturnMap, x: f64) -> Result<f64> {
    Ok(map.apply(map.g(x)?)?.x)
}

/// `f^n(x)`.
pub fn eval_f_power(map: &ReturnMap, x: f64, n: usize) -> Result<f64> {
    let mut y = x;
    for i in 0..n {
        y = eval_f(map, y).map_err(|e| e.at_iteration(i))?;
    }
    Ok(y)
}

/// Orbit `x0, f(x0), ..., f^n(x0)`.
pub fn iterate_f(map: &ReturnMap, x0: f64, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(x0);
    let mut x = x0;
    for i in 0..n {
        x = eval_f(map, x).map_err(|e| e.at_iteration(i))?;
        out.push(x);
    }
    Ok(out)
}

/// Central-difference step: `1e-7` times the scale `|mu|` of the attractor.
pub fn fd_step(map: &ReturnMap) -> f64 {
    1e-7 * map.params().mu.abs()
}

pub fn derivative_f(map: &ReturnMap, x: f64) -> Result<f64> {
    let h = fd_step(map);
    Ok((eval_f(map, x + h)? - eval_f(map, x - h)?) / (2.0 * h))
}

/// `x_i = a + i (b - a) / (n - 1)`.
pub fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

/// `f^n` on a grid, in parallel. Failed points are kept as errors.
pub fn eval_grid(map: &ReturnMap, xs: &[f64], n: usize) -> Vec<Result<f64>> {
    crate::par::map(xs, |&x| eval_f_power(map, x, n))
}

/// Indices `i` where the sign of the forward difference changes between
/// `[i-1, i]` and `[i, i+1]`.
pub fn difference_sign_changes(values: &[f64]) -> Vec<usize> {
    let d: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let mut out = Vec::new();
    let mut last: Option<(usize, f64)> = None;
    for (i, &di) in d.iter().enumerate() {
        if di == 0.0 {
            continue;
        }
        if let Some((_, s)) = last {
            if s * di < 0.0 {
                out.push(i);
            }
        }
        last = Some((i, di));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Minimum,
    Maximum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub x: f64,
    pub value: f64,
    pub kind: Extremum,
}

/// Interior critical points of `f` on `[a, b]`: grid brackets refined by
/// golden-section search.
pub fn critical_points(map: &ReturnMap, a: f64, b: f64, n_grid: usize) -> Result<Vec<CriticalPoint>> {
    let xs = grid(a, b, n_grid);
    let values = eval_grid(map, &xs, 1).into_iter().collect::<Result<Vec<f64>>>()?;
    let mut out = Vec::new();
    for i in difference_sign_changes(&values) {
        let kind = if values[i] < values[i - 1] { Extremum::Minimum } else { Extremum::Maximum };
        let sign = if kind == Extremum::Minimum { 1.0 } else { -1.0 };
        let (lo, hi) = (xs[i - 1], xs[(i + 1).min(xs.len() - 1)]);
        let (x, _) = golden_min(|x| eval_f(map, x).map_or(f64::INFINITY, |v| sign * v), lo, hi, 1e-12 * map.params().mu.abs());
        out.push(CriticalPoint { x, value: eval_f(map, x)?, kind });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub power: usize,
    pub a: f64,
    pub b: f64,
    pub grid: usize,
    pub min: f64,
    pub max: f64,
    pub image_a: f64,
    pub image_b: f64,
    /// Both endpoint images lie outside `[a, b]`.
    pub endpoints_outside: bool,
    /// `[min, max]` contains `[a, b]`.
    pub covers: bool,
    pub failures: usize,
}

impl CoveringReport {
    pub fn confirmed(&self) -> bool {
        self.endpoints_outside && self.covers && self.failures == 0
    }
}

/// Whether `f^n([a, b]) ⊇ [a, b]` with both endpoint images outside `[a, b]`.
pub fn covering_check(map: &ReturnMap, a: f64, b: f64, n: usize, n_grid: usize) -> CoveringReport {
    let xs = grid(a, b, n_grid.max(2));
    let values = eval_grid(map, &xs, n);
    let ok: Vec<f64> = values.iter().filter_map(|v| v.as_ref().ok().copied()).collect();
    let failures = values.len() - ok.len();
    let min = ok.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ok.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let image_a = values[0].clone().unwrap_or(f64::NAN);
    let image_b = values[values.len() - 1].clone().unwrap_or(f64::NAN);
    let outside = |y: f64| y < a || y > b;
    CoveringReport {
        power: n,
        a,
        b,
        grid: xs.len(),
        min,
        max,
        image_a,
        image_b,
        endpoints_outside: outside(image_a) && outside(image_b),
        covers: min <= a && max >= b,
        failures,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub value: f64,
    pub samples: usize,
    /// Orbit points skipped because `|f'| < 1e-14`.
    pub excluded: usize,
}

/// Mean of `log|f'|` along `n` iterates after `n_transient`.
pub fn lyapunov_f(map: &ReturnMap, x0: f64, n_transient: usize, n: usize) -> Result<LyapunovEstimate> {
    let mut x = x0;
    for i in 0..n_transient {
        x = eval_f(map, x).map_err(|e| e.at_iteration(i))?;
    }
    lyapunov_along(map, &iterate_f(map, x, n.saturating_sub(1))?)
}

/// Mean of `log|f'|` over the given points.
pub fn lyapunov_along(map: &ReturnMap, xs: &[f64]) -> Result<LyapunovEstimate> {
    let mut sum = 0.0;
    let mut used = 0;
    let mut excluded = 0;
    for &x in xs {
        let d = derivative_f(map, x)?.abs();
        if d < 1e-14 {
            excluded += 1;
        } else {
            sum += d.ln();
            used += 1;
        }
    }
    Ok(LyapunovEstimate { value: if used > 0 { sum / used as f64 } else { f64::NAN }, samples: used, excluded })
}

/// Grid values of `f^k` for each requested power, failures kept in place.
#[derive(Debug, Clone)]
pub struct MapProfile {
    pub grid: Vec<f64>,
    pub powers: Vec<usize>,
    /// `values[j][i]` is `f^{powers[j]}(grid[i])`.
    pub values: Vec<Vec<Result<f64>>>,
    pub critical_x: Option<f64>,
}

pub fn map_profile(map: &ReturnMap, a: f64, b: f64, n_grid: usize, powers: &[usize]) -> MapProfile {
    let xs = grid(a, b, n_grid);
    let values = powers.iter().map(|&k| eval_grid(map, &xs, k)).collect();
    let critical_x = critical_points(map, a, b, n_grid.clamp(3, 801)).ok().and_then(|c| c.first().map(|c| c.x));
    MapProfile { grid: xs, powers: powers.to_vec(), values, critical_x }
}

/// Columns `x, f1, f5, ..., status`; a failed point has `nan` values and
/// status `failed`.
pub fn write_profile_csv<W: Write>(mut w: W, profile: &MapProfile) -> std::io::Result<()> {
    let header: Vec<String> = profile.powers.iter().map(|k| format!("f{k}")).collect();
    writeln!(w, "x,{},status", header.join(","))?;
    for (i, x) in profile.grid.iter().enumerate() {
        let mut row = format!("{x:.16e}");
        let mut failed = false;
        for col in &profile.values {
            match &col[i] {
                Ok(v) => row.push_str(&format!(",{v:.16e}")),
                Err(_) => {
                    failed = true;
                    row.push_str(",nan");
                }
            }
        }
        writeln!(w, "{row},{}", if failed { "failed" } else { "ok" })?;
    }
    Ok(())
}

//! Attractor sampling, period detection, trapping regions and parameter sweeps.

use crate::error::{BebError, Result};
use crate::hybrid::{extract_section_sequence, simulate, SimOptions};
use crate::linalg3::Vec3;
use crate::onedmap::{derivative_f, grid, lyapunov_f};
use crate::retmap::ReturnMap;
use crate::settings::Settings;
use crate::system::{System, SystemParams};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// `n_keep` iterates of `P` from `g(x0)` after discarding `n_transient`.
pub fn attractor_points(map: &ReturnMap, start: Vec3, n_transient: usize, n_keep: usize) -> Result<Vec<Vec3>> {
    let mut p = start;
    for i in 0..n_transient {
        p = map.apply(p).map_err(|e| e.at_iteration(i))?;
    }
    let mut out = Vec::with_capacity(n_keep);
    for i in 0..n_keep {
        p = map.apply(p).map_err(|e| e.at_iteration(n_transient + i))?;
        out.push(p);
    }
    Ok(out)
}

pub fn attractor_samples(map: &ReturnMap, x0: f64, n_transient: usize, n_keep: usize) -> Result<Vec<f64>> {
    Ok(attractor_points(map, map.g(x0)?, n_transient, n_keep)?.iter().map(|p| p.x).collect())
}

/// Smallest `k <= max_period` with `|x_{i+k} - x_i| < tol` for every `i`.
pub fn detect_period(samples: &[f64], tol: f64, max_period: usize) -> Option<usize> {
    if samples.len() < 3 * max_period.max(1) {
        return None;
    }
    (1..=max_period).find(|&k| samples.iter().zip(&samples[k..]).all(|(a, b)| (a - b).abs() < tol))
}

/// Axis-aligned box in plotting coordinates `(x, y - e2·g(x))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapRegion {
    pub x_min: f64,
    pub x_max: f64,
    pub d_min: f64,
    pub d_max: f64,
}

impl TrapRegion {
    /// Bounding box of `points` (on the section) grown by `inflate` times
    /// its width in each direction, split evenly between the two sides.
    pub fn around(map: &ReturnMap, points: &[Vec3], inflate: f64) -> Option<Self> {
        let mut b = TrapRegion { x_min: f64::INFINITY, x_max: f64::NEG_INFINITY, d_min: f64::INFINITY, d_max: f64::NEG_INFINITY };
        for &p in points {
            let (x, d) = map.plot_coords(p);
            b.x_min = b.x_min.min(x);
            b.x_max = b.x_max.max(x);
            b.d_min = b.d_min.min(d);
            b.d_max = b.d_max.max(d);
        }
        let (wx, wd) = (b.x_max - b.x_min, b.d_max - b.d_min);
        if !(wx > 0.0 && wd > 0.0) {
            return None;
        }
        Some(TrapRegion {
            x_min: b.x_min - 0.5 * inflate * wx,
            x_max: b.x_max + 0.5 * inflate * wx,
            d_min: b.d_min - 0.5 * inflate * wd,
            d_max: b.d_max + 0.5 * inflate * wd,
        })
    }

    /// Like [`TrapRegion::around`], but the total horizontal padding
    /// `inflate * width` is split between the left and right sides in the
    /// ratio `1 : max(1, 2 s)`, where `s = |f'(x_min)|`. The left end of the
    /// attractor maps to its right end, so the right side needs the larger
    /// share when `f` expands there.
    pub fn around_balanced(map: &ReturnMap, points: &[Vec3], inflate: f64) -> Result<Option<Self>> {
        let Some(sym) = Self::around(map, points, inflate) else {
            return Ok(None);
        };
        let wx = sym.width() / (1.0 + inflate);
        let (x_lo, x_hi) = (sym.x_min + 0.5 * inflate * wx, sym.x_max - 0.5 * inflate * wx);
        let s = derivative_f(map, x_lo)?.abs();
        let ratio = (2.0 * s).max(1.0);
        let left = inflate * wx / (1.0 + ratio);
        Ok(Some(TrapRegion { x_min: x_lo - left, x_max: x_hi + ratio * left, ..sym }))
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.d_max - self.d_min
    }

    /// Smallest distance to the boundary relative to the side lengths;
    /// negative outside.
    pub fn relative_margin(&self, x: f64, d: f64) -> f64 {
        let mx = (x - self.x_min).min(self.x_max - x) / self.width();
        let md = (d - self.d_min).min(self.d_max - d) / self.height();
        mx.min(md)
    }

    /// `n` points spread along the perimeter, proportionally to the
    /// relative side lengths (both axes normalised), corners included.
    pub fn boundary(&self, n: usize) -> Vec<(f64, f64)> {
        let per_side = (n / 4).max(1);
        let mut out = Vec::with_capacity(4 * per_side);
        for k in 0..per_side {
            let s = k as f64 / per_side as f64;
            out.push((self.x_min + s * self.width(), self.d_min));
            out.push((self.x_max, self.d_min + s * self.height()));
            out.push((self.x_max - s * self.width(), self.d_max));
            out.push((self.x_min, self.d_max - s * self.height()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapReport {
    pub region: TrapRegion,
    pub boundary_points: usize,
    pub contained: bool,
    /// Smallest relative inward margin of an image (negative when outside).
    pub min_margin: f64,
    /// Boundary point whose image has the smallest margin.
    pub worst_point: (f64, f64),
    pub worst_image: (f64, f64),
    /// Boundary points where `P` could not be evaluated, with the error.
    pub failures: Vec<((f64, f64), String)>,
}

/// Maps points of `∂T` through `P` and checks that every image lies in the
/// interior of `T`.
pub fn trap_check(map: &ReturnMap, region: &TrapRegion, n_boundary: usize) -> TrapReport {
    let pts = region.boundary(n_boundary);
    let results = crate::par::map(&pts, |&(x, d)| map.apply(map.from_plot_coords(x, d)).map(|p| map.plot_coords(p)));
    let mut report = TrapReport {
        region: *region,
        boundary_points: pts.len(),
        contained: true,
        min_margin: f64::INFINITY,
        worst_point: (f64::NAN, f64::NAN),
        worst_image: (f64::NAN, f64::NAN),
        failures: Vec::new(),
    };
    for (&pt, r) in pts.iter().zip(results) {
        match r {
            Ok((x, d)) => {
                let m = region.relative_margin(x, d);
                if m < report.min_margin {
                    report.min_margin = m;
                    report.worst_point = pt;
                    report.worst_image = (x, d);
                }
            }
            Err(e) => report.failures.push((pt, e.to_string())),
        }
    }
    report.contained = report.failures.is_empty() && report.min_margin > 0.0;
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub param: f64,
    pub samples: Vec<f64>,
    pub period: Option<usize>,
    pub lyapunov: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub n_transient: usize,
    pub n_keep: usize,
    /// Period tolerance, in units of `|mu|`.
    pub tol: f64,
    pub max_period: usize,
    /// Initial condition `g(x0 * |mu|)` for the first point of each chunk.
    pub x0: f64,
    /// Contiguous chunks, each continued serially; chunks run in parallel.
    pub chunks: usize,
    pub warm_start: bool,
    /// Iterates of the one-dimensional map for the Lyapunov estimate (0 disables).
    pub lyapunov_n: usize,
    /// Simulated time used to settle onto the equilibrium for `mu < 0`.
    pub settle_time: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_transient: 2000,
            n_keep: 500,
            tol: 1e-7,
            max_period: 32,
            x0: -0.001,
            chunks: 8,
            warm_start: true,
            lyapunov_n: 1000,
            settle_time: 600.0,
        }
    }
}

/// Runs `point` over `values` in `chunks` contiguous blocks; inside a block
/// the state returned by one point seeds the next. Blocks are traversed
/// from the last value to the first; output is in the order of `values`.
fn chunked<S, F>(values: &[f64], chunks: usize, point: F) -> Vec<SweepRecord>
where
    S: Clone + Send,
    F: Fn(f64, Option<S>) -> (SweepRecord, Option<S>) + Sync,
{
    let chunks = chunks.clamp(1, values.len().max(1));
    let size = values.len().div_ceil(chunks);
    let blocks: Vec<&[f64]> = values.chunks(size.max(1)).collect();
    let mut out: Vec<SweepRecord> = crate::par::map(&blocks, |block| {
        let mut state: Option<S> = None;
        let mut recs: Vec<SweepRecord> = block
            .iter()
            .rev()
            .map(|&v| {
                let (rec, next) = point(v, state.take());
                state = next;
                rec
            })
            .collect();
        recs.reverse();
        recs
    })
    .into_iter()
    .flatten()
    .collect();
    out.sort_by(|a, b| a.param.total_cmp(&b.param));
    out
}

fn failed(param: f64, e: BebError) -> SweepRecord {
    SweepRecord { param, samples: vec![], period: None, lyapunov: None, error: Some(e.to_string()) }
}

/// Bifurcation sweep over `gamma_L` with `steps` grid points in `[a, b]`.
pub fn sweep_gamma_l(base: SystemParams, settings: Settings, range: (f64, f64), steps: usize, cfg: &SweepConfig) -> Vec<SweepRecord> {
    let values = grid(range.0, range.1, steps);
    let scale = base.mu.abs();
    chunked(&values, cfg.chunks, |gl, warm: Option<Vec3>| {
        let run = || -> Result<(SweepRecord, Vec3)> {
            let map = ReturnMap::new(base.with_gamma_l(gl), settings)?;
            let start = match warm.filter(|_| cfg.warm_start) {
                Some(p) => p,
                None => map.g(cfg.x0 * scale)?,
            };
            let pts = attractor_points(&map, start, cfg.n_transient, cfg.n_keep)?;
            let samples: Vec<f64> = pts.iter().map(|p| p.x).collect();
            let period = detect_period(&samples, cfg.tol * scale, cfg.max_period);
            let lyapunov = if cfg.lyapunov_n > 0 {
                Some(lyapunov_f(&map, samples[samples.len() - 1], 0, cfg.lyapunov_n)?.value)
            } else {
                None
            };
            Ok((SweepRecord { param: gl, samples, period, lyapunov, error: None }, pts[pts.len() - 1]))
        };
        match run() {
            Ok((rec, last)) => (rec, Some(last)),
            Err(e) => (failed(gl, e), None),
        }
    })
}

/// Equilibrium of the left piece with the quadratic term, by Newton's
/// method from `guess`.
pub fn nonlinear_left_equilibrium(sys: &System, guess: Vec3) -> Result<Vec3> {
    let c = sys.c_left;
    let mut p = guess;
    for _ in 0..50 {
        let mut f = sys.piece_field(crate::system::Side::Left, p);
        f.x += p.x * p.y;
        let mut j = c;
        j.0[0][0] += p.y;
        j.0[0][1] += p.x;
        let step = j.inverse().ok_or_else(|| BebError::InvalidParams("singular Jacobian".into()))?.mul_vec(f);
        p = p - step;
        if step.norm() <= 1e-15 * p.norm().max(1e-300) {
            break;
        }
    }
    Ok(p)
}

/// Settled state of the nonlinear system at `mu < 0`: simulate from the
/// piecewise-linear equilibrium for `settle_time`, then polish.
pub fn settled_equilibrium(params: SystemParams, settings: Settings, settle_time: f64) -> Result<Vec3> {
    let sys = System::new(params)?;
    let opts = SimOptions { sample_dt: f64::INFINITY, force_rk: false };
    let segs = simulate(&sys, settings, opts, sys.x_left.location, settle_time)?;
    let end = segs.last().map(|s| s.end).unwrap_or(sys.x_left.location);
    nonlinear_left_equilibrium(&sys, end)
}

/// Bifurcation sweep over `mu` for the system with the quadratic term.
///
/// `mu < 0`: one sample, the settled equilibrium. `mu = 0`: the origin.
/// `mu > 0`: section points of the simulated orbit.
pub fn sweep_mu(base: SystemParams, settings: Settings, range: (f64, f64), steps: usize, cfg: &SweepConfig) -> Vec<SweepRecord> {
    let values = grid(range.0, range.1, steps);
    chunked(&values, cfg.chunks, |mu, warm: Option<f64>| {
        let params = base.with_mu(mu);
        if mu < 0.0 {
            return match settled_equilibrium(params, settings, cfg.settle_time) {
                Ok(p) => (SweepRecord { param: mu, samples: vec![p.x], period: Some(1), lyapunov: None, error: None }, None),
                Err(e) => (failed(mu, e), None),
            };
        }
        if mu == 0.0 {
            return (SweepRecord { param: mu, samples: vec![0.0], period: Some(1), lyapunov: None, error: None }, None);
        }
        let run = || -> Result<(SweepRecord, f64)> {
            let sys = System::new(params)?;
            let map = ReturnMap::new(params, settings)?;
            let ratio = warm.filter(|_| cfg.warm_start).unwrap_or(cfg.x0);
            let start = map.g(ratio * mu)?;
            let count = cfg.n_transient + cfg.n_keep;
            let limit = 50.0 * count as f64 * map.right_period();
            let seq = extract_section_sequence(&map, &sys, start, count, limit)?;
            let samples: Vec<f64> = seq[cfg.n_transient..].iter().map(|s| s.point.x).collect();
            let period = detect_period(&samples, cfg.tol * mu, cfg.max_period);
            let last = samples[samples.len() - 1] / mu;
            Ok((SweepRecord { param: mu, samples, period, lyapunov: None, error: None }, last))
        };
        match run() {
            Ok((rec, last)) => (rec, Some(last)),
            Err(e) => (failed(mu, e), None),
        }
    })
}

/// Columns `param, sample_index, x, period, lyapunov`; absent values are
/// empty. A failed point is one row with `sample_index = -1` and `x = nan`.
pub fn write_sweep_csv<W: Write>(mut w: W, records: &[SweepRecord]) -> std::io::Result<()> {
    writeln!(w, "param,sample_index,x,period,lyapunov")?;
    for r in records {
        let period = r.period.map(|p| p.to_string()).unwrap_or_default();
        let lyap = r.lyapunov.map(|l| format!("{l:.16e}")).unwrap_or_default();
        if r.error.is_some() {
            writeln!(w, "{:.16e},-1,nan,{period},{lyap}", r.param)?;
            continue;
        }
        for (i, x) in r.samples.iter().enumerate() {
            writeln!(w, "{:.16e},{i},{x:.16e},{period},{lyap}", r.param)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn period_of_simple_sequences() {
        assert_eq!(detect_period(&[0.3; 12], 1e-9, 4), Some(1));
        let two: Vec<f64> = (0..12).map(|i| if i % 2 == 0 { 1.0 } else { 2.0 }).collect();
        assert_eq!(detect_period(&two, 1e-9, 4), Some(2));
        let ramp: Vec<f64> = (0..12).map(|i| i as f64).collect();
        assert_eq!(detect_period(&ramp, 1e-9, 4), None);
        assert_eq!(detect_period(&[1.0; 5], 1e-9, 4), None);
    }

    #[test]
    fn boundary_points_lie_on_the_box() {
        let t = TrapRegion { x_min: -1.0, x_max: 2.0, d_min: 0.0, d_max: 0.5 };
        let pts = t.boundary(100);
        assert_eq!(pts.len(), 100);
        for (x, d) in pts {
            assert!(t.relative_margin(x, d).abs() < 1e-12);
        }
    }

    #[test]
    fn chunk_order_is_by_parameter() {
        let values = grid(0.0, 1.0, 11);
        let recs = chunked(&values, 3, |v, prev: Option<f64>| {
            (SweepRecord { param: v, samples: vec![prev.unwrap_or(-1.0)], period: None, lyapunov: None, error: None }, Some(v))
        });
        let params: Vec<f64> = recs.iter().map(|r| r.param).collect();
        assert_eq!(params, values);
        // the last value of every chunk starts cold, the others are seeded by their right neighbour
        assert_eq!(recs[10].samples[0], -1.0);
        assert_eq!(recs[9].samples[0], values[10]);
    }
}

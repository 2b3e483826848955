//! The return map `P = P_global ∘ P_disc` on the section `Pi`.
//!
//! A point `X0` of `Pi` is a (possibly virtual) section crossing of an orbit
//! of the right half-flow. The discontinuity map finds the outgoing
//! switching crossing `X1` associated with it, follows the left half-flow to
//! the return `X3`, and flows the right half-flow backwards from `X3` to the
//! section at `X4`. The global map then advances `X4` by one revolution,
//! which in section coordinates is a pair of scalings.

use crate::error::{BebError, Result};
use crate::flow::{first_crossing, min_plane_value, scan_crossings, CrossingQuery, Direction, HalfFlow, Plane, Surface};
use crate::linalg3::Vec3;
use crate::settings::Settings;
use crate::system::{section_geometry, SectionGeometry, System, SystemParams};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Coordinates of a point of `Pi`: `X = X_R + c1 (X_R - X_int) + c2 v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionPoint {
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPoint {
    pub point: Vec3,
    /// Signed time relative to the previous labelled point of the trace.
    pub time: f64,
}

/// Labelled points of one discontinuity-map evaluation. Times: `x1` is
/// relative to `x0`, `x3` to `x1`, `x4` to `x3`, `x2` to `x1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscontinuityTrace {
    pub x0: Vec3,
    pub identity: bool,
    pub x1: Option<TimedPoint>,
    pub x2: Option<TimedPoint>,
    pub x3: Option<TimedPoint>,
    pub x4: Vec3,
    /// Number of outgoing switching crossings seen in the excursion window
    /// beyond the one that was used.
    pub ambiguous: usize,
}

/// Return map together with the cached flows and section geometry.
#[derive(Debug, Clone)]
pub struct ReturnMap {
    pub system: System,
    pub geometry: SectionGeometry,
    pub settings: Settings,
    left: HalfFlow,
    right: HalfFlow,
    section: Plane,
    /// Orientation (sign of `normal · velocity`) of section crossings near `X_int`.
    near_orientation: f64,
    growth: f64,
    decay: f64,
    gram_inv: [[f64; 2]; 2],
}

impl ReturnMap {
    pub fn new(params: SystemParams, settings: Settings) -> Result<Self> {
        let system = System::new(params)?;
        if params.mu <= 0.0 {
            return Err(BebError::InvalidParams(format!(
                "the return map needs a saddle-focus on the right (mu > 0), got mu = {}",
                params.mu
            )));
        }
        let geometry = section_geometry(&params)?;
        let left = HalfFlow::left(&system);
        let right = HalfFlow::right(&system);
        let section = Plane { normal: geometry.normal, point: geometry.x_r };
        let near_orientation = geometry.normal.dot(right.velocity(geometry.x_int)).signum();
        let (s, v) = (geometry.span1, geometry.v);
        let (a, b, d) = (s.dot(s), s.dot(v), v.dot(v));
        let det = a * d - b * b;
        if !(det > 1e-14 * a * d) {
            return Err(BebError::DegenerateSection("spanning directions are nearly parallel".into()));
        }
        let gram_inv = [[d / det, -b / det], [-b / det, a / det]];
        let (ar, br, gr) = (params.alpha_r, params.beta_r, params.gamma_r);
        Ok(Self {
            system,
            geometry,
            settings,
            left,
            right,
            section,
            near_orientation,
            growth: (2.0 * PI * ar / br).exp(),
            decay: (-2.0 * PI * gr / br).exp(),
            gram_inv,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.system.params
    }

    pub fn left_flow(&self) -> &HalfFlow {
        &self.left
    }

    pub fn right_flow(&self) -> &HalfFlow {
        &self.right
    }

    pub fn section_plane(&self) -> &Plane {
        &self.section
    }

    pub fn near_orientation(&self) -> f64 {
        self.near_orientation
    }

    /// `(e^{2π α_R/β_R}, e^{-2π γ_R/β_R})`.
    pub fn global_multipliers(&self) -> (f64, f64) {
        (self.growth, self.decay)
    }

    pub fn right_period(&self) -> f64 {
        self.right.rotation_period()
    }

    fn scale(&self) -> f64 {
        self.geometry.x_r.norm().max(self.geometry.x_int.norm())
    }

    /// Section coordinates of a point of `Pi` (least squares in the spanning
    /// directions; the out-of-plane residual must be below `1e-8` relative).
    pub fn chart(&self, p: Vec3) -> Result<SectionPoint> {
        let r = p - self.geometry.x_r;
        let residual = self.section.value(p).abs();
        if residual > 1e-8 * self.scale().max(p.norm()) {
            return Err(BebError::OffSection { residual });
        }
        let (bs, bv) = (self.geometry.span1.dot(r), self.geometry.v.dot(r));
        let g = &self.gram_inv;
        Ok(SectionPoint { c1: g[0][0] * bs + g[0][1] * bv, c2: g[1][0] * bs + g[1][1] * bv })
    }

    pub fn unchart(&self, s: SectionPoint) -> Vec3 {
        self.geometry.x_r + self.geometry.span1 * s.c1 + self.geometry.v * s.c2
    }

    pub fn global_map(&self, s: SectionPoint) -> SectionPoint {
        SectionPoint { c1: self.growth * s.c1, c2: self.decay * s.c2 }
    }

    /// Horizontal and vertical plotting coordinates `(x, y - e2·g(x))`.
    pub fn plot_coords(&self, p: Vec3) -> (f64, f64) {
        let p_ = &self.system.params;
        (p.x, p.y - (p_.gamma_r - 2.0 * p_.alpha_r) * p.x)
    }

    /// Point of `Pi` with the given plotting coordinates.
    pub fn from_plot_coords(&self, x: f64, d: f64) -> Vec3 {
        let p_ = &self.system.params;
        let k = p_.gamma_r - 2.0 * p_.alpha_r;
        let (xr, s, v) = (self.geometry.x_r, self.geometry.span1, self.geometry.v);
        // x  = xr.x + c1 s.x + c2 v.x
        // d  = (xr.y - k xr.x) + c1 (s.y - k s.x) + c2 (v.y - k v.x)
        let (a11, a12, b1) = (s.x, v.x, x - xr.x);
        let (a21, a22, b2) = (s.y - k * s.x, v.y - k * v.x, d - (xr.y - k * xr.x));
        let det = a11 * a22 - a12 * a21;
        let c1 = (b1 * a22 - a12 * b2) / det;
        let c2 = (a11 * b2 - a21 * b1) / det;
        self.unchart(SectionPoint { c1, c2 })
    }

    fn right_step(&self) -> f64 {
        self.right.rotation_period() / self.settings.scan_divisions as f64
    }

    fn left_step(&self) -> f64 {
        self.left.rotation_period() / self.settings.scan_divisions as f64
    }

    pub(crate) fn excursion_half_window(&self) -> f64 {
        self.settings.excursion_window * self.right.rotation_period()
    }

    /// Outgoing switching crossings (x decreasing) of the right-flow orbit
    /// through `p` with `|t|` inside the excursion window, sorted by `|t|`.
    pub(crate) fn outgoing_crossings_near(&self, p: Vec3) -> Vec<TimedPoint> {
        let w = self.excursion_half_window();
        let mut found = Vec::new();
        for direction in [Direction::Forward, Direction::Backward] {
            let q = CrossingQuery::new(Plane::switching(), Surface::SwitchingPlane, direction, w, self.right_step())
                .orientation(-1.0)
                .min_time(0.0)
                .graze_tol(self.settings.graze_tol)
                .skip_tangential();
            scan_crossings(&self.right, p, &q, |c| {
                if let Some(e) = c.transversal() {
                    found.push(TimedPoint { point: e.point, time: e.time });
                }
                false
            });
        }
        found.sort_by(|a, b| a.time.abs().total_cmp(&b.time.abs()));
        found
    }

    /// Near-side section crossing of the right-flow orbit through `p`
    /// closest in time, searching both directions within the excursion window.
    pub(crate) fn nearest_section_crossing(&self, p: Vec3) -> Option<TimedPoint> {
        let w = self.excursion_half_window();
        [Direction::Forward, Direction::Backward]
            .into_iter()
            .filter_map(|direction| {
                let q = CrossingQuery::new(self.section, Surface::Section, direction, w, self.right_step())
                    .orientation(self.near_orientation)
                    .min_time(0.0)
                    .graze_tol(0.0)
                    .skip_tangential();
                first_crossing(&self.right, p, &q).and_then(|c| c.transversal())
            })
            .min_by(|a, b| a.time.abs().total_cmp(&b.time.abs()))
            .map(|e| TimedPoint { point: e.point, time: e.time })
    }

    pub fn disc_map(&self, x0: Vec3) -> Result<DiscontinuityTrace> {
        let crossings = self.outgoing_crossings_near(x0);
        let Some(x1) = crossings.first().copied() else {
            let w = self.excursion_half_window();
            let (min_x, _) = min_plane_value(&self.right, x0, &Plane::switching(), -w, w, self.right_step());
            if min_x < -self.settings.graze_tol {
                return Err(BebError::UnassociatedExcursion { point: x0 });
            }
            return Ok(DiscontinuityTrace { x0, identity: true, x1: None, x2: None, x3: None, x4: x0, ambiguous: 0 });
        };

        let bound = self.settings.left_return_periods * self.left.rotation_period();
        let q = CrossingQuery::new(Plane::switching(), Surface::SwitchingPlane, Direction::Forward, bound, self.left_step())
            .orientation(1.0)
            .min_time(self.settings.min_time)
            .graze_tol(self.settings.graze_tol)
            .skip_tangential();
        let x3 = first_crossing(&self.left, x1.point, &q)
            .and_then(|c| c.transversal())
            .ok_or(BebError::ExcursionEscape { start: x1.point, bound })?;

        let q = CrossingQuery::new(self.section, Surface::Section, Direction::Forward, x3.time, self.left_step())
            .min_time(0.0)
            .graze_tol(0.0)
            .skip_tangential();
        let x2 = first_crossing(&self.left, x1.point, &q)
            .and_then(|c| c.transversal())
            .map(|e| TimedPoint { point: e.point, time: e.time });

        let q = CrossingQuery::new(self.section, Surface::Section, Direction::Backward, self.right_period(), self.right_step())
            .orientation(self.near_orientation)
            .min_time(0.0)
            .graze_tol(0.0)
            .skip_tangential();
        let x4 = first_crossing(&self.right, x3.point, &q)
            .and_then(|c| c.transversal())
            .ok_or(BebError::SectionMissed { point: x3.point })?;

        Ok(DiscontinuityTrace {
            x0,
            identity: false,
            x1: Some(x1),
            x2,
            x3: Some(TimedPoint { point: x3.point, time: x3.time }),
            x4: x4.point,
            ambiguous: crossings.len() - 1,
        })
    }

    /// `P(X0)` with the discontinuity trace that produced it.
    pub fn evaluate(&self, x0: Vec3) -> Result<(Vec3, DiscontinuityTrace)> {
        self.chart(x0)?;
        let trace = self.disc_map(x0)?;
        let s = self.chart(trace.x4)?;
        Ok((self.unchart(self.global_map(s)), trace))
    }

    pub fn apply(&self, x0: Vec3) -> Result<Vec3> {
        self.evaluate(x0).map(|(p, _)| p)
    }

    /// `n` iterates of `P` starting at `x0` (excluding `x0`).
    pub fn orbit(&self, x0: Vec3, n: usize) -> Result<Vec<Vec3>> {
        let mut out = Vec::with_capacity(n);
        let mut p = x0;
        for i in 0..n {
            p = self.apply(p).map_err(|e| e.at_iteration(i))?;
            out.push(p);
        }
        Ok(out)
    }

    /// Point of `Pi ∩ E^u` with first component `x`.
    pub fn g(&self, x: f64) -> Result<Vec3> {
        crate::system::line_g(&self.system.params, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map() -> ReturnMap {
        ReturnMap::new(SystemParams::default(), Settings::default()).unwrap()
    }

    #[test]
    fn chart_of_basis_points() {
        let m = map();
        let geo = m.geometry;
        let s = m.chart(geo.x_r).unwrap();
        assert!(s.c1.abs() < 1e-15 && s.c2.abs() < 1e-15);
        let s = m.chart(geo.x_int).unwrap();
        assert!((s.c1 + 1.0).abs() < 1e-14 && s.c2.abs() < 1e-14);
        let s = m.chart(geo.x_r + geo.v).unwrap();
        assert!(s.c1.abs() < 1e-14 && (s.c2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn chart_rejects_points_off_section() {
        let m = map();
        let p = m.geometry.x_r + m.geometry.normal * 1e-3;
        assert!(matches!(m.chart(p), Err(BebError::OffSection { .. })));
    }

    #[test]
    fn global_map_example_values() {
        let m = map();
        let s = m.global_map(SectionPoint { c1: 1.0, c2: 0.0 });
        assert!((s.c1 - 1.13390).abs() < 1e-5 && s.c2 == 0.0);
        let s = m.global_map(SectionPoint { c1: 0.0, c2: 1.0 });
        assert!(s.c1 == 0.0 && (s.c2 - 0.0018674).abs() < 1e-7);
        assert_eq!(m.global_map(SectionPoint { c1: 0.0, c2: 0.0 }), SectionPoint { c1: 0.0, c2: 0.0 });
    }

    #[test]
    fn fixed_point_at_right_equilibrium() {
        let m = map();
        let (p, trace) = m.evaluate(m.geometry.x_r).unwrap();
        assert!(trace.identity);
        assert!((p - m.geometry.x_r).norm() < 1e-14);
    }

    #[test]
    fn grazing_point_is_identity() {
        let m = map();
        let trace = m.disc_map(m.geometry.x_int).unwrap();
        assert!(trace.identity);
    }

    #[test]
    fn excursion_trace_is_consistent() {
        let m = map();
        let x0 = m.g(-0.002).unwrap();
        let (p, trace) = m.evaluate(x0).unwrap();
        assert!(!trace.identity);
        let x1 = trace.x1.unwrap();
        let x3 = trace.x3.unwrap();
        assert!(x1.point.x.abs() < 1e-10 && x3.point.x.abs() < 1e-10);
        assert!(m.right_flow().velocity(x1.point).x < 0.0);
        assert!(m.left_flow().velocity(x3.point).x > 0.0);
        assert!(m.section_plane().value(trace.x4).abs() < 1e-10);
        assert!(m.section_plane().value(p).abs() < 1e-10);
        // global map agrees with flowing X4 for one revolution
        let flowed = m.right_flow().flow(m.right_period(), trace.x4);
        assert!((flowed - p).norm() < 1e-9);
    }

    #[test]
    fn plot_coordinates_roundtrip() {
        let m = map();
        let p = m.unchart(SectionPoint { c1: -0.97, c2: 0.013 });
        let (x, d) = m.plot_coords(p);
        assert!((m.from_plot_coords(x, d) - p).norm() < 1e-13);
        // on E^u the vertical coordinate vanishes
        let (_, d) = m.plot_coords(m.g(-0.01).unwrap());
        assert!(d.abs() < 1e-15);
    }

    #[test]
    fn negative_mu_is_rejected() {
        assert!(ReturnMap::new(SystemParams::default().with_mu(-1.0), Settings::default()).is_err());
    }
}

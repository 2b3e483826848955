//! Full trajectories of the switched system and extraction of the real and
//! virtual section points they generate.
//!
//! Linear pieces are advanced by their exact flow. With the quadratic term
//! enabled the left piece is integrated by DOPRI5, switching events located
//! by bisection on the dense output.

use crate::error::{BebError, Result};
use crate::flow::{first_crossing, scan_crossings, CrossingQuery, Direction, HalfFlow, Plane, Surface};
use crate::linalg3::Vec3;
use crate::ode::{Dopri5, StepOutcome, Tolerances};
use crate::retmap::ReturnMap;
use crate::settings::Settings;
use crate::system::{Side, System};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySegment {
    pub side: Side,
    pub start: Vec3,
    pub end: Vec3,
    pub t_start: f64,
    pub t_end: f64,
    pub samples: Vec<(f64, Vec3)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Real,
    Virtual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualSectionPoint {
    pub point: Vec3,
    pub kind: PointKind,
    /// Switching crossing the point was generated from (virtual points only).
    pub source_event: Option<Vec3>,
    /// Time along the simulated orbit at which the point was produced.
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Spacing of the rendering samples stored in each segment.
    pub sample_dt: f64,
    /// Integrate every piece with the Runge-Kutta path, even linear ones.
    pub force_rk: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { sample_dt: 0.05, force_rk: false }
    }
}

/// Segment-by-segment simulator.
pub struct Simulator<'a> {
    sys: &'a System,
    settings: Settings,
    opts: SimOptions,
    left: HalfFlow,
    right: HalfFlow,
    pub t: f64,
    pub state: Vec3,
    side: Side,
}

fn initial_side(sys: &System, p: Vec3) -> Side {
    if p.x.abs() > 1e-13 * p.norm() {
        return Side::of(p.x);
    }
    // on the switching plane both pieces agree; follow the flow
    if sys.piece_field(Side::Right, p).x < 0.0 {
        Side::Left
    } else {
        Side::Right
    }
}

impl<'a> Simulator<'a> {
    pub fn new(sys: &'a System, settings: Settings, opts: SimOptions, start: Vec3) -> Self {
        Self {
            sys,
            settings,
            opts,
            left: HalfFlow::left(sys),
            right: HalfFlow::right(sys),
            t: 0.0,
            state: start,
            side: initial_side(sys, start),
        }
    }

    fn flow(&self, side: Side) -> &HalfFlow {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    fn uses_rk(&self, side: Side) -> bool {
        self.opts.force_rk || (self.sys.params.nonlinear && side == Side::Left)
    }

    fn check_escape(&self, p: Vec3, t: f64) -> Result<()> {
        if !p.is_finite() || p.norm() > self.settings.escape_bound {
            return Err(BebError::Escape { time: t, bound: self.settings.escape_bound });
        }
        Ok(())
    }

    /// Advances to the next switching event or to `t_max`, whichever is first.
    pub fn next_segment(&mut self, t_max: f64) -> Result<TrajectorySegment> {
        let side = self.side;
        let seg = if self.uses_rk(side) { self.rk_segment(side, t_max)? } else { self.exact_segment(side, t_max)? };
        self.t = seg.t_end;
        self.state = seg.end;
        if seg.t_end < t_max {
            self.side = match side {
                Side::Left => Side::Right,
                Side::Right => Side::Left,
            };
        }
        Ok(seg)
    }

    fn exact_segment(&self, side: Side, t_max: f64) -> Result<TrajectorySegment> {
        let h = self.flow(side);
        let (t0, x0) = (self.t, self.state);
        let leaving = match side {
            Side::Left => 1.0,
            Side::Right => -1.0,
        };
        let step = h.rotation_period() / self.settings.scan_divisions as f64;
        let span = t_max - t0;
        let exit = if span > 0.0 {
            let q = CrossingQuery::new(Plane::switching(), Surface::SwitchingPlane, Direction::Forward, span, step)
                .orientation(leaving)
                .min_time(self.settings.min_time.min(span / 2.0))
                .graze_tol(self.settings.graze_tol)
                .skip_tangential();
            first_crossing(h, x0, &q).and_then(|c| c.transversal())
        } else {
            None
        };
        let (dt, mut end) = match exit {
            Some(e) => (e.time, e.point),
            None => (span.max(0.0), h.flow(span.max(0.0), x0)),
        };
        if exit.is_some() {
            end.x = 0.0;
        }
        let mut samples = vec![(t0, x0)];
        let n = (dt / self.opts.sample_dt).floor() as usize;
        for k in 1..=n {
            let s = k as f64 * self.opts.sample_dt;
            if s >= dt {
                break;
            }
            let p = h.flow(s, x0);
            self.check_escape(p, t0 + s)?;
            samples.push((t0 + s, p));
        }
        self.check_escape(end, t0 + dt)?;
        if dt > 0.0 {
            samples.push((t0 + dt, end));
        }
        Ok(TrajectorySegment { side, start: x0, end, t_start: t0, t_end: t0 + dt, samples })
    }

    fn piece(&self, side: Side) -> impl Fn(Vec3) -> Vec3 + '_ {
        let nonlinear = self.sys.params.nonlinear && side == Side::Left;
        move |p: Vec3| {
            let mut f = self.sys.piece_field(side, p);
            if nonlinear {
                f.x += p.x * p.y;
            }
            f
        }
    }

    fn rk_segment(&self, side: Side, t_max: f64) -> Result<TrajectorySegment> {
        let (t0, x0) = (self.t, self.state);
        let outside = |x: f64| match side {
            Side::Left => x > 0.0,
            Side::Right => x < 0.0,
        };
        let tol = Tolerances { rtol: self.settings.rk_rtol, atol: self.settings.rk_atol };
        let mut rk = Dopri5::new(self.piece(side), t0, x0, tol);
        let mut samples = vec![(t0, x0)];
        let mut next_sample = t0 + self.opts.sample_dt;
        const SUB: usize = 4;
        while rk.t < t_max {
            let dense = match rk.step(t_max) {
                StepOutcome::Accepted(d) => d,
                StepOutcome::Underflow => return Err(BebError::StepUnderflow { time: rk.t, state: rk.y }),
            };
            self.check_escape(rk.y, rk.t)?;
            // look for the first sub-interval that ends outside the half-space
            let mut event = None;
            let mut lo = dense.t0;
            for k in 1..=SUB {
                let hi = if k == SUB { dense.t1() } else { dense.t0 + dense.h * k as f64 / SUB as f64 };
                if outside(dense.eval(hi).x) {
                    event = Some((lo, hi));
                    break;
                }
                lo = hi;
            }
            let stop = match event {
                Some((mut a, mut b)) => {
                    while b - a > self.settings.rk_event_tol {
                        let m = 0.5 * (a + b);
                        if outside(dense.eval(m).x) {
                            b = m;
                        } else {
                            a = m;
                        }
                    }
                    let tc = 0.5 * (a + b);
                    let mut p = dense.eval(tc);
                    p.x = 0.0;
                    Some((tc, p))
                }
                None => None,
            };
            let seg_end = stop.map_or(dense.t1(), |(tc, _)| tc);
            while next_sample < seg_end {
                samples.push((next_sample, dense.eval(next_sample)));
                next_sample += self.opts.sample_dt;
            }
            if let Some((tc, p)) = stop {
                samples.push((tc, p));
                return Ok(TrajectorySegment { side, start: x0, end: p, t_start: t0, t_end: tc, samples });
            }
        }
        if samples.last().map(|s| s.0) != Some(rk.t) && rk.t > t0 {
            samples.push((rk.t, rk.y));
        }
        Ok(TrajectorySegment { side, start: x0, end: rk.y, t_start: t0, t_end: rk.t, samples })
    }
}

/// Alternating segments from `start` over `[0, duration]`.
pub fn simulate(
    sys: &System,
    settings: Settings,
    opts: SimOptions,
    start: Vec3,
    duration: f64,
) -> Result<Vec<TrajectorySegment>> {
    if !(duration.is_finite() && duration >= 0.0) || !start.is_finite() {
        return Err(BebError::InvalidParams("duration and start point must be finite".into()));
    }
    let mut sim = Simulator::new(sys, settings, opts, start);
    let mut out = Vec::new();
    loop {
        let seg = sim.next_segment(duration)?;
        let done = seg.t_end >= duration;
        out.push(seg);
        if done {
            return Ok(out);
        }
    }
}

/// Writes `t,x,y,z,side` rows with 17 significant digits.
pub fn write_trajectory_csv<W: Write>(mut w: W, segments: &[TrajectorySegment]) -> std::io::Result<()> {
    writeln!(w, "t,x,y,z,side")?;
    let mut last_t = f64::NAN;
    for seg in segments {
        for &(t, p) in &seg.samples {
            if t == last_t {
                continue;
            }
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e},{}", t, p.x, p.y, p.z, seg.side.as_str())?;
            last_t = t;
        }
    }
    if segments.iter().all(|s| s.samples.is_empty()) {
        if let Some(s) = segments.first() {
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e},{}", s.t_start, s.start.x, s.start.y, s.start.z, s.side.as_str())?;
        }
    }
    Ok(())
}

/// Section points produced by the hybrid orbit of `start`.
///
/// Every exit from the right half-space is associated with the near-side
/// section crossing of its right-flow orbit closest in time (a virtual
/// point when the orbit leaves before reaching it). A section crossing of a
/// right segment is reported as a real point only when its right-flow orbit
/// makes no exit within the excursion window. Crossings farther than
/// `proximity * |mu|` from `X_int` are ignored.
///
/// When `start` lies on the section it is itself the first point and the
/// orbit is continued from its associated exit, as the return map does.
pub fn extract_section_sequence(map: &ReturnMap, sys: &System, start: Vec3, count: usize, time_limit: f64) -> Result<Vec<VirtualSectionPoint>> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return Ok(out);
    }
    let settings = map.settings;
    let geo = map.geometry;
    let radius = settings.proximity * sys.params.mu.abs();
    let near = |p: Vec3| (p - geo.x_int).norm() < radius;
    let mut sim_start = start;
    let on_section = map.section_plane().value(start).abs() <= 1e-10 * geo.x_r.norm().max(start.norm());
    let mut sim_t0 = 0.0;
    if on_section {
        let exits = map.outgoing_crossings_near(start);
        let kind = if exits.is_empty() && start.x >= 0.0 { PointKind::Real } else { PointKind::Virtual };
        out.push(VirtualSectionPoint { point: start, kind, source_event: exits.first().map(|e| e.point), time: 0.0 });
        if let Some(e) = exits.first() {
            sim_start = e.point;
            sim_start.x = 0.0;
            sim_t0 = e.time;
        }
    }
    let opts = SimOptions { sample_dt: f64::INFINITY, force_rk: false };
    let mut sim = Simulator::new(sys, settings, opts, sim_start);
    sim.t = sim_t0;
    let right = *map.right_flow();
    let step = right.rotation_period() / settings.scan_divisions as f64;
    let t_limit = sim_t0 + time_limit;
    while out.len() < count {
        if sim.t >= t_limit {
            return Err(BebError::Stalled { time: sim.t, found: out.len() });
        }
        let seg = sim.next_segment(t_limit)?;
        if seg.side != Side::Right {
            continue;
        }
        // real crossings inside the right segment
        let dt = seg.t_end - seg.t_start;
        if dt > 0.0 {
            let q = CrossingQuery::new(*map.section_plane(), Surface::Section, Direction::Forward, dt, step)
                .orientation(map.near_orientation())
                .min_time(settings.min_time)
                .graze_tol(0.0)
                .skip_tangential();
            let mut reals = Vec::new();
            scan_crossings(&right, seg.start, &q, |c| {
                if let Some(e) = c.transversal() {
                    reals.push(e);
                }
                false
            });
            for e in reals {
                if out.len() >= count {
                    break;
                }
                if near(e.point) && map.outgoing_crossings_near(e.point).is_empty() {
                    out.push(VirtualSectionPoint { point: e.point, kind: PointKind::Real, source_event: None, time: seg.t_start + e.time });
                }
            }
        }
        if seg.t_end < t_limit && out.len() < count {
            // seg.end is an exit to the left
            if let Some(tp) = map.nearest_section_crossing(seg.end) {
                if near(tp.point) {
                    out.push(VirtualSectionPoint {
                        point: tp.point,
                        kind: if tp.time > 0.0 { PointKind::Virtual } else { PointKind::Real },
                        source_event: Some(seg.end),
                        time: seg.t_end,
                    });
                }
            }
        }
    }
    Ok(out)
}

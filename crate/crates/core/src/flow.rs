//! Exact flows of the affine half-systems and first-crossing detection
//! against planes.
//!
//! A crossing search samples the plane value along the exact orbit on a
//! uniform grid, brackets sign changes and near-extrema (using the exact
//! time derivative), then refines with Brent's method. Extrema whose value
//! is within the grazing tolerance of zero are reported as tangential
//! contacts instead of crossings.

use crate::linalg3::{EigenTriple, ExpmCompanion, Mat3, Vec3};
use crate::rootfind::brent_root;
use crate::system::{Side, System};
use serde::{Deserialize, Serialize};

/// One affine piece `C X + e3 mu` with its exact time-`t` flow.
#[derive(Debug, Clone, Copy)]
pub struct HalfFlow {
    pub side: Side,
    pub matrix: Mat3,
    pub eig: EigenTriple,
    /// Fixed point of this piece; may be virtual.
    pub equilibrium: Vec3,
    pub mu: f64,
    expm: ExpmCompanion,
}

impl HalfFlow {
    pub fn new(sys: &System, side: Side) -> Self {
        let (matrix, eig, equilibrium) = match side {
            Side::Left => (sys.c_left, sys.params.left_eigen(), sys.x_left.location),
            Side::Right => (sys.c_right, sys.params.right_eigen(), sys.x_right.location),
        };
        Self { side, matrix, eig, equilibrium, mu: sys.params.mu, expm: ExpmCompanion::new(&matrix, eig) }
    }

    pub fn left(sys: &System) -> Self {
        Self::new(sys, Side::Left)
    }

    pub fn right(sys: &System) -> Self {
        Self::new(sys, Side::Right)
    }

    /// `X_eq + exp(tC)(X0 - X_eq)`.
    pub fn flow(&self, t: f64, x0: Vec3) -> Vec3 {
        if t == 0.0 {
            return x0;
        }
        self.equilibrium + self.expm.apply(t, x0 - self.equilibrium)
    }

    pub fn velocity(&self, p: Vec3) -> Vec3 {
        let mut v = self.matrix.mul_vec(p);
        v.z += self.mu;
        v
    }

    pub fn rotation_period(&self) -> f64 {
        self.eig.rotation_period()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: Vec3,
    pub point: Vec3,
}

impl Plane {
    pub fn switching() -> Self {
        Plane { normal: Vec3::E1, point: Vec3::ZERO }
    }

    pub fn value(&self, p: Vec3) -> f64 {
        self.normal.dot(p - self.point)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    SwitchingPlane,
    Section,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    /// Signed time relative to the start point.
    pub time: f64,
    pub point: Vec3,
    pub surface: Surface,
    /// Sign of `d/dt` of the plane value at the crossing (physical time);
    /// `0` for tangential contacts.
    pub orientation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Crossing {
    Transversal(CrossingEvent),
    Tangential(CrossingEvent),
}

impl Crossing {
    pub fn event(&self) -> &CrossingEvent {
        match self {
            Crossing::Transversal(e) | Crossing::Tangential(e) => e,
        }
    }

    pub fn transversal(self) -> Option<CrossingEvent> {
        match self {
            Crossing::Transversal(e) => Some(e),
            Crossing::Tangential(_) => None,
        }
    }
}

/// Parameters of a first-crossing search.
#[derive(Debug, Clone, Copy)]
pub struct CrossingQuery {
    pub plane: Plane,
    pub surface: Surface,
    pub direction: Direction,
    /// Largest `|t|` searched.
    pub window: f64,
    /// Crossings with `|t| <= min_time` are ignored.
    pub min_time: f64,
    /// Only transversal crossings with this orientation sign are reported.
    pub orientation: Option<f64>,
    pub scan_step: f64,
    pub graze_tol: f64,
    /// When false, tangential contacts are skipped silently.
    pub report_tangential: bool,
}

impl CrossingQuery {
    pub fn new(plane: Plane, surface: Surface, direction: Direction, window: f64, scan_step: f64) -> Self {
        Self {
            plane,
            surface,
            direction,
            window,
            min_time: 1e-9,
            orientation: None,
            scan_step,
            graze_tol: 1e-9,
            report_tangential: true,
        }
    }

    pub fn orientation(mut self, sign: f64) -> Self {
        self.orientation = Some(sign);
        self
    }

    pub fn min_time(mut self, min_time: f64) -> Self {
        self.min_time = min_time;
        self
    }

    pub fn graze_tol(mut self, tol: f64) -> Self {
        self.graze_tol = tol;
        self
    }

    pub fn skip_tangential(mut self) -> Self {
        self.report_tangential = false;
        self
    }
}

struct Sample {
    tau: f64,
    value: f64,
    /// derivative with respect to `tau` (not physical time)
    slope: f64,
}

struct Scanner<'a> {
    h: &'a HalfFlow,
    x0: Vec3,
    plane: Plane,
    dir: f64,
}

impl Scanner<'_> {
    fn sample(&self, tau: f64) -> Sample {
        let p = self.h.flow(self.dir * tau, self.x0);
        Sample { tau, value: self.plane.value(p), slope: self.dir * self.plane.normal.dot(self.h.velocity(p)) }
    }

    fn root(&self, a: &Sample, b: &Sample, xtol: f64) -> f64 {
        brent_root(
            |tau| self.plane.value(self.h.flow(self.dir * tau, self.x0)),
            a.tau,
            b.tau,
            a.value,
            b.value,
            xtol,
            0.0,
        )
    }

    /// A root where the orbit barely reaches the plane, judged by the
    /// quadratic extrapolation of the plane value, is re-labelled as a
    /// tangential contact located at the nearby extremum.
    fn classify_root(&self, tau: f64, graze_tol: f64) -> (f64, bool) {
        let s = self.sample(tau).slope;
        let d = 1e-6;
        let curvature = (self.sample(tau + d).slope - self.sample(tau - d).slope) / (2.0 * d);
        if curvature != 0.0 && s * s / (2.0 * curvature.abs()) < graze_tol {
            (tau - s / curvature, true)
        } else {
            (tau, false)
        }
    }

    fn extremum(&self, a: &Sample, b: &Sample, xtol: f64) -> Sample {
        let tau = brent_root(|tau| self.sample(tau).slope, a.tau, b.tau, a.slope, b.slope, xtol, 0.0);
        self.sample(tau)
    }
}

/// Calls `visit` on every crossing or tangential contact with
/// `min_time < |t| <= window`, in order of increasing `|t|`, until it
/// returns `true`.
pub fn scan_crossings<F: FnMut(Crossing) -> bool>(h: &HalfFlow, x0: Vec3, q: &CrossingQuery, mut visit: F) {
    let sc = Scanner { h, x0, plane: q.plane, dir: q.direction.sign() };
    let span = q.window - q.min_time;
    if span <= 0.0 {
        return;
    }
    let n = (span / q.scan_step).ceil().max(1.0) as usize;
    let xtol = 1e-13 * q.scan_step.max(1.0);
    let make = |tau: f64, kind_tangential: bool| {
        let (tau, tangential) = if kind_tangential { (tau, true) } else { sc.classify_root(tau, q.graze_tol) };
        let p = h.flow(sc.dir * tau, x0);
        let orientation = if tangential { 0.0 } else { q.plane.normal.dot(h.velocity(p)).signum() };
        let event = CrossingEvent { time: sc.dir * tau, point: p, surface: q.surface, orientation };
        if tangential {
            Crossing::Tangential(event)
        } else {
            Crossing::Transversal(event)
        }
    };
    let mut last_tangential = f64::NEG_INFINITY;
    // returns true when the visitor asked to stop
    let mut emit = |c: Crossing| -> bool {
        match c {
            Crossing::Tangential(e) if (e.time - last_tangential).abs() < 1e-6 * q.scan_step.max(1e-3) => false,
            Crossing::Tangential(e) => {
                last_tangential = e.time;
                q.report_tangential && visit(c)
            }
            Crossing::Transversal(e) => match q.orientation {
                Some(want) if e.orientation != want.signum() => false,
                _ => visit(c),
            },
        }
    };

    let mut prev = sc.sample(q.min_time);
    for k in 1..=n {
        let tau = if k == n { q.window } else { q.min_time + span * k as f64 / n as f64 };
        let cur = sc.sample(tau);
        if prev.slope * cur.slope < 0.0 {
            // an extremum of the plane value lies inside this interval
            let ext = sc.extremum(&prev, &cur, xtol);
            if ext.value.abs() < q.graze_tol {
                if emit(make(ext.tau, true)) {
                    return;
                }
            } else {
                for (a, b) in [(&prev, &ext), (&ext, &cur)] {
                    if b.value == 0.0 || a.value * b.value < 0.0 {
                        let root = if b.value == 0.0 { b.tau } else { sc.root(a, b, xtol) };
                        if emit(make(root, false)) {
                            return;
                        }
                    }
                }
            }
        } else if cur.value == 0.0 || prev.value * cur.value < 0.0 {
            let root = if cur.value == 0.0 { cur.tau } else { sc.root(&prev, &cur, xtol) };
            if emit(make(root, false)) {
                return;
            }
        }
        prev = cur;
    }
}

/// The crossing or tangential contact of smallest `|t|` in the window.
pub fn first_crossing(h: &HalfFlow, x0: Vec3, q: &CrossingQuery) -> Option<Crossing> {
    let mut found = None;
    scan_crossings(h, x0, q, |c| {
        found = Some(c);
        true
    });
    found
}

/// Minimum of the plane value along the orbit for `t` in `[t_from, t_to]`.
pub fn min_plane_value(h: &HalfFlow, x0: Vec3, plane: &Plane, t_from: f64, t_to: f64, scan_step: f64) -> (f64, f64) {
    let sc = Scanner { h, x0, plane: *plane, dir: 1.0 };
    let n = ((t_to - t_from) / scan_step).ceil().max(1.0) as usize;
    let mut prev = sc.sample(t_from);
    let mut best = (prev.value, prev.tau);
    for k in 1..=n {
        let cur = sc.sample(t_from + (t_to - t_from) * k as f64 / n as f64);
        if cur.value < best.0 {
            best = (cur.value, cur.tau);
        }
        if prev.slope < 0.0 && cur.slope > 0.0 {
            let ext = sc.extremum(&prev, &cur, 1e-13);
            if ext.value < best.0 {
                best = (ext.value, ext.tau);
            }
        }
        prev = cur;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{section_geometry, SystemParams};

    fn setup() -> (System, HalfFlow, HalfFlow) {
        let sys = System::new(SystemParams::default()).unwrap();
        (sys, HalfFlow::left(&sys), HalfFlow::right(&sys))
    }

    #[test]
    fn flow_at_zero_and_at_equilibrium() {
        let (_, l, r) = setup();
        let x0 = Vec3::new(0.3, -0.2, 1.5);
        assert_eq!(r.flow(0.0, x0), x0);
        for t in [-3.0, 0.5, 10.0] {
            assert!((r.flow(t, r.equilibrium) - r.equilibrium).norm() < 1e-13);
            assert!((l.flow(t, l.equilibrium) - l.equilibrium).norm() < 1e-12);
        }
    }

    #[test]
    fn flow_group_property() {
        let (_, l, r) = setup();
        let x0 = Vec3::new(-0.1, 0.4, 0.9);
        for h in [l, r] {
            for (t1, t2) in [(0.3, 1.7), (-2.0, 0.5), (4.0, -1.0)] {
                let direct = h.flow(t1 + t2, x0);
                let composed = h.flow(t2, h.flow(t1, x0));
                assert!((direct - composed).norm() < 1e-11 * direct.norm().max(1.0));
            }
        }
    }

    #[test]
    fn crossing_excludes_start_on_surface() {
        let (sys, _, r) = setup();
        let geo = section_geometry(&sys.params).unwrap();
        // start on x = 0 with y < 0, moving into x < 0
        let x0 = Vec3::new(0.0, -0.3, 1.0);
        let q = CrossingQuery::new(Plane::switching(), Surface::SwitchingPlane, Direction::Forward, 6.0, 0.1);
        let c = first_crossing(&r, x0, &q).unwrap().transversal().unwrap();
        assert!(c.time > 1e-6);
        assert!(c.point.x.abs() < 1e-10);
        assert_eq!(c.orientation, 1.0);
        let _ = geo;
    }

    #[test]
    fn equilibrium_never_crosses() {
        let (_, _, r) = setup();
        let q = CrossingQuery::new(Plane::switching(), Surface::SwitchingPlane, Direction::Forward, 100.0, 0.1);
        assert!(first_crossing(&r, r.equilibrium, &q).is_none());
    }

    #[test]
    fn backward_search_uses_negative_time() {
        let (_, _, r) = setup();
        let x0 = Vec3::new(0.0, 0.3, 1.0);
        let q = CrossingQuery::new(Plane::switching(), Surface::SwitchingPlane, Direction::Backward, 6.0, 0.1);
        let c = first_crossing(&r, x0, &q).unwrap().transversal().unwrap();
        assert!(c.time < 0.0);
        assert!((r.flow(c.time, x0) - c.point).norm() < 1e-12);
        assert_eq!(c.orientation, -1.0);
    }

    #[test]
    fn grazing_point_is_tangential() {
        let (sys, _, r) = setup();
        let geo = section_geometry(&sys.params).unwrap();
        // the z-axis is the grazing line; start a little before X_int on its orbit
        let x0 = r.flow(-0.3, geo.x_int);
        let q = CrossingQuery::new(Plane::switching(), Surface::SwitchingPlane, Direction::Forward, 1.0, 0.05);
        match first_crossing(&r, x0, &q).unwrap() {
            Crossing::Tangential(e) => assert!((e.time - 0.3).abs() < 1e-6),
            other => panic!("expected tangential contact, got {other:?}"),
        }
        let q = q.skip_tangential();
        let c = first_crossing(&r, x0, &q);
        assert!(c.is_none(), "{c:?}");
    }

    #[test]
    fn shallow_double_crossing_inside_one_step() {
        let (sys, _, r) = setup();
        let geo = section_geometry(&sys.params).unwrap();
        // a point just outside the grazing orbit dips below x = 0 twice in quick succession
        let x0 = r.flow(-0.3, geo.x_int + geo.span1 * (-1e-4));
        let q = CrossingQuery::new(Plane::switching(), Surface::SwitchingPlane, Direction::Forward, 1.0, 0.5);
        let mut events = Vec::new();
        scan_crossings(&r, x0, &q, |c| {
            events.push(c);
            false
        });
        assert_eq!(events.len(), 2, "{events:?}");
        let (a, b) = (events[0].event(), events[1].event());
        assert_eq!(a.orientation, -1.0);
        assert_eq!(b.orientation, 1.0);
        assert!(a.time < 0.3 && b.time > 0.3);
    }

    #[test]
    fn orientation_filter() {
        let (_, _, r) = setup();
        let x0 = Vec3::new(0.0, 0.3, 1.0);
        let q = CrossingQuery::new(Plane::switching(), Surface::SwitchingPlane, Direction::Forward, 20.0, 0.1).orientation(1.0);
        let c = first_crossing(&r, x0, &q).unwrap().transversal().unwrap();
        assert_eq!(c.orientation, 1.0);
        assert!(r.velocity(c.point).x > 0.0);
    }
}

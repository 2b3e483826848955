//! A system instance: eigen-parameters, companion matrices, equilibria and
//! the geometry of the stable/unstable subspaces of the right equilibrium.

use crate::error::{BebError, Result};
use crate::linalg3::{companion_from_traces, EigenTriple, Mat3, Vec3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn of(x: f64) -> Side {
        if x < 0.0 {
            Side::Left
        } else {
            Side::Right
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// Eigen-parameters of both pieces, the bifurcation parameter `mu`, and
/// whether the quadratic term `x y e1` is added to the left piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    pub alpha_l: f64,
    pub beta_l: f64,
    pub gamma_l: f64,
    pub alpha_r: f64,
    pub beta_r: f64,
    pub gamma_r: f64,
    pub mu: f64,
    pub nonlinear: bool,
}

impl Default for SystemParams {
    /// Rossler-like attractor example at `mu = 1`.
    fn default() -> Self {
        Self {
            alpha_l: 0.3,
            beta_l: 4.0,
            gamma_l: 0.05,
            alpha_r: 0.02,
            beta_r: 1.0,
            gamma_r: 1.0,
            mu: 1.0,
            nonlinear: false,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("alpha_l", self.alpha_l),
            ("beta_l", self.beta_l),
            ("gamma_l", self.gamma_l),
            ("alpha_r", self.alpha_r),
            ("beta_r", self.beta_r),
            ("gamma_r", self.gamma_r),
        ];
        for (name, value) in named {
            if !(value.is_finite() && value > 0.0) {
                return Err(BebError::InvalidParams(format!("{name} must be finite and positive, got {value}")));
            }
        }
        if !self.mu.is_finite() {
            return Err(BebError::InvalidParams(format!("mu must be finite, got {}", self.mu)));
        }
        Ok(())
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_gamma_l(mut self, gamma_l: f64) -> Self {
        self.gamma_l = gamma_l;
        self
    }

    pub fn left_eigen(&self) -> EigenTriple {
        EigenTriple::stable_focus(self.alpha_l, self.beta_l, self.gamma_l)
    }

    pub fn right_eigen(&self) -> EigenTriple {
        EigenTriple::saddle_focus(self.alpha_r, self.beta_r, self.gamma_r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedTraces {
    pub tau_l: f64,
    pub sigma_l: f64,
    pub delta_l: f64,
    pub tau_r: f64,
    pub sigma_r: f64,
    pub delta_r: f64,
}

impl DerivedTraces {
    pub fn left_matrix(&self) -> Mat3 {
        companion_from_traces(self.tau_l, self.sigma_l, self.delta_l)
    }

    pub fn right_matrix(&self) -> Mat3 {
        companion_from_traces(self.tau_r, self.sigma_r, self.delta_r)
    }
}

pub fn derive_traces(p: &SystemParams) -> DerivedTraces {
    let (al, bl, gl) = (p.alpha_l, p.beta_l, p.gamma_l);
    let (ar, br, gr) = (p.alpha_r, p.beta_r, p.gamma_r);
    DerivedTraces {
        tau_l: -2.0 * al - gl,
        sigma_l: al * al + bl * bl + 2.0 * al * gl,
        delta_l: -(al * al + bl * bl) * gl,
        tau_r: 2.0 * ar - gr,
        sigma_r: ar * ar + br * br - 2.0 * ar * gr,
        delta_r: -(ar * ar + br * br) * gr,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub location: Vec3,
    pub side: Side,
    pub admissible: bool,
}

fn equilibrium_of(mu: f64, tau: f64, sigma: f64, delta: f64, side: Side) -> Equilibrium {
    let location = Vec3::new(-1.0, tau, -sigma) * (mu / delta);
    let admissible = match side {
        Side::Left => location.x <= 0.0,
        Side::Right => location.x >= 0.0,
    };
    Equilibrium { location, side, admissible }
}

/// `(X_L, X_R)` with admissibility flags.
pub fn equilibria(p: &SystemParams) -> (Equilibrium, Equilibrium) {
    let t = derive_traces(p);
    (
        equilibrium_of(p.mu, t.tau_l, t.sigma_l, t.delta_l, Side::Left),
        equilibrium_of(p.mu, t.tau_r, t.sigma_r, t.delta_r, Side::Right),
    )
}

/// Stable direction `v`, unstable-plane normal `w`, grazing point `X_int`
/// and the plane `Pi = X_R + span(X_R - X_int, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionGeometry {
    pub v: Vec3,
    pub w: Vec3,
    pub x_int: Vec3,
    pub x_r: Vec3,
    pub span1: Vec3,
    /// Unit normal of `Pi`.
    pub normal: Vec3,
}

impl SectionGeometry {
    /// Signed distance-like offset of `p` from `Pi` along the unit normal.
    pub fn plane_value(&self, p: Vec3) -> f64 {
        self.normal.dot(p - self.x_r)
    }
}

pub fn section_geometry(p: &SystemParams) -> Result<SectionGeometry> {
    let (ar, br, gr) = (p.alpha_r, p.beta_r, p.gamma_r);
    let v = Vec3::new(1.0, -2.0 * ar, ar * ar + br * br);
    let w = Vec3::new(gr * gr, -gr, 1.0);
    let x_int = Vec3::E3 * (p.mu / gr);
    let x_r = equilibria(p).1.location;
    let span1 = x_r - x_int;
    let raw_normal = span1.cross(v);
    let scale = span1.norm() * v.norm();
    if !(raw_normal.norm() > 1e-12 * scale) || scale == 0.0 {
        return Err(BebError::DegenerateSection(format!(
            "X_R - X_int = {span1:?} is parallel to v = {v:?}"
        )));
    }
    Ok(SectionGeometry { v, w, x_int, x_r, span1, normal: raw_normal.normalized() })
}

/// Point of the line `Pi ∩ E^u` with first component `x`, built as
/// `X_R + s (X_R - X_int)`.
pub fn line_g(p: &SystemParams, x: f64) -> Result<Vec3> {
    let x_r = equilibria(p).1.location;
    if x_r.x == 0.0 {
        return Err(BebError::DegenerateLine);
    }
    let x_int = Vec3::E3 * (p.mu / p.gamma_r);
    let s = x / x_r.x - 1.0;
    let mut point = x_r + (x_r - x_int) * s;
    point.x = x;
    Ok(point)
}

/// Everything derived from a [`SystemParams`] that the flows and maps need.
#[derive(Debug, Clone, Copy)]
pub struct System {
    pub params: SystemParams,
    pub traces: DerivedTraces,
    pub c_left: Mat3,
    pub c_right: Mat3,
    pub x_left: Equilibrium,
    pub x_right: Equilibrium,
}

impl System {
    pub fn new(params: SystemParams) -> Result<Self> {
        params.validate()?;
        let traces = derive_traces(&params);
        let (x_left, x_right) = equilibria(&params);
        Ok(Self {
            params,
            traces,
            c_left: traces.left_matrix(),
            c_right: traces.right_matrix(),
            x_left,
            x_right,
        })
    }

    pub fn matrix(&self, side: Side) -> &Mat3 {
        match side {
            Side::Left => &self.c_left,
            Side::Right => &self.c_right,
        }
    }

    /// Vector field of the full system, including the quadratic term when enabled.
    pub fn vector_field(&self, p: Vec3) -> Vec3 {
        let side = Side::of(p.x);
        let mut f = self.piece_field(side, p);
        if self.params.nonlinear && side == Side::Left {
            f.x += p.x * p.y;
        }
        f
    }

    /// Affine field `C X + e3 mu` of one piece, evaluated anywhere.
    pub fn piece_field(&self, side: Side, p: Vec3) -> Vec3 {
        let mut f = self.matrix(side).mul_vec(p);
        f.z += self.params.mu;
        f
    }
}

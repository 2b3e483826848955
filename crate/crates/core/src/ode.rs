//! Dormand-Prince 5(4) with dense output, for the nonlinear left piece.

use crate::linalg3::Vec3;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// dense output (Hairer & Wanner, DOPRI5 continuous extension)
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Continuous extension over one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    r: [Vec3; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> Vec3 {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        self.r[0] + (self.r[1] + (self.r[2] + (self.r[3] + self.r[4] * s1) * s) * s1) * s
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

/// Adaptive integrator state for an autonomous field `f`.
pub struct Dopri5<F: Fn(Vec3) -> Vec3> {
    f: F,
    tol: Tolerances,
    pub t: f64,
    pub y: Vec3,
    k1: Vec3,
    h: f64,
    pub h_min: f64,
}

pub enum StepOutcome {
    Accepted(DenseStep),
    Underflow,
}

impl<F: Fn(Vec3) -> Vec3> Dopri5<F> {
    pub fn new(f: F, t0: f64, y0: Vec3, tol: Tolerances) -> Self {
        let k1 = f(y0);
        // Hairer's starting step heuristic, first part only
        let scale = |y: Vec3, i: usize| tol.atol + tol.rtol * y[i].abs();
        let d0 = (0..3).map(|i| (y0[i] / scale(y0, i)).powi(2)).sum::<f64>().sqrt() / 3f64.sqrt();
        let d1 = (0..3).map(|i| (k1[i] / scale(y0, i)).powi(2)).sum::<f64>().sqrt() / 3f64.sqrt();
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { (0.01 * d0 / d1).min(0.1) };
        Self { f, tol, t: t0, y: y0, k1, h, h_min: 1e-14 }
    }

    pub fn field(&self, y: Vec3) -> Vec3 {
        (self.f)(y)
    }

    /// Advances by one accepted step, never past `t_max`.
    pub fn step(&mut self, t_max: f64) -> StepOutcome {
        let f = &self.f;
        loop {
            let mut h = self.h.min(t_max - self.t);
            if h < self.h_min * self.t.abs().max(1.0) {
                if t_max - self.t <= self.h_min * self.t.abs().max(1.0) {
                    h = t_max - self.t;
                } else {
                    return StepOutcome::Underflow;
                }
            }
            let (y, k1) = (self.y, self.k1);
            let k2 = f(y + k1 * (h * A21));
            let k3 = f(y + (k1 * A31 + k2 * A32) * h);
            let k4 = f(y + (k1 * A41 + k2 * A42 + k3 * A43) * h);
            let k5 = f(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h);
            let k6 = f(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h);
            let y_new = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
            let k7 = f(y_new);
            let err_vec = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
            let err = ((0..3)
                .map(|i| {
                    let sc = self.tol.atol + self.tol.rtol * y[i].abs().max(y_new[i].abs());
                    (err_vec[i] / sc).powi(2)
                })
                .sum::<f64>()
                / 3.0)
                .sqrt();
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                let dy = y_new - y;
                let bspl = k1 * h - dy;
                let r = [
                    y,
                    dy,
                    bspl,
                    dy - k7 * h - bspl,
                    (k1 * D1 + k3 * D3 + k4 * D4 + k5 * D5 + k6 * D6 + k7 * D7) * h,
                ];
                let dense = DenseStep { t0: self.t, h, r };
                self.t += h;
                self.y = y_new;
                self.k1 = k7;
                self.h = h * factor;
                return StepOutcome::Accepted(dense);
            }
            self.h = h * factor.min(1.0);
            if self.h < self.h_min * self.t.abs().max(1.0) {
                return StepOutcome::Underflow;
            }
        }
    }

    /// Restarts from a new state, keeping the step size.
    pub fn reset(&mut self, t: f64, y: Vec3) {
        self.t = t;
        self.y = y;
        self.k1 = (self.f)(y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let tol = Tolerances { rtol: 1e-10, atol: 1e-12 };
        let mut rk = Dopri5::new(|y: Vec3| Vec3::new(y.y, -y.x, -0.5 * y.z), 0.0, Vec3::new(1.0, 0.0, 1.0), tol);
        let t_end = 2.0 * std::f64::consts::PI;
        let mut dense = Vec::new();
        while rk.t < t_end {
            match rk.step(t_end) {
                StepOutcome::Accepted(d) => dense.push(d),
                StepOutcome::Underflow => panic!("underflow"),
            }
        }
        assert!((rk.y - Vec3::new(1.0, 0.0, (-0.5 * t_end).exp())).norm() < 1e-8);
        for d in &dense {
            let tm = d.t0 + 0.37 * d.h;
            let exact = Vec3::new(tm.cos(), -tm.sin(), (-0.5 * tm).exp());
            assert!((d.eval(tm) - exact).norm() < 1e-8);
            assert!((d.eval(d.t0) - Vec3::new(d.t0.cos(), -d.t0.sin(), (-0.5 * d.t0).exp())).norm() < 1e-8);
        }
    }
}

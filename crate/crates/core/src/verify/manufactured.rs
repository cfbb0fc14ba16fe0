//! Exact separable profile `Phi = cos(kx) sin(ky) cos(kz) cos(t)` and the
//! source term that makes it solve the forced Cahn-Hilliard equation.

use crate::scheme::Forcing;
use std::f64::consts::PI;

/// Side length of the test cube.
pub const DOMAIN_LENGTH: f64 = 3.2;
/// Spatial wavenumber; `k L = 2 pi`.
pub const WAVENUMBER: f64 = 5.0 * PI / 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedSolution {
    pub k: f64,
    pub length: f64,
    pub eps: f64,
}

impl ManufacturedSolution {
    pub fn new(eps: f64) -> Self {
        Self {
            k: WAVENUMBER,
            length: DOMAIN_LENGTH,
            eps,
        }
    }

    #[inline]
    fn trig(&self, x: f64, y: f64, z: f64) -> ([f64; 3], [f64; 3]) {
        let k = self.k;
        let (sx, cx) = (k * x).sin_cos();
        let (sy, cy) = (k * y).sin_cos();
        let (sz, cz) = (k * z).sin_cos();
        ([sx, sy, sz], [cx, cy, cz])
    }

    pub fn phi(&self, x: f64, y: f64, z: f64, t: f64) -> f64 {
        let (s, c) = self.trig(x, y, z);
        c[0] * s[1] * c[2] * t.cos()
    }

    pub fn dphi_dt(&self, x: f64, y: f64, z: f64, t: f64) -> f64 {
        let (s, c) = self.trig(x, y, z);
        -c[0] * s[1] * c[2] * t.sin()
    }

    pub fn grad(&self, x: f64, y: f64, z: f64, t: f64) -> [f64; 3] {
        let (s, c) = self.trig(x, y, z);
        let a = self.k * t.cos();
        [
            -a * s[0] * s[1] * c[2],
            a * c[0] * c[1] * c[2],
            -a * c[0] * s[1] * s[2],
        ]
    }

    /// `|grad Phi|^2` in closed form.
    pub fn grad_sq(&self, x: f64, y: f64, z: f64, t: f64) -> f64 {
        let (s, c) = self.trig(x, y, z);
        let a = self.k * t.cos();
        let sq = |v: f64| v * v;
        a * a
            * (sq(s[0] * s[1] * c[2]) + sq(c[0] * c[1] * c[2]) + sq(c[0] * s[1] * s[2]))
    }

    pub fn lap(&self, x: f64, y: f64, z: f64, t: f64) -> f64 {
        -3.0 * self.k * self.k * self.phi(x, y, z, t)
    }

    pub fn bilap(&self, x: f64, y: f64, z: f64, t: f64) -> f64 {
        9.0 * self.k.powi(4) * self.phi(x, y, z, t)
    }

    /// `Delta(Phi^3) = 3 Phi^2 Delta Phi + 6 Phi |grad Phi|^2`.
    pub fn lap_cube(&self, x: f64, y: f64, z: f64, t: f64) -> f64 {
        let p = self.phi(x, y, z, t);
        3.0 * p * p * self.lap(x, y, z, t) + 6.0 * p * self.grad_sq(x, y, z, t)
    }

    /// `f = Phi_t - Delta((Phi^3 - Phi)/eps - eps Delta Phi)`.
    pub fn forcing(&self, x: f64, y: f64, z: f64, t: f64) -> f64 {
        let e = self.eps;
        self.dphi_dt(x, y, z, t) - (self.lap_cube(x, y, z, t) - self.lap(x, y, z, t)) / e
            + e * self.bilap(x, y, z, t)
    }

    pub fn source(&self) -> Forcing {
        let m = *self;
        Forcing::new(move |x, y, z, t| m.forcing(x, y, z, t))
    }
}

/// Source term of the manufactured profile at one point.
pub fn forcing(x: f64, y: f64, z: f64, t: f64, eps: f64) -> f64 {
    ManufacturedSolution::new(eps).forcing(x, y, z, t)
}

//! Real-space difference operators on periodic grids.
//!
//! Every stencil here has coefficients summing to zero, so it is evaluated as
//! `sum_d c_d (f[i+d] - f[i])`. Differencing neighbours first keeps rounding
//! proportional to the local variation of `f` rather than to its magnitude.

use crate::error::Result;
use crate::grid::{Field, Grid3};
use rayon::prelude::*;

/// Fourth-order long-stencil second-derivative weights for offsets -2..=2, over `12 h^2`.
pub const LAP4_WEIGHTS: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
/// Fourth-order long-stencil first-derivative weights for offsets -2..=2, over `12 h`.
pub const D1_4_WEIGHTS: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
/// Centered second-difference weights for offsets -1..=1, over `h^2`.
pub const D2_WEIGHTS: [f64; 3] = [1.0, -2.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    fn unit(self) -> [isize; 3] {
        match self {
            Axis::X => [1, 0, 0],
            Axis::Y => [0, 1, 0],
            Axis::Z => [0, 0, 1],
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// The difference operators available on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilKind {
    /// Forward difference `(f[i+1] - f[i]) / h`, the staggered value at `i + 1/2`.
    D(Axis),
    /// Centered second difference along one axis.
    D2(Axis),
    /// Second-order Laplacian `Delta_h`.
    Lap2,
    /// Long-stencil fourth-order Laplacian `Delta_{h,(4)}`.
    Lap4,
    /// Long-stencil fourth-order first derivative along one axis.
    D1_4(Axis),
}

/// A zero-sum stencil: off-center taps `(offset, weight)` and an overall scale.
#[derive(Debug, Clone)]
pub struct Stencil {
    taps: Vec<([isize; 3], f64)>,
    scale: f64,
}

impl Stencil {
    pub fn new(taps: Vec<([isize; 3], f64)>, scale: f64) -> Self {
        assert!(
            taps.iter().all(|(o, _)| o.iter().all(|d| d.abs() <= 2)),
            "stencil radius is limited to 2"
        );
        Self { taps, scale }
    }

    fn axis_taps(axis: Axis, weights: &[f64], center: isize) -> Vec<([isize; 3], f64)> {
        let u = axis.unit();
        weights
            .iter()
            .enumerate()
            .filter_map(|(p, &w)| {
                let d = p as isize - center;
                (d != 0 && w != 0.0).then(|| ([u[0] * d, u[1] * d, u[2] * d], w))
            })
            .collect()
    }

    pub fn for_kind(kind: StencilKind, h: f64) -> Self {
        match kind {
            StencilKind::D(axis) => Self::new(Self::axis_taps(axis, &[-1.0, 1.0], 0), 1.0 / h),
            StencilKind::D2(axis) => {
                Self::new(Self::axis_taps(axis, &D2_WEIGHTS, 1), 1.0 / (h * h))
            }
            StencilKind::Lap2 => Self::new(
                Axis::ALL
                    .iter()
                    .flat_map(|&a| Self::axis_taps(a, &D2_WEIGHTS, 1))
                    .collect(),
                1.0 / (h * h),
            ),
            StencilKind::Lap4 => Self::lap4_with_weights(LAP4_WEIGHTS, h),
            StencilKind::D1_4(axis) => {
                Self::new(Self::axis_taps(axis, &D1_4_WEIGHTS, 2), 1.0 / (12.0 * h))
            }
        }
    }

    /// Three-axis long stencil with arbitrary per-axis weights over `12 h^2`.
    pub fn lap4_with_weights(weights: [f64; 5], h: f64) -> Self {
        Self::new(
            Axis::ALL
                .iter()
                .flat_map(|&a| Self::axis_taps(a, &weights, 2))
                .collect(),
            1.0 / (12.0 * h * h),
        )
    }

    /// Applies the stencil with periodic wraparound.
    pub fn apply(&self, f: &Field) -> Field {
        let grid = *f.grid();
        let n = grid.n();
        let src = f.values();
        // wrap[d + 2][c] = (c + d) mod n
        let wrap: Vec<Vec<usize>> = (-2isize..=2)
            .map(|d| {
                (0..n as isize)
                    .map(|c| (c + d).rem_euclid(n as isize) as usize)
                    .collect()
            })
            .collect();
        let mut out = vec![0.0; grid.len()];
        out.par_chunks_mut(n * n).enumerate().for_each(|(k, slab)| {
            for j in 0..n {
                for i in 0..n {
                    let c = src[i + n * (j + n * k)];
                    let mut acc = 0.0;
                    for &([di, dj, dk], w) in &self.taps {
                        let ii = wrap[(di + 2) as usize][i];
                        let jj = wrap[(dj + 2) as usize][j];
                        let kk = wrap[(dk + 2) as usize][k];
                        acc += w * (src[ii + n * (jj + n * kk)] - c);
                    }
                    slab[i + n * j] = acc * self.scale;
                }
            }
        });
        Field::from_raw(grid, out)
    }
}

pub fn apply(kind: StencilKind, f: &Field) -> Field {
    Stencil::for_kind(kind, f.grid().h()).apply(f)
}

/// `Delta_{h,(4)} f`.
pub fn apply_lap4(f: &Field) -> Field {
    apply(StencilKind::Lap4, f)
}

/// Centered second-order Laplacian `Delta_h f`.
pub fn apply_lap2(f: &Field) -> Field {
    apply(StencilKind::Lap2, f)
}

/// Long-stencil fourth-order first derivative along `axis`.
pub fn apply_d1_4(f: &Field, axis: Axis) -> Field {
    apply(StencilKind::D1_4(axis), f)
}

/// Forward difference along `axis`; entry `i` is the staggered value at `i + 1/2`.
pub fn apply_forward(f: &Field, axis: Axis) -> Field {
    apply(StencilKind::D(axis), f)
}

/// Centered second difference along `axis`.
pub fn apply_d2(f: &Field, axis: Axis) -> Field {
    apply(StencilKind::D2(axis), f)
}

/// Discrete inner product `h^3 sum f g`.
pub fn ip(f: &Field, g: &Field) -> Result<f64> {
    f.grid().check_same(g.grid())?;
    Ok(f.raw_ip(g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L2,
    L4,
    Inf,
}

pub fn norm(f: &Field, p: Norm) -> f64 {
    match p {
        Norm::L2 => f.raw_ip(f).sqrt(),
        Norm::L4 => (f.grid().cell_volume() * f.raw_sum_by(|v| (v * v) * (v * v))).powf(0.25),
        Norm::Inf => f.max_abs(),
    }
}

#[inline]
pub fn norm2(f: &Field) -> f64 {
    norm(f, Norm::L2)
}

/// `<grad_h f, grad_h g>` in the staggered averaged form: for each axis,
/// `h^3/2 * sum (D f)_{i+1/2} (D g)_{i+1/2} + (D f)_{i-1/2} (D g)_{i-1/2}`.
pub fn grad_ip(f: &Field, g: &Field) -> Result<f64> {
    f.grid().check_same(g.grid())?;
    let mut total = 0.0;
    for axis in Axis::ALL {
        let df = apply_forward(f, axis);
        let dg = apply_forward(g, axis);
        // Staggered values at i - 1/2 are the forward differences shifted by one cell.
        let df_back = df.shifted(axis.index(), -1);
        let dg_back = dg.shifted(axis.index(), -1);
        total += 0.5 * (df.raw_ip(&dg) + df_back.raw_ip(&dg_back));
    }
    Ok(total)
}

/// `||grad_h f||_2^2`.
pub fn grad_norm_sq(f: &Field) -> f64 {
    grad_ip(f, f).expect("same grid")
}

/// `||grad_{h,(4)} f||_2^2 = ||grad_h f||^2 + h^2/12 sum_axes ||D_a^2 f||^2`.
pub fn grad4_norm_sq(f: &Field) -> f64 {
    let h = f.grid().h();
    let second: f64 = Axis::ALL
        .iter()
        .map(|&a| {
            let d2 = apply_d2(f, a);
            d2.raw_ip(&d2)
        })
        .sum();
    grad_norm_sq(f) + h * h / 12.0 * second
}

/// `sum_axes <D_a^2 f, D_a^2 g>`, the extra term of the long-stencil summation by parts.
pub fn d2_ip_sum(f: &Field, g: &Field) -> Result<f64> {
    f.grid().check_same(g.grid())?;
    Ok(Axis::ALL
        .iter()
        .map(|&a| apply_d2(f, a).raw_ip(&apply_d2(g, a)))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevNorms {
    pub h1: f64,
    pub h2: f64,
}

/// Discrete `H^1_h` and `H^2_h` norms built from `||f||`, `||grad_h f||`, `||Delta_h f||`.
pub fn sobolev_norms(f: &Field) -> SobolevNorms {
    let l2 = f.raw_ip(f);
    let h1_sq = l2 + grad_norm_sq(f);
    let lap = apply_lap2(f);
    let h2_sq = h1_sq + lap.raw_ip(&lap);
    SobolevNorms {
        h1: h1_sq.sqrt(),
        h2: h2_sq.sqrt(),
    }
}

/// Per-axis offset table for callers that want to reason about the stencils directly.
pub fn weights(kind: StencilKind, grid: &Grid3) -> Vec<([isize; 3], f64)> {
    let s = Stencil::for_kind(kind, grid.h());
    s.taps.iter().map(|&(o, w)| (o, w * s.scale)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(grid: Grid3, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::from_vec(grid, (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn constants_are_annihilated() {
        let g = Grid3::new(8, 2.0).unwrap();
        let c = Field::constant(g, 0.7);
        for f in [
            apply_lap4(&c),
            apply_lap2(&c),
            apply_d1_4(&c, Axis::Y),
            apply_forward(&c, Axis::Z),
        ] {
            assert_eq!(f.max_abs(), 0.0);
        }
        assert_eq!(grad_norm_sq(&c), 0.0);
        assert_eq!(grad4_norm_sq(&c), 0.0);
    }

    #[test]
    fn lap4_weights_are_documented_values() {
        let g = Grid3::new(8, 8.0).unwrap();
        let w = weights(StencilKind::Lap4, &g);
        assert_eq!(w.len(), 12);
        let x_taps: Vec<f64> = w.iter().filter(|(o, _)| o[0] != 0).map(|&(_, w)| w * 12.0).collect();
        assert_eq!(x_taps, vec![-1.0, 16.0, 16.0, -1.0]);
        let d1: Vec<f64> = weights(StencilKind::D1_4(Axis::X), &g)
            .iter()
            .map(|&(_, w)| w * 12.0)
            .collect();
        assert_eq!(d1, vec![1.0, -8.0, 8.0, -1.0]);
    }

    #[test]
    fn lap4_cosine_mode_eigenvalue() {
        let l = 3.0;
        for n in [8usize, 15, 16] {
            let g = Grid3::new(n, l).unwrap();
            for ell in 1..n / 2 {
                let k = 2.0 * PI * ell as f64 / l;
                let f = Field::sample(g, |x, _, _| (k * x).cos()).unwrap();
                let h = g.h();
                let lam = 4.0 * (ell as f64 * PI * h / l).sin().powi(2) / (h * h);
                let lam4 = lam + h * h / 12.0 * lam * lam;
                let lf = apply_lap4(&f);
                for (a, b) in lf.values().iter().zip(f.values()) {
                    assert!((a + lam4 * b).abs() < 1e-12 * lam4);
                }
            }
        }
    }

    fn smooth(x: f64, y: f64, z: f64, l: f64) -> f64 {
        let w = 2.0 * PI / l;
        (w * x).sin() * (w * y).cos() + 0.5 * (2.0 * w * z).cos() * (w * x).cos()
    }

    fn smooth_lap(x: f64, y: f64, z: f64, l: f64) -> f64 {
        let w = 2.0 * PI / l;
        -2.0 * w * w * (w * x).sin() * (w * y).cos()
            - 0.5 * 5.0 * w * w * (2.0 * w * z).cos() * (w * x).cos()
    }

    #[test]
    fn lap4_is_fourth_order() {
        let l = 2.0;
        let err = |n: usize| {
            let g = Grid3::new(n, l).unwrap();
            let f = Field::sample(g, |x, y, z| smooth(x, y, z, l)).unwrap();
            let exact = Field::sample(g, |x, y, z| smooth_lap(x, y, z, l)).unwrap();
            norm(&(&apply_lap4(&f) - &exact), Norm::Inf)
        };
        let ratio = err(16) / err(32);
        assert!((ratio - 16.0).abs() < 0.2 * 16.0, "ratio {ratio}");
    }

    #[test]
    fn d1_4_is_fourth_order() {
        let l = 2.5;
        let w = 2.0 * PI / l;
        let err = |n: usize| {
            let g = Grid3::new(n, l).unwrap();
            let f = Field::sample(g, |x, _, _| (w * x).sin()).unwrap();
            let exact = Field::sample(g, |x, _, _| w * (w * x).cos()).unwrap();
            norm(&(&apply_d1_4(&f, Axis::X) - &exact), Norm::Inf)
        };
        let ratio = err(16) / err(32);
        assert!((ratio - 16.0).abs() < 0.2 * 16.0, "ratio {ratio}");
    }

    #[test]
    fn d1_4_acts_on_the_requested_axis() {
        let g = Grid3::new(12, 3.0).unwrap();
        let w = 2.0 * PI / 3.0;
        let f = Field::sample(g, |_, _, z| (w * z).sin()).unwrap();
        assert_eq!(apply_d1_4(&f, Axis::X).max_abs(), 0.0);
        assert!(apply_d1_4(&f, Axis::Z).max_abs() > 1.0);
    }

    #[test]
    fn lap4_output_has_zero_mean() {
        let g = Grid3::new(10, 1.0).unwrap();
        let f = random_field(g, 5);
        assert!(apply_lap4(&f).mean().abs() <= 1e-13 * f.max_abs() / (g.h() * g.h()));
    }

    #[test]
    fn inner_products_of_basic_fields() {
        let l = 3.2;
        let g = Grid3::new(16, l).unwrap();
        let one = Field::constant(g, 1.0);
        assert!(rel(ip(&one, &one).unwrap(), l * l * l) < 1e-14);
        let w = 2.0 * PI * 3.0 / l;
        let c = Field::sample(g, |x, _, _| (w * x).cos()).unwrap();
        let s = Field::sample(g, |x, _, _| (w * x).sin()).unwrap();
        assert!(ip(&c, &s).unwrap().abs() < 1e-13 * l * l * l);
        assert!(rel(norm2(&c).powi(2), l * l * l / 2.0) < 1e-13);
    }

    #[test]
    fn norms_match_definitions() {
        let g = Grid3::new(6, 2.0).unwrap();
        let f = Field::constant(g, -2.0);
        assert!(rel(norm(&f, Norm::L4), 2.0 * 8f64.powf(0.25)) < 1e-14);
        assert!(rel(norm(&f, Norm::L2), 2.0 * 8f64.sqrt()) < 1e-14);
        assert_eq!(norm(&f, Norm::Inf), 2.0);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let a = Field::zeros(Grid3::new(8, 1.0).unwrap());
        let b = Field::zeros(Grid3::new(8, 2.0).unwrap());
        assert!(matches!(ip(&a, &b), Err(Error::GridMismatch { .. })));
        assert!(grad_ip(&a, &b).is_err());
    }

    #[test]
    fn grad_ip_is_summation_by_parts_of_lap2() {
        let g = Grid3::new(9, 1.3).unwrap();
        for seed in 0..10 {
            let f = random_field(g, seed);
            let h = random_field(g, seed + 100);
            let lhs = grad_ip(&f, &h).unwrap();
            let rhs = -ip(&apply_lap2(&f), &h).unwrap();
            let scale = grad_norm_sq(&f).sqrt() * grad_norm_sq(&h).sqrt();
            assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn grad_norm_is_nonnegative() {
        let g = Grid3::new(6, 1.0).unwrap();
        for seed in 0..100 {
            assert!(grad_norm_sq(&random_field(g, seed)) >= 0.0);
        }
    }

    #[test]
    fn grad4_norm_matches_lap4_form_and_sandwich() {
        for n in [8usize, 11] {
            let g = Grid3::new(n, 2.0).unwrap();
            for seed in 0..20 {
                let f = random_field(g, seed);
                let a = grad4_norm_sq(&f);
                let b = -ip(&f, &apply_lap4(&f)).unwrap();
                assert!(rel(a, b) < 1e-12);
                let g2 = grad_norm_sq(&f);
                assert!(g2 <= a * (1.0 + 1e-13));
                assert!(a <= 4.0 / 3.0 * g2 * (1.0 + 1e-13));
            }
        }
    }

    #[test]
    fn sobolev_norms_of_simple_fields() {
        let g = Grid3::new(8, 1.5).unwrap();
        let z = sobolev_norms(&Field::zeros(g));
        assert_eq!((z.h1, z.h2), (0.0, 0.0));
        let c = sobolev_norms(&Field::constant(g, -0.5));
        let expect = 0.5 * 1.5f64.powf(1.5);
        assert!(rel(c.h1, expect) < 1e-14 && rel(c.h2, expect) < 1e-14);
        let f = random_field(g, 9);
        let s = sobolev_norms(&f);
        assert!(s.h2 >= s.h1 && s.h1 >= norm2(&f));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn lap4_is_symmetric(seed in 0u64..10_000, n in 6usize..12) {
            let g = Grid3::new(n, 1.0 + n as f64 / 7.0).unwrap();
            let f = random_field(g, seed);
            let h = random_field(g, seed ^ 0xABCD);
            let a = ip(&apply_lap4(&f), &h).unwrap();
            let b = ip(&f, &apply_lap4(&h)).unwrap();
            let scale = norm2(&apply_lap4(&f)) * norm2(&h);
            proptest::prop_assert!((a - b).abs() <= 1e-12 * scale);
        }

        #[test]
        fn lap_sandwich_holds(seed in 0u64..10_000, n in 6usize..13) {
            let g = Grid3::new(n, 2.0).unwrap();
            let f = random_field(g, seed);
            let l2 = norm2(&apply_lap2(&f));
            let l4 = norm2(&apply_lap4(&f));
            proptest::prop_assert!(l2 <= l4 * (1.0 + 1e-13));
            proptest::prop_assert!(l4 <= 4.0 / 3.0 * l2 * (1.0 + 1e-13));
        }
    }
}

//! Seeded smooth random grid functions.

use crate::error::Result;
use crate::grid::{Field, Grid3};
use crate::spectral::{wavenumber, SpectralOps};
use crate::stencil::Axis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Shape of a random field: white noise filtered by `exp(-decay |k|)`, where
/// `|k|` is the Euclidean norm of the integer wavenumber triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomFieldSpec {
    pub seed: u64,
    pub decay: f64,
    /// Target max-norm of the fluctuation; `0` leaves the filtered noise unscaled.
    pub amplitude: f64,
    pub mean: f64,
}

impl RandomFieldSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            decay: 0.5,
            amplitude: 1.0,
            mean: 0.0,
        }
    }
}

/// Band-limited random field; every mode is present, weighted by the decay factor.
pub fn random_field(grid: Grid3, spec: &RandomFieldSpec) -> Result<Field> {
    random_field_with(&SpectralOps::new(grid), spec)
}

/// As [`random_field`] with a reusable transform plan.
pub fn random_field_with(ops: &SpectralOps, spec: &RandomFieldSpec) -> Result<Field> {
    let grid = *ops.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise: Vec<f64> = (0..grid.len()).map(|_| rng.sample(StandardNormal)).collect();
    let noise = Field::from_vec(grid, noise)?;
    let n = grid.n();
    let decay = spec.decay;
    let mut f = ops.apply_multiplier(&noise, |i, j, k| {
        let (a, b, c) = (wavenumber(i, n), wavenumber(j, n), wavenumber(k, n));
        let r = ((a * a + b * b + c * c) as f64).sqrt();
        if r == 0.0 {
            0.0
        } else {
            (-decay * r).exp()
        }
    })?;
    if spec.amplitude > 0.0 {
        let m = f.max_abs();
        if m > 0.0 {
            f.scale(spec.amplitude / m);
        }
    }
    f.add_scalar(spec.mean - f.mean());
    Ok(f)
}

/// Product of cosines at the highest wavenumber on the selected axes (the
/// others are constant), with seeded phases. Even grids use the mode just
/// below Nyquist, which is the highest mode that is not aliased with its
/// negative.
pub fn nyquist_adjacent_mode(grid: Grid3, axes: &[Axis], seed: u64) -> Result<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n();
    let ell = if n.is_multiple_of(2) { n / 2 - 1 } else { n / 2 };
    let k = 2.0 * PI * ell as f64 / grid.length();
    let mut active = [false; 3];
    for a in axes {
        active[a.index()] = true;
    }
    let phases: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI));
    Field::sample(grid, move |x, y, z| {
        [x, y, z]
            .iter()
            .enumerate()
            .map(|(a, &c)| if active[a] { (k * c + phases[a]).cos() } else { 1.0 })
            .product()
    })
}

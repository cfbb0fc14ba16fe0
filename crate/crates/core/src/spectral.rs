//! Discrete Fourier analysis of grid functions.
//!
//! A grid function is expanded as
//! `f[i,j,k] = sum c[l,m,n] exp(2 pi i (l x_i + m y_j + n z_k) / L)` over the
//! wavenumbers of the grid, with `x_i` the cell centers. For odd `N = 2K + 1`
//! the wavenumbers are `-K..=K`; for even `N` they are `-N/2+1..=N/2`. The same
//! coefficients define the band-limited extension `f_F(x, y, z)`, whose
//! continuum norms are evaluated exactly by Parseval sums.
//!
//! Coefficient arrays use FFT ordering: array index `p` along an axis holds
//! wavenumber [`wavenumber`]`(p, N)`.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid3};
use crate::stencil;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Signed wavenumber stored at FFT index `p` of an axis with `n` points.
#[inline]
pub fn wavenumber(p: usize, n: usize) -> i64 {
    if p <= n / 2 {
        p as i64
    } else {
        p as i64 - n as i64
    }
}

/// `lambda_l = 4 sin^2(l pi h / L) / h^2`, the symbol of the centered second difference.
pub fn symbol_lam(ell: i64, n: usize, l: f64) -> f64 {
    let h = l / n as f64;
    let s = (ell as f64 * PI * h / l).sin();
    4.0 * s * s / (h * h)
}

/// `lambda^(4)_l = lambda_l + h^2/12 lambda_l^2`, the per-axis symbol of the long stencil.
pub fn symbol_lam4(ell: i64, n: usize, l: f64) -> f64 {
    let h = l / n as f64;
    let lam = symbol_lam(ell, n, l);
    lam + h * h / 12.0 * lam * lam
}

/// Per-axis operator symbols, indexed by FFT position.
#[derive(Debug, Clone)]
pub struct SymbolTables {
    pub n: usize,
    pub wavenumbers: Vec<i64>,
    /// `|mu_l| = 2 |sin(l pi h / L)| / h`
    pub mu: Vec<f64>,
    /// `|nu_l| = 2 pi |l| / L`
    pub nu: Vec<f64>,
    /// `lambda_l = |mu_l|^2`
    pub lam: Vec<f64>,
    /// `lambda_l + h^2/12 lambda_l^2`
    pub lam4: Vec<f64>,
    /// `Lambda_l = |nu_l|^2`
    pub big_lam: Vec<f64>,
}

impl SymbolTables {
    pub fn new(grid: &Grid3) -> Self {
        let n = grid.n();
        let l = grid.length();
        let h = grid.h();
        let wavenumbers: Vec<i64> = (0..n).map(|p| wavenumber(p, n)).collect();
        let mu: Vec<f64> = wavenumbers
            .iter()
            .map(|&k| 2.0 * (k as f64 * PI * h / l).sin().abs() / h)
            .collect();
        let nu: Vec<f64> = wavenumbers
            .iter()
            .map(|&k| 2.0 * PI * (k as f64).abs() / l)
            .collect();
        let lam: Vec<f64> = wavenumbers.iter().map(|&k| symbol_lam(k, n, l)).collect();
        let lam4: Vec<f64> = wavenumbers.iter().map(|&k| symbol_lam4(k, n, l)).collect();
        let big_lam = nu.iter().map(|v| v * v).collect();
        Self {
            n,
            wavenumbers,
            mu,
            nu,
            lam,
            lam4,
            big_lam,
        }
    }
}

/// Complex 3-D FFT over an `N^3` buffer in the grid's x-fastest layout.
#[derive(Clone)]
pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("n", &self.n).finish()
    }
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform including the `1/N^3` normalization, in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let s = 1.0 / (self.n * self.n * self.n) as f64;
        data.par_iter_mut().for_each(|v| *v *= s);
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let plane = n * n;
        assert_eq!(data.len(), plane * n);

        // x lines are contiguous
        data.par_chunks_mut(plane).for_each(|slab| fft.process(slab));

        // y lines: gather within each z slab
        data.par_chunks_mut(plane).for_each(|slab| {
            let mut tmp = vec![Complex64::new(0.0, 0.0); plane];
            for j in 0..n {
                for i in 0..n {
                    tmp[i * n + j] = slab[i + n * j];
                }
            }
            fft.process(&mut tmp);
            for j in 0..n {
                for i in 0..n {
                    slab[i + n * j] = tmp[i * n + j];
                }
            }
        });

        // z lines: gather into [j][i][k], transform, scatter back
        let mut tmp = vec![Complex64::new(0.0, 0.0); plane * n];
        {
            let src = &*data;
            tmp.par_chunks_mut(plane).enumerate().for_each(|(j, chunk)| {
                for i in 0..n {
                    for k in 0..n {
                        chunk[i * n + k] = src[i + n * (j + n * k)];
                    }
                }
                fft.process(chunk);
            });
        }
        data.par_chunks_mut(plane).enumerate().for_each(|(k, slab)| {
            for j in 0..n {
                for i in 0..n {
                    slab[i + n * j] = tmp[j * plane + i * n + k];
                }
            }
        });
    }
}

/// Fourier coefficients of a real grid function, in FFT ordering.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Grid3,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient for signed wavenumbers `(l, m, n)`; wraps modulo `N`.
    pub fn coeff(&self, l: i64, m: i64, n: i64) -> Complex64 {
        let nn = self.grid.n() as i64;
        let p = |k: i64| k.rem_euclid(nn) as usize;
        self.coeffs[self.grid.index(p(l), p(m), p(n))]
    }

    /// `L^3 sum w(l,m,n) |c|^2` with the weight supplied per FFT index triple.
    pub fn weighted_sum(&self, weight: impl Fn(usize, usize, usize) -> f64 + Sync) -> f64 {
        let n = self.grid.n();
        let plane = n * n;
        let partial: Vec<f64> = self
            .coeffs
            .par_chunks(plane)
            .enumerate()
            .map(|(k, slab)| {
                let mut acc = 0.0;
                for j in 0..n {
                    for i in 0..n {
                        let w = weight(i, j, k);
                        if w != 0.0 {
                            acc += w * slab[i + n * j].norm_sqr();
                        }
                    }
                }
                acc
            })
            .collect();
        self.grid.volume() * crate::grid::pairwise_sum(&partial)
    }
}

/// Exponents accepted by [`SpectralOps::extension_hm_norm`].
pub const SOBOLEV_RANGE: std::ops::RangeInclusive<i32> = -1..=8;

/// Seminorms of the band-limited extension `f_F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Seminorm {
    /// `||grad f_F||`
    Gradient,
    /// `||Delta^j f_F||`
    LapPow(u32),
    /// `||grad Delta^j f_F||`
    GradLapPow(u32),
    /// `||d^3 f_F / d axis^3||`
    ThirdPartial(stencil::Axis),
    /// `||f_F||_{H^-1} = ||grad (-Delta)^-1 f_F||`, the zero mode excluded.
    HMinus1,
}

/// Result of comparing the continuum gradient norm with the long-stencil one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientGap {
    /// `||grad f_F||^2 - ||grad_{h,(4)} f||_2^2`
    pub gap: f64,
    /// `h^4/64 * sum_axes ||d^3_a f_F||^2`
    pub bound: f64,
    /// `||f_F||_{H^3}^2`, the scale for rounding slack.
    pub h3_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerProductPair {
    pub discrete: f64,
    pub continuous: f64,
}

/// Transforms, symbol tables and diagonal operators for one grid.
#[derive(Debug, Clone)]
pub struct SpectralOps {
    grid: Grid3,
    fft: Fft3,
    tables: SymbolTables,
    /// `exp(-i pi l / N)` per FFT index; shifts DFT phases to cell centers.
    phase: Vec<Complex64>,
    lam4_3d: Vec<f64>,
}

impl SpectralOps {
    pub fn new(grid: Grid3) -> Self {
        let n = grid.n();
        let tables = SymbolTables::new(&grid);
        let phase = tables
            .wavenumbers
            .iter()
            .map(|&k| Complex64::from_polar(1.0, -PI * k as f64 / n as f64))
            .collect();
        let mut lam4_3d = vec![0.0; grid.len()];
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    lam4_3d[grid.index(i, j, k)] =
                        tables.lam4[i] + tables.lam4[j] + tables.lam4[k];
                }
            }
        }
        Self {
            grid,
            fft: Fft3::new(n),
            tables,
            phase,
            lam4_3d,
        }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn tables(&self) -> &SymbolTables {
        &self.tables
    }

    /// `lambda^(4)_{lmn}` per FFT index, flat in grid layout.
    pub fn lam4_3d(&self) -> &[f64] {
        &self.lam4_3d
    }

    /// `Lambda_{lmn}` at FFT indices `(i, j, k)`.
    #[inline]
    pub fn big_lam_at(&self, i: usize, j: usize, k: usize) -> f64 {
        let t = &self.tables.big_lam;
        t[i] + t[j] + t[k]
    }

    fn check_grid(&self, f: &Field) -> Result<()> {
        self.grid.check_same(f.grid())
    }

    fn to_complex(f: &Field) -> Vec<Complex64> {
        f.values().par_iter().map(|&v| Complex64::new(v, 0.0)).collect()
    }

    fn to_real(&self, data: Vec<Complex64>) -> Field {
        Field::from_raw(self.grid, data.into_par_iter().map(|c| c.re).collect())
    }

    /// Coefficients of the cell-centered Fourier expansion.
    pub fn fft(&self, f: &Field) -> Result<SpectralField> {
        self.check_grid(f)?;
        let n = self.grid.n();
        let mut data = Self::to_complex(f);
        self.fft.forward(&mut data);
        let s = 1.0 / self.grid.len() as f64;
        let phase = &self.phase;
        data.par_chunks_mut(n * n).enumerate().for_each(|(k, slab)| {
            for j in 0..n {
                let pjk = phase[j] * phase[k];
                for i in 0..n {
                    slab[i + n * j] *= phase[i] * pjk * s;
                }
            }
        });
        Ok(SpectralField {
            grid: self.grid,
            coeffs: data,
        })
    }

    /// Grid values from coefficients; the imaginary part is discarded.
    pub fn ifft(&self, spec: &SpectralField) -> Result<Field> {
        self.grid.check_same(spec.grid())?;
        let n = self.grid.n();
        let mut data = spec.coeffs.clone();
        let s = self.grid.len() as f64;
        let phase = &self.phase;
        data.par_chunks_mut(n * n).enumerate().for_each(|(k, slab)| {
            for j in 0..n {
                let pjk = (phase[j] * phase[k]).conj();
                for i in 0..n {
                    slab[i + n * j] *= phase[i].conj() * pjk * s;
                }
            }
        });
        self.fft.inverse(&mut data);
        Ok(self.to_real(data))
    }

    /// Multiplies every mode by a real weight given per FFT index triple.
    pub fn apply_multiplier(
        &self,
        f: &Field,
        weight: impl Fn(usize, usize, usize) -> f64 + Sync,
    ) -> Result<Field> {
        self.check_grid(f)?;
        Ok(self.apply_multiplier_unchecked(f, weight))
    }

    pub(crate) fn apply_multiplier_unchecked(
        &self,
        f: &Field,
        weight: impl Fn(usize, usize, usize) -> f64 + Sync,
    ) -> Field {
        let n = self.grid.n();
        let mut data = Self::to_complex(f);
        self.fft.forward(&mut data);
        data.par_chunks_mut(n * n).enumerate().for_each(|(k, slab)| {
            for j in 0..n {
                for i in 0..n {
                    slab[i + n * j] *= weight(i, j, k);
                }
            }
        });
        self.fft.inverse(&mut data);
        self.to_real(data)
    }

    /// Divides every mode by a positive symbol given per flat index.
    pub(crate) fn apply_inverse_symbol(&self, f: &Field, symbol: &[f64]) -> Field {
        let mut data = Self::to_complex(f);
        self.fft.forward(&mut data);
        data.par_iter_mut()
            .zip(symbol.par_iter())
            .for_each(|(c, &s)| *c /= s);
        self.fft.inverse(&mut data);
        self.to_real(data)
    }

    /// `Delta_{h,(4)} f` as the Fourier multiplier `-lambda^(4)_{lmn}`.
    pub fn apply_lap4_spectral(&self, f: &Field) -> Result<Field> {
        let lam = &self.lam4_3d;
        let n = self.grid.n();
        self.apply_multiplier(f, |i, j, k| -lam[i + n * (j + n * k)])
    }

    /// Continuum Laplacian of the extension, sampled on the grid: multiplier `-Lambda_{lmn}`.
    pub fn apply_continuum_laplacian(&self, f: &Field) -> Result<Field> {
        self.apply_multiplier(f, |i, j, k| -self.big_lam_at(i, j, k))
    }

    fn mean_zero_tolerance(f: &Field) -> f64 {
        1e-10 * stencil::norm2(f)
    }

    fn check_mean_zero(f: &Field) -> Result<()> {
        let mean = f.mean();
        let tolerance = Self::mean_zero_tolerance(f);
        if mean.abs() > tolerance {
            return Err(Error::NotMeanZero { mean, tolerance });
        }
        Ok(())
    }

    /// Mean-zero `g` with `-Delta_{h,(4)} g = f`. Rejects inputs with nonzero mean.
    pub fn inv_neg_lap4(&self, f: &Field) -> Result<Field> {
        self.check_grid(f)?;
        Self::check_mean_zero(f)?;
        Ok(self.inv_neg_lap4_projected(f))
    }

    /// Inverse on the mean-zero subspace; the zero mode of `f` is discarded.
    pub fn inv_neg_lap4_projected(&self, f: &Field) -> Field {
        let lam = &self.lam4_3d;
        let n = self.grid.n();
        self.apply_multiplier_unchecked(f, |i, j, k| {
            let s = lam[i + n * (j + n * k)];
            if i == 0 && j == 0 && k == 0 {
                0.0
            } else {
                1.0 / s
            }
        })
    }

    /// `||f||_{-1,h} = sqrt(<f, (-Delta_{h,(4)})^-1 f>)` for mean-zero `f`.
    pub fn hm1_norm(&self, f: &Field) -> Result<f64> {
        self.check_grid(f)?;
        Self::check_mean_zero(f)?;
        Ok(self.hm1_norm_projected(f))
    }

    /// [`Self::hm1_norm`] of the mean-zero part of `f`.
    pub fn hm1_norm_projected(&self, f: &Field) -> f64 {
        let spec = self.fft(f).expect("grid checked by caller");
        let lam = &self.lam4_3d;
        let n = self.grid.n();
        spec.weighted_sum(|i, j, k| {
            if i == 0 && j == 0 && k == 0 {
                0.0
            } else {
                1.0 / lam[i + n * (j + n * k)]
            }
        })
        .sqrt()
    }

    /// Squared seminorm of the extension from precomputed coefficients.
    pub fn seminorm_sq(&self, spec: &SpectralField, kind: Seminorm) -> f64 {
        let t = &self.tables;
        match kind {
            Seminorm::Gradient => spec.weighted_sum(|i, j, k| self.big_lam_at(i, j, k)),
            Seminorm::LapPow(p) => {
                spec.weighted_sum(|i, j, k| self.big_lam_at(i, j, k).powi(2 * p as i32))
            }
            Seminorm::GradLapPow(p) => {
                spec.weighted_sum(|i, j, k| self.big_lam_at(i, j, k).powi(2 * p as i32 + 1))
            }
            Seminorm::ThirdPartial(axis) => spec.weighted_sum(|i, j, k| {
                let p = [i, j, k][axis.index()];
                t.nu[p].powi(6)
            }),
            Seminorm::HMinus1 => spec.weighted_sum(|i, j, k| {
                if i == 0 && j == 0 && k == 0 {
                    0.0
                } else {
                    1.0 / self.big_lam_at(i, j, k)
                }
            }),
        }
    }

    pub fn extension_seminorm(&self, f: &Field, kind: Seminorm) -> Result<f64> {
        let spec = self.fft(f)?;
        if kind == Seminorm::HMinus1 {
            Self::check_mean_zero(f)?;
        }
        Ok(self.seminorm_sq(&spec, kind).sqrt())
    }

    /// `||f_F||_{H^m}` with weight `(1 + Lambda)^m` for `m >= 0`; `m = -1` is the
    /// mean-zero `H^-1` norm `||grad (-Delta)^-1 f_F||`.
    pub fn extension_hm_norm(&self, f: &Field, m: i32) -> Result<f64> {
        if !SOBOLEV_RANGE.contains(&m) {
            return Err(Error::SobolevIndex(m));
        }
        if m == -1 {
            return self.extension_seminorm(f, Seminorm::HMinus1);
        }
        let spec = self.fft(f)?;
        Ok(self.hm_sq(&spec, m).sqrt())
    }

    fn hm_sq(&self, spec: &SpectralField, m: i32) -> f64 {
        spec.weighted_sum(|i, j, k| (1.0 + self.big_lam_at(i, j, k)).powi(m))
    }

    /// Gap between the continuum and long-stencil gradient norms, with its `h^4/64` bound.
    pub fn gradient_gap(&self, f: &Field) -> Result<GradientGap> {
        let spec = self.fft(f)?;
        let h = self.grid.h();
        let continuum = self.seminorm_sq(&spec, Seminorm::Gradient);
        let third: f64 = stencil::Axis::ALL
            .iter()
            .map(|&a| self.seminorm_sq(&spec, Seminorm::ThirdPartial(a)))
            .sum();
        Ok(GradientGap {
            gap: continuum - stencil::grad4_norm_sq(f),
            bound: h.powi(4) / 64.0 * third,
            h3_sq: self.hm_sq(&spec, 3),
        })
    }

    /// `<f, g>` on the grid next to `(f_F, g_F)` by Parseval.
    pub fn bandlimited_ip(&self, f: &Field, g: &Field) -> Result<InnerProductPair> {
        let discrete = stencil::ip(f, g)?;
        let fs = self.fft(f)?;
        let gs = self.fft(g)?;
        let partial: Vec<f64> = fs
            .coeffs
            .par_iter()
            .zip(gs.coeffs.par_iter())
            .map(|(a, b)| (a * b.conj()).re)
            .collect();
        let continuous = self.grid.volume() * crate::grid::pairwise_sum(&partial);
        Ok(InnerProductPair {
            discrete,
            continuous,
        })
    }

    /// Samples the extension `f_F` on a finer grid of `m` cells per axis (odd `N` only).
    ///
    /// The extension is real only when every wavenumber pairs with its negative,
    /// which holds for odd `N`.
    pub fn interpolate(&self, f: &Field, m: usize) -> Result<Field> {
        let n = self.grid.n();
        if n.is_multiple_of(2) {
            return Err(Error::InvalidParams(
                "spectral interpolation requires odd N".into(),
            ));
        }
        if m < n {
            return Err(Error::InvalidParams(format!(
                "target resolution {m} is below source resolution {n}"
            )));
        }
        let fine = Grid3::new(m, self.grid.length())?;
        let fine_ops = SpectralOps::new(fine);
        let spec = self.fft(f)?;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); fine.len()];
        let wrap = |k: i64| k.rem_euclid(m as i64) as usize;
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let (a, b, c) = (wavenumber(i, n), wavenumber(j, n), wavenumber(k, n));
                    coeffs[fine.index(wrap(a), wrap(b), wrap(c))] =
                        spec.coeffs[self.grid.index(i, j, k)];
                }
            }
        }
        fine_ops.ifft(&SpectralField {
            grid: fine,
            coeffs,
        })
    }
}

pub fn fft(f: &Field) -> SpectralField {
    SpectralOps::new(*f.grid()).fft(f).expect("same grid")
}

pub fn ifft(spec: &SpectralField) -> Field {
    SpectralOps::new(*spec.grid()).ifft(spec).expect("same grid")
}

pub fn apply_lap4_spectral(f: &Field) -> Field {
    SpectralOps::new(*f.grid())
        .apply_lap4_spectral(f)
        .expect("same grid")
}

pub fn inv_neg_lap4(f: &Field) -> Result<Field> {
    SpectralOps::new(*f.grid()).inv_neg_lap4(f)
}

pub fn hm1_norm(f: &Field) -> Result<f64> {
    SpectralOps::new(*f.grid()).hm1_norm(f)
}

pub fn extension_hm_norm(f: &Field, m: i32) -> Result<f64> {
    SpectralOps::new(*f.grid()).extension_hm_norm(f, m)
}

pub fn check_gradient_gap(f: &Field) -> GradientGap {
    SpectralOps::new(*f.grid())
        .gradient_gap(f)
        .expect("same grid")
}

pub fn bandlimited_ip_identity(f: &Field, g: &Field) -> Result<InnerProductPair> {
    SpectralOps::new(*f.grid()).bandlimited_ip(f, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stencil::{apply_lap4, grad4_norm_sq, norm2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: Grid3, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::from_vec(grid, (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    fn mean_free(f: &Field) -> Field {
        let mut g = f.clone();
        g.add_scalar(-f.mean());
        g
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    /// Direct evaluation of the cell-centered transform.
    fn naive_coeff(f: &Field, l: i64, m: i64, nn: i64) -> Complex64 {
        let g = f.grid();
        let n = g.n();
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let arg = -2.0 * PI
                        * (l as f64 * g.coord(i) + m as f64 * g.coord(j) + nn as f64 * g.coord(k))
                        / g.length();
                    acc += f.at(i, j, k) * Complex64::from_polar(1.0, arg);
                }
            }
        }
        acc / g.len() as f64
    }

    #[test]
    fn wavenumber_ordering() {
        let even: Vec<i64> = (0..6).map(|p| wavenumber(p, 6)).collect();
        assert_eq!(even, vec![0, 1, 2, 3, -2, -1]);
        let odd: Vec<i64> = (0..7).map(|p| wavenumber(p, 7)).collect();
        assert_eq!(odd, vec![0, 1, 2, 3, -3, -2, -1]);
    }

    #[test]
    fn fft_matches_direct_sum() {
        for n in [6usize, 7] {
            let g = Grid3::new(n, 1.7).unwrap();
            let f = random_field(g, n as u64);
            let spec = fft(&f);
            for (l, m, k) in [(0, 0, 0), (1, 0, 0), (2, -1, 3), (-2, 2, 1), (3, 3, -1)] {
                let a = spec.coeff(l, m, k);
                let b = naive_coeff(&f, l, m, k);
                assert!((a - b).norm() < 1e-14, "{:?} {a} {b}", (l, m, k));
            }
        }
    }

    #[test]
    fn delta_has_flat_spectrum() {
        let g = Grid3::new(6, 3.0).unwrap();
        let mut f = Field::zeros(g);
        f.values_mut()[g.index(2, 4, 1)] = 1.0;
        let spec = fft(&f);
        let expect = g.cell_volume() / g.volume();
        for c in spec.coeffs() {
            assert!((c.norm() - expect).abs() < 1e-16);
        }
    }

    #[test]
    fn cosine_mode_has_two_half_coefficients() {
        let g = Grid3::new(8, 2.0).unwrap();
        let f = Field::sample(g, |_, y, _| (2.0 * PI * 2.0 * y / 2.0).cos()).unwrap();
        let spec = fft(&f);
        assert!((spec.coeff(0, 2, 0).norm() - 0.5).abs() < 1e-14);
        assert!((spec.coeff(0, -2, 0).norm() - 0.5).abs() < 1e-14);
        let rest: f64 = spec.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>() - 0.5;
        assert!(rest.abs() < 1e-14);
    }

    #[test]
    fn round_trip_symmetry_and_parseval() {
        for n in [8usize, 9] {
            let g = Grid3::new(n, 2.5).unwrap();
            let f = random_field(g, 1);
            let spec = fft(&f);
            let back = ifft(&spec);
            assert!(norm_inf_diff(&f, &back) <= 1e-13 * f.max_abs());
            let k = n as i64 / 2 - if n % 2 == 0 { 1 } else { 0 };
            for (l, m, q) in [(1, 2, 3), (k, -1, 0), (-k, k, k)] {
                let a = spec.coeff(l, m, q);
                let b = spec.coeff(-l, -m, -q).conj();
                assert!((a - b).norm() < 1e-15);
            }
            let parseval = spec.weighted_sum(|_, _, _| 1.0);
            assert!(rel(parseval, norm2(&f).powi(2)) < 1e-12);
        }
    }

    fn norm_inf_diff(a: &Field, b: &Field) -> f64 {
        (a - b).max_abs()
    }

    #[test]
    fn lap4_symbol_at_small_grid() {
        // h = 1: lambda_1 = 4 sin^2(pi/4) = 2, lambda^(4)_1 = 2 + 4/12
        assert!((symbol_lam(1, 4, 4.0) - 2.0).abs() < 1e-15);
        assert!((symbol_lam4(1, 4, 4.0) - 7.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_lap4_matches_stencil() {
        for n in [8usize, 15, 16] {
            let g = Grid3::new(n, 1.9).unwrap();
            let ops = SpectralOps::new(g);
            for seed in 0..10 {
                let f = random_field(g, seed);
                let a = ops.apply_lap4_spectral(&f).unwrap();
                let b = apply_lap4(&f);
                assert!(norm2(&(&a - &b)) <= 1e-11 * norm2(&b));
            }
            assert!(ops.apply_lap4_spectral(&Field::constant(g, 2.0)).unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_lap4_round_trip_and_errors() {
        let g = Grid3::new(12, 3.2).unwrap();
        let ops = SpectralOps::new(g);
        let f = mean_free(&random_field(g, 2));
        let u = ops.inv_neg_lap4(&f).unwrap();
        assert!(u.mean().abs() < 1e-14);
        let back = &apply_lap4(&u) * -1.0;
        assert!(norm2(&(&back - &f)) <= 1e-11 * norm2(&f));

        let w = 2.0 * PI * 2.0 / 3.2;
        let mode = Field::sample(g, |x, _, z| (w * x).cos() * (w * z).sin()).unwrap();
        let lam = 2.0 * symbol_lam4(2, 12, 3.2);
        let inv = ops.inv_neg_lap4(&mode).unwrap();
        assert!(norm2(&(&inv - &(&mode * (1.0 / lam)))) < 1e-13);

        match ops.inv_neg_lap4(&Field::constant(g, 1.0)) {
            Err(Error::NotMeanZero { mean, .. }) => assert!((mean - 1.0).abs() < 1e-15),
            other => panic!("expected mean error, got {other:?}"),
        }
        assert!(ops.hm1_norm(&Field::constant(g, 0.5)).is_err());
    }

    #[test]
    fn hm1_norm_of_single_mode_and_scaling() {
        let l = 2.0;
        let g = Grid3::new(10, l).unwrap();
        let ops = SpectralOps::new(g);
        let a = 0.8;
        let w = 2.0 * PI * 3.0 / l;
        let f = Field::sample(g, |x, _, _| a * (w * x).cos()).unwrap();
        // ||f||_2^2 = a^2 L^3 / 2 spread over modes +-3, each divided by lambda^(4)_3
        let expect = a * (l.powi(3) / 2.0).sqrt() / symbol_lam4(3, 10, l).sqrt();
        assert!(rel(ops.hm1_norm(&f).unwrap(), expect) < 1e-13);
        let f2 = &f * -3.0;
        assert!(rel(ops.hm1_norm(&f2).unwrap(), 3.0 * ops.hm1_norm(&f).unwrap()) < 1e-14);
    }

    #[test]
    fn hm1_norm_equals_long_stencil_gradient_of_inverse() {
        let g = Grid3::new(11, 1.0).unwrap();
        let ops = SpectralOps::new(g);
        for seed in 0..5 {
            let f = mean_free(&random_field(g, seed));
            let t = ops.inv_neg_lap4(&f).unwrap();
            let lhs = ops.hm1_norm(&f).unwrap();
            let rhs = grad4_norm_sq(&t).sqrt();
            assert!(rel(lhs, rhs) < 1e-11);
        }
    }

    #[test]
    fn extension_norms() {
        let l = 3.2;
        let g = Grid3::new(9, l).unwrap();
        let ops = SpectralOps::new(g);
        let f = random_field(g, 4);
        assert!(rel(ops.extension_hm_norm(&f, 0).unwrap(), norm2(&f)) < 1e-13);
        let c = Field::constant(g, -1.5);
        for m in 0..=8 {
            assert!(rel(ops.extension_hm_norm(&c, m).unwrap(), 1.5 * l.powf(1.5)) < 1e-13);
        }
        let w = 2.0 * PI * 2.0 / l;
        let mode = Field::sample(g, |_, y, _| (w * y).sin()).unwrap();
        let ratio = ops.extension_seminorm(&mode, Seminorm::Gradient).unwrap() / norm2(&mode);
        assert!(rel(ratio, w) < 1e-13);
        assert!(matches!(ops.extension_hm_norm(&f, 9), Err(Error::SobolevIndex(9))));
        assert!(matches!(ops.extension_hm_norm(&f, -2), Err(Error::SobolevIndex(-2))));
        assert!(ops.extension_hm_norm(&f, -1).is_err());
        assert!(ops.extension_hm_norm(&mean_free(&f), -1).is_ok());
    }

    #[test]
    fn symbol_tables_sandwich() {
        for n in [15usize, 16, 31, 32, 33] {
            let g = Grid3::new(n, 3.2).unwrap();
            let t = SymbolTables::new(&g);
            assert_eq!(t.mu[0], 0.0);
            assert_eq!(t.lam4[0], 0.0);
            for p in 0..n {
                assert!(t.mu[p] >= 0.0 && t.lam4[p] >= 0.0);
                assert!(2.0 / PI * t.nu[p] <= t.mu[p] * (1.0 + 1e-13));
                assert!(t.mu[p] <= t.nu[p] * (1.0 + 1e-13));
                assert!((t.lam[p] - t.mu[p] * t.mu[p]).abs() <= 1e-12 * t.lam[p]);
            }
            let ops = SpectralOps::new(g);
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        let big = ops.big_lam_at(i, j, k);
                        let l4 = ops.lam4_3d()[g.index(i, j, k)];
                        assert!(4.0 / (PI * PI) * big <= l4 * (1.0 + 1e-13));
                        assert!(l4 <= big * (1.0 + 1e-13));
                    }
                }
            }
        }
    }

    #[test]
    fn gradient_gap_cases() {
        let c = Field::constant(Grid3::new(8, 1.0).unwrap(), 2.0);
        let gap = check_gradient_gap(&c);
        assert!(gap.gap.abs() < 1e-12 && gap.bound == 0.0);

        let l = 3.2;
        let g = Grid3::new(64, l).unwrap();
        let w = 2.0 * PI / l;
        let low = Field::sample(g, |x, _, _| (w * x).cos()).unwrap();
        let r = check_gradient_gap(&low);
        assert!(r.gap > 0.0 && r.gap < 0.75 * r.bound);

        let g = Grid3::new(15, l).unwrap();
        let wk = 2.0 * PI * 7.0 / l;
        let high = Field::sample(g, |_, _, z| (wk * z).sin()).unwrap();
        let r = check_gradient_gap(&high);
        assert!(r.gap > 0.0 && r.gap <= r.bound && r.gap > 0.1 * r.bound);
    }

    #[test]
    fn bandlimited_inner_products() {
        let l = 2.0;
        let g = Grid3::new(15, l).unwrap();
        let w = 2.0 * PI * 4.0 / l;
        let m = Field::sample(g, |x, _, _| (w * x).cos()).unwrap();
        let pair = bandlimited_ip_identity(&m, &m).unwrap();
        assert!(rel(pair.discrete, l.powi(3) / 2.0) < 1e-13);
        assert!(rel(pair.continuous, l.powi(3) / 2.0) < 1e-13);

        let f = random_field(g, 8);
        let h = random_field(g, 9);
        let pair = bandlimited_ip_identity(&f, &h).unwrap();
        assert!((pair.discrete - pair.continuous).abs() <= 1e-12 * norm2(&f) * norm2(&h));

        let pair = bandlimited_ip_identity(&Field::constant(g, 1.0), &mean_free(&h)).unwrap();
        assert!(pair.discrete.abs() < 1e-13 && pair.continuous.abs() < 1e-13);
    }

    #[test]
    fn interpolation_reproduces_extension() {
        let l = 2.0;
        let g = Grid3::new(7, l).unwrap();
        let w = 2.0 * PI / l;
        let exact = |x: f64, y: f64, z: f64| (w * x).cos() * (2.0 * w * y).sin() + (3.0 * w * z).cos();
        let coarse = Field::sample(g, exact).unwrap();
        let fine = SpectralOps::new(g).interpolate(&coarse, 12).unwrap();
        let expect = Field::sample(*fine.grid(), exact).unwrap();
        assert!((&fine - &expect).max_abs() < 1e-13);
        let even = Field::zeros(Grid3::new(8, l).unwrap());
        assert!(SpectralOps::new(*even.grid()).interpolate(&even, 16).is_err());
    }

    #[test]
    fn continuum_laplacian_is_exact_on_modes() {
        let l = 3.0;
        let g = Grid3::new(12, l).unwrap();
        let w = 2.0 * PI / l;
        let f = Field::sample(g, |x, y, _| (w * x).sin() * (2.0 * w * y).cos()).unwrap();
        let lf = SpectralOps::new(g).apply_continuum_laplacian(&f).unwrap();
        let expect = &f * (-5.0 * w * w);
        assert!((&lf - &expect).max_abs() < 1e-12);
    }
}

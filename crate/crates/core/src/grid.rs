//! Uniform periodic grid on the cube `(0, L)^3` and real grid functions.
//!
//! Values are stored in one contiguous buffer with `x` varying fastest:
//! `flat = i + N * (j + N * k)`. Zero-based index `i` sits at the cell
//! center `x = (i + 1/2) h`.

use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::ops::{Add, Mul, Neg, Sub};

/// Smallest resolution the five-point long stencil can live on.
pub const MIN_CELLS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid3 {
    n: usize,
    l: f64,
    h: f64,
}

impl Grid3 {
    pub fn new(n: usize, l: f64) -> Result<Self> {
        if n < MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "N = {n} is below the minimum of {MIN_CELLS} cells per axis"
            )));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "domain length L = {l} must be positive and finite"
            )));
        }
        Ok(Self { n, l, h: l / n as f64 })
    }

    /// Cells per axis.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Domain edge length.
    #[inline]
    pub fn length(&self) -> f64 {
        self.l
    }

    /// Mesh size `L / N`.
    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Domain volume `L^3`.
    #[inline]
    pub fn volume(&self) -> f64 {
        self.l * self.l * self.l
    }

    /// Cell volume `h^3`.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.h * self.h * self.h
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell-center coordinate of zero-based index `i`.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    /// Flat index with periodic wraparound on every axis.
    #[inline]
    pub fn wrapped_index(&self, i: isize, j: isize, k: isize) -> usize {
        let n = self.n as isize;
        self.index(
            i.rem_euclid(n) as usize,
            j.rem_euclid(n) as usize,
            k.rem_euclid(n) as usize,
        )
    }

    pub fn check_same(&self, other: &Grid3) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left_n: self.n,
                left_l: self.l,
                right_n: other.n,
                right_l: other.l,
            })
        }
    }
}

/// Sum with a pairwise cascade; error grows like `O(log n)` instead of `O(n)`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 128;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

fn pairwise_sum_by(values: &[f64], f: &impl Fn(f64) -> f64) -> f64 {
    const BLOCK: usize = 128;
    if values.len() <= BLOCK {
        return values.iter().map(|&v| f(v)).sum();
    }
    let mid = values.len() / 2;
    pairwise_sum_by(&values[..mid], f) + pairwise_sum_by(&values[mid..], f)
}

fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    const BLOCK: usize = 128;
    if a.len() <= BLOCK {
        return a.iter().zip(b).map(|(x, y)| x * y).sum();
    }
    let mid = a.len() / 2;
    pairwise_dot(&a[..mid], &b[..mid]) + pairwise_dot(&a[mid..], &b[mid..])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Real scalar grid function on a [`Grid3`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid3,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid3) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid3, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Wraps a buffer laid out x-fastest. Rejects wrong length and non-finite entries.
    pub fn from_vec(grid: Grid3, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "buffer holds {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self { grid, values })
    }

    /// Internal constructor for library outputs whose finiteness follows from the inputs.
    pub(crate) fn from_raw(grid: Grid3, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    /// Samples `f(x, y, z)` at every cell center.
    pub fn sample<F>(grid: Grid3, f: F) -> Result<Self>
    where
        F: Fn(f64, f64, f64) -> f64 + Sync,
    {
        let n = grid.n;
        let mut values = vec![0.0; grid.len()];
        values
            .par_chunks_mut(n * n)
            .enumerate()
            .for_each(|(k, slab)| {
                let z = grid.coord(k);
                for j in 0..n {
                    let y = grid.coord(j);
                    for i in 0..n {
                        slab[i + n * j] = f(grid.coord(i), y, z);
                    }
                }
            });
        Self::from_vec(grid, values)
    }

    #[inline]
    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)]
    }

    /// Discrete average `h^3 / |Omega| * sum f`.
    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.values) / self.grid.len() as f64
    }

    pub fn stats(&self) -> FieldStats {
        let (min, max) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        FieldStats {
            mean: self.mean(),
            min,
            max,
        }
    }

    /// Weighted sum `h^3 * sum f g`, without a grid check.
    pub(crate) fn raw_ip(&self, other: &Field) -> f64 {
        self.grid.cell_volume() * pairwise_dot(&self.values, &other.values)
    }

    pub(crate) fn raw_sum_by(&self, f: impl Fn(f64) -> f64) -> f64 {
        pairwise_sum_by(&self.values, &f)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Cyclic shift: the result at `i` holds the value at `i + offset` along `axis`.
    pub fn shifted(&self, axis: usize, offset: isize) -> Field {
        assert!(axis < 3, "axis must be 0, 1 or 2");
        let n = self.grid.n;
        let mut out = vec![0.0; self.values.len()];
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let mut src = [i as isize, j as isize, k as isize];
                    src[axis] += offset;
                    out[self.grid.index(i, j, k)] =
                        self.values[self.grid.wrapped_index(src[0], src[1], src[2])];
                }
            }
        }
        Field::from_raw(self.grid, out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Field {
        Field::from_raw(self.grid, self.values.par_iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64 + Sync) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        Field::from_raw(
            self.grid,
            self.values
                .par_iter()
                .zip(other.values.par_iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Field) {
        debug_assert_eq!(self.grid, other.grid);
        self.values
            .par_iter_mut()
            .zip(other.values.par_iter())
            .for_each(|(a, &b)| *a += alpha * b);
    }

    pub fn add_scalar(&mut self, c: f64) {
        self.values.par_iter_mut().for_each(|v| *v += c);
    }

    pub fn scale(&mut self, c: f64) {
        self.values.par_iter_mut().for_each(|v| *v *= c);
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.map(|a| a * rhs)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.map(|a| -a)
    }
}

//! Periodic box discretization.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Largest number of grid points accepted by [`GridSpec::new`].
pub const DEFAULT_MAX_POINTS: usize = 1 << 24;

/// A periodic box `[0, L)^n` sampled with `N` points per axis.
///
/// Fields are stored row-major: the last axis varies fastest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    dimension: usize,
    points_per_axis: usize,
    box_length: f64,
}

impl GridSpec {
    pub fn new(dimension: usize, points_per_axis: usize, box_length: f64) -> Result<Self> {
        Self::with_budget(dimension, points_per_axis, box_length, DEFAULT_MAX_POINTS)
    }

    pub fn with_budget(
        dimension: usize,
        points_per_axis: usize,
        box_length: f64,
        max_points: usize,
    ) -> Result<Self> {
        if !(1..=3).contains(&dimension) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1, 2 or 3 (got {dimension})"
            )));
        }
        if points_per_axis < 8 || points_per_axis % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and >= 8 (got {points_per_axis})"
            )));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box length must be positive and finite (got {box_length})"
            )));
        }
        let total = (0..dimension).try_fold(1usize, |acc, _| acc.checked_mul(points_per_axis));
        match total {
            Some(total) if total <= max_points => {}
            _ => {
                return Err(Error::InvalidGrid(format!(
                    "{points_per_axis}^{dimension} points exceed the budget of {max_points}"
                )))
            }
        }
        Ok(Self {
            dimension,
            points_per_axis,
            box_length,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Grid spacing `h = L/N`.
    pub fn spacing(&self) -> f64 {
        self.box_length / self.points_per_axis as f64
    }

    /// Total number of grid points `N^n`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of one grid point, `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dimension as i32)
    }

    /// Box volume `L^n`.
    pub fn volume(&self) -> f64 {
        self.box_length.powi(self.dimension as i32)
    }

    /// Same box and dimension with a different resolution.
    pub fn with_points(&self, points_per_axis: usize) -> Result<Self> {
        Self::new(self.dimension, points_per_axis, self.box_length)
    }

    /// Integer grid indices of a flat index; unused axes are 0.
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let n = self.points_per_axis;
        let mut out = [0usize; 3];
        let mut rem = flat;
        for axis in (0..self.dimension).rev() {
            out[axis] = rem % n;
            rem /= n;
        }
        out
    }

    pub fn flat_index(&self, multi: [usize; 3]) -> usize {
        let n = self.points_per_axis;
        (0..self.dimension).fold(0, |acc, axis| acc * n + multi[axis] % n)
    }

    /// Physical coordinates of a grid point; unused axes are 0.
    pub fn coords(&self, flat: usize) -> [f64; 3] {
        let h = self.spacing();
        let idx = self.multi_index(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dimension {
            x[axis] = idx[axis] as f64 * h;
        }
        x
    }

    /// Signed integer frequency of 1-D index `j` in FFT ordering.
    pub fn frequency(&self, j: usize) -> i64 {
        let n = self.points_per_axis as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Largest resolved wavenumber `pi N / L` along one axis.
    pub fn max_wavenumber(&self) -> f64 {
        PI * self.points_per_axis as f64 / self.box_length
    }

    /// Time after which the slowest non-constant mode dominates decay, `L^2 / (4 pi^2 lambda)`.
    pub fn spectral_gap_time(&self, lambda: f64) -> f64 {
        self.box_length * self.box_length / (4.0 * PI * PI * lambda)
    }

    /// Minimal-image displacement `x - y` on the torus.
    pub fn periodic_displacement(&self, x: [f64; 3], y: [f64; 3]) -> [f64; 3] {
        let l = self.box_length;
        let mut d = [0.0; 3];
        for axis in 0..self.dimension {
            let mut v = x[axis] - y[axis];
            v -= l * (v / l).round();
            d[axis] = v;
        }
        d
    }
}

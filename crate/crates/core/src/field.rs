//! Value-semantic fields on a [`GridSpec`].

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::vec3::{self, Vec3};
use rustfft::num_complex::Complex64;

/// Real scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub data: Vec<f64>,
}

/// Complex scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    pub grid: GridSpec,
    pub data: Vec<Complex64>,
}

/// Real 3-vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField3 {
    pub grid: GridSpec,
    pub data: Vec<Vec3>,
}

fn check_len(grid: &GridSpec, len: usize) -> Result<()> {
    if len != grid.len() {
        return Err(Error::GridMismatch(format!(
            "expected {} values, got {len}",
            grid.len()
        )));
    }
    Ok(())
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self {
            grid,
            data: vec![value; grid.len()],
        }
    }

    pub fn from_vec(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        check_len(&grid, data.len())?;
        Ok(Self { grid, data })
    }

    /// Samples `f` at the grid points.
    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> f64) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self { grid, data }
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            grid: self.grid,
            data: self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

impl ComplexField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_vec(grid: GridSpec, data: Vec<Complex64>) -> Result<Self> {
        check_len(&grid, data.len())?;
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> Complex64) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self { grid, data }
    }

    pub fn check_finite(&self) -> Result<()> {
        match self
            .data
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn re(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.data.iter().map(|v| v.re).collect(),
        }
    }

    pub fn im(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.data.iter().map(|v| v.im).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|&v| v * c).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }
}

impl VectorField3 {
    pub fn constant(grid: GridSpec, value: Vec3) -> Self {
        Self {
            grid,
            data: vec![value; grid.len()],
        }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, [0.0; 3])
    }

    pub fn from_vec(grid: GridSpec, data: Vec<Vec3>) -> Result<Self> {
        check_len(&grid, data.len())?;
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> Vec3) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self { grid, data }
    }

    pub fn check_finite(&self) -> Result<()> {
        match self
            .data
            .iter()
            .position(|v| !v.iter().all(|c| c.is_finite()))
        {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.data.iter().map(|v| v[c]).collect(),
        }
    }

    pub fn from_components(components: [ScalarField; 3]) -> Self {
        let grid = components[0].grid;
        let data = (0..grid.len())
            .map(|i| {
                [
                    components[0].data[i],
                    components[1].data[i],
                    components[2].data[i],
                ]
            })
            .collect();
        Self { grid, data }
    }

    /// Pointwise Euclidean length.
    pub fn magnitude(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.data.iter().map(|&v| vec3::norm(v)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(vec3::norm(v)))
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| vec3::sub(a, b))
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(Vec3) -> Vec3) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Pointwise Euclidean length of a list of real component fields.
pub fn components_magnitude(components: &[ScalarField]) -> ScalarField {
    let grid = components[0].grid;
    let data = (0..grid.len())
        .map(|i| {
            components
                .iter()
                .map(|c| c.data[i] * c.data[i])
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    ScalarField { grid, data }
}

/// Pointwise length `(sum_k |u_k|^2)^{1/2}` of a complex vector field.
pub fn complex_components_magnitude(components: &[ComplexField]) -> ScalarField {
    let grid = components[0].grid;
    let data = (0..grid.len())
        .map(|i| {
            components
                .iter()
                .map(|c| c.data[i].norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    ScalarField { grid, data }
}

/// Pointwise length of a list of 3-vector fields (e.g. the `n` partials of `m`).
pub fn vector_components_magnitude(components: &[VectorField3]) -> ScalarField {
    let grid = components[0].grid;
    let data = (0..grid.len())
        .map(|i| {
            components
                .iter()
                .map(|c| vec3::dot(c.data[i], c.data[i]))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    ScalarField { grid, data }
}

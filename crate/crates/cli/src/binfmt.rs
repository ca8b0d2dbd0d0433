//! Flat binary field files.
//!
//! Layout, all little-endian: magic `LLGF`, version `u32`, dimension `u32`,
//! points per axis `u32`, box length `f64`, value kind `u32` (0 real,
//! 1 complex), components `u32`, then the values point by point in row-major
//! grid order. At each point the components follow one another, and a complex
//! component is stored as a `re, im` pair.

use covllg_core::llg::SpinField;
use covllg_core::vec3::Vec3;
use covllg_core::{ComplexField, GridSpec, ScalarField, VectorField3};
use rustfft::num_complex::Complex64;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"LLGF";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("not a field file (bad magic)")]
    BadMagic,
    #[error("unsupported field file version {0}")]
    UnsupportedVersion(u32),
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("field shape mismatch: {0}")]
    Shape(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueKind {
    Real,
    Complex,
}

impl ValueKind {
    fn code(self) -> u32 {
        match self {
            ValueKind::Real => 0,
            ValueKind::Complex => 1,
        }
    }

    fn width(self) -> usize {
        match self {
            ValueKind::Real => 1,
            ValueKind::Complex => 2,
        }
    }
}

/// Field values with their grid, `components` values (or pairs) per point.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub grid: GridSpec,
    pub kind: ValueKind,
    pub components: usize,
    pub values: Vec<f64>,
}

impl FieldFile {
    pub fn from_spin(m: &SpinField) -> Self {
        Self {
            grid: *m.grid(),
            kind: ValueKind::Real,
            components: 3,
            values: m.field.data.iter().flat_map(|v| v.iter().copied()).collect(),
        }
    }

    pub fn from_scalars(fields: &[ScalarField]) -> Self {
        let grid = fields[0].grid;
        let mut values = Vec::with_capacity(grid.len() * fields.len());
        for i in 0..grid.len() {
            values.extend(fields.iter().map(|f| f.data[i]));
        }
        Self {
            grid,
            kind: ValueKind::Real,
            components: fields.len(),
            values,
        }
    }

    pub fn from_complex(fields: &[ComplexField]) -> Self {
        let grid = fields[0].grid;
        let mut values = Vec::with_capacity(2 * grid.len() * fields.len());
        for i in 0..grid.len() {
            for f in fields {
                values.push(f.data[i].re);
                values.push(f.data[i].im);
            }
        }
        Self {
            grid,
            kind: ValueKind::Complex,
            components: fields.len(),
            values,
        }
    }

    pub fn to_spin(&self, m_inf: Vec3) -> Result<SpinField, FormatError> {
        if self.kind != ValueKind::Real || self.components != 3 {
            return Err(FormatError::Shape(format!(
                "expected 3 real components, found {} {:?}",
                self.components, self.kind
            )));
        }
        let data = self.values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        SpinField::new(VectorField3 { grid: self.grid, data }, m_inf)
            .map_err(|e| FormatError::Shape(e.to_string()))
    }

    pub fn to_complex(&self) -> Result<Vec<ComplexField>, FormatError> {
        if self.kind != ValueKind::Complex {
            return Err(FormatError::Shape("expected complex values".into()));
        }
        let c = self.components;
        Ok((0..c)
            .map(|k| ComplexField {
                grid: self.grid,
                data: self
                    .values
                    .chunks_exact(2 * c)
                    .map(|p| Complex64::new(p[2 * k], p[2 * k + 1]))
                    .collect(),
            })
            .collect())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<(), FormatError> {
        let g = &self.grid;
        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(g.dimension() as u32).to_le_bytes())?;
        w.write_all(&(g.points_per_axis() as u32).to_le_bytes())?;
        w.write_all(&g.box_length().to_le_bytes())?;
        w.write_all(&self.kind.code().to_le_bytes())?;
        w.write_all(&(self.components as u32).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, FormatError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(FormatError::BadMagic);
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let dimension = read_u32(&mut r)? as usize;
        let points = read_u32(&mut r)? as usize;
        let box_length = read_f64(&mut r)?;
        let kind = match read_u32(&mut r)? {
            0 => ValueKind::Real,
            1 => ValueKind::Complex,
            k => return Err(FormatError::BadHeader(format!("unknown value kind {k}"))),
        };
        let components = read_u32(&mut r)? as usize;
        if components == 0 {
            return Err(FormatError::BadHeader("zero components".into()));
        }
        let grid = GridSpec::new(dimension, points, box_length)
            .map_err(|e| FormatError::BadHeader(e.to_string()))?;
        let count = grid.len() * components * kind.width();
        let mut bytes = vec![0u8; 8 * count];
        r.read_exact(&mut bytes)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(FormatError::BadHeader("trailing bytes after values".into()));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Ok(Self {
            grid,
            kind,
            components,
            values,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), FormatError> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self, FormatError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

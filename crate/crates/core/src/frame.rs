//! Orthonormal tangent frames along `m`, the induced complex derivative
//! fields `u` and real connection `a`, and the Coulomb gauge.

use crate::error::{Error, Result};
use crate::field::{ComplexField, ScalarField, VectorField3};
use crate::llg::{self, SpinField};
use crate::spectral::Spectral;
use crate::vec3::{self, Vec3};
use rustfft::num_complex::Complex64;

/// Smallest admissible `|ê × m|`.
pub const MIN_FRAME_MODULUS: f64 = 0.1;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tangent frame `X = ê×m/|ê×m|`, `Y = m×X`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub reference: Vec3,
    pub x: VectorField3,
    pub y: VectorField3,
    /// `|ê × m|` per point
    pub modulus: ScalarField,
}

/// Reference direction used when none is given: a unit vector orthogonal to `m_inf`.
pub fn default_reference(m_inf: Vec3) -> Vec3 {
    vec3::tangent_basis(m_inf).0
}

pub fn construct_frame(m: &SpinField, reference: Option<Vec3>) -> Result<Frame> {
    let e = vec3::normalize(reference.unwrap_or_else(|| default_reference(m.m_inf)));
    if vec3::norm(e) == 0.0 || !e.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidArgument("reference direction must be non-zero".into()));
    }
    let grid = m.field.grid;
    let mut x = Vec::with_capacity(grid.len());
    let mut y = Vec::with_capacity(grid.len());
    let mut modulus = Vec::with_capacity(grid.len());
    for (index, &v) in m.field.data.iter().enumerate() {
        let ex = vec3::cross(e, v);
        let r = vec3::norm(ex);
        if r <= MIN_FRAME_MODULUS {
            return Err(Error::FrameDegenerate { index, value: r });
        }
        let xv = vec3::scale(ex, 1.0 / r);
        x.push(xv);
        y.push(vec3::cross(v, xv));
        modulus.push(r);
    }
    Ok(Frame {
        reference: e,
        x: VectorField3 { grid, data: x },
        y: VectorField3 { grid, data: y },
        modulus: ScalarField { grid, data: modulus },
    })
}

/// Frame components of the spatial and temporal derivatives of `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameFields {
    /// `u_k = ⟨∂_k m, X⟩ + i⟨∂_k m, Y⟩`
    pub u: Vec<ComplexField>,
    /// `a_k = ⟨∂_k X, Y⟩`
    pub a: Vec<ScalarField>,
    /// `u_0` from `∂ₜm`
    pub u0: Option<ComplexField>,
    /// `a_0 = ⟨∂ₜX, Y⟩`; dropped by gauge changes with unknown time dependence
    pub a0: Option<ScalarField>,
    /// angle of the last gauge change applied, zero for the raw frame
    pub gauge: ScalarField,
}

impl FrameFields {
    pub fn dimension(&self) -> usize {
        self.u.len()
    }
}

fn project_onto_frame(frame: &Frame, v: &VectorField3) -> ComplexField {
    ComplexField {
        grid: v.grid,
        data: (0..v.grid.len())
            .map(|i| {
                Complex64::new(
                    vec3::dot(v.data[i], frame.x.data[i]),
                    vec3::dot(v.data[i], frame.y.data[i]),
                )
            })
            .collect(),
    }
}

/// `⟨ê × v, Y⟩ / |ê × m|`, which equals `⟨∂X, Y⟩` when `v = ∂m`.
fn connection_component(frame: &Frame, v: &VectorField3) -> ScalarField {
    ScalarField {
        grid: v.grid,
        data: (0..v.grid.len())
            .map(|i| {
                vec3::dot(vec3::cross(frame.reference, v.data[i]), frame.y.data[i])
                    / frame.modulus.data[i]
            })
            .collect(),
    }
}

/// Largest departure of `(X, Y, m)` from an orthonormal triple accepted as a frame for `m`.
const FRAME_TOLERANCE: f64 = 1e-8;

/// Computes `u`, `a` and, when `lambda` is given, the time components from the
/// right-hand side of the flow.
pub fn derive_connection(
    sp: &Spectral,
    m: &SpinField,
    frame: &Frame,
    lambda: Option<f64>,
) -> Result<FrameFields> {
    let grid = m.field.grid;
    if frame.x.grid != grid {
        return Err(Error::GridMismatch("frame and field grids differ".into()));
    }
    for (index, &v) in m.field.data.iter().enumerate() {
        let (x, y) = (frame.x.data[index], frame.y.data[index]);
        let residual = [
            vec3::dot(x, v),
            vec3::dot(y, v),
            vec3::dot(x, y),
            vec3::norm(x) - 1.0,
            vec3::norm(y) - 1.0,
        ]
        .iter()
        .fold(0.0f64, |a, b| a.max(b.abs()));
        if !(residual <= FRAME_TOLERANCE) {
            return Err(Error::InconsistentFrame { index, residual });
        }
    }
    let grads = llg::spin_gradient(sp, &m.field)?;
    let u = grads.iter().map(|g| project_onto_frame(frame, g)).collect();
    let a = grads.iter().map(|g| connection_component(frame, g)).collect();
    let (u0, a0) = match lambda {
        Some(lambda) => {
            let dm = llg::rhs_pointwise(sp, m, lambda)?;
            (
                Some(project_onto_frame(frame, &dm)),
                Some(connection_component(frame, &dm)),
            )
        }
        None => (None, None),
    };
    Ok(FrameFields {
        u,
        a,
        u0,
        a0,
        gauge: ScalarField::zeros(grid),
    })
}

/// Rotates the frame by `θ`: `u → e^{-iθ}u`, `a → a + ∇θ`. The time component
/// of the connection is dropped.
pub fn apply_gauge(sp: &Spectral, fields: &FrameFields, theta: &ScalarField) -> Result<FrameFields> {
    let grad = sp.gradient(theta)?;
    let phase: Vec<Complex64> = theta.data.iter().map(|&t| (-I * t).exp()).collect();
    let rotate = |f: &ComplexField| ComplexField {
        grid: f.grid,
        data: f.data.iter().zip(&phase).map(|(&v, &p)| v * p).collect(),
    };
    Ok(FrameFields {
        u: fields.u.iter().map(rotate).collect(),
        a: fields
            .a
            .iter()
            .zip(&grad)
            .map(|(a, g)| a.zip_map(g, |x, y| x + y))
            .collect(),
        u0: fields.u0.as_ref().map(rotate),
        a0: None,
        gauge: fields.gauge.zip_map(theta, |x, y| x + y),
    })
}

/// Coulomb gauge `div a = 0` via the mean-zero solution of `-Δθ = div a`.
///
/// The mean of `a` is a gauge invariant on the torus and is left in place.
pub fn coulomb_gauge(sp: &Spectral, fields: &FrameFields) -> Result<FrameFields> {
    let theta = sp.solve_poisson_div(&fields.a)?;
    apply_gauge(sp, fields, &theta)
}

/// Frame fields of `m` in the Coulomb gauge, with the default reference direction.
pub fn coulomb_fields(sp: &Spectral, m: &SpinField, lambda: Option<f64>) -> Result<FrameFields> {
    let frame = construct_frame(m, None)?;
    coulomb_gauge(sp, &derive_connection(sp, m, &frame, lambda)?)
}

/// Worst pointwise residual of an identity, absolute and relative to a scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    pub max_abs: f64,
    pub scale: f64,
}

impl Residual {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.max_abs / self.scale
        } else {
            self.max_abs
        }
    }

    fn merge(self, other: Residual) -> Residual {
        Residual {
            max_abs: self.max_abs.max(other.max_abs),
            scale: self.scale.max(other.scale),
        }
    }
}

/// `(∂_k + i a_k) u_l`
fn covariant(sp: &Spectral, fields: &FrameFields, k: usize, l: usize) -> Result<ComplexField> {
    let mut d = sp.partial_complex(&fields.u[l], k)?;
    for (v, (&a, &u)) in d
        .data
        .iter_mut()
        .zip(fields.a[k].data.iter().zip(&fields.u[l].data))
    {
        *v += I * a * u;
    }
    Ok(d)
}

/// `(∂_k + i a_k) u_l − (∂_l + i a_l) u_k` over all pairs.
pub fn verify_torsion(sp: &Spectral, fields: &FrameFields) -> Result<Residual> {
    let n = fields.dimension();
    let mut res = Residual {
        max_abs: 0.0,
        scale: 0.0,
    };
    for k in 0..n {
        for l in (k + 1)..n {
            let dkl = covariant(sp, fields, k, l)?;
            let dlk = covariant(sp, fields, l, k)?;
            res = res.merge(Residual {
                max_abs: dkl.sub(&dlk).max_abs(),
                scale: dkl.max_abs().max(dlk.max_abs()),
            });
        }
    }
    Ok(res)
}

/// `∂_k a_l − ∂_l a_k − Im(u_k ū_l)` over all spatial pairs.
pub fn verify_curvature(sp: &Spectral, fields: &FrameFields) -> Result<Residual> {
    let n = fields.dimension();
    let grads: Vec<Vec<ScalarField>> = fields
        .a
        .iter()
        .map(|a| sp.gradient(a))
        .collect::<Result<_>>()?;
    let mut res = Residual {
        max_abs: 0.0,
        scale: 0.0,
    };
    for k in 0..n {
        for l in (k + 1)..n {
            let mut worst = 0.0f64;
            let mut scale = 0.0f64;
            for i in 0..grads[0][0].data.len() {
                let curl = grads[l][k].data[i] - grads[k][l].data[i];
                let source = (fields.u[k].data[i] * fields.u[l].data[i].conj()).im;
                worst = worst.max((curl - source).abs());
                scale = scale.max(curl.abs()).max(source.abs());
            }
            res = res.merge(Residual {
                max_abs: worst,
                scale,
            });
        }
    }
    Ok(res)
}

/// `u_0 − (λ − i) Σ_k (∂_k + i a_k) u_k`
pub fn verify_u0_consistency(sp: &Spectral, fields: &FrameFields, lambda: f64) -> Result<Residual> {
    let u0 = fields
        .u0
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("time component u0 not computed".into()))?;
    let c = Complex64::new(lambda, -1.0);
    let mut predicted = ComplexField::zeros(u0.grid);
    for k in 0..fields.dimension() {
        let d = covariant(sp, fields, k, k)?;
        for (p, v) in predicted.data.iter_mut().zip(&d.data) {
            *p += c * v;
        }
    }
    Ok(Residual {
        max_abs: u0.sub(&predicted).max_abs(),
        scale: u0.max_abs().max(predicted.max_abs()),
    })
}

/// `∂ₜa_k − ∂_k a_0 − Im(u_0 ū_k)` with `∂ₜa_k` from centered differences of
/// three raw frames at `t − dt, t, t + dt` built on the same reference.
pub fn verify_time_curvature(
    sp: &Spectral,
    before: &FrameFields,
    at: &FrameFields,
    after: &FrameFields,
    dt: f64,
) -> Result<Residual> {
    let (a0, u0) = match (&at.a0, &at.u0) {
        (Some(a0), Some(u0)) => (a0, u0),
        _ => {
            return Err(Error::InvalidArgument(
                "time components required at the middle sample".into(),
            ))
        }
    };
    let grad_a0 = sp.gradient(a0)?;
    let mut res = Residual {
        max_abs: 0.0,
        scale: 0.0,
    };
    for k in 0..at.dimension() {
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..u0.data.len() {
            let dt_a = (after.a[k].data[i] - before.a[k].data[i]) / (2.0 * dt);
            let curl = dt_a - grad_a0[k].data[i];
            let source = (u0.data[i] * at.u[k].data[i].conj()).im;
            worst = worst.max((curl - source).abs());
            scale = scale.max(curl.abs()).max(source.abs());
        }
        res = res.merge(Residual {
            max_abs: worst,
            scale,
        });
    }
    Ok(res)
}

/// Rebuilds `∂_k m = Re(u_k) X + Im(u_k) Y` and returns the largest deviation
/// from the spectral gradient. The frame must be the one `fields` came from
/// (before any gauge change).
pub fn reconstruction_error(sp: &Spectral, m: &SpinField, frame: &Frame, fields: &FrameFields) -> Result<f64> {
    let grads = llg::spin_gradient(sp, &m.field)?;
    let mut worst = 0.0f64;
    for (g, u) in grads.iter().zip(&fields.u) {
        for i in 0..g.data.len() {
            let v = vec3::add(
                vec3::scale(frame.x.data[i], u.data[i].re),
                vec3::scale(frame.y.data[i], u.data[i].im),
            );
            worst = worst.max(vec3::norm(vec3::sub(v, g.data[i])));
        }
    }
    Ok(worst)
}

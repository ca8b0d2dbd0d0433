//! Initial data: plane waves, localized bubbles, random small fields, and the
//! mollify-and-project smoother.

use crate::error::{Error, Result};
use crate::field::{vector_components_magnitude, ScalarField, VectorField3};
use crate::frame::{self, MIN_FRAME_MODULUS};
use crate::grid::GridSpec;
use crate::llg::{self, SpinField};
use crate::spectral::{lp_norm, lp_norm_values, Spectral};
use crate::vec3::{self, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

/// Relative accuracy of the amplitude search in [`make_initial`].
pub const TARGET_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioKind {
    /// normalized `m_inf + ε(cos k·x, sin k·x, 0)` in the tangent basis of `m_inf`
    LinearWave,
    /// rotation of `m_inf` toward the frame reference by `ε·ψ(|x − x₀|/r)`
    Bubble,
    /// normalized `m_inf + ε v` with `v` a seeded band-limited tangent field
    RandomSmall,
    /// a given field, used as is
    Custom(SpinField),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub amplitude: f64,
    pub wavevector: [f64; 3],
    pub radius: f64,
    /// bubble center; the box center when `None`
    pub center: Option<[f64; 3]>,
    pub seed: u64,
    /// largest `|j|_∞` of the random modes
    pub bandwidth: usize,
    /// when set, the amplitude is searched so that `‖∇m₀‖_{Lⁿ}` matches it
    pub target_grad_ln: Option<f64>,
    pub m_inf: Vec3,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            amplitude: 0.0,
            wavevector: [1.0, 0.0, 0.0],
            radius: 1.0,
            center: None,
            seed: 0,
            bandwidth: 2,
            target_grad_ln: None,
            m_inf: [0.0, 0.0, 1.0],
        }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_target(mut self, target: f64) -> Self {
        self.target_grad_ln = Some(target);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_wavevector(mut self, k: [f64; 3]) -> Self {
        self.wavevector = k;
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "amplitude must be >= 0 (got {})",
                self.amplitude
            )));
        }
        if (vec3::norm(self.m_inf) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("m_inf must be a unit vector".into()));
        }
        if let Some(t) = self.target_grad_ln {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!("target norm must be >= 0 (got {t})")));
            }
        }
        match self.kind {
            ScenarioKind::Bubble => {
                if !(self.radius > 0.0 && self.radius <= 0.5 * grid.box_length()) {
                    return Err(Error::InvalidArgument(format!(
                        "bubble radius must lie in (0, L/2] (got {})",
                        self.radius
                    )));
                }
            }
            ScenarioKind::LinearWave => {
                let base = 2.0 * std::f64::consts::PI / grid.box_length();
                for &k in &self.wavevector {
                    let j = k / base;
                    if (j - j.round()).abs() > 1e-9 {
                        return Err(Error::InvalidArgument(format!(
                            "wavevector component {k} is not periodic on the box"
                        )));
                    }
                }
            }
            ScenarioKind::RandomSmall => {
                if self.bandwidth == 0 || 3 * self.bandwidth > grid.points_per_axis() / 2 {
                    return Err(Error::InvalidArgument(format!(
                        "bandwidth {} must lie in [1, N/6]",
                        self.bandwidth
                    )));
                }
            }
            ScenarioKind::Custom(ref m) => {
                if m.grid() != grid {
                    return Err(Error::GridMismatch("custom field is on another grid".into()));
                }
            }
        }
        Ok(())
    }

    /// Amplitude above which the frame would degenerate somewhere.
    fn amplitude_limit(&self) -> f64 {
        match self.kind {
            // |ê × m| = cos η
            ScenarioKind::Bubble => MIN_FRAME_MODULUS.acos() * (1.0 - 1e-9),
            // |ê × m|² ≥ 1/(1 + ε²)
            ScenarioKind::LinearWave => (1.0 / (MIN_FRAME_MODULUS * MIN_FRAME_MODULUS) - 1.0).sqrt(),
            _ => f64::INFINITY,
        }
    }
}

/// Real band-limited field with independent uniform coefficients on the modes
/// `|j|_∞ ≤ kmax`, scaled to unit maximum.
pub fn random_band_limited(sp: &Spectral, kmax: usize, rng: &mut impl Rng) -> ScalarField {
    let grid = *sp.grid();
    let mut hat = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (mode, v) in hat.iter_mut().enumerate() {
        let idx = grid.multi_index(mode);
        let inside = (0..grid.dimension()).all(|a| grid.frequency(idx[a]).unsigned_abs() as usize <= kmax);
        let draw = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if inside {
            *v = draw;
        }
    }
    let f = sp.complex_from_spectrum(hat).re();
    let max = f.max_abs();
    if max > 0.0 {
        f.map(|v| v / max)
    } else {
        f
    }
}

fn bump(s: f64) -> f64 {
    if s < 1.0 {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

fn build(spec: &ScenarioSpec, sp: &Spectral, eps: f64, random: Option<&(ScalarField, ScalarField)>) -> Result<SpinField> {
    let grid = *sp.grid();
    let m_inf = spec.m_inf;
    let (ea, eb) = vec3::tangent_basis(m_inf);
    let field = match &spec.kind {
        ScenarioKind::LinearWave => {
            let k = spec.wavevector;
            VectorField3::from_fn(grid, |x| {
                let ph = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
                vec3::normalize(vec3::add(
                    m_inf,
                    vec3::add(vec3::scale(ea, eps * ph.cos()), vec3::scale(eb, eps * ph.sin())),
                ))
            })
        }
        ScenarioKind::Bubble => {
            let c = spec.center.unwrap_or([0.5 * grid.box_length(); 3]);
            let reference = frame::default_reference(m_inf);
            VectorField3::from_fn(grid, |x| {
                let d = vec3::norm(grid.periodic_displacement(x, c));
                let eta = eps * bump(d / spec.radius);
                vec3::add(vec3::scale(m_inf, eta.cos()), vec3::scale(reference, eta.sin()))
            })
        }
        ScenarioKind::RandomSmall => {
            let (p, q) = random.expect("random components");
            VectorField3 {
                grid,
                data: (0..grid.len())
                    .map(|i| {
                        let v = vec3::add(vec3::scale(ea, p.data[i]), vec3::scale(eb, q.data[i]));
                        vec3::normalize(vec3::axpy(m_inf, eps, v))
                    })
                    .collect(),
            }
        }
        ScenarioKind::Custom(m) => return Ok(m.clone()),
    };
    SpinField::normalized(field, m_inf)
}

/// `‖∇m‖_{Lⁿ}`
pub fn grad_ln(sp: &Spectral, m: &SpinField) -> Result<f64> {
    let grads = llg::spin_gradient(sp, &m.field)?;
    lp_norm(&vector_components_magnitude(&grads), sp.grid().dimension() as f64)
}

/// Builds the initial field. With a target norm the amplitude is found by
/// bisection; [`Error::UnreachableTarget`] when the target needs an amplitude
/// that would make the default frame degenerate.
pub fn make_initial(spec: &ScenarioSpec, grid: GridSpec) -> Result<SpinField> {
    spec.validate(&grid)?;
    let sp = Spectral::new(grid);
    let random = if spec.kind == ScenarioKind::RandomSmall {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let p = random_band_limited(&sp, spec.bandwidth, &mut rng);
        let q = random_band_limited(&sp, spec.bandwidth, &mut rng);
        Some((p, q))
    } else {
        None
    };
    let check_frame = |m: SpinField| -> Result<SpinField> {
        match frame::construct_frame(&m, None) {
            Ok(_) => Ok(m),
            Err(Error::FrameDegenerate { .. }) => Err(Error::UnreachableTarget(format!(
                "amplitude {} degenerates the frame",
                spec.amplitude
            ))),
            Err(e) => Err(e),
        }
    };
    let Some(target) = spec.target_grad_ln else {
        if matches!(spec.kind, ScenarioKind::Custom(_)) {
            return build(spec, &sp, 0.0, None);
        }
        if spec.amplitude > spec.amplitude_limit() {
            return Err(Error::UnreachableTarget(format!(
                "amplitude {} exceeds the frame limit {}",
                spec.amplitude,
                spec.amplitude_limit()
            )));
        }
        return check_frame(build(spec, &sp, spec.amplitude, random.as_ref())?);
    };
    if matches!(spec.kind, ScenarioKind::Custom(_)) {
        return Err(Error::InvalidArgument("custom fields take no target norm".into()));
    }
    if target == 0.0 {
        return build(spec, &sp, 0.0, random.as_ref());
    }
    let norm_at = |eps: f64| -> Result<f64> { grad_ln(&sp, &build(spec, &sp, eps, random.as_ref())?) };
    // grow an upper bracket, staying within the frame bound
    let limit = spec.amplitude_limit();
    let mut hi = 1e-3f64.min(limit);
    while norm_at(hi)? < target {
        if hi >= limit {
            return Err(Error::UnreachableTarget(format!(
                "target {target} exceeds the largest norm reachable with a valid frame"
            )));
        }
        hi = (2.0 * hi).min(limit);
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = norm_at(mid)?;
        if (v / target - 1.0).abs() < 0.1 * TARGET_TOLERANCE {
            lo = mid;
            hi = mid;
            break;
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    check_frame(build(spec, &sp, 0.5 * (lo + hi), random.as_ref())?)
}

/// Unit-mass discrete mollifier `φ_ε` on the grid offsets within radius `eps`.
fn mollifier_stencil(grid: &GridSpec, eps: f64) -> Vec<([isize; 3], f64)> {
    let h = grid.spacing();
    let n = grid.dimension();
    let reach = (eps / h).floor() as isize;
    let range = |axis: usize| if axis < n { -reach..=reach } else { 0..=0 };
    let mut out = Vec::new();
    for a in range(0) {
        for b in range(1) {
            for c in range(2) {
                let r = h * ((a * a + b * b + c * c) as f64).sqrt();
                let w = bump(r / eps);
                if w > 0.0 {
                    out.push(([a, b, c], w));
                }
            }
        }
    }
    let total: f64 = out.iter().map(|s| s.1).sum();
    for s in out.iter_mut() {
        s.1 /= total;
    }
    out
}

/// `(φ_ε ∗ m)/|φ_ε ∗ m|` with the convolution done by quadrature in physical space.
pub fn mollify_project(m: &SpinField, eps: f64) -> Result<SpinField> {
    let grid = *m.grid();
    if !(eps > 0.0 && eps < 0.5 * grid.box_length()) {
        return Err(Error::InvalidArgument(format!(
            "mollifier radius must lie in (0, L/2) (got {eps})"
        )));
    }
    let pts = grid.points_per_axis() as isize;
    let stencil = mollifier_stencil(&grid, eps);
    let wrap = |i: usize, d: isize| ((i as isize + d).rem_euclid(pts)) as usize;
    let mut data = Vec::with_capacity(grid.len());
    let mut min_modulus = f64::INFINITY;
    for i in 0..grid.len() {
        let idx = grid.multi_index(i);
        let mut acc = [0.0; 3];
        for (off, w) in &stencil {
            let j = grid.flat_index([
                wrap(idx[0], off[0]),
                wrap(idx[1], off[1]),
                wrap(idx[2], off[2]),
            ]);
            acc = vec3::axpy(acc, *w, m.field.data[j]);
        }
        let r = vec3::norm(acc);
        min_modulus = min_modulus.min(r);
        data.push(acc);
    }
    if min_modulus <= 0.5 {
        return Err(Error::MollifierDegenerate { min_modulus });
    }
    SpinField::normalized(VectorField3 { grid, data }, m.m_inf)
}

/// `‖a − b‖_{H¹} + ‖a − b‖_{W^{1,n}}` for two fields on one grid.
pub fn h1_w1n_distance(sp: &Spectral, a: &SpinField, b: &SpinField) -> Result<f64> {
    let grid = *sp.grid();
    let n = grid.dimension() as f64;
    let diff = a.field.sub(&b.field);
    let grads = llg::spin_gradient(sp, &diff)?;
    let gmag = vector_components_magnitude(&grads);
    let vals: Vec<f64> = diff.data.iter().map(|&v| vec3::norm(v)).collect();
    let l2 = lp_norm_values(&grid, &vals, 2.0)?;
    let g2 = lp_norm(&gmag, 2.0)?;
    let h1 = (l2 * l2 + g2 * g2).sqrt();
    let w1n = lp_norm_values(&grid, &vals, n)? + lp_norm(&gmag, n)?;
    Ok(h1 + w1n)
}

/// `‖∇m‖_{Lᵖ}`
pub fn grad_lp(sp: &Spectral, m: &SpinField, p: f64) -> Result<f64> {
    let grads = llg::spin_gradient(sp, &m.field)?;
    lp_norm(&vector_components_magnitude(&grads), p)
}

//! Time integration of `∂ₜm = λ(Δm + |∇m|²m) − m × Δm` on the sphere.

use crate::error::{Error, Result};
use crate::field::{vector_components_magnitude, ScalarField, VectorField3};
use crate::grid::GridSpec;
use crate::norms::{NormRecord, NormSeries, DEFAULT_DELTA};
use crate::spectral::{lp_norm, lp_norm_values, Spectral};
use crate::vec3::{self, Vec3};
use rustfft::num_complex::Complex64;

/// Pointwise tolerance on `|m| = 1` for a [`SpinField`].
pub const UNIT_TOLERANCE: f64 = 1e-10;
/// Looser tolerance accepted by [`rhs_llg`].
pub const RHS_UNIT_TOLERANCE: f64 = 1e-6;
/// Smallest modulus the projection may divide by.
pub const MIN_PROJECTION_MODULUS: f64 = 0.5;

/// Unit 3-vector field with its far-field value.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinField {
    pub field: VectorField3,
    pub m_inf: Vec3,
}

fn check_unit(field: &VectorField3, tol: f64) -> Result<()> {
    field.check_finite()?;
    let mut worst = (0usize, 0.0f64);
    for (i, &v) in field.data.iter().enumerate() {
        let d = (vec3::norm(v) - 1.0).abs();
        if d > worst.1 {
            worst = (i, d);
        }
    }
    if worst.1 > tol {
        return Err(Error::NonUnit {
            index: worst.0,
            deviation: worst.1,
        });
    }
    Ok(())
}

impl SpinField {
    pub fn new(field: VectorField3, m_inf: Vec3) -> Result<Self> {
        if (vec3::norm(m_inf) - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::InvalidArgument("m_inf must be a unit vector".into()));
        }
        check_unit(&field, UNIT_TOLERANCE)?;
        Ok(Self { field, m_inf })
    }

    /// Normalizes every point; rejects points of modulus below 1/2.
    pub fn normalized(mut field: VectorField3, m_inf: Vec3) -> Result<Self> {
        field.check_finite()?;
        for (index, v) in field.data.iter_mut().enumerate() {
            let r = vec3::norm(*v);
            if r < MIN_PROJECTION_MODULUS {
                return Err(Error::NonUnit {
                    index,
                    deviation: (r - 1.0).abs(),
                });
            }
            *v = vec3::scale(*v, 1.0 / r);
        }
        Self::new(field, vec3::normalize(m_inf))
    }

    /// The constant map `m ≡ m_inf`.
    pub fn uniform(grid: GridSpec, m_inf: Vec3) -> Self {
        let m_inf = vec3::normalize(m_inf);
        Self {
            field: VectorField3::constant(grid, m_inf),
            m_inf,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.field.grid
    }

    /// `m - m_inf`
    pub fn deviation(&self) -> VectorField3 {
        self.field.map(|v| vec3::sub(v, self.m_inf))
    }
}

/// Time discretization used by [`step`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Linearization about `m_inf` integrated exactly per Fourier mode,
    /// remaining terms by forward Euler, then pointwise projection.
    ImexProjection,
    /// Classical RK4 on the full right-hand side, then pointwise projection.
    Rk4Projection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    /// allowed `||m| - 1|` after projection
    pub projection_tolerance: f64,
    pub record_every: usize,
    /// ceiling on `‖∇m‖_∞`; `None` means `10³/h`
    pub blowup_ceiling: Option<f64>,
}

impl SolverConfig {
    pub fn new(lambda: f64, dt: f64, t_end: f64) -> Self {
        Self {
            lambda,
            dt,
            t_end,
            scheme: Scheme::ImexProjection,
            projection_tolerance: UNIT_TOLERANCE,
            record_every: 1,
            blowup_ceiling: None,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "damping must be > 0 (got {})",
                self.lambda
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be > 0 (got {})", self.dt)));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "t_end must be >= dt (got {} < {})",
                self.t_end, self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be >= 1".into()));
        }
        if !(self.projection_tolerance > 0.0) {
            return Err(Error::InvalidArgument(
                "projection tolerance must be > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn ceiling(&self, grid: &GridSpec) -> f64 {
        self.blowup_ceiling.unwrap_or(1e3 / grid.spacing())
    }
}

/// Snapshots of one run at strictly increasing times.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub lambda: f64,
    pub times: Vec<f64>,
    pub snapshots: Vec<SpinField>,
    pub series: NormSeries,
}

impl Trajectory {
    pub fn grid(&self) -> &GridSpec {
        self.snapshots[0].grid()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// A trajectory assembled from snapshots without running the solver.
    pub fn from_snapshots(
        sp: &Spectral,
        lambda: f64,
        times: Vec<f64>,
        snapshots: Vec<SpinField>,
    ) -> Result<Self> {
        if times.len() != snapshots.len() || times.is_empty() {
            return Err(Error::InvalidArgument(
                "times and snapshots must be non-empty and of equal length".into(),
            ));
        }
        let mut series = NormSeries::new(
            DEFAULT_DELTA,
            sp.grid().dimension(),
            sp.grid().spectral_gap_time(lambda),
        );
        for (t, m) in times.iter().zip(&snapshots) {
            series.push(NormRecord::from_spin(sp, m, *t, DEFAULT_DELTA, 0.0)?)?;
        }
        Ok(Self {
            lambda,
            times,
            snapshots,
            series,
        })
    }
}

pub(crate) fn vector_spectrum(sp: &Spectral, f: &VectorField3) -> [Vec<Complex64>; 3] {
    [0, 1, 2].map(|c| sp.spectrum_real(&f.component(c)))
}

pub(crate) fn vector_from_spectrum(sp: &Spectral, hats: [Vec<Complex64>; 3]) -> VectorField3 {
    VectorField3::from_components(hats.map(|h| sp.real_from_spectrum(h)))
}

fn dealias_vector(sp: &Spectral, f: &VectorField3) -> VectorField3 {
    let mut hats = vector_spectrum(sp, f);
    for h in hats.iter_mut() {
        sp.dealias_hat(h);
    }
    vector_from_spectrum(sp, hats)
}

/// Spectral partials `∂_k m`, one vector field per axis.
pub fn spin_gradient(sp: &Spectral, f: &VectorField3) -> Result<Vec<VectorField3>> {
    Ok(spin_derivatives(sp, f)?.1)
}

/// `(Δm, [∂_1 m, .., ∂_n m])`
pub(crate) fn spin_derivatives(
    sp: &Spectral,
    f: &VectorField3,
) -> Result<(VectorField3, Vec<VectorField3>)> {
    f.check_finite()?;
    if f.grid != *sp.grid() {
        return Err(Error::GridMismatch("field and workspace grids differ".into()));
    }
    let hats = vector_spectrum(sp, f);
    let dim = sp.grid().dimension();
    let mut per_axis: Vec<Vec<ScalarField>> = vec![Vec::with_capacity(3); dim];
    for h in hats.iter() {
        for (axis, g) in sp.gradient_from_spectrum_real(h).into_iter().enumerate() {
            per_axis[axis].push(g);
        }
    }
    let grads = per_axis
        .into_iter()
        .map(|v| VectorField3::from_components(v.try_into().expect("three components")));
    let lap = hats.map(|mut h| {
        sp.apply_laplacian_hat(&mut h);
        sp.real_from_spectrum(h)
    });
    Ok((
        VectorField3::from_components(lap),
        grads.collect(),
    ))
}

fn grad_sq(grads: &[VectorField3]) -> ScalarField {
    let mag = vector_components_magnitude(grads);
    mag.map(|v| v * v)
}

/// Right-hand side without the unit check; dealiased products, optional
/// projection onto the tangent plane of `m/|m|`.
fn rhs_unchecked(sp: &Spectral, m: &VectorField3, lambda: f64, project: bool) -> Result<(VectorField3, f64)> {
    let (lap, grads) = spin_derivatives(sp, m)?;
    let mut g2 = grad_sq(&grads);
    let grad_linf = g2.data.iter().fold(0.0f64, |a, &b| a.max(b)).sqrt();
    sp.dealias(&mut g2);
    let stretch = dealias_vector(
        sp,
        &VectorField3 {
            grid: m.grid,
            data: m.data.iter().zip(&g2.data).map(|(&v, &s)| vec3::scale(v, s)).collect(),
        },
    );
    let precession = dealias_vector(
        sp,
        &VectorField3 {
            grid: m.grid,
            data: m.data.iter().zip(&lap.data).map(|(&a, &b)| vec3::cross(a, b)).collect(),
        },
    );
    let data = (0..m.grid.len())
        .map(|i| {
            let tension = vec3::add(lap.data[i], stretch.data[i]);
            let mut r = vec3::sub(vec3::scale(tension, lambda), precession.data[i]);
            if project {
                let dir = vec3::normalize(m.data[i]);
                r = vec3::axpy(r, -vec3::dot(r, dir), dir);
            }
            r
        })
        .collect();
    Ok((VectorField3 { grid: m.grid, data }, grad_linf))
}

/// `λ(Δm + |∇m|²m) − m×Δm`, dealiased and tangent to `m`.
pub fn rhs_llg(sp: &Spectral, m: &SpinField, lambda: f64) -> Result<VectorField3> {
    check_unit(&m.field, RHS_UNIT_TOLERANCE)?;
    Ok(rhs_unchecked(sp, &m.field, lambda, true)?.0)
}

/// Tension field `Δm + |∇m|²m` (no dealiasing).
pub fn tension(sp: &Spectral, m: &SpinField) -> Result<VectorField3> {
    let (lap, grads) = spin_derivatives(sp, &m.field)?;
    let g2 = grad_sq(&grads);
    let data = (0..m.field.grid.len())
        .map(|i| vec3::axpy(lap.data[i], g2.data[i], m.field.data[i]))
        .collect();
    Ok(VectorField3 { grid: m.field.grid, data })
}

/// `λ(Δm + |∇m|²m) − m×Δm` evaluated without dealiasing.
pub fn rhs_pointwise(sp: &Spectral, m: &SpinField, lambda: f64) -> Result<VectorField3> {
    check_unit(&m.field, RHS_UNIT_TOLERANCE)?;
    let (lap, grads) = spin_derivatives(sp, &m.field)?;
    let g2 = grad_sq(&grads);
    let data = (0..m.field.grid.len())
        .map(|i| {
            let v = m.field.data[i];
            let tension = vec3::axpy(lap.data[i], g2.data[i], v);
            vec3::sub(vec3::scale(tension, lambda), vec3::cross(v, lap.data[i]))
        })
        .collect();
    Ok(VectorField3 { grid: m.field.grid, data })
}

/// Dirichlet energy `½∫|∇m|²`.
pub fn energy(sp: &Spectral, m: &SpinField) -> Result<f64> {
    let grads = spin_gradient(sp, &m.field)?;
    let l2 = lp_norm(&vector_components_magnitude(&grads), 2.0)?;
    Ok(0.5 * l2 * l2)
}

struct StepOutcome {
    next: SpinField,
    drift: f64,
    /// `‖∇m‖_∞` of the state the step started from
    grad_linf: f64,
}

fn project(field: VectorField3, m_inf: Vec3, time: f64, tol: f64) -> Result<(SpinField, f64)> {
    field.check_finite()?;
    let mut drift = 0.0f64;
    let mut data = field.data;
    for (index, v) in data.iter_mut().enumerate() {
        let r = vec3::norm(*v);
        if r < MIN_PROJECTION_MODULUS {
            return Err(Error::ProjectionDegenerate {
                time,
                index,
                modulus: r,
            });
        }
        drift = drift.max((r - 1.0).abs());
        *v = vec3::scale(*v, 1.0 / r);
    }
    let field = VectorField3 {
        grid: field.grid,
        data,
    };
    check_unit(&field, tol)?;
    Ok((SpinField { field, m_inf }, drift))
}

fn imex_step(sp: &Spectral, m: &SpinField, cfg: &SolverConfig, time: f64) -> Result<StepOutcome> {
    let lambda = cfg.lambda;
    let dt = cfg.dt;
    let m_inf = m.m_inf;
    let (lap, grads) = spin_derivatives(sp, &m.field)?;
    let mut g2 = grad_sq(&grads);
    let grad_linf = g2.data.iter().fold(0.0f64, |a, &b| a.max(b)).sqrt();
    sp.dealias(&mut g2);
    let grid = m.field.grid;
    let stretch = dealias_vector(
        sp,
        &VectorField3 {
            grid,
            data: m.field.data.iter().zip(&g2.data).map(|(&v, &s)| vec3::scale(v, s)).collect(),
        },
    );
    let precession = dealias_vector(
        sp,
        &VectorField3 {
            grid,
            data: m
                .field
                .data
                .iter()
                .zip(&lap.data)
                .map(|(&v, &l)| vec3::cross(vec3::sub(v, m_inf), l))
                .collect(),
        },
    );
    let w = VectorField3 {
        grid,
        data: (0..grid.len())
            .map(|i| {
                let v = vec3::sub(m.field.data[i], m_inf);
                let nonlinear = vec3::sub(vec3::scale(stretch.data[i], lambda), precession.data[i]);
                vec3::axpy(v, dt, nonlinear)
            })
            .collect(),
    };
    // exact propagator of ∂ₜv = λΔv − m_inf × Δv, mode by mode
    let mut hats = vector_spectrum(sp, &w);
    for mode in 0..grid.len() {
        let k2 = sp.wavenumber_sq(mode);
        if k2 == 0.0 {
            continue;
        }
        let decay = (-lambda * k2 * dt).exp();
        let (s, c) = (k2 * dt).sin_cos();
        let v = [hats[0][mode], hats[1][mode], hats[2][mode]];
        let par = v[0] * m_inf[0] + v[1] * m_inf[1] + v[2] * m_inf[2];
        let rot = [
            v[2] * m_inf[1] - v[1] * m_inf[2],
            v[0] * m_inf[2] - v[2] * m_inf[0],
            v[1] * m_inf[0] - v[0] * m_inf[1],
        ];
        for a in 0..3 {
            let parallel = par * m_inf[a];
            let perp = v[a] - parallel;
            hats[a][mode] = (parallel + perp * c + rot[a] * s) * decay;
        }
    }
    let w = vector_from_spectrum(sp, hats);
    let next = w.map(|v| vec3::add(v, m_inf));
    let (next, drift) = project(next, m_inf, time + dt, cfg.projection_tolerance)?;
    Ok(StepOutcome {
        next,
        drift,
        grad_linf,
    })
}

fn rk4_step(sp: &Spectral, m: &SpinField, cfg: &SolverConfig, time: f64) -> Result<StepOutcome> {
    let dt = cfg.dt;
    let lambda = cfg.lambda;
    let stage = |base: &VectorField3, k: &VectorField3, h: f64| VectorField3 {
        grid: base.grid,
        data: base.data.iter().zip(&k.data).map(|(&b, &d)| vec3::axpy(b, h, d)).collect(),
    };
    let (k1, grad_linf) = rhs_unchecked(sp, &m.field, lambda, false)?;
    let (k2, _) = rhs_unchecked(sp, &stage(&m.field, &k1, 0.5 * dt), lambda, false)?;
    let (k3, _) = rhs_unchecked(sp, &stage(&m.field, &k2, 0.5 * dt), lambda, false)?;
    let (k4, _) = rhs_unchecked(sp, &stage(&m.field, &k3, dt), lambda, false)?;
    let data = (0..m.field.grid.len())
        .map(|i| {
            let mut v = m.field.data[i];
            v = vec3::axpy(v, dt / 6.0, k1.data[i]);
            v = vec3::axpy(v, dt / 3.0, k2.data[i]);
            v = vec3::axpy(v, dt / 3.0, k3.data[i]);
            vec3::axpy(v, dt / 6.0, k4.data[i])
        })
        .collect();
    let (next, drift) = project(
        VectorField3 {
            grid: m.field.grid,
            data,
        },
        m.m_inf,
        time + dt,
        cfg.projection_tolerance,
    )?;
    Ok(StepOutcome {
        next,
        drift,
        grad_linf,
    })
}

fn step_at(sp: &Spectral, m: &SpinField, cfg: &SolverConfig, time: f64) -> Result<StepOutcome> {
    match cfg.scheme {
        Scheme::ImexProjection => imex_step(sp, m, cfg, time),
        Scheme::Rk4Projection => rk4_step(sp, m, cfg, time),
    }
}

/// One step of the configured scheme.
pub fn step(sp: &Spectral, m: &SpinField, cfg: &SolverConfig) -> Result<SpinField> {
    cfg.validate()?;
    check_unit(&m.field, UNIT_TOLERANCE)?;
    Ok(step_at(sp, m, cfg, 0.0)?.next)
}

/// Runs to `t_end`, recording every `record_every` steps and at the final time.
///
/// Stops with [`Error::BlowUpSuspected`] once `‖∇m‖_∞` passes the ceiling and
/// with [`Error::ProjectionDegenerate`] when a step leaves `|m| < 1/2`.
pub fn evolve(sp: &Spectral, m0: &SpinField, cfg: &SolverConfig) -> Result<Trajectory> {
    evolve_with_delta(sp, m0, cfg, DEFAULT_DELTA)
}

pub fn evolve_with_delta(
    sp: &Spectral,
    m0: &SpinField,
    cfg: &SolverConfig,
    delta: f64,
) -> Result<Trajectory> {
    cfg.validate()?;
    check_unit(&m0.field, UNIT_TOLERANCE)?;
    let grid = *sp.grid();
    let ceiling = cfg.ceiling(&grid);
    let steps = cfg.steps();
    let mut series = NormSeries::new(delta, grid.dimension(), grid.spectral_gap_time(cfg.lambda));
    series.push(NormRecord::from_spin(sp, m0, 0.0, delta, 0.0)?)?;
    let mut traj = Trajectory {
        lambda: cfg.lambda,
        times: vec![0.0],
        snapshots: vec![m0.clone()],
        series,
    };
    let mut m = m0.clone();
    let mut drift = 0.0f64;
    for n in 0..steps {
        let t = n as f64 * cfg.dt;
        let out = step_at(sp, &m, cfg, t)?;
        if out.grad_linf > ceiling {
            return Err(Error::BlowUpSuspected {
                time: t,
                grad_linf: out.grad_linf,
                ceiling,
            });
        }
        m = out.next;
        drift = drift.max(out.drift);
        let done = n + 1;
        if done % cfg.record_every == 0 || done == steps {
            let t = done as f64 * cfg.dt;
            let record = NormRecord::from_spin(sp, &m, t, delta, drift)?;
            if record.grad_linf > ceiling {
                return Err(Error::BlowUpSuspected {
                    time: t,
                    grad_linf: record.grad_linf,
                    ceiling,
                });
            }
            traj.series.push(record)?;
            traj.times.push(t);
            traj.snapshots.push(m.clone());
            drift = 0.0;
        }
    }
    Ok(traj)
}

/// One interior sample of the energy-law check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyLawSample {
    pub t: f64,
    /// `|(1+λ²) dE/dt + λ‖∂ₜm‖₂²|`
    pub residual: f64,
    /// `λ‖∂ₜm‖₂²`
    pub dissipation: f64,
}

/// Residual of `(1+λ²) dE/dt + λ∫|∂ₜm|² = 0` at interior samples, with `dE/dt`
/// from centered differences of the recorded energy and `∂ₜm` from [`rhs_llg`].
pub fn energy_law_residual(sp: &Spectral, traj: &Trajectory) -> Result<Vec<EnergyLawSample>> {
    if traj.len() < 3 {
        return Err(Error::TooFewSnapshots {
            needed: 3,
            have: traj.len(),
        });
    }
    let lambda = traj.lambda;
    let energies: Vec<f64> = traj.series.records.iter().map(|r| r.energy).collect();
    (1..traj.len() - 1)
        .map(|i| {
            let de = (energies[i + 1] - energies[i - 1]) / (traj.times[i + 1] - traj.times[i - 1]);
            let dm = rhs_llg(sp, &traj.snapshots[i], lambda)?;
            let l2 = lp_norm(&dm.magnitude(), 2.0)?;
            let dissipation = lambda * l2 * l2;
            Ok(EnergyLawSample {
                t: traj.times[i],
                residual: ((1.0 + lambda * lambda) * de + dissipation).abs(),
                dissipation,
            })
        })
        .collect()
}

/// Smallest `c ≥ 0` with `log_growth[i] ≤ c·integral[i]` over the first quarter
/// of the samples (at least two samples).
pub(crate) fn fit_envelope_constant(log_growth: &[f64], integral: &[f64]) -> f64 {
    let n = log_growth.len();
    let window = (n / 4).max(2).min(n);
    (0..window)
        .filter(|&i| integral[i] > 0.0 && log_growth[i].is_finite())
        .map(|i| log_growth[i] / integral[i])
        .fold(0.0, f64::max)
}

/// Cumulative trapezoid `∫_{t_0}^{t_i} f`.
pub(crate) fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; times.len()];
    for i in 1..times.len() {
        out[i] = out[i - 1] + 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
    }
    out
}

/// Higher-order energy monitor output.
#[derive(Clone, Debug, PartialEq)]
pub struct SobolevReport {
    pub sigma: u32,
    pub times: Vec<f64>,
    /// `‖∇m‖²_{H^{σ−1}}`
    pub lower: Vec<f64>,
    /// `‖∇m‖²_{H^σ}`
    pub upper: Vec<f64>,
    pub grad_linf: Vec<f64>,
    /// fitted `c` in `C(t) = c∫(1 + ‖∇m‖²_∞)`
    pub c_fit: f64,
    /// `e^{C(t)} ‖∇m(0)‖²_{H^{σ−1}}`
    pub envelope: Vec<f64>,
    pub violations: Vec<usize>,
}

pub fn sobolev_monitor(sp: &Spectral, traj: &Trajectory, sigma: u32) -> Result<SobolevReport> {
    if sigma < 2 {
        return Err(Error::InvalidArgument(format!("sigma must be >= 2 (got {sigma})")));
    }
    let mut lower = Vec::with_capacity(traj.len());
    let mut upper = Vec::with_capacity(traj.len());
    let mut grad_linf = Vec::with_capacity(traj.len());
    for m in &traj.snapshots {
        let grads = spin_gradient(sp, &m.field)?;
        let comps: Vec<ScalarField> = grads
            .iter()
            .flat_map(|g| (0..3).map(move |c| g.component(c)))
            .collect();
        lower.push(sp.sobolev_norm_components(&comps, sigma - 1)?.powi(2));
        upper.push(sp.sobolev_norm_components(&comps, sigma)?.powi(2));
        grad_linf.push(lp_norm(&vector_components_magnitude(&grads), f64::INFINITY)?);
    }
    let weight: Vec<f64> = grad_linf.iter().map(|g| 1.0 + g * g).collect();
    let integral = cumulative_trapezoid(&traj.times, &weight);
    let y0 = lower[0];
    let log_growth: Vec<f64> = lower
        .iter()
        .map(|&y| if y0 > 0.0 && y > 0.0 { (y / y0).ln() } else { f64::NEG_INFINITY })
        .collect();
    let c_fit = fit_envelope_constant(&log_growth, &integral);
    let envelope: Vec<f64> = integral.iter().map(|&i| (c_fit * i).exp() * y0).collect();
    let violations = lower
        .iter()
        .zip(&envelope)
        .enumerate()
        .filter(|(_, (&y, &e))| y > e * (1.0 + 1e-12) + 1e-300)
        .map(|(i, _)| i)
        .collect();
    Ok(SobolevReport {
        sigma,
        times: traj.times.clone(),
        lower,
        upper,
        grad_linf,
        c_fit,
        envelope,
        violations,
    })
}

/// Two-trajectory L² distance and its Gronwall envelope.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub times: Vec<f64>,
    /// `‖m₁ − m₂‖²_{L²}`
    pub distance_sq: Vec<f64>,
    pub c_fit: f64,
    pub envelope: Vec<f64>,
    pub violations: Vec<usize>,
    /// largest `d_{i+1}/d_i` over consecutive samples (1 for identical runs)
    pub max_step_ratio: f64,
}

impl StabilityReport {
    pub fn is_non_increasing(&self) -> bool {
        self.max_step_ratio <= 1.0 + 1e-12
    }
}

pub fn stability_distance(a: &Trajectory, b: &Trajectory) -> Result<StabilityReport> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch("trajectories live on different grids".into()));
    }
    if a.lambda != b.lambda {
        return Err(Error::InvalidArgument("trajectories use different damping".into()));
    }
    if a.times.len() != b.times.len()
        || a.times.iter().zip(&b.times).any(|(x, y)| (x - y).abs() > 1e-12 * (1.0 + x.abs()))
    {
        return Err(Error::InvalidArgument("sample times differ".into()));
    }
    let grid = *a.grid();
    let distance_sq = a
        .snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(x, y)| {
            let d: Vec<f64> = x
                .field
                .data
                .iter()
                .zip(&y.field.data)
                .map(|(&p, &q)| vec3::norm(vec3::sub(p, q)))
                .collect();
            Ok(lp_norm_values(&grid, &d, 2.0)?.powi(2))
        })
        .collect::<Result<Vec<f64>>>()?;
    let weight: Vec<f64> = a
        .series
        .records
        .iter()
        .zip(&b.series.records)
        .map(|(p, q)| p.grad_linf.powi(2) + q.grad_linf.powi(2))
        .collect();
    let integral = cumulative_trapezoid(&a.times, &weight);
    let d0 = distance_sq[0];
    let log_growth: Vec<f64> = distance_sq
        .iter()
        .map(|&d| if d0 > 0.0 && d > 0.0 { (d / d0).ln() } else { f64::NEG_INFINITY })
        .collect();
    let c_fit = fit_envelope_constant(&log_growth, &integral);
    let envelope: Vec<f64> = integral.iter().map(|&i| (c_fit * i).exp() * d0).collect();
    let violations = distance_sq
        .iter()
        .zip(&envelope)
        .enumerate()
        .filter(|(_, (&d, &e))| d > e * (1.0 + 1e-12) + 1e-300)
        .map(|(i, _)| i)
        .collect();
    let max_step_ratio = distance_sq
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else if w[1] > 0.0 { f64::INFINITY } else { 1.0 })
        .fold(if distance_sq.len() > 1 { 0.0 } else { 1.0 }, f64::max);
    Ok(StabilityReport {
        times: a.times.clone(),
        distance_sq,
        c_fit,
        envelope,
        violations,
        max_step_ratio,
    })
}

/// Both sides of the localized energy inequality on `P_r(z₀) = (t₀, t₀+r²) × B_r(x₀)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalEnergy {
    /// `sup_t ∫_{B_{r/2}} |∇m|² + ∫_{P_{r/2}} |∂ₜm|²`
    pub lhs: f64,
    /// `r^{-2} ∫_{P_r} |∇m|²`
    pub rhs: f64,
    /// `lhs / rhs`, 0 when both vanish
    pub implied_c: f64,
}

/// Evaluates both sides of the localized energy inequality by quadrature over
/// the recorded snapshots (trapezoid in time over the samples inside each
/// window, periodic balls in space). The energy term on the left is the
/// supremum over samples in `[t₀, t₀ + r²/4]`.
pub fn local_energy_check(
    sp: &Spectral,
    traj: &Trajectory,
    center: [f64; 3],
    t0: f64,
    r: f64,
) -> Result<LocalEnergy> {
    let grid = *traj.grid();
    if !(r > 0.0) || r > 0.5 * grid.box_length() {
        return Err(Error::CylinderOutOfRange(format!(
            "radius {r} must lie in (0, L/2]"
        )));
    }
    let eps = 1e-9 * (1.0 + t0.abs());
    let first = traj.times[0];
    let last = *traj.times.last().unwrap();
    if t0 < first - eps || t0 + r * r > last + eps {
        return Err(Error::CylinderOutOfRange(format!(
            "time window [{t0}, {}] outside recorded [{first}, {last}]",
            t0 + r * r
        )));
    }
    let in_window = |t1: f64| -> Vec<usize> {
        (0..traj.len())
            .filter(|&i| traj.times[i] >= t0 - eps && traj.times[i] <= t1 + eps)
            .collect()
    };
    let half = in_window(t0 + 0.25 * r * r);
    let full = in_window(t0 + r * r);
    if half.len() < 2 {
        return Err(Error::CylinderOutOfRange(
            "fewer than two samples in the half cylinder".into(),
        ));
    }
    let dist: Vec<f64> = (0..grid.len())
        .map(|i| vec3::norm(grid.periodic_displacement(grid.coords(i), center)))
        .collect();
    let vol = grid.cell_volume();
    let ball_integral = |values: &ScalarField, radius: f64| -> f64 {
        values
            .data
            .iter()
            .zip(&dist)
            .filter(|(_, &d)| d < radius)
            .map(|(&v, _)| v)
            .sum::<f64>()
            * vol
    };
    let grad_sq_at = |i: usize| -> Result<ScalarField> {
        Ok(grad_sq(&spin_gradient(sp, &traj.snapshots[i].field)?))
    };
    let mut sup_energy = 0.0f64;
    let mut dt_sq = Vec::with_capacity(half.len());
    for &i in &half {
        sup_energy = sup_energy.max(ball_integral(&grad_sq_at(i)?, 0.5 * r));
        let dm = rhs_llg(sp, &traj.snapshots[i], traj.lambda)?;
        let mag = dm.magnitude().map(|v| v * v);
        dt_sq.push(ball_integral(&mag, 0.5 * r));
    }
    let half_times: Vec<f64> = half.iter().map(|&i| traj.times[i]).collect();
    let dissipation = *cumulative_trapezoid(&half_times, &dt_sq).last().unwrap();
    let mut full_vals = Vec::with_capacity(full.len());
    for &i in &full {
        full_vals.push(ball_integral(&grad_sq_at(i)?, r));
    }
    let full_times: Vec<f64> = full.iter().map(|&i| traj.times[i]).collect();
    let space_time = *cumulative_trapezoid(&full_times, &full_vals).last().unwrap();
    let lhs = sup_energy + dissipation;
    let rhs = space_time / (r * r);
    let implied_c = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(LocalEnergy { lhs, rhs, implied_c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    use crate::testutil::{blob, wave, E3};

    #[test]
    fn constant_map_is_stationary() {
        let g = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let sp = Spectral::new(g);
        let m = SpinField::uniform(g, E3);
        let r = rhs_llg(&sp, &m, 0.7).unwrap();
        assert!(r.max_abs() < 1e-14);
        assert_eq!(energy(&sp, &m).unwrap(), 0.0);
        for scheme in [Scheme::ImexProjection, Scheme::Rk4Projection] {
            let cfg = SolverConfig::new(0.7, 0.01, 0.05).with_scheme(scheme);
            let next = step(&sp, &m, &cfg).unwrap();
            assert!(next.field.sub(&m.field).max_abs() < 1e-14);
        }
    }

    #[test]
    fn rhs_rejects_non_unit() {
        let g = GridSpec::new(1, 8, 1.0).unwrap();
        let sp = Spectral::new(g);
        let m = SpinField {
            field: VectorField3::constant(g, [0.0, 0.0, 1.1]),
            m_inf: E3,
        };
        assert!(matches!(rhs_llg(&sp, &m, 1.0), Err(Error::NonUnit { .. })));
    }

    #[test]
    fn pointwise_identities_hold() {
        let g = GridSpec::new(2, 48, 2.0 * PI).unwrap();
        let sp = Spectral::new(g);
        let m = blob(g, 0.6);
        let lambda = 0.8;
        let (lap, grads) = spin_derivatives(&sp, &m.field).unwrap();
        let tau = tension(&sp, &m).unwrap();
        let scale = tau.max_abs();
        // -m × (m × Δm) = Δm + |∇m|²m
        for i in 0..g.len() {
            let v = m.field.data[i];
            let lhs = vec3::scale(vec3::cross(v, vec3::cross(v, lap.data[i])), -1.0);
            assert!(vec3::norm(vec3::sub(lhs, tau.data[i])) < 1e-8 * scale.max(1.0));
        }
        // λ rhs + m × rhs = (1+λ²) τ, tangency
        let r = rhs_llg(&sp, &m, lambda).unwrap();
        let rs = r.max_abs();
        for i in 0..g.len() {
            let v = m.field.data[i];
            assert!(vec3::dot(r.data[i], v).abs() <= 1e-8 * rs);
            let lhs = vec3::add(vec3::scale(r.data[i], lambda), vec3::cross(v, r.data[i]));
            let rhs = vec3::scale(tau.data[i], 1.0 + lambda * lambda);
            assert!(vec3::norm(vec3::sub(lhs, rhs)) < 1e-8 * rs.max(1.0), "{i}");
        }
        // m × Δm = ∇·(m × ∇m)
        let flux: Vec<VectorField3> = grads
            .iter()
            .map(|gk| VectorField3 {
                grid: g,
                data: m.field.data.iter().zip(&gk.data).map(|(&a, &b)| vec3::cross(a, b)).collect(),
            })
            .collect();
        for c in 0..3 {
            let comps: Vec<ScalarField> = flux.iter().map(|f| f.component(c)).collect();
            let div = sp.divergence(&comps).unwrap();
            for i in 0..g.len() {
                let direct = vec3::cross(m.field.data[i], lap.data[i])[c];
                assert!((div.data[i] - direct).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rhs_linearizes_to_dissipative_schrodinger() {
        let g = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let sp = Spectral::new(g);
        let k = [1.0, 2.0, 0.0];
        let k2 = 5.0;
        let lambda = 0.6;
        let mut errs = Vec::new();
        for eps in [1e-2, 1e-3] {
            let m = wave(g, eps, k);
            let r = rhs_llg(&sp, &m, lambda).unwrap();
            let mut err: f64 = 0.0;
            for i in 0..g.len() {
                let x = g.coords(i);
                let psi = Complex64::from_polar(eps, k[0] * x[0] + k[1] * x[1]);
                let expect = Complex64::new(lambda, -1.0) * (-k2) * psi;
                let got = Complex64::new(r.data[i][0], r.data[i][1]);
                err = err.max((got - expect).norm());
            }
            errs.push(err / eps);
        }
        // relative error is O(ε²)
        assert!(errs[0] < 1e-3 && errs[1] < 1e-5, "{errs:?}");
    }

    #[test]
    fn linear_wave_step_matches_exact_solution() {
        let g = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let sp = Spectral::new(g);
        let k = [1.0, 1.0, 0.0];
        let k2 = 2.0;
        let lambda = 0.5;
        let eps = 1e-3;
        let dt = 0.05;
        let t_end = 1.0;
        let cfg = SolverConfig::new(lambda, dt, t_end).with_record_every(20);
        let traj = evolve(&sp, &wave(g, eps, k), &cfg).unwrap();
        let m = traj.snapshots.last().unwrap();
        let t = *traj.times.last().unwrap();
        assert!((t - t_end).abs() < 1e-12);
        let expect = Complex64::new(-lambda, 1.0) * k2 * t;
        let i0 = 0;
        let psi = Complex64::new(m.field.data[i0][0], m.field.data[i0][1]);
        let psi0 = Complex64::new(eps, 0.0) / (1.0 + eps * eps).sqrt();
        let ratio = psi / psi0;
        assert!((ratio.norm() / expect.exp().norm() - 1.0).abs() < 1e-3);
        assert!((ratio.arg() - expect.im).abs() < 1e-3 * expect.im, "{ratio} {}", expect.exp());
    }

    #[test]
    fn energy_of_great_circle_map() {
        // |∇m|² = |∇φ|² for m = (cos φ, sin φ, 0)
        let l = 3.0;
        let g = GridSpec::new(2, 32, l).unwrap();
        let sp = Spectral::new(g);
        let alpha = 0.7;
        let w = 2.0 * PI / l;
        let f = VectorField3::from_fn(g, |x| {
            let phi = alpha * (w * x[0]).sin();
            [phi.cos(), phi.sin(), 0.0]
        });
        let m = SpinField::new(f, [1.0, 0.0, 0.0]).unwrap();
        // ½∫|∂₁φ|² = ½ α² w² ∫cos² = ¼ α² w² L²
        let expected = 0.25 * alpha * alpha * w * w * l * l;
        assert!((energy(&sp, &m).unwrap() - expected).abs() < 1e-10 * expected);

        // invariance under a global rotation
        let m2 = blob(g, 0.8);
        let (s, c) = 0.4f64.sin_cos();
        let rotated = m2.field.map(|v| [c * v[0] - s * v[2], v[1], s * v[0] + c * v[2]]);
        let e1 = energy(&sp, &m2).unwrap();
        let e2 = energy(&sp, &SpinField::normalized(rotated, E3).unwrap()).unwrap();
        assert!((e1 - e2).abs() < 1e-12 * e1);
    }

    #[test]
    fn energy_decreases_and_constraint_holds() {
        let g = GridSpec::new(2, 32, 2.0 * PI).unwrap();
        let sp = Spectral::new(g);
        let m0 = blob(g, 1.0);
        for scheme in [Scheme::ImexProjection, Scheme::Rk4Projection] {
            let cfg = SolverConfig::new(1.0, 2e-3, 0.2).with_scheme(scheme).with_record_every(5);
            let traj = evolve(&sp, &m0, &cfg).unwrap();
            let e: Vec<f64> = traj.series.records.iter().map(|r| r.energy).collect();
            assert!(e.windows(2).all(|w| w[1] <= w[0]), "{scheme:?}");
            for m in &traj.snapshots {
                check_unit(&m.field, UNIT_TOLERANCE).unwrap();
            }
        }
    }

    #[test]
    fn imex_is_first_order_and_agrees_with_rk4() {
        let g = GridSpec::new(2, 32, 2.0 * PI).unwrap();
        let sp = Spectral::new(g);
        let m0 = blob(g, 1.0);
        let t_end = 0.1;
        let run = |dt: f64, scheme| {
            let cfg = SolverConfig::new(1.0, dt, t_end)
                .with_scheme(scheme)
                .with_record_every(usize::MAX);
            evolve(&sp, &m0, &cfg).unwrap().snapshots.pop().unwrap()
        };
        let reference = run(2.5e-4, Scheme::Rk4Projection);
        let l2 = |a: &SpinField, b: &SpinField| lp_norm(&a.field.sub(&b.field).magnitude(), 2.0).unwrap();
        let e1 = l2(&run(4e-3, Scheme::ImexProjection), &reference);
        let e2 = l2(&run(2e-3, Scheme::ImexProjection), &reference);
        let order = (e1 / e2).log2();
        assert!(order > 0.8 && order < 1.3, "order {order} ({e1:e}, {e2:e})");
        // RK4 at the coarse step is far closer to the reference than the IMEX error
        assert!(l2(&run(2e-3, Scheme::Rk4Projection), &reference) < 0.1 * e2);
    }

    #[test]
    fn evolve_rejects_blow_up_and_bad_config() {
        let g = GridSpec::new(1, 16, 2.0 * PI).unwrap();
        let sp = Spectral::new(g);
        let m0 = wave(g, 0.5, [1.0, 0.0, 0.0]);
        let mut cfg = SolverConfig::new(1.0, 1e-3, 0.01);
        cfg.blowup_ceiling = Some(1e-3);
        assert!(matches!(evolve(&sp, &m0, &cfg), Err(Error::BlowUpSuspected { .. })));
        assert!(evolve(&sp, &m0, &SolverConfig::new(0.0, 1e-3, 0.01)).is_err());
        assert!(evolve(&sp, &m0, &SolverConfig::new(1.0, 1e-2, 1e-3)).is_err());
        let mut field = VectorField3::constant(g, E3);
        field.data[3] = [0.0, 0.0, 0.1];
        assert!(matches!(
            project(field, E3, 0.5, UNIT_TOLERANCE),
            Err(Error::ProjectionDegenerate { index: 3, .. })
        ));
    }

    #[test]
    fn constant_trajectory_monitors_vanish() {
        let g = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let sp = Spectral::new(g);
        let m0 = SpinField::uniform(g, E3);
        let traj = evolve(&sp, &m0, &SolverConfig::new(1.0, 0.01, 0.05)).unwrap();
        assert_eq!(traj.len(), 6);
        assert!(traj.series.records.iter().all(|r| r.energy == 0.0));
        let res = energy_law_residual(&sp, &traj).unwrap();
        assert!(res.iter().all(|s| s.residual == 0.0));
        let sob = sobolev_monitor(&sp, &traj, 2).unwrap();
        assert!(sob.lower.iter().chain(&sob.upper).all(|&v| v == 0.0));
        assert!(sob.violations.is_empty());
        let st = stability_distance(&traj, &traj).unwrap();
        assert!(st.distance_sq.iter().all(|&d| d == 0.0));
        assert!(st.is_non_increasing());
        let le = local_energy_check(&sp, &traj, [PI, PI, 0.0], 0.0, 0.2).unwrap();
        assert_eq!((le.lhs, le.rhs), (0.0, 0.0));
        assert!(matches!(
            energy_law_residual(&sp, &Trajectory { times: vec![0.0], snapshots: vec![m0.clone()], ..traj.clone() }),
            Err(Error::TooFewSnapshots { .. })
        ));
        assert!(local_energy_check(&sp, &traj, [0.0; 3], 0.0, 1.0).is_err());
    }

    #[test]
    fn energy_law_residual_converges() {
        let g = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let sp = Spectral::new(g);
        let m0 = blob(g, 0.5);
        let max_res = |dt: f64| {
            let cfg = SolverConfig::new(1.0, dt, 0.1).with_record_every(4);
            let traj = evolve(&sp, &m0, &cfg).unwrap();
            energy_law_residual(&sp, &traj)
                .unwrap()
                .iter()
                .map(|s| s.residual)
                .fold(0.0, f64::max)
        };
        let (a, b) = (max_res(2e-3), max_res(1e-3));
        assert!((a / b).log2() >= 0.9, "{a:e} {b:e}");
    }

    #[test]
    fn sobolev_monitor_envelope_and_linear_decay() {
        let g = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        let sp = Spectral::new(g);
        let lambda = 1.0;
        let k2 = 1.0;
        let cfg = SolverConfig::new(lambda, 0.01, 0.5).with_record_every(5);
        let traj = evolve(&sp, &wave(g, 1e-4, [1.0, 0.0, 0.0]), &cfg).unwrap();
        let rep = sobolev_monitor(&sp, &traj, 2).unwrap();
        assert!(rep.violations.is_empty());
        for (i, &t) in rep.times.iter().enumerate() {
            let ratio = (rep.lower[i] / rep.lower[0]).sqrt();
            let expect = (-lambda * k2 * t).exp();
            assert!((ratio / expect - 1.0).abs() < 1e-2, "{t} {ratio} {expect}");
        }
        assert!(sobolev_monitor(&sp, &traj, 1).is_err());
    }

    #[test]
    fn stability_of_nearby_runs() {
        let g = GridSpec::new(2, 32, 2.0 * PI).unwrap();
        let sp = Spectral::new(g);
        let m1 = blob(g, 0.3);
        let c = PI;
        let bumped = m1.field.data.iter().enumerate().map(|(i, &v)| {
            let x = g.coords(i);
            let r2 = (x[0] - c).powi(2) + (x[1] - c).powi(2);
            vec3::add(v, [1e-4 * (-r2).exp(), 0.0, 0.0])
        });
        let m2 = SpinField::normalized(VectorField3 { grid: g, data: bumped.collect() }, E3).unwrap();
        let cfg = SolverConfig::new(1.0, 5e-3, 0.5).with_record_every(4);
        let a = evolve(&sp, &m1, &cfg).unwrap();
        let b = evolve(&sp, &m2, &cfg).unwrap();
        let rep = stability_distance(&a, &b).unwrap();
        assert!(rep.violations.is_empty());
        assert!(rep.is_non_increasing(), "{}", rep.max_step_ratio);
        let same = stability_distance(&a, &a).unwrap();
        assert!(same.distance_sq.iter().all(|&d| d == 0.0));
        let short = evolve(&sp, &m1, &SolverConfig::new(1.0, 5e-3, 0.1)).unwrap();
        assert!(stability_distance(&a, &short).is_err());
    }

    #[test]
    fn local_energy_constant_is_stable() {
        let g = GridSpec::new(2, 32, 2.0 * PI).unwrap();
        let sp = Spectral::new(g);
        let m0 = blob(g, 0.4);
        let run = |dt: f64| {
            let cfg = SolverConfig::new(1.0, dt, 0.6).with_record_every((0.01 / dt).round() as usize);
            evolve(&sp, &m0, &cfg).unwrap()
        };
        let (coarse, fine) = (run(2.5e-3), run(1.25e-3));
        let center = [PI, PI, 0.0];
        let c1 = local_energy_check(&sp, &coarse, center, 0.1, 0.6).unwrap().implied_c;
        let c2 = local_energy_check(&sp, &fine, center, 0.1, 0.6).unwrap().implied_c;
        assert!(c1 > 0.0 && ((c1 - c2) / c2).abs() < 0.2, "{c1} {c2}");
        let c_half = local_energy_check(&sp, &fine, center, 0.1, 0.3).unwrap().implied_c;
        assert!(c_half <= c2 * 1.0001, "{c_half} {c2}");
    }
}

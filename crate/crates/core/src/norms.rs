//! Time series of norms along a trajectory and the weighted-in-time
//! quantities `K`, `K'`, `R`, `R0` built from them.

use crate::cgl;
use crate::error::{Error, Result};
use crate::field::{vector_components_magnitude, ComplexField};
use crate::frame;
use crate::llg::{self, SpinField};
use crate::spectral::{lp_norm, lp_norm_complex_components, Spectral};
use crate::vec3;

/// Default δ, the midpoint of `(3/5, 2/3)`.
pub const DEFAULT_DELTA: f64 = 0.62;

/// RMS log-residual above which a power-law fit is flagged as a poor description.
pub const POWER_LAW_RESIDUAL_TOL: f64 = 1e-2;

/// Norms recorded at one sample time.
///
/// `u` is the frame representation of `∇m`, so `|u| = |∇m|` pointwise and the
/// Lebesgue norms of `u` are read off `∇m` directly. Only `‖∇u‖_{Lⁿ}` depends
/// on the gauge and is filled in by the frame pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct NormRecord {
    pub t: f64,
    pub energy: f64,
    pub grad_linf: f64,
    pub grad_ln: f64,
    pub h1_dev: f64,
    pub linf_dev: f64,
    /// `‖u‖_{L^{n/δ}}`
    pub u_lnd: f64,
    /// `‖∇u‖_{Lⁿ}` in the Coulomb gauge, when computed
    pub grad_u_ln: Option<f64>,
    /// max `||m| - 1|` before the projection of the step that produced this sample
    pub drift: f64,
}

impl NormRecord {
    pub fn u_ln(&self) -> f64 {
        self.grad_ln
    }

    pub fn u_linf(&self) -> f64 {
        self.grad_linf
    }

    /// Computes the `m`-side records of one snapshot.
    pub fn from_spin(sp: &Spectral, m: &SpinField, t: f64, delta: f64, drift: f64) -> Result<Self> {
        let grid = *sp.grid();
        let n = grid.dimension() as f64;
        let grads = llg::spin_gradient(sp, &m.field)?;
        let mag = vector_components_magnitude(&grads);
        let grad_l2 = lp_norm(&mag, 2.0)?;
        let dev: Vec<f64> = m
            .field
            .data
            .iter()
            .map(|&v| vec3::norm(vec3::sub(v, m.m_inf)))
            .collect();
        let dev_l2 = crate::spectral::lp_norm_values(&grid, &dev, 2.0)?;
        Ok(Self {
            t,
            energy: 0.5 * grad_l2 * grad_l2,
            grad_linf: lp_norm(&mag, f64::INFINITY)?,
            grad_ln: lp_norm(&mag, n)?,
            h1_dev: (dev_l2 * dev_l2 + grad_l2 * grad_l2).sqrt(),
            linf_dev: dev.iter().fold(0.0, |a: f64, &b| a.max(b)),
            u_lnd: lp_norm(&mag, n / delta)?,
            grad_u_ln: None,
            drift,
        })
    }
}

/// Time-stamped norms of one run. δ is carried so that series computed with
/// different δ are never merged.
#[derive(Clone, Debug, PartialEq)]
pub struct NormSeries {
    pub delta: f64,
    pub dimension: usize,
    /// `L^2/(4 pi^2 λ)`; decay fits must end before it
    pub spectral_gap_time: f64,
    pub records: Vec<NormRecord>,
}

impl NormSeries {
    pub fn new(delta: f64, dimension: usize, spectral_gap_time: f64) -> Self {
        Self {
            delta,
            dimension,
            spectral_gap_time,
            records: Vec::new(),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn push(&mut self, record: NormRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.t <= last.t {
                return Err(Error::InvalidArgument(format!(
                    "sample times must increase ({} after {})",
                    record.t, last.t
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }
}

/// Quantity of a [`NormRecord`] selected for fitting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Energy,
    GradLinf,
    GradLn,
    H1Dev,
    LinfDev,
    ULnd,
    GradULn,
}

impl Quantity {
    pub fn of(self, r: &NormRecord) -> Option<f64> {
        Some(match self {
            Quantity::Energy => r.energy,
            Quantity::GradLinf => r.grad_linf,
            Quantity::GradLn => r.grad_ln,
            Quantity::H1Dev => r.h1_dev,
            Quantity::LinfDev => r.linf_dev,
            Quantity::ULnd => r.u_lnd,
            Quantity::GradULn => return r.grad_u_ln,
        })
    }
}

/// Fills `grad_u_ln` from the Coulomb-gauge frame fields of every snapshot.
pub fn attach_frame_norms(sp: &Spectral, traj: &mut llg::Trajectory) -> Result<()> {
    let n = sp.grid().dimension() as f64;
    for (m, rec) in traj.snapshots.iter().zip(traj.series.records.iter_mut()) {
        let fields = frame::coulomb_fields(sp, m, None)?;
        rec.grad_u_ln = Some(cgl::grad_u_norm(sp, &fields.u, n)?);
    }
    Ok(())
}

/// Running suprema `K`, `K'` and `R = max(K, K')` at the sample times.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedNorms {
    pub delta: f64,
    pub times: Vec<f64>,
    /// `sup τ^{(1−δ)/2} ‖u‖_{L^{n/δ}}`
    pub k: Vec<f64>,
    /// `sup τ^{1/2} ‖∇u‖_{Lⁿ}`
    pub k_prime: Vec<f64>,
    pub r: Vec<f64>,
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.5 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (1/2, 1) (got {delta})"
        )));
    }
    Ok(())
}

fn running_norms(delta: f64, samples: impl Iterator<Item = (f64, f64, f64)>) -> WeightedNorms {
    let mut out = WeightedNorms {
        delta,
        times: Vec::new(),
        k: Vec::new(),
        k_prime: Vec::new(),
        r: Vec::new(),
    };
    let (mut k, mut kp) = (0.0f64, 0.0f64);
    for (t, u_lnd, grad_u_ln) in samples {
        k = k.max(t.powf(0.5 * (1.0 - delta)) * u_lnd);
        kp = kp.max(t.sqrt() * grad_u_ln);
        out.times.push(t);
        out.k.push(k);
        out.k_prime.push(kp);
        out.r.push(k.max(kp));
    }
    out
}

/// `K`, `K'`, `R` from a series whose `grad_u_ln` entries are filled in.
pub fn weighted_norms(series: &NormSeries, delta: f64) -> Result<WeightedNorms> {
    check_delta(delta)?;
    if delta != series.delta {
        return Err(Error::InvalidArgument(format!(
            "series was recorded with delta {} (requested {delta})",
            series.delta
        )));
    }
    let mut samples = Vec::with_capacity(series.records.len());
    for r in &series.records {
        let g = r.grad_u_ln.ok_or_else(|| {
            Error::InvalidArgument(format!("frame norms missing at t = {}", r.t))
        })?;
        samples.push((r.t, r.u_lnd, g));
    }
    Ok(running_norms(delta, samples.into_iter()))
}

/// `K`, `K'`, `R` of a `u`-trajectory given directly (for example a Picard solution).
pub fn weighted_norms_of_u(
    sp: &Spectral,
    times: &[f64],
    u: &[Vec<ComplexField>],
    delta: f64,
) -> Result<WeightedNorms> {
    check_delta(delta)?;
    if times.len() != u.len() {
        return Err(Error::InvalidArgument("times and samples differ in length".into()));
    }
    let n = sp.grid().dimension() as f64;
    let mut samples = Vec::with_capacity(times.len());
    for (&t, s) in times.iter().zip(u) {
        samples.push((
            t,
            lp_norm_complex_components(s, n / delta)?,
            cgl::grad_u_norm(sp, s, n)?,
        ));
    }
    Ok(running_norms(delta, samples.into_iter()))
}

/// `R₀` built from the linear evolution `S(τ)u0`.
#[derive(Clone, Debug, PartialEq)]
pub struct R0Series {
    pub norms: WeightedNorms,
    pub u0_ln: f64,
    /// `sup R₀ / ‖u0‖_{Lⁿ}`
    pub c_fit: f64,
}

pub fn r0_series(
    sp: &Spectral,
    u0: &[ComplexField],
    times: &[f64],
    delta: f64,
    lambda: f64,
) -> Result<R0Series> {
    let linear: Vec<Vec<ComplexField>> = times
        .iter()
        .map(|&t| u0.iter().map(|c| sp.semigroup_apply(c, t, lambda)).collect())
        .collect::<Result<_>>()?;
    let norms = weighted_norms_of_u(sp, times, &linear, delta)?;
    let u0_ln = lp_norm_complex_components(u0, sp.grid().dimension() as f64)?;
    let sup = norms.r.last().copied().unwrap_or(0.0);
    Ok(R0Series {
        c_fit: if u0_ln > 0.0 { sup / u0_ln } else { 0.0 },
        norms,
        u0_ln,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BootstrapReport {
    /// `R(t) ≤ 2R₀(t)` at every sample
    pub holds: bool,
    /// `min_t (2R₀(t) − R(t))`
    pub worst_margin: f64,
    /// `max_t R(t)/R₀(t)` over samples with `R₀ > 0`
    pub max_ratio: f64,
}

pub fn check_bootstrap(r: &WeightedNorms, r0: &WeightedNorms) -> Result<BootstrapReport> {
    if r.times.len() != r0.times.len()
        || r.times.iter().zip(&r0.times).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + a.abs()))
    {
        return Err(Error::InvalidArgument("R and R0 are sampled at different times".into()));
    }
    let mut worst = f64::INFINITY;
    let mut max_ratio = 0.0f64;
    for (&x, &y) in r.r.iter().zip(&r0.r) {
        worst = worst.min(2.0 * y - x);
        if y > 0.0 {
            max_ratio = max_ratio.max(x / y);
        }
    }
    if r.r.is_empty() {
        worst = 0.0;
    }
    Ok(BootstrapReport {
        holds: worst >= 0.0,
        worst_margin: worst,
        max_ratio,
    })
}

/// Empirical constants of the a priori bounds over one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoremReport {
    pub grad0_ln: f64,
    /// `sup (√t ‖u‖_∞ + ‖u‖_{Lⁿ}) / ‖u(0)‖_{Lⁿ}`
    pub c_alpha: f64,
    /// `(sup √t ‖∇m‖_∞ + sup ‖∇m‖_{Lⁿ}) / ‖∇m₀‖_{Lⁿ}`
    pub c_gradient: f64,
    /// `sup ‖u‖_{Lⁿ} / ‖u(0)‖_{Lⁿ}`
    pub c_ln: f64,
    pub h1_non_increasing: bool,
    /// largest `‖m−m_∞‖_{H¹}(t_{i+1}) − ‖m−m_∞‖_{H¹}(t_i)`, 0 when monotone
    pub h1_max_increase: f64,
}

pub fn check_theorem_bounds(series: &NormSeries) -> Result<TheoremReport> {
    let first = series.records.first().ok_or(Error::TooFewSnapshots { needed: 1, have: 0 })?;
    let g0 = first.grad_ln;
    let mut alpha = 0.0f64;
    let mut sqrt_linf = 0.0f64;
    let mut ln = 0.0f64;
    for r in &series.records {
        alpha = alpha.max(r.t.sqrt() * r.u_linf() + r.u_ln());
        sqrt_linf = sqrt_linf.max(r.t.sqrt() * r.grad_linf);
        ln = ln.max(r.grad_ln);
    }
    let over = |x: f64| if g0 > 0.0 { x / g0 } else { 0.0 };
    let h1_max_increase = series
        .records
        .windows(2)
        .map(|w| w[1].h1_dev - w[0].h1_dev)
        .fold(0.0, f64::max);
    Ok(TheoremReport {
        grad0_ln: g0,
        c_alpha: over(alpha),
        c_gradient: over(sqrt_linf + ln),
        c_ln: over(ln),
        h1_non_increasing: h1_max_increase <= 0.0,
        h1_max_increase,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub exponent: f64,
    pub constant: f64,
    pub window: (f64, f64),
    /// RMS residual of the log-log regression
    pub residual: f64,
    /// residual above [`POWER_LAW_RESIDUAL_TOL`]
    pub poor_power_law: bool,
}

fn window_samples(
    series: &NormSeries,
    quantity: Quantity,
    window: (f64, f64),
) -> Result<Vec<(f64, f64)>> {
    let (t0, t1) = window;
    if !(t0 > 0.0 && t1 > t0) {
        return Err(Error::InvalidArgument(format!("invalid window [{t0}, {t1}]")));
    }
    if t1 >= series.spectral_gap_time {
        return Err(Error::InvalidArgument(format!(
            "window must end before the spectral gap time {}",
            series.spectral_gap_time
        )));
    }
    let eps = 1e-12 * t1;
    let mut out = Vec::new();
    for r in series.records.iter().filter(|r| r.t >= t0 - eps && r.t <= t1 + eps) {
        let v = quantity
            .of(r)
            .ok_or_else(|| Error::InvalidArgument(format!("{quantity:?} missing at t = {}", r.t)))?;
        if !(v > 0.0) {
            return Err(Error::NonPositive { time: r.t, value: v });
        }
        out.push((r.t, v));
    }
    if out.len() < 3 {
        return Err(Error::TooFewSnapshots {
            needed: 3,
            have: out.len(),
        });
    }
    Ok(out)
}

/// Least-squares fit of `log v = log c + p log t` on the window.
pub fn fit_decay_exponent(series: &NormSeries, quantity: Quantity, window: (f64, f64)) -> Result<DecayFit> {
    let pts = window_samples(series, quantity, window)?;
    let m = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(DecayFit {
        exponent: slope,
        constant: intercept.exp(),
        window,
        residual,
        poor_power_law: residual > POWER_LAW_RESIDUAL_TOL,
    })
}

/// One-sided check of `v(t) ≤ c t^{−p}` on a window.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayBoundReport {
    pub exponent: f64,
    /// fitted on the first quarter of the window samples
    pub c_fit: f64,
    pub samples: usize,
    /// sample times where the bound fails
    pub violations: Vec<f64>,
}

impl DecayBoundReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_decay_bound(
    series: &NormSeries,
    quantity: Quantity,
    window: (f64, f64),
    exponent: f64,
) -> Result<DecayBoundReport> {
    let pts = window_samples(series, quantity, window)?;
    let scaled: Vec<f64> = pts.iter().map(|(t, v)| v * t.powf(exponent)).collect();
    let head = (pts.len() / 4).max(1);
    let c_fit = scaled[..head].iter().fold(0.0, |a: f64, &b| a.max(b));
    let violations = pts
        .iter()
        .zip(&scaled)
        .filter(|(_, &s)| s > c_fit * (1.0 + 1e-12))
        .map(|(p, _)| p.0)
        .collect();
    Ok(DecayBoundReport {
        exponent,
        c_fit,
        samples: pts.len(),
        violations,
    })
}

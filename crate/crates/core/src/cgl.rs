//! The covariant complex Ginzburg-Landau system satisfied by the Coulomb-gauge
//! fields `u`, its nonlinearity, and its mild solution by Picard iteration.

use crate::error::{Error, Result};
use crate::field::{ComplexField, ScalarField};
use crate::spectral::{lp_norm, lp_norm_complex_components, Spectral};
use rustfft::num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Subintervals used on the last mesh interval of the Duhamel quadrature.
pub const ENDPOINT_REFINEMENT: usize = 8;
/// Default bound on `‖u0‖_{Lⁿ}` accepted by [`picard_solve`].
pub const DEFAULT_SMALLNESS_GATE: f64 = 0.5;

/// `a₀ = a0_1 + a0_2`, both mean-zero.
#[derive(Clone, Debug, PartialEq)]
pub struct A0Decomposition {
    pub a0_1: ScalarField,
    pub a0_2: ScalarField,
}

impl A0Decomposition {
    pub fn total(&self) -> ScalarField {
        self.a0_1.zip_map(&self.a0_2, |x, y| x + y)
    }
}

/// `F = f1 + f2 + f3`, one complex field per spatial axis in each part.
#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearitySplit {
    pub f1: Vec<ComplexField>,
    pub f2: Vec<ComplexField>,
    pub f3: Vec<ComplexField>,
}

impl NonlinearitySplit {
    pub fn total(&self) -> Vec<ComplexField> {
        (0..self.f1.len())
            .map(|l| ComplexField {
                grid: self.f1[l].grid,
                data: (0..self.f1[l].data.len())
                    .map(|i| self.f1[l].data[i] + self.f2[l].data[i] + self.f3[l].data[i])
                    .collect(),
            })
            .collect()
    }
}

fn check_components(sp: &Spectral, u: &[ComplexField]) -> Result<()> {
    let n = sp.grid().dimension();
    if u.len() != n {
        return Err(Error::InvalidArgument(format!(
            "expected {n} components of u, got {}",
            u.len()
        )));
    }
    for c in u {
        if c.grid != *sp.grid() {
            return Err(Error::GridMismatch("u and workspace grids differ".into()));
        }
        c.check_finite()?;
    }
    Ok(())
}

fn zip_scalar(a: &ComplexField, b: &ComplexField, f: impl Fn(Complex64, Complex64) -> f64) -> ScalarField {
    ScalarField {
        grid: a.grid,
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
    }
}

/// Mean-zero Coulomb connection: `−Δa_ℓ = Σ_k ∂_k Im(u_ℓ ū_k)`.
pub fn connection_from_u(sp: &Spectral, u: &[ComplexField]) -> Result<Vec<ScalarField>> {
    check_components(sp, u)?;
    (0..u.len())
        .map(|l| {
            let flux: Vec<ScalarField> = u
                .iter()
                .map(|uk| zip_scalar(&u[l], uk, |x, y| (x * y.conj()).im))
                .collect();
            sp.solve_poisson_div(&flux)
        })
        .collect()
}

fn divergence_complex(sp: &Spectral, u: &[ComplexField]) -> Result<ComplexField> {
    let mut acc = ComplexField::zeros(*sp.grid());
    for (k, uk) in u.iter().enumerate() {
        let d = sp.partial_complex(uk, k)?;
        for (a, v) in acc.data.iter_mut().zip(d.data) {
            *a += v;
        }
    }
    Ok(acc)
}

/// Splits the time component of the Coulomb connection into
/// `−Δa0_1 = div(λ Im(ū div u) − Re(ū div u))` and
/// `−Δa0_2 = div(λ Re(ū (a·u)) + Im(ū (a·u)))`.
pub fn a0_decompose(
    sp: &Spectral,
    u: &[ComplexField],
    a: &[ScalarField],
    lambda: f64,
) -> Result<A0Decomposition> {
    check_components(sp, u)?;
    if a.len() != u.len() {
        return Err(Error::InvalidArgument("a and u must have equal length".into()));
    }
    let div_u = divergence_complex(sp, u)?;
    let a_dot_u = ComplexField {
        grid: *sp.grid(),
        data: (0..sp.grid().len())
            .map(|i| (0..u.len()).map(|k| a[k].data[i] * u[k].data[i]).sum())
            .collect(),
    };
    let first: Vec<ScalarField> = u
        .iter()
        .map(|uk| {
            zip_scalar(uk, &div_u, |x, d| {
                let p = x.conj() * d;
                lambda * p.im - p.re
            })
        })
        .collect();
    let second: Vec<ScalarField> = u
        .iter()
        .map(|uk| {
            zip_scalar(uk, &a_dot_u, |x, d| {
                let p = x.conj() * d;
                lambda * p.re + p.im
            })
        })
        .collect();
    Ok(A0Decomposition {
        a0_1: sp.solve_poisson_div(&first)?,
        a0_2: sp.solve_poisson_div(&second)?,
    })
}

fn dealiased_complex(sp: &Spectral, data: Vec<Complex64>) -> ComplexField {
    let mut f = ComplexField {
        grid: *sp.grid(),
        data,
    };
    sp.dealias_complex(&mut f);
    f
}

fn dealiased_real(sp: &Spectral, data: Vec<f64>) -> ScalarField {
    let mut f = ScalarField {
        grid: *sp.grid(),
        data,
    };
    sp.dealias(&mut f);
    f
}

/// The three parts of the nonlinearity with every product dealiased:
/// `f1 = (λ−i) i Σ_k Im(u ū_k) u_k`, `f2 = (λ−i) 2i (a·∇)u − i a0_1 u`,
/// `f3 = −(λ−i)|a|² u − i a0_2 u`.
pub fn assemble_f(
    sp: &Spectral,
    u: &[ComplexField],
    a: &[ScalarField],
    a0: &A0Decomposition,
    lambda: f64,
) -> Result<NonlinearitySplit> {
    check_components(sp, u)?;
    let n = u.len();
    if a.len() != n {
        return Err(Error::InvalidArgument("a and u must have equal length".into()));
    }
    let len = sp.grid().len();
    let c = Complex64::new(lambda, -1.0);
    let grad_u: Vec<Vec<ComplexField>> = u
        .iter()
        .map(|ul| sp.gradient_complex(ul))
        .collect::<Result<_>>()?;
    // Im(u_ℓ ū_k) is antisymmetric, so only k > ℓ is computed
    let mut q: Vec<Vec<Option<ScalarField>>> = vec![vec![None; n]; n];
    for l in 0..n {
        for k in (l + 1)..n {
            let data = (0..len)
                .map(|i| (u[l].data[i] * u[k].data[i].conj()).im)
                .collect();
            q[l][k] = Some(dealiased_real(sp, data));
        }
    }
    let q_at = |l: usize, k: usize, i: usize| -> f64 {
        if l < k {
            q[l][k].as_ref().unwrap().data[i]
        } else if l > k {
            -q[k][l].as_ref().unwrap().data[i]
        } else {
            0.0
        }
    };
    let a_sq = dealiased_real(
        sp,
        (0..len).map(|i| a.iter().map(|ak| ak.data[i] * ak.data[i]).sum()).collect(),
    );
    let mut f1 = Vec::with_capacity(n);
    let mut f2 = Vec::with_capacity(n);
    let mut f3 = Vec::with_capacity(n);
    for l in 0..n {
        let cubic = dealiased_complex(
            sp,
            (0..len)
                .map(|i| (0..n).map(|k| q_at(l, k, i) * u[k].data[i]).sum())
                .collect(),
        );
        f1.push(cubic.scale(c * I));
        let transport = dealiased_complex(
            sp,
            (0..len)
                .map(|i| (0..n).map(|k| a[k].data[i] * grad_u[l][k].data[i]).sum())
                .collect(),
        );
        let p1 = dealiased_complex(
            sp,
            (0..len).map(|i| a0.a0_1.data[i] * u[l].data[i]).collect(),
        );
        f2.push(ComplexField {
            grid: *sp.grid(),
            data: (0..len)
                .map(|i| c * 2.0 * I * transport.data[i] - I * p1.data[i])
                .collect(),
        });
        let quintic = dealiased_complex(sp, (0..len).map(|i| a_sq.data[i] * u[l].data[i]).collect());
        let p2 = dealiased_complex(
            sp,
            (0..len).map(|i| a0.a0_2.data[i] * u[l].data[i]).collect(),
        );
        f3.push(ComplexField {
            grid: *sp.grid(),
            data: (0..len)
                .map(|i| -c * quintic.data[i] - I * p2.data[i])
                .collect(),
        });
    }
    Ok(NonlinearitySplit { f1, f2, f3 })
}

/// `F(a(u), u)` with the connection and its time component rebuilt from `u`.
pub fn nonlinearity(sp: &Spectral, u: &[ComplexField], lambda: f64) -> Result<NonlinearitySplit> {
    let a = connection_from_u(sp, u)?;
    let a0 = a0_decompose(sp, u, &a, lambda)?;
    assemble_f(sp, u, &a, &a0, lambda)
}

/// Strictly increasing sample times starting at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeMesh {
    times: Vec<f64>,
}

impl TimeMesh {
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times[0] != 0.0 {
            return Err(Error::InvalidArgument(
                "time mesh needs at least two points starting at 0".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidArgument("time mesh must increase strictly".into()));
        }
        Ok(Self { times })
    }

    pub fn uniform(t_end: f64, intervals: usize) -> Result<Self> {
        if !(t_end > 0.0) || intervals == 0 {
            return Err(Error::InvalidArgument("need t_end > 0 and intervals >= 1".into()));
        }
        Self::from_times((0..=intervals).map(|j| t_end * j as f64 / intervals as f64).collect())
    }

    /// Spacing `h` on `[t_end/10, t_end]` and `h/2` on `[0, t_end/10]`.
    pub fn graded(t_end: f64, spacing: f64) -> Result<Self> {
        if !(t_end > 0.0 && spacing > 0.0 && spacing <= t_end) {
            return Err(Error::InvalidArgument("need 0 < spacing <= t_end".into()));
        }
        let split = 0.1 * t_end;
        let fine = ((split / (0.5 * spacing)).round() as usize).max(1);
        let coarse = (((t_end - split) / spacing).round() as usize).max(1);
        let mut times: Vec<f64> = (0..=fine).map(|j| split * j as f64 / fine as f64).collect();
        times.extend((1..=coarse).map(|j| split + (t_end - split) * j as f64 / coarse as f64));
        Self::from_times(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }
}

type Hats = Vec<Vec<Complex64>>;

fn hats_of(sp: &Spectral, f: &[ComplexField]) -> Hats {
    f.iter().map(|c| sp.spectrum(c)).collect()
}

fn fields_of(sp: &Spectral, h: Hats) -> Vec<ComplexField> {
    h.into_iter().map(|c| sp.complex_from_spectrum(c)).collect()
}

fn mu(sp: &Spectral, mode: usize, lambda: f64) -> Complex64 {
    Complex64::new(-lambda, 1.0) * sp.wavenumber_sq(mode)
}

/// Weights `(A, B)` with `∫_0^Δ e^{μ(Δ−s)} f(s) ds ≈ A f(0) + B f(Δ)` by the
/// trapezoid rule on `refine` subintervals, `f` linear in between.
fn interval_weights(z: Complex64, dt: f64, refine: usize) -> (Complex64, Complex64) {
    let h = dt / refine as f64;
    let mut a = ZERO;
    let mut b = ZERO;
    for r in 0..=refine {
        let w = if r == 0 || r == refine { 0.5 * h } else { h };
        let theta = r as f64 / refine as f64;
        let kernel = (z * (dt - r as f64 * h)).exp() * w;
        a += kernel * (1.0 - theta);
        b += kernel * theta;
    }
    (a, b)
}

/// Streams `∫_0^{t_j} S(t_j − s) f(s) ds` along the mesh one sample at a time.
struct DuhamelStream<'a> {
    sp: &'a Spectral,
    lambda: f64,
    components: usize,
    /// composite trapezoid up to the previous mesh time
    p: Hats,
    prev_f: Option<Hats>,
    prev_t: f64,
}

impl<'a> DuhamelStream<'a> {
    fn new(sp: &'a Spectral, lambda: f64, components: usize) -> Self {
        let len = sp.grid().len();
        Self {
            sp,
            lambda,
            components,
            p: vec![vec![ZERO; len]; components],
            prev_f: None,
            prev_t: 0.0,
        }
    }

    /// Feeds `f(t)` and returns the convolution at `t`.
    fn push(&mut self, t: f64, f: &[ComplexField]) -> Vec<ComplexField> {
        let fh = hats_of(self.sp, f);
        let len = self.sp.grid().len();
        let Some(prev) = self.prev_f.take() else {
            self.prev_f = Some(fh);
            self.prev_t = t;
            return fields_of(self.sp, vec![vec![ZERO; len]; self.components]);
        };
        let dt = t - self.prev_t;
        let mut out = vec![vec![ZERO; len]; self.components];
        for mode in 0..len {
            let z = mu(self.sp, mode, self.lambda);
            let e = (z * dt).exp();
            let (ra, rb) = interval_weights(z, dt, ENDPOINT_REFINEMENT);
            let (pa, pb) = (0.5 * dt * e, Complex64::new(0.5 * dt, 0.0));
            for c in 0..self.components {
                let carried = e * self.p[c][mode];
                out[c][mode] = carried + ra * prev[c][mode] + rb * fh[c][mode];
                self.p[c][mode] = carried + pa * prev[c][mode] + pb * fh[c][mode];
            }
        }
        self.prev_f = Some(fh);
        self.prev_t = t;
        fields_of(self.sp, out)
    }
}

fn check_forcing(forcing: &[Vec<ComplexField>], mesh: &TimeMesh, needed: usize) -> Result<usize> {
    if forcing.len() < needed || mesh.len() < needed {
        return Err(Error::TooFewSnapshots {
            needed,
            have: forcing.len().min(mesh.len()),
        });
    }
    let components = forcing[0].len();
    if components == 0 || forcing.iter().any(|f| f.len() != components) {
        return Err(Error::InvalidArgument(
            "forcing samples must share a non-zero component count".into(),
        ));
    }
    Ok(components)
}

/// `(S ∗ f)(t_j) = ∫_0^{t_j} S(t_j − s) f(s) ds` from samples of `f` on the mesh:
/// composite trapezoid with the last interval refined near `s = t_j`.
pub fn duhamel_convolve(
    sp: &Spectral,
    forcing: &[Vec<ComplexField>],
    mesh: &TimeMesh,
    j: usize,
    lambda: f64,
) -> Result<Vec<ComplexField>> {
    crate::spectral::check_semigroup_args(0.0, lambda)?;
    let components = check_forcing(forcing, mesh, j + 1)?;
    let len = sp.grid().len();
    let mut acc: Hats = vec![vec![ZERO; len]; components];
    if j == 0 {
        return Ok(fields_of(sp, acc));
    }
    let t = mesh.times()[j];
    let hats: Vec<Hats> = forcing[..=j].iter().map(|f| hats_of(sp, f)).collect();
    for i in 1..=j {
        let (s0, s1) = (mesh.times()[i - 1], mesh.times()[i]);
        let dt = s1 - s0;
        for mode in 0..len {
            let z = mu(sp, mode, lambda);
            let (wa, wb) = if i == j {
                interval_weights(z, dt, ENDPOINT_REFINEMENT)
            } else {
                (
                    0.5 * dt * (z * (t - s0)).exp(),
                    0.5 * dt * (z * (t - s1)).exp(),
                )
            };
            for c in 0..components {
                acc[c][mode] += wa * hats[i - 1][c][mode] + wb * hats[i][c][mode];
            }
        }
    }
    Ok(fields_of(sp, acc))
}

/// [`duhamel_convolve`] at every mesh time in one pass.
pub fn duhamel_trajectory(
    sp: &Spectral,
    forcing: &[Vec<ComplexField>],
    mesh: &TimeMesh,
    lambda: f64,
) -> Result<Vec<Vec<ComplexField>>> {
    crate::spectral::check_semigroup_args(0.0, lambda)?;
    let components = check_forcing(forcing, mesh, mesh.len())?;
    let mut stream = DuhamelStream::new(sp, lambda, components);
    Ok(mesh
        .times()
        .iter()
        .zip(forcing)
        .map(|(&t, f)| stream.push(t, f))
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PicardConfig {
    pub lambda: f64,
    pub max_iter: usize,
    /// stop once `sup_t ‖u⁽ᵐ⁺¹⁾ − u⁽ᵐ⁾‖_{Lⁿ}` falls below this
    pub tol: f64,
    /// reject `‖u0‖_{Lⁿ}` above this; `None` disables the check
    pub smallness_gate: Option<f64>,
}

impl PicardConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            max_iter: 50,
            tol: 1e-12,
            smallness_gate: Some(DEFAULT_SMALLNESS_GATE),
        }
    }
}

/// One row of the iterate history.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicardIterate {
    pub iter: usize,
    pub sup_diff: f64,
    /// `sup_diff` over the previous one
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PicardSolution {
    pub mesh: TimeMesh,
    /// `u` at each mesh time, one field per spatial axis
    pub u: Vec<Vec<ComplexField>>,
    pub history: Vec<PicardIterate>,
}

impl PicardSolution {
    /// Largest successive-difference ratio among iterates still above the
    /// rounding floor; 0 when fewer than two such iterates exist.
    pub fn contraction_ratio(&self) -> f64 {
        let scale = self
            .u
            .iter()
            .flat_map(|s| s.iter().map(|c| c.max_abs()))
            .fold(0.0, f64::max);
        let floor = 1e3 * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
        self.history
            .iter()
            .filter(|h| h.sup_diff > floor)
            .filter_map(|h| h.ratio)
            .fold(0.0, f64::max)
    }
}

/// Mild solution `u(t) = S(t)u0 + (S ∗ F(a(u), u))(t)` on the mesh by Picard
/// iteration from `u⁽⁰⁾(t) = S(t)u0`.
pub fn picard_solve(
    sp: &Spectral,
    u0: &[ComplexField],
    mesh: &TimeMesh,
    cfg: &PicardConfig,
) -> Result<PicardSolution> {
    check_components(sp, u0)?;
    crate::spectral::check_semigroup_args(0.0, cfg.lambda)?;
    if cfg.max_iter == 0 || !(cfg.tol > 0.0) {
        return Err(Error::InvalidArgument("need max_iter >= 1 and tol > 0".into()));
    }
    let n = sp.grid().dimension() as f64;
    if let Some(gate) = cfg.smallness_gate {
        let norm = lp_norm_complex_components(u0, n)?;
        if norm > gate {
            return Err(Error::SmallnessGate { norm, gate });
        }
    }
    let u0_hat = hats_of(sp, u0);
    let linear = |t: f64| -> Vec<ComplexField> {
        let mut h = u0_hat.clone();
        for c in h.iter_mut() {
            sp.semigroup_apply_hat(c, t, cfg.lambda);
        }
        fields_of(sp, h)
    };
    let mut u: Vec<Vec<ComplexField>> = mesh.times().iter().map(|&t| linear(t)).collect();
    let mut history: Vec<PicardIterate> = Vec::new();
    let mut growth = 0usize;
    for iter in 1..=cfg.max_iter {
        let mut stream = DuhamelStream::new(sp, cfg.lambda, u0.len());
        let mut sup_diff = 0.0f64;
        for (j, &t) in mesh.times().iter().enumerate() {
            let f = match nonlinearity(sp, &u[j], cfg.lambda) {
                Err(Error::NonFinite { .. }) => return Err(Error::NoContraction { iter }),
                other => other?.total(),
            };
            let conv = stream.push(t, &f);
            let next: Vec<ComplexField> = linear(t)
                .into_iter()
                .zip(conv)
                .map(|(l, c)| ComplexField {
                    grid: l.grid,
                    data: l.data.iter().zip(&c.data).map(|(&x, &y)| x + y).collect(),
                })
                .collect();
            let diff: Vec<ComplexField> = next.iter().zip(&u[j]).map(|(a, b)| a.sub(b)).collect();
            sup_diff = match lp_norm_complex_components(&diff, n) {
                Err(Error::NonFinite { .. }) => return Err(Error::NoContraction { iter }),
                other => sup_diff.max(other?),
            };
            u[j] = next;
        }
        if !sup_diff.is_finite() {
            return Err(Error::NoContraction { iter });
        }
        let prev = history.last().map(|h| h.sup_diff);
        history.push(PicardIterate {
            iter,
            sup_diff,
            ratio: prev.map(|p| if p > 0.0 { sup_diff / p } else { 0.0 }),
        });
        if sup_diff < cfg.tol {
            return Ok(PicardSolution {
                mesh: mesh.clone(),
                u,
                history,
            });
        }
        if prev.is_some_and(|p| sup_diff > p) {
            growth += 1;
            if growth >= 3 {
                return Err(Error::NoContraction { iter });
            }
        } else {
            growth = 0;
        }
    }
    Err(Error::MaxIterExceeded {
        max_iter: cfg.max_iter,
        last_diff: history.last().map_or(f64::NAN, |h| h.sup_diff),
    })
}

/// Ratios of the nonlinear estimates at one time, each left side over its right side.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct BoundsReport {
    pub delta: f64,
    /// `‖f1‖_{n/3δ} / ‖u‖³_{n/δ}`
    pub f1: f64,
    /// `‖f2‖_{n/2δ} / (‖u‖²_{n/δ} ‖∇u‖_n)`
    pub f2: f64,
    /// `‖f3‖_{n/(5δ−2)} / ‖u‖⁵_{n/δ}`
    pub f3: f64,
    /// `‖a‖_{n/(2δ−1)} / ‖u‖²_{n/δ}`
    pub a: f64,
    /// `‖a0_1‖_{n/δ} / (‖u‖_{n/δ} ‖∇u‖_n)`
    pub a0_1: f64,
}

impl BoundsReport {
    /// Componentwise maximum, for running constants over an ensemble.
    pub fn max(self, other: BoundsReport) -> BoundsReport {
        BoundsReport {
            delta: self.delta,
            f1: self.f1.max(other.f1),
            f2: self.f2.max(other.f2),
            f3: self.f3.max(other.f3),
            a: self.a.max(other.a),
            a0_1: self.a0_1.max(other.a0_1),
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Lᵖ norm of `‖∇u‖`, the pointwise length over all components and axes.
pub fn grad_u_norm(sp: &Spectral, u: &[ComplexField], p: f64) -> Result<f64> {
    let mut parts = Vec::with_capacity(u.len() * u.len());
    for c in u {
        parts.extend(sp.gradient_complex(c)?);
    }
    lp_norm_complex_components(&parts, p)
}

/// Evaluates the nonlinear estimates for `u` with `a`, `a₀` rebuilt from `u`.
pub fn verify_nonlinear_bounds(
    sp: &Spectral,
    u: &[ComplexField],
    lambda: f64,
    delta: f64,
) -> Result<BoundsReport> {
    if !(delta > 0.6 && delta < 2.0 / 3.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (3/5, 2/3) (got {delta})"
        )));
    }
    check_components(sp, u)?;
    let n = u.len() as f64;
    if n < 2.0 {
        return Err(Error::InvalidArgument(
            "the estimates need dimension 2 or 3".into(),
        ));
    }
    let a = connection_from_u(sp, u)?;
    let a0 = a0_decompose(sp, u, &a, lambda)?;
    let split = assemble_f(sp, u, &a, &a0, lambda)?;
    let u_nd = lp_norm_complex_components(u, n / delta)?;
    let grad_n = grad_u_norm(sp, u, n)?;
    let a_mag = crate::field::components_magnitude(&a);
    Ok(BoundsReport {
        delta,
        f1: ratio(lp_norm_complex_components(&split.f1, n / (3.0 * delta))?, u_nd.powi(3)),
        f2: ratio(
            lp_norm_complex_components(&split.f2, n / (2.0 * delta))?,
            u_nd * u_nd * grad_n,
        ),
        f3: ratio(
            lp_norm_complex_components(&split.f3, n / (5.0 * delta - 2.0))?,
            u_nd.powi(5),
        ),
        a: ratio(lp_norm(&a_mag, n / (2.0 * delta - 1.0))?, u_nd * u_nd),
        a0_1: ratio(lp_norm(&a0.a0_1, n / delta)?, u_nd * grad_n),
    })
}

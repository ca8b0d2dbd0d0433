//! Fourier-side operators on the periodic grid.
//!
//! Forward transforms are unnormalized and inverse transforms carry the
//! `1/N^n` factor. First derivatives use the wavenumber `2 pi j / L` with the
//! Nyquist entry set to zero, so odd derivatives of real fields stay real. The
//! Laplacian is `div . grad` with the same wavenumbers, which makes the
//! divergence-form Poisson solve exact mode by mode. The semigroup and the
//! Sobolev weights use the true `|k|^2`, Nyquist included.

use crate::error::{Error, Result};
use crate::field::{ComplexField, ScalarField};
use crate::grid::GridSpec;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Transform plans and cached wavenumbers for one grid.
///
/// Plans are `Arc<dyn Fft>` and therefore shareable across threads; scratch
/// buffers are allocated per call.
#[derive(Clone)]
pub struct Spectral {
    grid: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// true wavenumber per 1-D index
    k: Vec<f64>,
    /// derivative wavenumber per 1-D index (Nyquist zeroed)
    kd: Vec<f64>,
    /// 2/3-rule mask per 1-D index
    keep: Vec<bool>,
    /// true |k|^2 per mode
    k2: Vec<f64>,
    /// |k_d|^2 per mode
    kd2: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: GridSpec) -> Self {
        let n = grid.points_per_axis();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let base = 2.0 * PI / grid.box_length();
        let k: Vec<f64> = (0..n).map(|j| base * grid.frequency(j) as f64).collect();
        let kd: Vec<f64> = (0..n)
            .map(|j| if j == n / 2 { 0.0 } else { k[j] })
            .collect();
        let keep = (0..n)
            .map(|j| 3 * grid.frequency(j).unsigned_abs() as usize <= n)
            .collect();
        let mut k2 = vec![0.0; grid.len()];
        let mut kd2 = vec![0.0; grid.len()];
        for mode in 0..grid.len() {
            let idx = grid.multi_index(mode);
            for axis in 0..grid.dimension() {
                k2[mode] += k[idx[axis]] * k[idx[axis]];
                kd2[mode] += kd[idx[axis]] * kd[idx[axis]];
            }
        }
        Self {
            grid,
            forward,
            inverse,
            k,
            kd,
            keep,
            k2,
            kd2,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if grid != &self.grid {
            return Err(Error::GridMismatch(format!(
                "field grid {grid:?} does not match workspace grid {:?}",
                self.grid
            )));
        }
        Ok(())
    }

    fn axis_index(&self, mode: usize, axis: usize) -> usize {
        let n = self.grid.points_per_axis();
        let stride = n.pow((self.grid.dimension() - 1 - axis) as u32);
        (mode / stride) % n
    }

    /// True `|k|^2` of a flat mode index.
    pub fn wavenumber_sq(&self, mode: usize) -> f64 {
        self.k2[mode]
    }

    /// True wavenumber component of a flat mode index.
    pub fn wavenumber(&self, mode: usize, axis: usize) -> f64 {
        self.k[self.axis_index(mode, axis)]
    }

    /// Wavenumber used by first derivatives (Nyquist zeroed).
    pub fn derivative_wavenumber(&self, mode: usize, axis: usize) -> f64 {
        self.kd[self.axis_index(mode, axis)]
    }

    /// Whether a mode survives the 2/3-rule truncation.
    pub fn is_resolved(&self, mode: usize) -> bool {
        (0..self.grid.dimension()).all(|axis| self.keep[self.axis_index(mode, axis)])
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.points_per_axis();
        let dim = self.grid.dimension();
        let total = data.len();
        let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
        let mut lines: Vec<Complex64> = Vec::new();
        for axis in 0..dim {
            let stride = n.pow((dim - 1 - axis) as u32);
            if stride == 1 {
                fft.process_with_scratch(data, &mut scratch);
                continue;
            }
            if lines.is_empty() {
                lines = vec![ZERO; total];
            }
            let outer = total / (n * stride);
            for o in 0..outer {
                for j in 0..n {
                    let src = &data[o * n * stride + j * stride..][..stride];
                    for (s, v) in src.iter().enumerate() {
                        lines[(o * stride + s) * n + j] = *v;
                    }
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            for o in 0..outer {
                for j in 0..n {
                    let dst = &mut data[o * n * stride + j * stride..][..stride];
                    for (s, v) in dst.iter_mut().enumerate() {
                        *v = lines[(o * stride + s) * n + j];
                    }
                }
            }
        }
    }

    /// In-place unnormalized forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// In-place inverse transform including the `1/N^n` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let norm = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= norm;
        }
    }

    pub fn spectrum_real(&self, f: &ScalarField) -> Vec<Complex64> {
        let mut hat: Vec<Complex64> = f.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut hat);
        hat
    }

    pub fn spectrum(&self, f: &ComplexField) -> Vec<Complex64> {
        let mut hat = f.data.clone();
        self.forward(&mut hat);
        hat
    }

    /// Inverse transform keeping the real part.
    pub fn real_from_spectrum(&self, mut hat: Vec<Complex64>) -> ScalarField {
        self.inverse(&mut hat);
        ScalarField {
            grid: self.grid,
            data: hat.into_iter().map(|v| v.re).collect(),
        }
    }

    pub fn complex_from_spectrum(&self, mut hat: Vec<Complex64>) -> ComplexField {
        self.inverse(&mut hat);
        ComplexField {
            grid: self.grid,
            data: hat,
        }
    }

    /// `i k_d[axis]` applied to a spectrum.
    fn partial_hat(&self, hat: &[Complex64], axis: usize) -> Vec<Complex64> {
        hat.iter()
            .enumerate()
            .map(|(mode, &v)| I * self.derivative_wavenumber(mode, axis) * v)
            .collect()
    }

    /// Spectral partial derivative of a real field along `axis`.
    pub fn partial(&self, f: &ScalarField, axis: usize) -> Result<ScalarField> {
        self.check_grid(&f.grid)?;
        f.check_finite()?;
        let hat = self.spectrum_real(f);
        Ok(self.real_from_spectrum(self.partial_hat(&hat, axis)))
    }

    /// Spectral gradient; one component per spatial axis.
    pub fn gradient(&self, f: &ScalarField) -> Result<Vec<ScalarField>> {
        self.check_grid(&f.grid)?;
        f.check_finite()?;
        let hat = self.spectrum_real(f);
        Ok(self.gradient_from_spectrum_real(&hat))
    }

    pub(crate) fn gradient_from_spectrum_real(&self, hat: &[Complex64]) -> Vec<ScalarField> {
        (0..self.grid.dimension())
            .map(|axis| self.real_from_spectrum(self.partial_hat(hat, axis)))
            .collect()
    }

    pub fn partial_complex(&self, f: &ComplexField, axis: usize) -> Result<ComplexField> {
        self.check_grid(&f.grid)?;
        f.check_finite()?;
        let hat = self.spectrum(f);
        Ok(self.complex_from_spectrum(self.partial_hat(&hat, axis)))
    }

    pub fn gradient_complex(&self, f: &ComplexField) -> Result<Vec<ComplexField>> {
        self.check_grid(&f.grid)?;
        f.check_finite()?;
        let hat = self.spectrum(f);
        Ok((0..self.grid.dimension())
            .map(|axis| self.complex_from_spectrum(self.partial_hat(&hat, axis)))
            .collect())
    }

    pub fn laplacian(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check_grid(&f.grid)?;
        f.check_finite()?;
        let mut hat = self.spectrum_real(f);
        self.apply_laplacian_hat(&mut hat);
        Ok(self.real_from_spectrum(hat))
    }

    pub fn laplacian_complex(&self, f: &ComplexField) -> Result<ComplexField> {
        self.check_grid(&f.grid)?;
        f.check_finite()?;
        let mut hat = self.spectrum(f);
        self.apply_laplacian_hat(&mut hat);
        Ok(self.complex_from_spectrum(hat))
    }

    pub(crate) fn apply_laplacian_hat(&self, hat: &mut [Complex64]) {
        for (v, &kd2) in hat.iter_mut().zip(&self.kd2) {
            *v *= -kd2;
        }
    }

    pub fn divergence(&self, f: &[ScalarField]) -> Result<ScalarField> {
        let hat = self.divergence_hat(f)?;
        Ok(self.real_from_spectrum(hat))
    }

    fn divergence_hat(&self, f: &[ScalarField]) -> Result<Vec<Complex64>> {
        if f.len() != self.grid.dimension() {
            return Err(Error::InvalidArgument(format!(
                "divergence needs {} components, got {}",
                self.grid.dimension(),
                f.len()
            )));
        }
        let mut acc = vec![ZERO; self.grid.len()];
        for (axis, comp) in f.iter().enumerate() {
            self.check_grid(&comp.grid)?;
            comp.check_finite()?;
            let hat = self.spectrum_real(comp);
            for (mode, (a, v)) in acc.iter_mut().zip(hat).enumerate() {
                *a += I * self.derivative_wavenumber(mode, axis) * v;
            }
        }
        Ok(acc)
    }

    /// Mean-zero solution `v` of `-Δv = div f`.
    pub fn solve_poisson_div(&self, f: &[ScalarField]) -> Result<ScalarField> {
        let mut hat = self.divergence_hat(f)?;
        for (v, &kd2) in hat.iter_mut().zip(&self.kd2) {
            *v = if kd2 > 0.0 { *v / kd2 } else { ZERO };
        }
        Ok(self.real_from_spectrum(hat))
    }

    /// Fourier multiplier `exp((i - λ)|k|^2 t)` of the dissipative Schrödinger semigroup.
    pub fn semigroup_multiplier(&self, mode: usize, t: f64, lambda: f64) -> Complex64 {
        (Complex64::new(-lambda, 1.0) * (self.k2[mode] * t)).exp()
    }

    /// `S(t) f` with `S(t) = exp((λ - i) t Δ)`.
    pub fn semigroup_apply(&self, f: &ComplexField, t: f64, lambda: f64) -> Result<ComplexField> {
        check_semigroup_args(t, lambda)?;
        self.check_grid(&f.grid)?;
        f.check_finite()?;
        let mut hat = self.spectrum(f);
        self.semigroup_apply_hat(&mut hat, t, lambda);
        Ok(self.complex_from_spectrum(hat))
    }

    pub(crate) fn semigroup_apply_hat(&self, hat: &mut [Complex64], t: f64, lambda: f64) {
        for (mode, v) in hat.iter_mut().enumerate() {
            *v *= self.semigroup_multiplier(mode, t, lambda);
        }
    }

    pub(crate) fn dealias_hat(&self, hat: &mut [Complex64]) {
        for (mode, v) in hat.iter_mut().enumerate() {
            if !self.is_resolved(mode) {
                *v = ZERO;
            }
        }
    }

    /// 2/3-rule truncation of a real field.
    pub fn dealias(&self, f: &mut ScalarField) {
        let mut hat = self.spectrum_real(f);
        self.dealias_hat(&mut hat);
        *f = self.real_from_spectrum(hat);
    }

    pub fn dealias_complex(&self, f: &mut ComplexField) {
        let mut hat = self.spectrum(f);
        self.dealias_hat(&mut hat);
        *f = self.complex_from_spectrum(hat);
    }

    /// `(sum (1+|k|^2)^σ |f̂|^2)^{1/2}` normalized so that `σ = 0` is the L² norm.
    pub fn sobolev_norm(&self, f: &ScalarField, sigma: u32) -> Result<f64> {
        self.check_grid(&f.grid)?;
        f.check_finite()?;
        Ok(self.sobolev_sq_hat(&self.spectrum_real(f), sigma).sqrt())
    }

    pub fn sobolev_norm_complex(&self, f: &ComplexField, sigma: u32) -> Result<f64> {
        self.check_grid(&f.grid)?;
        f.check_finite()?;
        Ok(self.sobolev_sq_hat(&self.spectrum(f), sigma).sqrt())
    }

    /// Sobolev norm of a field with several real components (sum of squares).
    pub fn sobolev_norm_components(&self, f: &[ScalarField], sigma: u32) -> Result<f64> {
        let mut acc = 0.0;
        for comp in f {
            self.check_grid(&comp.grid)?;
            comp.check_finite()?;
            acc += self.sobolev_sq_hat(&self.spectrum_real(comp), sigma);
        }
        Ok(acc.sqrt())
    }

    fn sobolev_sq_hat(&self, hat: &[Complex64], sigma: u32) -> f64 {
        let weight = self.grid.cell_volume() / self.grid.len() as f64;
        hat.iter()
            .zip(&self.k2)
            .map(|(v, &k2)| (1.0 + k2).powi(sigma as i32) * v.norm_sqr())
            .sum::<f64>()
            * weight
    }
}

pub(crate) fn check_semigroup_args(t: f64, lambda: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "semigroup time must be >= 0 (got {t})"
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "damping must be > 0 (got {lambda})"
        )));
    }
    Ok(())
}

/// Lebesgue norm `(sum |f|^p h^n)^{1/p}` of pointwise magnitudes; `p = ∞` gives the max.
pub fn lp_norm_values(grid: &GridSpec, magnitudes: &[f64], p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidArgument(format!("p must be >= 1 (got {p})")));
    }
    if let Some(index) = magnitudes.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let max = magnitudes.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if p.is_infinite() || max == 0.0 {
        return Ok(max);
    }
    // scaled by the max to keep large p from overflowing
    let sum: f64 = magnitudes.iter().map(|v| (v.abs() / max).powf(p)).sum();
    Ok(max * (sum * grid.cell_volume()).powf(1.0 / p))
}

pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    lp_norm_values(&f.grid, &f.data, p)
}

pub fn lp_norm_complex(f: &ComplexField, p: f64) -> Result<f64> {
    let mags: Vec<f64> = f.data.iter().map(|v| v.norm()).collect();
    lp_norm_values(&f.grid, &mags, p)
}

/// Lᵖ norm of the pointwise length of a complex vector field.
pub fn lp_norm_complex_components(f: &[ComplexField], p: f64) -> Result<f64> {
    let mag = crate::field::complex_components_magnitude(f);
    lp_norm(&mag, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::band_limited;

    fn grid(n: usize, pts: usize, l: f64) -> GridSpec {
        GridSpec::new(n, pts, l).unwrap()
    }

    #[test]
    fn round_trip_is_identity() {
        for (n, pts) in [(1, 16), (2, 16), (3, 8), (3, 12)] {
            let g = grid(n, pts, 3.0);
            let sp = Spectral::new(g);
            let f = band_limited(g, 3, 7).map(|v| v + 0.3);
            let back = sp.real_from_spectrum(sp.spectrum_real(&f));
            let scale = f.max_abs();
            for (a, b) in f.data.iter().zip(&back.data) {
                assert!((a - b).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn forward_matches_direct_dft() {
        let g = grid(2, 8, 1.0);
        let sp = Spectral::new(g);
        let f = band_limited(g, 3, 11);
        let hat = sp.spectrum_real(&f);
        let n = 8;
        for mode in [0usize, 1, 9, 27, 63] {
            let [p, q, _] = g.multi_index(mode);
            let mut direct = ZERO;
            for i in 0..g.len() {
                let [a, b, _] = g.multi_index(i);
                let arg = -2.0 * PI * ((p * a + q * b) as f64) / n as f64;
                direct += f.data[i] * Complex64::from_polar(1.0, arg);
            }
            assert!((direct - hat[mode]).norm() < 1e-10);
        }
    }

    #[test]
    fn derivative_of_constant_and_sine() {
        let g = grid(2, 16, 2.5);
        let sp = Spectral::new(g);
        let zero = sp.gradient(&ScalarField::constant(g, 4.0)).unwrap();
        assert!(zero.iter().all(|c| c.max_abs() < 1e-12));
        let w = 2.0 * PI / 2.5;
        let f = ScalarField::from_fn(g, |x| (w * x[0]).sin());
        let grad = sp.gradient(&f).unwrap();
        for i in 0..g.len() {
            let x = g.coords(i);
            assert!((grad[0].data[i] - w * (w * x[0]).cos()).abs() < 1e-12);
            assert!(grad[1].data[i].abs() < 1e-12);
        }
        let lap = sp.laplacian(&f).unwrap();
        for i in 0..g.len() {
            assert!((lap.data[i] + w * w * f.data[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn gradient_matches_fourth_order_differences() {
        // O(h^4) stencil error: refine and watch it drop by ~16
        let mut errs = Vec::new();
        for pts in [32, 64] {
            let g = grid(1, pts, 2.0 * PI);
            let sp = Spectral::new(g);
            let f = band_limited(g, 3, 3);
            let h = g.spacing();
            let d = sp.gradient(&f).unwrap().remove(0);
            let at = |i: isize| f.data[i.rem_euclid(pts as isize) as usize];
            let mut err: f64 = 0.0;
            for i in 0..pts as isize {
                let fd = (-at(i + 2) + 8.0 * at(i + 1) - 8.0 * at(i - 1) + at(i - 2)) / (12.0 * h);
                err = err.max((fd - d.data[i as usize]).abs());
            }
            errs.push(err);
        }
        assert!(errs[0] / errs[1] > 12.0, "{errs:?}");
    }

    #[test]
    fn laplacian_is_div_grad() {
        let g = grid(3, 16, 2.0);
        let sp = Spectral::new(g);
        let f = band_limited(g, 4, 5);
        let lap = sp.laplacian(&f).unwrap();
        let dg = sp.divergence(&sp.gradient(&f).unwrap()).unwrap();
        let scale = lap.max_abs();
        for (a, b) in lap.data.iter().zip(&dg.data) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn antiderivative_then_gradient() {
        // F = -cos(k x)/k is an antiderivative of sin(k x) with zero mean
        let g = grid(2, 16, 2.0 * PI);
        let sp = Spectral::new(g);
        let f = ScalarField::from_fn(g, |x| (2.0 * x[0]).sin() + 0.5 * (3.0 * x[0]).cos());
        let anti = ScalarField::from_fn(g, |x| -(2.0 * x[0]).cos() / 2.0 + 0.5 * (3.0 * x[0]).sin() / 3.0);
        let d = sp.partial(&anti, 0).unwrap();
        for (a, b) in d.data.iter().zip(&f.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_div_cases() {
        let g = grid(2, 16, 3.0);
        let sp = Spectral::new(g);
        let gfun = band_limited(g, 3, 9).map(|v| v + 2.0);
        let v = sp.solve_poisson_div(&sp.gradient(&gfun).unwrap()).unwrap();
        // -Δv = div grad g = Δg, so v = -(g - mean g)
        let mean = gfun.mean();
        for (a, b) in v.data.iter().zip(&gfun.data) {
            assert!((a + (b - mean)).abs() < 1e-11);
        }
        let c = vec![ScalarField::constant(g, 1.5), ScalarField::constant(g, -2.0)];
        assert!(sp.solve_poisson_div(&c).unwrap().max_abs() < 1e-14);

        let f = vec![band_limited(g, 5, 1), band_limited(g, 5, 2)];
        let v = sp.solve_poisson_div(&f).unwrap();
        assert!(v.mean().abs() < 1e-14);
        let lap = sp.laplacian(&v).unwrap();
        let div = sp.divergence(&f).unwrap();
        let scale = f.iter().map(|c| c.max_abs()).fold(0.0, f64::max);
        for (a, b) in lap.data.iter().zip(&div.data) {
            assert!((-a - b).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn semigroup_identity_and_single_mode() {
        let g = grid(2, 16, 2.0 * PI);
        let sp = Spectral::new(g);
        let f = band_limited(g, 3, 4).to_complex();
        let same = sp.semigroup_apply(&f, 0.0, 0.7).unwrap();
        for (a, b) in same.data.iter().zip(&f.data) {
            assert!((a - b).norm() < 1e-13);
        }
        assert!(sp.semigroup_apply(&f, -0.1, 0.7).is_err());
        assert!(sp.semigroup_apply(&f, 0.1, 0.0).is_err());

        let (kx, ky) = (2.0, -1.0);
        let wave = ComplexField::from_fn(g, |x| Complex64::from_polar(1.0, kx * x[0] + ky * x[1]));
        let (t, lambda) = (0.3, 0.8);
        let out = sp.semigroup_apply(&wave, t, lambda).unwrap();
        let mult = (Complex64::new(-lambda, 1.0) * (kx * kx + ky * ky) * t).exp();
        for (a, b) in out.data.iter().zip(&wave.data) {
            assert!((a - mult * b).norm() < 1e-12);
        }
    }

    #[test]
    fn semigroup_matches_kernel_quadrature() {
        // 1-D periodized Gaussian; oracle convolves with the periodized kernel
        // S_t(x) = (4π(λ-i)t)^{-1/2} exp(-x²/(4(λ-i)t)) by dense quadrature
        let l = 2.0 * PI;
        let g = grid(1, 64, l);
        let sp = Spectral::new(g);
        let width: f64 = 0.5;
        let gauss = |x: f64| {
            (-3..=3)
                .map(|w| {
                    let d = x - PI - w as f64 * l;
                    (-d * d / (2.0 * width * width)).exp()
                })
                .sum::<f64>()
        };
        let f = ComplexField::from_fn(g, |x| Complex64::new(gauss(x[0]), 0.0));
        let (t, lambda) = (0.2, 1.0);
        let out = sp.semigroup_apply(&f, t, lambda).unwrap();

        let z = Complex64::new(lambda, -1.0) * t;
        let pref = (Complex64::new(4.0 * PI, 0.0) * z).sqrt().inv();
        let kernel = |y: f64| {
            (-4..=4)
                .map(|w| {
                    let d = y + w as f64 * l;
                    pref * (-(d * d) / (z * 4.0)).exp()
                })
                .sum::<Complex64>()
        };
        let m = 4000;
        let dy = l / m as f64;
        for &i in &[0usize, 10, 32, 50] {
            let x = g.coords(i)[0];
            let mut acc = ZERO;
            for q in 0..m {
                let y = q as f64 * dy;
                acc += kernel(x - y) * gauss(y) * dy;
            }
            assert!((acc - out.data[i]).norm() < 1e-8, "{} vs {}", acc, out.data[i]);
        }
    }

    #[test]
    fn semigroup_property_and_contraction() {
        let g = grid(2, 16, 2.0);
        let sp = Spectral::new(g);
        let f = band_limited(g, 4, 8).to_complex();
        let lambda = 0.5;
        let a = sp
            .semigroup_apply(&sp.semigroup_apply(&f, 0.01, lambda).unwrap(), 0.02, lambda)
            .unwrap();
        let b = sp.semigroup_apply(&f, 0.03, lambda).unwrap();
        let scale = f.max_abs();
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).norm() <= 1e-12 * scale);
        }
        let mut last = lp_norm_complex(&f, 2.0).unwrap();
        for step in 1..5 {
            let n2 = lp_norm_complex(&sp.semigroup_apply(&f, 0.005 * step as f64, lambda).unwrap(), 2.0)
                .unwrap();
            assert!(n2 < last);
            last = n2;
        }
    }

    #[test]
    fn lp_norm_cases() {
        let g = grid(2, 8, 3.0);
        let c = ScalarField::constant(g, -2.0);
        for p in [1.0, 2.0, 3.5] {
            let expected = 2.0 * 9.0f64.powf(1.0 / p);
            assert!((lp_norm(&c, p).unwrap() - expected).abs() < 1e-12);
        }
        assert_eq!(lp_norm(&c, f64::INFINITY).unwrap(), 2.0);
        assert!(lp_norm(&c, 0.5).is_err());

        let f = band_limited(g, 3, 12);
        for p in [1.0, 2.0, 4.0, 9.0] {
            let lp = lp_norm(&f, p).unwrap();
            assert!(lp_norm(&f, f64::INFINITY).unwrap() >= lp / 9.0f64.powf(1.0 / p) - 1e-12);
            let scaled = lp_norm(&f.map(|v| -3.0 * v), p).unwrap();
            assert!((scaled - 3.0 * lp).abs() < 1e-12 * lp);
        }
        // Parseval
        let hat = sp_hat_sum(&f);
        let l2 = lp_norm(&f, 2.0).unwrap();
        assert!((hat - l2).abs() <= 1e-10 * l2);
    }

    fn sp_hat_sum(f: &ScalarField) -> f64 {
        let sp = Spectral::new(f.grid);
        let hat = sp.spectrum_real(f);
        let sum: f64 = hat.iter().map(|v| v.norm_sqr()).sum();
        (sum * f.grid.cell_volume() / f.grid.len() as f64).sqrt()
    }

    #[test]
    fn sobolev_norm_cases() {
        let g = grid(3, 16, 2.0);
        let sp = Spectral::new(g);
        let f = band_limited(g, 3, 21);
        let l2 = lp_norm(&f, 2.0).unwrap();
        assert!((sp.sobolev_norm(&f, 0).unwrap() - l2).abs() <= 1e-12 * l2);

        let k = [PI, 2.0 * PI, 0.0];
        let wave = ComplexField::from_fn(g, |x| Complex64::from_polar(1.0, k[0] * x[0] + k[1] * x[1]));
        let k2 = k[0] * k[0] + k[1] * k[1];
        for sigma in 0..4 {
            let expected = (1.0 + k2).powf(sigma as f64 / 2.0) * g.volume().sqrt();
            let got = sp.sobolev_norm_complex(&wave, sigma).unwrap();
            assert!((got - expected).abs() <= 1e-10 * expected);
        }

        // (1+k²)² = 1 + 2k² + k⁴  ->  ‖f‖² + 2‖∇f‖² + ‖Δf‖²
        let grad = sp.gradient(&f).unwrap();
        let lap = sp.laplacian(&f).unwrap();
        let g2: f64 = grad.iter().map(|c| lp_norm(c, 2.0).unwrap().powi(2)).sum();
        let phys = l2 * l2 + 2.0 * g2 + lp_norm(&lap, 2.0).unwrap().powi(2);
        let spec = sp.sobolev_norm(&f, 2).unwrap().powi(2);
        assert!((phys - spec).abs() <= 1e-8 * spec);
    }

    #[test]
    fn norms_converge_under_refinement() {
        let make = |pts| {
            let g = grid(2, pts, 2.0 * PI);
            ScalarField::from_fn(g, |x| (x[0]).sin() * (2.0 * x[1]).cos() + 0.3 * (3.0 * x[1]).sin())
        };
        let coarse = make(16);
        let fine = make(32);
        let sc = Spectral::new(coarse.grid);
        let sf = Spectral::new(fine.grid);
        for p in [2.0, 4.0] {
            assert!((lp_norm(&coarse, p).unwrap() - lp_norm(&fine, p).unwrap()).abs() < 1e-10);
        }
        for sigma in [0, 1, 2] {
            let a = sc.sobolev_norm(&coarse, sigma).unwrap();
            let b = sf.sobolev_norm(&fine, sigma).unwrap();
            assert!((a - b).abs() < 1e-10 * b);
        }
    }

    #[test]
    fn semigroup_smoothing_constant_is_stable() {
        // fit c in ‖S(t)f‖_∞ ≤ c t^{-n/(2p)} ‖f‖_p for p = 2, n = 2 on a narrow bump
        let fit = |pts| {
            let g = grid(2, pts, 2.0 * PI);
            let sp = Spectral::new(g);
            let f = ComplexField::from_fn(g, |x| {
                let r2 = (x[0] - PI).powi(2) + (x[1] - PI).powi(2);
                Complex64::new((-r2 / 0.08).exp(), 0.0)
            });
            let fp = lp_norm_complex(&f, 2.0).unwrap();
            [0.02, 0.05, 0.1]
                .iter()
                .map(|&t| {
                    let s = sp.semigroup_apply(&f, t, 1.0).unwrap();
                    lp_norm_complex(&s, f64::INFINITY).unwrap() * t.powf(0.5) / fp
                })
                .fold(0.0, f64::max)
        };
        let (c32, c64) = (fit(32), fit(64));
        assert!(c32 > 0.0);
        assert!((c32 - c64).abs() < 0.02 * c64, "{c32} {c64}");
    }

    #[test]
    fn dealias_keeps_low_modes() {
        let g = grid(1, 32, 2.0 * PI);
        let sp = Spectral::new(g);
        let mut f = ScalarField::from_fn(g, |x| (10.0 * x[0]).sin() + (11.0 * x[0]).cos());
        sp.dealias(&mut f);
        for i in 0..g.len() {
            let x = g.coords(i)[0];
            assert!((f.data[i] - (10.0 * x).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_finite_input() {
        let g = grid(1, 8, 1.0);
        let sp = Spectral::new(g);
        let mut f = ScalarField::zeros(g);
        f.data[3] = f64::NAN;
        assert_eq!(sp.gradient(&f).unwrap_err(), Error::NonFinite { index: 3 });
        assert!(sp.laplacian(&f).is_err());
    }
}

//! Shared domain types: model parameters, lattice states, periodic field
//! profiles, discrete and spectral norms, and the continuum-to-lattice
//! sampling operator.
//!
//! The continuum lives on the periodic interval `[0, L)` and the lattice has
//! `N = L / epsilon` sites, so that the moving-frame coordinate
//! `xi = epsilon (n - t)` wraps consistently on both sides.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    derivative_multiplier, fft_forward, fft_inverse, is_nyquist, mode_number, two_thirds_mask,
    wavenumbers,
};

/// Relative tolerance for the `N * epsilon = L` wrap condition.
const WRAP_TOL: f64 = 1e-9;

/// Physical and numerical parameters of one FPU/KdV run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Power of the anharmonic term, `p >= 2`.
    pub p: u32,
    /// Small parameter, `0 < epsilon < 1`.
    pub epsilon: f64,
    /// Sobolev index used for the `delta` norms.
    pub s: u32,
    /// Period of the continuum domain.
    pub length: f64,
    /// Number of lattice sites, `N = L / epsilon`.
    pub sites: usize,
    pub dt_lattice: f64,
    pub dtau_kdv: f64,
}

impl ModelParams {
    /// Builds parameters, deriving the site count from `L / epsilon`.
    pub fn new(
        p: u32,
        epsilon: f64,
        s: u32,
        length: f64,
        dt_lattice: f64,
        dtau_kdv: f64,
    ) -> Result<Self> {
        let sites = lattice_size(length, epsilon)?;
        let params = Self {
            p,
            epsilon,
            s,
            length,
            sites,
            dt_lattice,
            dtau_kdv,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::invalid(format!("p = {} must be >= 2", self.p)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid(format!(
                "epsilon = {} must lie in (0, 1)",
                self.epsilon
            )));
        }
        check_wrap(self.sites, self.epsilon, self.length)?;
        if !(self.dt_lattice > 0.0) || !(self.dtau_kdv > 0.0) {
            return Err(Error::invalid("time steps must be positive"));
        }
        Ok(())
    }
}

/// Number of lattice sites `N` with `N * epsilon = L`, or a configuration
/// error if `L / epsilon` is not an integer.
pub fn lattice_size(length: f64, epsilon: f64) -> Result<usize> {
    if !(length > 0.0) || !(epsilon > 0.0) || !length.is_finite() || !epsilon.is_finite() {
        return Err(Error::config(format!(
            "length {length} and epsilon {epsilon} must be positive"
        )));
    }
    let n = (length / epsilon).round();
    if n < 2.0 {
        return Err(Error::config(format!(
            "L / epsilon = {} gives fewer than two lattice sites",
            length / epsilon
        )));
    }
    check_wrap(n as usize, epsilon, length)?;
    Ok(n as usize)
}

fn check_wrap(sites: usize, epsilon: f64, length: f64) -> Result<()> {
    if (sites as f64 * epsilon - length).abs() > WRAP_TOL * length {
        return Err(Error::config(format!(
            "wrap inconsistency: N * epsilon = {} * {} != L = {}",
            sites, epsilon, length
        )));
    }
    Ok(())
}

/// Phase point `(u, q)` of the FPU lattice in strain variables at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    pub u: Vec<f64>,
    pub q: Vec<f64>,
    pub t: f64,
}

impl LatticeState {
    pub fn new(u: Vec<f64>, q: Vec<f64>, t: f64) -> Result<Self> {
        if u.len() != q.len() {
            return Err(Error::invalid(format!(
                "u and q lengths differ ({} vs {})",
                u.len(),
                q.len()
            )));
        }
        if u.iter().chain(q.iter()).any(|x| !x.is_finite()) || !t.is_finite() {
            return Err(Error::invalid("lattice state has non-finite entries"));
        }
        Ok(Self { u, q, t })
    }

    pub fn zeros(sites: usize, t: f64) -> Self {
        Self {
            u: vec![0.0; sites],
            q: vec![0.0; sites],
            t,
        }
    }

    pub fn sites(&self) -> usize {
        self.u.len()
    }

    /// Rotates both components by `k` sites: `u'_n = u_{n-k}`.
    pub fn rotated(&self, k: usize) -> Self {
        let mut u = self.u.clone();
        let mut q = self.q.clone();
        u.rotate_right(k % self.sites().max(1));
        q.rotate_right(k % self.sites().max(1));
        Self { u, q, t: self.t }
    }

    pub fn sup_norm(&self) -> f64 {
        self.u.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

/// One record of approximation-error diagnostics at lattice time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub t: f64,
    /// `|| u(t) - W(eps(. - t), eps^3 t) ||`
    pub err_u: f64,
    /// `|| du/dt(t) + eps d_xi W(eps(. - t), eps^3 t) ||`
    pub err_du: f64,
    pub energy_quantity: f64,
    pub res1_norm: f64,
    pub res2_norm: f64,
    pub h_lattice: f64,
    pub coercivity_ok: bool,
}

impl ErrorRecord {
    /// Left-hand side of the error bounds: `err_u + err_du`.
    pub fn total(&self) -> f64 {
        self.err_u + self.err_du
    }
}

/// Plain `l2` norm of a lattice sequence.
pub fn l2_norm(x: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for &v in x {
        if !v.is_finite() {
            return Err(Error::invalid("l2_norm: non-finite entry"));
        }
        sum += v * v;
    }
    Ok(sum.sqrt())
}

pub(crate) fn l2_unchecked(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Periodic function on `[0, L)` stored as grid values and Fourier
/// coefficients that are kept mutually consistent.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldProfile {
    values: Vec<f64>,
    coeffs: Vec<Complex64>,
    tau: f64,
    length: f64,
}

impl FieldProfile {
    pub fn from_values(values: Vec<f64>, length: f64, tau: f64) -> Result<Self> {
        check_grid(values.len(), length)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("profile values must be finite"));
        }
        let coeffs = forward(&values);
        Ok(Self {
            values,
            coeffs,
            tau,
            length,
        })
    }

    /// Builds a profile from coefficients; the imaginary part of the
    /// synthesized values is discarded and the coefficients re-derived.
    pub fn from_coeffs(coeffs: Vec<Complex64>, length: f64, tau: f64) -> Result<Self> {
        check_grid(coeffs.len(), length)?;
        let values = inverse(&coeffs);
        Self::from_values(values, length, tau)
    }

    /// Samples `f` on the uniform grid `x_j = j L / M`.
    pub fn from_fn(length: f64, points: usize, tau: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        check_grid(points, length)?;
        let h = length / points as f64;
        let values = (0..points).map(|j| f(j as f64 * h)).collect();
        Self::from_values(values, length, tau)
    }

    pub fn zeros(length: f64, points: usize, tau: f64) -> Result<Self> {
        check_grid(points, length)?;
        Ok(Self {
            values: vec![0.0; points],
            coeffs: vec![Complex64::new(0.0, 0.0); points],
            tau,
            length,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn points(&self) -> usize {
        self.values.len()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points() as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points()).map(|j| j as f64 * h).collect()
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        wavenumbers(self.points(), self.length)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Largest `|values - IDFT(coeffs)|` relative to the sup norm.
    pub fn consistency_error(&self) -> f64 {
        let synth = inverse(&self.coeffs);
        let scale = self.sup_norm().max(f64::MIN_POSITIVE);
        synth
            .iter()
            .zip(&self.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
            / scale
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Rebuilds a profile from modified coefficients, same grid and tau.
    fn with_coeffs(&self, coeffs: Vec<Complex64>) -> Self {
        let values = inverse(&coeffs);
        let coeffs = forward(&values);
        Self {
            values,
            coeffs,
            tau: self.tau,
            length: self.length,
        }
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        let coeffs = forward(&values);
        Self {
            values,
            coeffs,
            tau: self.tau,
            length: self.length,
        }
    }

    /// Spectral derivative of the given order.
    pub fn derivative(&self, order: u32) -> Self {
        if order == 0 {
            return self.clone();
        }
        let m = self.points();
        let k = self.wavenumbers();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * derivative_multiplier(k[j], order, is_nyquist(j, m)))
            .collect();
        self.with_coeffs(coeffs)
    }

    /// `W(x - shift)`, exact for band-limited profiles.
    pub fn translate(&self, shift: f64) -> Self {
        let m = self.points();
        let k = self.wavenumbers();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if is_nyquist(j, m) {
                    c * (k[j] * shift).cos()
                } else {
                    c * Complex64::from_polar(1.0, -k[j] * shift)
                }
            })
            .collect();
        self.with_coeffs(coeffs)
    }

    /// Pointwise integer power on the grid (sign kept for odd powers).
    pub fn power(&self, p: u32) -> Self {
        self.with_values(self.values.iter().map(|v| v.powi(p as i32)).collect())
    }

    /// Pointwise product on the grid.
    pub fn product(&self, other: &Self) -> Self {
        debug_assert_eq!(self.points(), other.points());
        self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }

    /// Zeroes every mode outside `|m| <= M/3`.
    pub fn dealiased(&self) -> Self {
        let mask = two_thirds_mask(self.points());
        let coeffs = self
            .coeffs
            .iter()
            .zip(&mask)
            .map(|(c, &keep)| if keep { *c } else { Complex64::new(0.0, 0.0) })
            .collect();
        self.with_coeffs(coeffs)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| a * v).collect(),
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
            tau: self.tau,
            length: self.length,
        }
    }

    /// `sum_i a_i f_i` over profiles sharing a grid; tau taken from the first.
    pub fn combination(terms: &[(f64, &FieldProfile)]) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::invalid("empty linear combination"))?;
        let m = first.points();
        if terms
            .iter()
            .any(|(_, f)| f.points() != m || f.length != first.length)
        {
            return Err(Error::invalid("profiles live on different grids"));
        }
        let mut values = vec![0.0; m];
        let mut coeffs = vec![Complex64::new(0.0, 0.0); m];
        for (a, f) in terms {
            for j in 0..m {
                values[j] += a * f.values[j];
                coeffs[j] += f.coeffs[j] * *a;
            }
        }
        Ok(Self {
            values,
            coeffs,
            tau: first.tau,
            length: first.length,
        })
    }

    /// Direct Fourier-series evaluation at an arbitrary point.
    /// The Nyquist mode is read as a cosine.
    pub fn eval(&self, x: f64) -> f64 {
        let m = self.points();
        let k = self.wavenumbers();
        let mut sum = 0.0;
        for (j, c) in self.coeffs.iter().enumerate() {
            if is_nyquist(j, m) {
                sum += c.re * (k[j] * x).cos();
            } else {
                let e = Complex64::from_polar(1.0, k[j] * x);
                sum += (c * e).re;
            }
        }
        sum
    }

    /// `L * sum |c_m|^2 (1 + k_m^2)^s` restricted to modes with `|m| > cut`,
    /// divided by the full sum. Zero for the zero profile.
    pub fn band_energy_fraction(&self, s: f64, cut: i64) -> f64 {
        let m = self.points();
        let k = self.wavenumbers();
        let mut top = 0.0;
        let mut all = 0.0;
        for j in 0..m {
            let e = (1.0 + k[j] * k[j]).powf(s) * self.coeffs[j].norm_sqr();
            all += e;
            if mode_number(j, m).abs() > cut {
                top += e;
            }
        }
        if all == 0.0 {
            0.0
        } else {
            top / all
        }
    }
}

fn check_grid(points: usize, length: f64) -> Result<()> {
    if points < 4 || points % 2 != 0 {
        return Err(Error::invalid(format!(
            "grid size {points} must be even and at least 4"
        )));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::invalid(format!("period {length} must be positive")));
    }
    Ok(())
}

fn forward(values: &[f64]) -> Vec<Complex64> {
    let m = values.len() as f64;
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_forward(&mut buf);
    for c in &mut buf {
        *c /= m;
    }
    buf
}

fn inverse(coeffs: &[Complex64]) -> Vec<f64> {
    let mut buf = coeffs.to_vec();
    fft_inverse(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Spectral `H^s` norm for integer `s >= 0`:
/// `sqrt(L * sum_m (1 + k_m^2)^s |c_m|^2)`.
pub fn sobolev_norm(w: &FieldProfile, s: i32) -> Result<f64> {
    if s < 0 {
        return Err(Error::invalid(format!("Sobolev index {s} is negative")));
    }
    fractional_sobolev_norm(w, s as f64)
}

/// Same multiplier formula for a real, possibly fractional, index.
pub fn fractional_sobolev_norm(w: &FieldProfile, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::invalid(format!("Sobolev index {s} is negative")));
    }
    let k = w.wavenumbers();
    let sum: f64 = w
        .coeffs()
        .iter()
        .zip(&k)
        .map(|(c, k)| (1.0 + k * k).powf(s) * c.norm_sqr())
        .sum();
    Ok((w.length() * sum).sqrt())
}

/// Evaluates `W` at the lattice points `xi_n = epsilon (n - shift) mod L`,
/// `n = 0..N` with `N = L / epsilon`.
///
/// The shift is applied as a phase on the coefficients; the shifted series
/// is then evaluated on the uniform lattice grid by folding modes into a
/// length-`N` inverse transform, which is exact for the trigonometric
/// polynomial carried by `W`.
pub fn sample_to_lattice(w: &FieldProfile, epsilon: f64, shift: f64) -> Result<Vec<f64>> {
    let n = lattice_size(w.length(), epsilon)?;
    Ok(sample_on_sites(w, n, epsilon * shift))
}

/// Evaluates `W(x_n - offset)` at `x_n = n L / N`.
pub(crate) fn sample_on_sites(w: &FieldProfile, sites: usize, offset: f64) -> Vec<f64> {
    let m = w.points();
    let k = w.wavenumbers();
    let mut buf = vec![Complex64::new(0.0, 0.0); sites];
    let fold = |mode: i64| mode.rem_euclid(sites as i64) as usize;
    for (j, c) in w.coeffs().iter().enumerate() {
        let mode = mode_number(j, m);
        if is_nyquist(j, m) {
            let half = c.re * 0.5;
            buf[fold(mode)] += Complex64::from_polar(half, -k[j] * offset);
            buf[fold(-mode)] += Complex64::from_polar(half, k[j] * offset);
        } else {
            buf[fold(mode)] += c * Complex64::from_polar(1.0, -k[j] * offset);
        }
    }
    fft_inverse(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian(length: f64, points: usize) -> FieldProfile {
        FieldProfile::from_fn(length, points, 0.0, |x| {
            (-(x - length / 2.0).powi(2) / 4.0).exp()
        })
        .unwrap()
    }

    #[test]
    fn l2_norm_basics() {
        assert_eq!(l2_norm(&[0.0; 5]).unwrap(), 0.0);
        assert_eq!(l2_norm(&[3.0, 4.0]).unwrap(), 5.0);
        assert!(matches!(
            l2_norm(&[1.0, f64::NAN]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn lattice_l2_matches_riemann_scaling() {
        // sum_n W(eps n)^2 ~ eps^{-1} int W^2; int of exp(-x^2/2) = sqrt(2 pi).
        let eps = 0.1;
        let x: Vec<f64> = (0..640)
            .map(|n| (-((eps * n as f64 - 32.0).powi(2)) / 4.0).exp())
            .collect();
        let expected = eps.powf(-0.5) * (2.0 * PI).sqrt().sqrt();
        let got = l2_norm(&x).unwrap();
        assert!((got / expected - 1.0).abs() < 0.01, "{got} vs {expected}");
    }

    #[test]
    fn wrap_inconsistency_is_a_config_error() {
        assert!(matches!(lattice_size(64.0, 0.3), Err(Error::Config(_))));
        assert_eq!(lattice_size(64.0, 0.05).unwrap(), 1280);
        assert!(ModelParams::new(1, 0.1, 6, 64.0, 0.05, 1e-3).is_err());
        assert!(ModelParams::new(2, 1.5, 6, 64.0, 0.05, 1e-3).is_err());
    }

    #[test]
    fn profile_is_self_consistent() {
        let w = gaussian(64.0, 256);
        assert!(w.consistency_error() < 1e-12);
        // Hermitian symmetry of a real profile.
        let c = w.coeffs();
        for j in 1..128 {
            assert!((c[j] - c[256 - j].conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn parseval_holds() {
        let w = gaussian(64.0, 512);
        let grid: f64 = w.values().iter().map(|v| v * v).sum::<f64>() * w.spacing();
        let spec = sobolev_norm(&w, 0).unwrap().powi(2);
        assert!((grid - spec).abs() / spec < 1e-12);
    }

    #[test]
    fn single_mode_sobolev_factor() {
        let length = 64.0;
        let k = 2.0 * PI * 3.0 / length;
        let w = FieldProfile::from_fn(length, 128, 0.0, |x| (k * x).cos()).unwrap();
        let n0 = sobolev_norm(&w, 0).unwrap();
        let n1 = sobolev_norm(&w, 1).unwrap();
        let n2 = sobolev_norm(&w, 2).unwrap();
        // Oracle: direct sum over the two nonzero coefficients (each 1/2).
        let direct0 = (length * 2.0 * 0.25_f64).sqrt();
        assert!((n0 - direct0).abs() < 1e-12);
        let factor = (1.0 + k * k).sqrt();
        assert!((n1 / n0 - factor).abs() < 1e-12);
        assert!((n2 / n0 - factor * factor).abs() < 1e-12);
        assert!(sobolev_norm(&w, -1).is_err());
        assert_eq!(sobolev_norm(&FieldProfile::zeros(8.0, 16, 0.0).unwrap(), 4).unwrap(), 0.0);
    }

    #[test]
    fn derivative_of_sine() {
        let length = 2.0 * PI;
        let w = FieldProfile::from_fn(length, 64, 0.0, |x| (2.0 * x).sin()).unwrap();
        let d = w.derivative(1);
        for (x, v) in w.grid().iter().zip(d.values()) {
            assert!((v - 2.0 * (2.0 * x).cos()).abs() < 1e-12);
        }
        let d3 = w.derivative(3);
        for (x, v) in w.grid().iter().zip(d3.values()) {
            assert!((v + 8.0 * (2.0 * x).cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn sampling_identity_on_aligned_grid() {
        let eps = 0.25;
        let w = gaussian(64.0, 256);
        let s = sample_to_lattice(&w, eps, 0.0).unwrap();
        for (a, b) in s.iter().zip(w.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn sampling_matches_direct_summation() {
        let eps = 0.2;
        let w = gaussian(64.0, 256);
        let shift = 3.37;
        let s = sample_to_lattice(&w, eps, shift).unwrap();
        for (n, v) in s.iter().enumerate().step_by(7) {
            let x = (eps * (n as f64 - shift)).rem_euclid(64.0);
            assert!((v - w.eval(x)).abs() < 1e-12);
        }
        // Fewer sites than modes: folding must still be exact.
        let coarse = sample_to_lattice(&w, 0.5, shift).unwrap();
        for (n, v) in coarse.iter().enumerate() {
            let x = (0.5 * (n as f64 - shift)).rem_euclid(64.0);
            assert!((v - w.eval(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_shift_rotates_samples() {
        let eps = 0.25;
        let w = gaussian(64.0, 256);
        let a = sample_to_lattice(&w, eps, 0.0).unwrap();
        let b = sample_to_lattice(&w, eps, 1.0).unwrap();
        for n in 0..a.len() {
            let prev = (n + a.len() - 1) % a.len();
            assert!((b[n] - a[prev]).abs() < 1e-13);
        }
    }

    #[test]
    fn sampling_rejects_bad_wrap() {
        let w = gaussian(64.0, 256);
        assert!(matches!(
            sample_to_lattice(&w, 0.3, 0.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_profile_samples_to_zero() {
        let w = FieldProfile::zeros(64.0, 128, 0.0).unwrap();
        assert!(sample_to_lattice(&w, 0.1, 12.5)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn sampling_bound_constant_is_moderate() {
        // ||x||_l2 <= C eps^{-1/2} ||X||_H1 with a fixed C across eps.
        let w = gaussian(64.0, 512);
        let h1 = sobolev_norm(&w, 1).unwrap();
        let mut constants = Vec::new();
        for eps in [0.2, 0.1, 0.05] {
            let x = sample_to_lattice(&w, eps, 0.0).unwrap();
            let c = l2_norm(&x).unwrap() * eps.sqrt() / h1;
            assert!(c <= 2.0, "constant {c} at eps {eps}");
            constants.push(c);
        }
        let spread = constants.iter().cloned().fold(0.0, f64::max)
            / constants.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 1.01);
    }

    #[test]
    fn translate_is_exact_for_band_limited() {
        let length = 64.0;
        let k = 2.0 * PI * 5.0 / length;
        let w = FieldProfile::from_fn(length, 64, 0.0, |x| (k * x).sin()).unwrap();
        let t = w.translate(1.234);
        for (x, v) in t.grid().iter().zip(t.values()) {
            assert!((v - (k * (x - 1.234)).sin()).abs() < 1e-13);
        }
    }
}

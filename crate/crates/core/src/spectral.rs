//! Thin FFT layer over `rustfft` plus wavenumber bookkeeping.
//!
//! Coefficients follow the convention `W(x) = sum_m c_m exp(i k_m x)` with
//! `k_m = 2 pi m / L` and `c_m = (1/M) sum_j W(x_j) exp(-2 pi i m j / M)`.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized forward transform in place.
pub(crate) fn fft_forward(buf: &mut [Complex64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// Unnormalized inverse transform in place.
pub(crate) fn fft_inverse(buf: &mut [Complex64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
}

/// Signed mode number of FFT slot `j` in a length-`m` transform.
/// The Nyquist slot of an even transform is reported as `+m/2`.
pub fn mode_number(j: usize, m: usize) -> i64 {
    if j <= m / 2 {
        j as i64
    } else {
        j as i64 - m as i64
    }
}

pub fn wavenumbers(points: usize, length: f64) -> Vec<f64> {
    let base = 2.0 * std::f64::consts::PI / length;
    (0..points)
        .map(|j| base * mode_number(j, points) as f64)
        .collect()
}

/// True for the Nyquist slot of an even-length transform.
#[inline]
pub(crate) fn is_nyquist(j: usize, m: usize) -> bool {
    m % 2 == 0 && j == m / 2
}

/// Mask of modes kept by the 2/3 rule: `|m| <= M/3`.
pub fn two_thirds_mask(points: usize) -> Vec<bool> {
    let cut = (points / 3) as i64;
    (0..points)
        .map(|j| !is_nyquist(j, points) && mode_number(j, points).abs() <= cut)
        .collect()
}

/// `(i k)^order`, with odd derivatives of the Nyquist mode set to zero.
pub(crate) fn derivative_multiplier(k: f64, order: u32, nyquist: bool) -> Complex64 {
    if nyquist && order % 2 == 1 {
        return Complex64::new(0.0, 0.0);
    }
    let ik = Complex64::new(0.0, k);
    ik.powu(order)
}

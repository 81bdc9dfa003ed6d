//! Residuals of the ansatz in the lattice equations, the nonlinear
//! remainder, the energy-type quantity and its coercivity, and the error
//! norms that appear in the approximation bounds.
//!
//! With `u = W + U`, `q = P_eps + Q` the error obeys
//!
//! ```text
//! dU_n/dt = Q_{n+1} - Q_n + Res1_n
//! dQ_n/dt = U_n - U_{n-1} + p eps^2 (W_n^{p-1} U_n - W_{n-1}^{p-1} U_{n-1}) + R_n + Res2_n
//! ```
//!
//! where `W_n = W(eps (n - t), eps^3 t)`.

use serde::{Deserialize, Serialize};

use crate::ansatz::{bound_lhs, decompose_with, p_epsilon_tau, truncation_defect, AnsatzFields};
use crate::error::{Error, Result};
use crate::gkdv::time_derivative;
use crate::lattice::fpu_energy;
use crate::model::{l2_unchecked, sample_to_lattice, ErrorRecord, FieldProfile, LatticeState};

/// Absolute slack allowed in the coercivity inequalities.
pub const COERCIVITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSnapshot {
    pub t: f64,
    pub res1: Vec<f64>,
    pub res2: Vec<f64>,
    pub res1_l2: f64,
    pub res2_l2: f64,
}

/// Continuum form of `Res2`:
/// `eps P' - eps^3 P_tau + W(xi) - W(xi - eps) + eps^2 (W^p(xi) - W^p(xi - eps))`.
fn residual_2_profile(fields: &AnsatzFields) -> Result<FieldProfile> {
    let e = fields.epsilon;
    let dp = fields.p_eps.derivative(1);
    let p_tau = p_epsilon_tau(&fields.w, e, fields.p)?;
    let w_back = fields.w.translate(e);
    let wp_back = fields.wp.translate(e);
    FieldProfile::combination(&[
        (e, &dp),
        (-e.powi(3), &p_tau),
        (1.0, &fields.w),
        (-1.0, &w_back),
        (e * e, &fields.wp),
        (-e * e, &wp_back),
    ])
}

/// `Res1_n(t) = eps W' - eps^3 W_tau + P(eps(n + 1 - t)) - P(eps(n - t))`,
/// with `W_tau` eliminated through the KdV equation.
pub fn residual_1(w: &FieldProfile, epsilon: f64, p: u32, t: f64) -> Result<Vec<f64>> {
    let defect = truncation_defect(w, epsilon, p)?;
    sample_to_lattice(&defect, epsilon, t)
}

/// `Res2_n(t)`, see [`residual_2_profile`].
pub fn residual_2(w: &FieldProfile, epsilon: f64, p: u32, t: f64) -> Result<Vec<f64>> {
    let fields = AnsatzFields::new(w, epsilon, p)?;
    sample_to_lattice(&residual_2_profile(&fields)?, epsilon, t)
}

pub fn residuals(w: &FieldProfile, epsilon: f64, p: u32, t: f64) -> Result<ResidualSnapshot> {
    let fields = AnsatzFields::new(w, epsilon, p)?;
    residuals_with(&fields, t)
}

fn residuals_with(fields: &AnsatzFields, t: f64) -> Result<ResidualSnapshot> {
    let e = fields.epsilon;
    let w_tau = time_derivative(&fields.w, fields.p, true);
    let d1 = FieldProfile::combination(&[
        (1.0, &fields.p_eps.translate(-e)),
        (-1.0, &fields.p_eps),
        (e, &fields.dw),
        (-e.powi(3), &w_tau),
    ])?;
    let res1 = sample_to_lattice(&d1, e, t)?;
    let res2 = sample_to_lattice(&residual_2_profile(fields)?, e, t)?;
    Ok(ResidualSnapshot {
        t,
        res1_l2: l2_unchecked(&res1),
        res2_l2: l2_unchecked(&res2),
        res1,
        res2,
    })
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `R_n = eps^2 sum_{k=2}^p C(p,k) [W_n^{p-k} U_n^k - W_{n-1}^{p-k} U_{n-1}^k]`
/// from lattice samples `W_n`.
pub fn nonlinear_remainder_sampled(w_lat: &[f64], u_err: &[f64], epsilon: f64, p: u32) -> Vec<f64> {
    let n = u_err.len();
    let term = |i: usize| -> f64 {
        (2..=p)
            .map(|k| binomial(p, k) * w_lat[i].powi((p - k) as i32) * u_err[i].powi(k as i32))
            .sum()
    };
    let local: Vec<f64> = (0..n).map(term).collect();
    (0..n)
        .map(|i| epsilon * epsilon * (local[i] - local[(i + n - 1) % n]))
        .collect()
}

/// Nonlinear remainder with `W` sampled at `eps (n - t)`.
pub fn nonlinear_remainder(
    w: &FieldProfile,
    u_err: &[f64],
    epsilon: f64,
    p: u32,
    t: f64,
) -> Result<Vec<f64>> {
    if p < 2 {
        return Err(Error::invalid(format!("p = {p} must be >= 2")));
    }
    let w_lat = sample_to_lattice(w, epsilon, t)?;
    if w_lat.len() != u_err.len() {
        return Err(Error::config("error sequence does not match lattice size"));
    }
    Ok(nonlinear_remainder_sampled(&w_lat, u_err, epsilon, p))
}

/// `eps_0 = min(1, (2p)^{-1/2} sup|W|^{-(p-1)/2})`.
pub fn epsilon_zero(p: u32, w_sup: f64) -> f64 {
    if w_sup <= 0.0 {
        return 1.0;
    }
    (1.0_f64).min((2.0 * p as f64).powf(-0.5) * w_sup.powf(-(p as f64 - 1.0) / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyQuantity {
    pub t: f64,
    /// `E = (1/2) sum [Q^2 + U^2 + eps^2 p W^{p-1} U^2]`
    pub e: f64,
    /// `||Q||^2 + ||U||^2`
    pub error_norm_sq: f64,
    /// `||Q||^2 + ||U||^2 <= 4 E`
    pub coercivity_ok: bool,
    /// Factor-two bound, checked for odd `p` only.
    pub factor_two_ok: Option<bool>,
    pub epsilon0: f64,
    /// False when `eps >= eps_0`, where coercivity is not guaranteed.
    pub guaranteed: bool,
}

pub fn energy_quantity_sampled(
    u_err: &[f64],
    q_err: &[f64],
    w_lat: &[f64],
    w_sup: f64,
    epsilon: f64,
    p: u32,
    t: f64,
) -> EnergyQuantity {
    let c = epsilon * epsilon * p as f64;
    let mut e = 0.0;
    let mut norm_sq = 0.0;
    for i in 0..u_err.len() {
        let u2 = u_err[i] * u_err[i];
        let q2 = q_err[i] * q_err[i];
        norm_sq += u2 + q2;
        e += q2 + u2 + c * w_lat[i].powi(p as i32 - 1) * u2;
    }
    e *= 0.5;
    let epsilon0 = epsilon_zero(p, w_sup);
    EnergyQuantity {
        t,
        e,
        error_norm_sq: norm_sq,
        coercivity_ok: norm_sq <= 4.0 * e + COERCIVITY_SLACK,
        factor_two_ok: (p % 2 == 1).then(|| norm_sq <= 2.0 * e + COERCIVITY_SLACK),
        epsilon0,
        guaranteed: epsilon < epsilon0,
    }
}

/// Energy-type quantity of the error `(U, Q)` against `W` at time `t`.
pub fn energy_quantity(
    u_err: &[f64],
    q_err: &[f64],
    w: &FieldProfile,
    epsilon: f64,
    p: u32,
    t: f64,
) -> Result<EnergyQuantity> {
    let w_lat = sample_to_lattice(w, epsilon, t)?;
    if w_lat.len() != u_err.len() || q_err.len() != u_err.len() {
        return Err(Error::config("error sequences do not match lattice size"));
    }
    Ok(energy_quantity_sampled(
        u_err,
        q_err,
        &w_lat,
        w.sup_norm(),
        epsilon,
        p,
        t,
    ))
}

/// Exact `dE/dt` along the error dynamics, split into the part forced by
/// the residuals and the part proportional to the error itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRate {
    /// `sum Q Res2 + U (1 + eps^2 p W^{p-1}) Res1`
    pub forcing: f64,
    /// `sum Q R + (1/2) eps^2 p (p-1) W^{p-2} U^2 (-eps W' + eps^3 W_tau)`
    pub growth: f64,
}

impl EnergyRate {
    pub fn total(&self) -> f64 {
        self.forcing + self.growth
    }
}

/// Everything the harness records at one diagnostic time.
#[derive(Debug, Clone)]
pub struct Diagnosis {
    pub record: ErrorRecord,
    pub energy: EnergyQuantity,
    pub rate: EnergyRate,
    pub u_err: Vec<f64>,
    pub q_err: Vec<f64>,
}

/// Full diagnostic of `state` against the KdV snapshot `w` (taken at
/// `tau = eps^3 state.t`).
pub fn diagnose(state: &LatticeState, w: &FieldProfile, epsilon: f64, p: u32) -> Result<Diagnosis> {
    let fields = AnsatzFields::new(w, epsilon, p)?;
    diagnose_with(state, &fields)
}

pub(crate) fn diagnose_with(state: &LatticeState, fields: &AnsatzFields) -> Result<Diagnosis> {
    let eps = fields.epsilon;
    let p = fields.p;
    let t = state.t;
    let (u_err, q_err) = decompose_with(state, fields)?;
    let (err_u, err_du) = bound_lhs(state, fields, eps)?;
    let res = residuals_with(fields, t)?;
    let w_lat = sample_to_lattice(&fields.w, eps, t)?;
    let energy = energy_quantity_sampled(&u_err, &q_err, &w_lat, fields.w.sup_norm(), eps, p, t);

    let w_tau = time_derivative(&fields.w, p, true);
    let flow = FieldProfile::combination(&[(-eps, &fields.dw), (eps.powi(3), &w_tau)])?;
    let flow_lat = sample_to_lattice(&flow, eps, t)?;
    let rem = nonlinear_remainder_sampled(&w_lat, &u_err, eps, p);
    let c = eps * eps * p as f64;
    let mut forcing = 0.0;
    let mut growth = 0.0;
    for i in 0..u_err.len() {
        forcing += q_err[i] * res.res2[i]
            + u_err[i] * (1.0 + c * w_lat[i].powi(p as i32 - 1)) * res.res1[i];
        growth += q_err[i] * rem[i]
            + 0.5 * c * (p as f64 - 1.0) * w_lat[i].powi(p as i32 - 2) * u_err[i] * u_err[i] * flow_lat[i];
    }
    let record = ErrorRecord {
        t,
        err_u,
        err_du,
        energy_quantity: energy.e,
        res1_norm: res.res1_l2,
        res2_norm: res.res2_l2,
        h_lattice: fpu_energy(state, eps, p),
        coercivity_ok: energy.coercivity_ok && energy.factor_two_ok.unwrap_or(true),
    };
    Ok(Diagnosis {
        record,
        energy,
        rate: EnergyRate { forcing, growth },
        u_err,
        q_err,
    })
}

/// Error norms, energy-type quantity, residual norms and lattice energy.
pub fn error_norms(state: &LatticeState, w: &FieldProfile, epsilon: f64, p: u32) -> Result<ErrorRecord> {
    Ok(diagnose(state, w, epsilon, p)?.record)
}

/// Right-hand side of the energy estimate without its constant:
/// `E^{1/2} [(d + d^{2p-1}) eps^{9/2} + eps^3 (d^{p-1} + d^{2p-2}) E^{1/2}
///  + eps^2 (d^{p-2} + E^{(p-2)/2}) E]`.
pub fn derivative_bound_bracket(e: f64, delta: f64, epsilon: f64, p: u32) -> f64 {
    let pf = p as i32;
    let s = e.max(0.0).sqrt();
    s * ((delta + delta.powi(2 * pf - 1)) * epsilon.powf(4.5)
        + epsilon.powi(3) * (delta.powi(pf - 1) + delta.powi(2 * pf - 2)) * s
        + epsilon * epsilon * (delta.powi(pf - 2) + s.powi(pf - 2)) * e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t: f64,
    pub e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBoundReport {
    /// Smallest `C` with `|dE/dt| <= C * bracket` at every usable point.
    pub constant: f64,
    pub max_rate: f64,
    pub points: usize,
    /// Interior points with `E = 0`, checked one-sidedly.
    pub zero_energy_points: usize,
    /// Zero-energy points where the measured rate was not zero.
    pub zero_energy_violations: usize,
}

/// Centered differences of `E` over a uniformly sampled window and the
/// smallest constant making the energy estimate hold on it.
pub fn check_energy_derivative_bound(
    window: &[EnergySample],
    delta: f64,
    epsilon: f64,
    p: u32,
) -> Result<DerivativeBoundReport> {
    if window.len() < 3 {
        return Err(Error::invalid("derivative check needs at least 3 samples"));
    }
    let mut report = DerivativeBoundReport {
        constant: 0.0,
        max_rate: 0.0,
        points: 0,
        zero_energy_points: 0,
        zero_energy_violations: 0,
    };
    for i in 1..window.len() - 1 {
        let dt = window[i + 1].t - window[i - 1].t;
        if !(dt > 0.0) {
            return Err(Error::invalid("window times must increase"));
        }
        let rate = (window[i + 1].e - window[i - 1].e) / dt;
        report.max_rate = report.max_rate.max(rate.abs());
        let e = window[i].e;
        let bracket = derivative_bound_bracket(e, delta, epsilon, p);
        if e > 0.0 && bracket > 0.0 {
            report.constant = report.constant.max(rate.abs() / bracket);
            report.points += 1;
        } else {
            report.zero_energy_points += 1;
            // E >= 0 has a minimum here; one-sided differences must not both push down.
            let left = window[i].e - window[i - 1].e;
            let right = window[i + 1].e - window[i].e;
            if left > 0.0 || right < 0.0 {
                report.zero_energy_violations += 1;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{initial_lattice_data, Perturbation};
    use crate::fit::fit_scaling_exponent;
    use crate::gkdv::{soliton_profile, KdvRunConfig, KdvSolver, SolitonSpec};
    use crate::lattice::{FpuStepper, Integrator};
    use crate::model::lattice_size;

    fn soliton(p: u32, points: usize) -> FieldProfile {
        soliton_profile(&SolitonSpec::new(p, 1.0, 32.0).unwrap(), 64.0, points).unwrap()
    }

    #[test]
    fn zero_profile_has_zero_residuals() {
        let z = FieldProfile::zeros(64.0, 256, 0.0).unwrap();
        let r = residuals(&z, 0.1, 2, 3.0).unwrap();
        assert_eq!(r.res1_l2, 0.0);
        assert_eq!(r.res2_l2, 0.0);
    }

    #[test]
    fn residuals_scale_as_nine_halves() {
        for p in [2, 3] {
            let w = soliton(p, 4096);
            let mut r1 = Vec::new();
            let mut r2 = Vec::new();
            for eps in [0.2, 0.1, 0.05] {
                let r = residuals(&w, eps, p, 0.0).unwrap();
                r1.push((eps, r.res1_l2));
                r2.push((eps, r.res2_l2));
            }
            let f1 = fit_scaling_exponent(&r1).unwrap();
            let f2 = fit_scaling_exponent(&r2).unwrap();
            if p == 2 {
                assert!((f1.slope - 4.5).abs() < 0.3, "p={p} res1 slope {}", f1.slope);
                let ratio = r1[1].1 / r1[2].1;
                assert!((ratio / 2f64.powf(4.5) - 1.0).abs() < 0.3, "ratio {ratio}");
            }
            assert!((f2.slope - 4.5).abs() < 0.3, "p={p} res2 slope {}", f2.slope);
        }
    }

    #[test]
    fn standalone_residuals_match_snapshot() {
        let w = soliton(2, 1024);
        let snap = residuals(&w, 0.1, 2, 7.5).unwrap();
        let r1 = residual_1(&w, 0.1, 2, 7.5).unwrap();
        let r2 = residual_2(&w, 0.1, 2, 7.5).unwrap();
        for i in 0..r1.len() {
            assert!((r1[i] - snap.res1[i]).abs() < 1e-15);
            assert!((r2[i] - snap.res2[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn remainder_cases() {
        let w = soliton(3, 512);
        let n = lattice_size(64.0, 0.1).unwrap();
        let zero = vec![0.0; n];
        assert!(nonlinear_remainder(&w, &zero, 0.1, 3, 0.0)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));

        let u = Perturbation::random(n, 1.0, 1).unwrap().du;
        let r = nonlinear_remainder(&w, &u, 0.1, 2, 0.0).unwrap();
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let expected = 0.01 * (u[i] * u[i] - u[prev] * u[prev]);
            assert!((r[i] - expected).abs() < 1e-16);
        }
        let r2 = nonlinear_remainder(&w, &u.iter().map(|x| 3.0 * x).collect::<Vec<_>>(), 0.1, 2, 0.0).unwrap();
        for i in 0..n {
            assert!((r2[i] - 9.0 * r[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn remainder_matches_full_expansion() {
        // R = eps^2 [((W+U)^p - W^p - p W^{p-1} U)_n - (...)_{n-1}]
        let n = 64;
        let w: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let u: Vec<f64> = (0..n).map(|i| 0.1 * (i as f64 * 0.7).cos()).collect();
        for p in 2..=5 {
            let r = nonlinear_remainder_sampled(&w, &u, 0.2, p);
            let pi = p as i32;
            let local = |i: usize| {
                (w[i] + u[i]).powi(pi) - w[i].powi(pi) - p as f64 * w[i].powi(pi - 1) * u[i]
            };
            for i in 0..n {
                let expected = 0.04 * (local(i) - local((i + n - 1) % n));
                assert!((r[i] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn remainder_is_quadratically_small() {
        let w = soliton(4, 512);
        let n = lattice_size(64.0, 0.2).unwrap();
        let u = Perturbation::random(n, 1.0, 5).unwrap().du;
        let ratio = |lam: f64| {
            let scaled: Vec<f64> = u.iter().map(|x| lam * x).collect();
            l2_unchecked(&nonlinear_remainder(&w, &scaled, 0.2, 4, 0.0).unwrap()) / (lam * lam)
        };
        let (a, b) = (ratio(1e-2), ratio(1e-4));
        assert!(b <= a * 1.01 && b > 0.0);
    }

    #[test]
    fn energy_quantity_cases() {
        let w = soliton(2, 512);
        let n = lattice_size(64.0, 0.1).unwrap();
        let zero = vec![0.0; n];
        let e0 = energy_quantity(&zero, &zero, &w, 0.1, 2, 0.0).unwrap();
        assert_eq!(e0.e, 0.0);
        assert!(e0.coercivity_ok);

        let z = FieldProfile::zeros(64.0, 512, 0.0).unwrap();
        let pert = Perturbation::random(n, 1.0, 9).unwrap();
        let e = energy_quantity(&pert.du, &pert.dq, &z, 0.1, 3, 0.0).unwrap();
        assert!((2.0 * e.e - e.error_norm_sq).abs() < 1e-14);
        assert_eq!(e.factor_two_ok, Some(true));
    }

    #[test]
    fn coercivity_under_adversarial_alignment() {
        // W negative with min -3 makes the p = 2 weight as negative as possible.
        let spec = SolitonSpec::new(2, 1.0, 32.0).unwrap();
        let w = soliton_profile(&spec, 64.0, 1024).unwrap().scaled(-1.0);
        let eps0 = epsilon_zero(2, 3.0);
        assert!((eps0 - 1.0 / (12.0_f64).sqrt()).abs() < 1e-12);
        let eps = 64.0 / (64.0 / (0.999 * eps0)).ceil();
        assert!(eps < eps0);
        let n = lattice_size(64.0, eps).unwrap();
        let w_lat = sample_to_lattice(&w, eps, 0.0).unwrap();
        let (imin, _) = w_lat
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |a, (i, &v)| if v < a.1 { (i, v) } else { a });
        let mut u = vec![0.0; n];
        u[imin] = 1.0;
        let q = vec![0.0; n];
        let e = energy_quantity(&u, &q, &w, eps, 2, 0.0).unwrap();
        assert!(e.guaranteed);
        assert!(e.coercivity_ok, "{} vs 4E = {}", e.error_norm_sq, 4.0 * e.e);
        assert!(e.e > 0.0);
    }

    #[test]
    fn epsilon_zero_formula() {
        assert_eq!(epsilon_zero(2, 0.0), 1.0);
        assert!((epsilon_zero(3, 2.0) - 1.0 / (6.0_f64.sqrt() * 2.0)).abs() < 1e-15);
        assert_eq!(epsilon_zero(2, 1e-6), 1.0);
    }

    #[test]
    fn unperturbed_ansatz_error_norms() {
        let w = soliton(2, 2048);
        for eps in [0.1, 0.05] {
            let init = initial_lattice_data(&w, eps, 2, None, false).unwrap();
            let rec = error_norms(&init.state, &w, eps, 2).unwrap();
            assert_eq!(rec.err_u, 0.0);
            assert!(rec.err_du <= eps.powf(1.5));
            assert_eq!(rec.energy_quantity, 0.0);
        }
        let z = FieldProfile::zeros(64.0, 256, 0.0).unwrap();
        let rec = error_norms(&LatticeState::zeros(640, 0.0), &z, 0.1, 2).unwrap();
        assert_eq!(rec.total(), 0.0);
        assert_eq!(rec.h_lattice, 0.0);
    }

    #[test]
    fn orthogonal_perturbation_adds_in_quadrature() {
        let w = soliton(2, 1024);
        let eps = 0.1;
        let init = initial_lattice_data(&w, eps, 2, None, false).unwrap();
        let n = init.state.sites();
        let mut base = init.state.clone();
        let a = Perturbation::random(n, 1.0, 11).unwrap().du;
        for i in 0..n {
            base.u[i] += 0.01 * a[i];
        }
        let dev: Vec<f64> = a.iter().map(|x| 0.01 * x).collect();
        // Orthogonalize a second direction against the existing deviation.
        let mut r = Perturbation::random(n, 1.0, 12).unwrap().du;
        let dot: f64 = r.iter().zip(&dev).map(|(x, y)| x * y).sum::<f64>()
            / dev.iter().map(|x| x * x).sum::<f64>();
        for i in 0..n {
            r[i] -= dot * dev[i];
        }
        let rn = l2_unchecked(&r);
        let delta = 0.003;
        let mut moved = base.clone();
        for i in 0..n {
            moved.u[i] += delta * r[i] / rn;
        }
        let e0 = error_norms(&base, &w, eps, 2).unwrap().err_u;
        let e1 = error_norms(&moved, &w, eps, 2).unwrap().err_u;
        assert!((e1 * e1 - e0 * e0 - delta * delta).abs() < 1e-14);
    }

    #[test]
    fn synthetic_zero_window() {
        let window: Vec<EnergySample> = (0..5).map(|i| EnergySample { t: i as f64, e: 0.0 }).collect();
        let rep = check_energy_derivative_bound(&window, 10.0, 0.1, 2).unwrap();
        assert_eq!(rep.constant, 0.0);
        assert_eq!(rep.max_rate, 0.0);
        assert_eq!(rep.zero_energy_points, 3);
        assert_eq!(rep.zero_energy_violations, 0);
    }

    /// Finite differences of E along a real run agree with the exact rate
    /// assembled from the residuals, the remainder and the weight flow.
    #[test]
    fn energy_rate_matches_finite_differences() {
        let eps = 0.1;
        let p = 2;
        let w0 = soliton(p, 1024);
        let n = lattice_size(64.0, eps).unwrap();
        let pert = Perturbation::random(n, 0.5 * eps.powf(1.5), 21).unwrap();
        let init = initial_lattice_data(&w0, eps, p, Some(&pert), false).unwrap();
        let dt = 0.01;
        let kcfg = KdvRunConfig {
            p,
            length: 64.0,
            points: 1024,
            dtau: eps.powi(3) * dt,
            tau_end: 1.0,
            dealias: true,
        };
        let kdv = KdvSolver::with_step(&kcfg, eps.powi(3) * dt);
        let mut st = FpuStepper::new(eps, p, dt, Integrator::Rk4, n).unwrap();
        let mut state = init.state.clone();
        let mut w = w0.clone();
        // Move away from t = 0 so that the error is generic.
        st.advance(&mut state, 500).unwrap();
        w = kdv.advance(&w, 500).unwrap();
        let mut window = Vec::new();
        let mut rates = Vec::new();
        for _ in 0..3 {
            let d = diagnose(&state, &w, eps, p).unwrap();
            window.push(EnergySample { t: state.t, e: d.energy.e });
            rates.push(d.rate);
            st.step(&mut state).unwrap();
            w = kdv.step(&w).unwrap();
        }
        let fd = (window[2].e - window[0].e) / (window[2].t - window[0].t);
        let exact = rates[1].total();
        assert!(
            (fd - exact).abs() <= 1e-3 * exact.abs().max(1e-12),
            "fd {fd} vs exact {exact}"
        );

        // Doubling the residual doubles the forcing term.
        let doubled = EnergyRate { forcing: 2.0 * rates[1].forcing, growth: rates[1].growth };
        assert!((doubled.forcing / rates[1].forcing - 2.0).abs() < 1e-15);

        let rep = check_energy_derivative_bound(&window, 100.0, eps, p).unwrap();
        assert_eq!(rep.points, 1);
        assert!(rep.constant.is_finite() && rep.constant > 0.0);
    }
}

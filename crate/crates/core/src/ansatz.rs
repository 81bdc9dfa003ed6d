//! Multi-scale ansatz: the leading profile `W` in the moving frame
//! `xi = eps (n - t)`, `tau = eps^3 t`, the momentum correction
//!
//! ```text
//! P_eps = -W + (eps/2) W' - (eps^2/8) W'' - (eps^2/2) W^p
//!         + (eps^3/48) W''' + (eps^3/4) p W^{p-1} W'
//! ```
//!
//! and the split of a lattice state into ansatz plus error `(U, Q)`.
//! Slow-time derivatives of `W` are never differenced; they come from the
//! KdV equation itself.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gkdv::time_derivative;
use crate::model::{l2_unchecked, lattice_size, sample_to_lattice, FieldProfile, LatticeState};

/// `W`, its first three derivatives, `W^p` and `P_eps` on a common grid.
#[derive(Debug, Clone)]
pub struct AnsatzFields {
    pub w: FieldProfile,
    pub dw: FieldProfile,
    pub d2w: FieldProfile,
    pub d3w: FieldProfile,
    pub wp: FieldProfile,
    pub p_eps: FieldProfile,
    pub epsilon: f64,
    pub p: u32,
}

impl AnsatzFields {
    pub fn new(w: &FieldProfile, epsilon: f64, p: u32) -> Result<Self> {
        check_args(epsilon, p)?;
        let dw = w.derivative(1);
        let d2w = w.derivative(2);
        let d3w = w.derivative(3);
        let wp = w.power(p).dealiased();
        let nl = w.power(p - 1).product(&dw).dealiased();
        let e = epsilon;
        let p_eps = FieldProfile::combination(&[
            (-1.0, w),
            (0.5 * e, &dw),
            (-0.125 * e * e, &d2w),
            (-0.5 * e * e, &wp),
            (e.powi(3) / 48.0, &d3w),
            (0.25 * e.powi(3) * p as f64, &nl),
        ])?;
        Ok(Self {
            w: w.clone(),
            dw,
            d2w,
            d3w,
            wp,
            p_eps,
            epsilon,
            p,
        })
    }
}

fn check_args(epsilon: f64, p: u32) -> Result<()> {
    if p < 2 {
        return Err(Error::invalid(format!("p = {p} must be >= 2")));
    }
    if !(epsilon >= 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon = {epsilon} outside [0, 1)")));
    }
    Ok(())
}

/// `P_eps` built from `W`; products are dealiased.
pub fn build_p_epsilon(w: &FieldProfile, epsilon: f64, p: u32) -> Result<FieldProfile> {
    Ok(AnsatzFields::new(w, epsilon, p)?.p_eps)
}

/// Derivative of `P_eps` along the flow, i.e. its linearization at `W` in the
/// direction `G = W_tau`:
/// `-G + (eps/2) G' - (eps^2/8) G'' - (eps^2/2) p W^{p-1} G + (eps^3/48) G'''
///  + (eps^3/4) (p W^{p-1} G)'`.
pub fn p_epsilon_tau(w: &FieldProfile, epsilon: f64, p: u32) -> Result<FieldProfile> {
    check_args(epsilon, p)?;
    let g = time_derivative(w, p, true);
    let e = epsilon;
    let wg = w
        .power(p - 1)
        .product(&g)
        .scaled(p as f64)
        .dealiased();
    let dg = g.derivative(1);
    let d2g = g.derivative(2);
    let d3g = g.derivative(3);
    let dwg = wg.derivative(1);
    FieldProfile::combination(&[
        (-1.0, &g),
        (0.5 * e, &dg),
        (-0.125 * e * e, &d2g),
        (-0.5 * e * e, &wg),
        (e.powi(3) / 48.0, &d3g),
        (0.25 * e.powi(3), &dwg),
    ])
}

/// Continuum defect of the truncated first lattice equation,
/// `P(xi + eps) - P(xi) + eps W' - eps^3 W_tau`.
pub fn truncation_defect(w: &FieldProfile, epsilon: f64, p: u32) -> Result<FieldProfile> {
    let fields = AnsatzFields::new(w, epsilon, p)?;
    let w_tau = time_derivative(w, p, true);
    let shifted = fields.p_eps.translate(-epsilon);
    FieldProfile::combination(&[
        (1.0, &shifted),
        (-1.0, &fields.p_eps),
        (epsilon, &fields.dw),
        (-epsilon.powi(3), &w_tau),
    ])
}

/// Sup norm of [`truncation_defect`]; formally `O(eps^5)`.
pub fn verify_first_equation_truncation(w: &FieldProfile, epsilon: f64, p: u32) -> Result<f64> {
    Ok(truncation_defect(w, epsilon, p)?.sup_norm())
}

/// Additive perturbation of a lattice state.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub du: Vec<f64>,
    pub dq: Vec<f64>,
}

impl Perturbation {
    /// `||du|| + ||dq||`, the budget measure.
    pub fn size(&self) -> f64 {
        l2_unchecked(&self.du) + l2_unchecked(&self.dq)
    }

    /// Seeded uniform noise rescaled so that `||du|| = ||dq|| = size / 2`.
    pub fn random(sites: usize, size: f64, seed: u64) -> Result<Self> {
        if !(size >= 0.0) || !size.is_finite() {
            return Err(Error::invalid(format!("perturbation size {size} invalid")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<f64> {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = l2_unchecked(&v);
            v.into_iter().map(|x| x * 0.5 * size / norm).collect()
        };
        let du = draw(sites);
        let dq = draw(sites);
        Ok(Self { du, dq })
    }
}

/// Initial lattice state with its achieved initial error norms.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub state: LatticeState,
    /// `|| u - W(eps .) ||`
    pub err_u: f64,
    /// `|| du/dt + eps W'(eps .) ||` with `du/dt_n = q_{n+1} - q_n`.
    pub err_du: f64,
    pub perturbation_size: f64,
}

impl InitialData {
    pub fn total_error(&self) -> f64 {
        self.err_u + self.err_du
    }
}

/// `u = W0(eps n)`, `q = P_eps(eps n)`, plus an optional perturbation whose
/// size must not exceed `eps^{3/2}` unless `allow_over_budget`.
pub fn initial_lattice_data(
    w0: &FieldProfile,
    epsilon: f64,
    p: u32,
    perturbation: Option<&Perturbation>,
    allow_over_budget: bool,
) -> Result<InitialData> {
    let sites = lattice_size(w0.length(), epsilon)?;
    let fields = AnsatzFields::new(w0, epsilon, p)?;
    let mut u = sample_to_lattice(&fields.w, epsilon, 0.0)?;
    let mut q = sample_to_lattice(&fields.p_eps, epsilon, 0.0)?;
    let mut size = 0.0;
    if let Some(pert) = perturbation {
        if pert.du.len() != sites || pert.dq.len() != sites {
            return Err(Error::invalid(format!(
                "perturbation length {} does not match {sites} sites",
                pert.du.len()
            )));
        }
        size = pert.size();
        let budget = epsilon.powf(1.5);
        if size > budget * (1.0 + 1e-12) && !allow_over_budget {
            return Err(Error::BudgetViolation { size, budget });
        }
        for n in 0..sites {
            u[n] += pert.du[n];
            q[n] += pert.dq[n];
        }
    }
    let state = LatticeState::new(u, q, 0.0)?;
    let (err_u, err_du) = bound_lhs(&state, &fields, epsilon)?;
    Ok(InitialData {
        state,
        err_u,
        err_du,
        perturbation_size: size,
    })
}

/// The two terms of the error bound for `state` against the ansatz fields,
/// evaluated in the frame shifted by `state.t`.
pub(crate) fn bound_lhs(state: &LatticeState, fields: &AnsatzFields, epsilon: f64) -> Result<(f64, f64)> {
    let w = sample_to_lattice(&fields.w, epsilon, state.t)?;
    let dw = sample_to_lattice(&fields.dw, epsilon, state.t)?;
    let n = state.sites();
    let err_u = l2_unchecked(
        &state
            .u
            .iter()
            .zip(&w)
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>(),
    );
    let du: Vec<f64> = (0..n)
        .map(|i| state.q[(i + 1) % n] - state.q[i] + epsilon * dw[i])
        .collect();
    Ok((err_u, l2_unchecked(&du)))
}

/// `U = u - W(eps(. - t))`, `Q = q - P_eps(eps(. - t))` at `t = state.t`.
pub fn decompose(
    state: &LatticeState,
    w_at_t: &FieldProfile,
    epsilon: f64,
    p: u32,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let fields = AnsatzFields::new(w_at_t, epsilon, p)?;
    decompose_with(state, &fields)
}

pub(crate) fn decompose_with(
    state: &LatticeState,
    fields: &AnsatzFields,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let eps = fields.epsilon;
    let w = sample_to_lattice(&fields.w, eps, state.t)?;
    let pe = sample_to_lattice(&fields.p_eps, eps, state.t)?;
    if w.len() != state.sites() {
        return Err(Error::config(format!(
            "state has {} sites but L / eps gives {}",
            state.sites(),
            w.len()
        )));
    }
    let u_err = state.u.iter().zip(&w).map(|(a, b)| a - b).collect();
    let q_err = state.q.iter().zip(&pe).map(|(a, b)| a - b).collect();
    Ok((u_err, q_err))
}

/// Inverse of [`decompose`].
pub fn recompose(
    u_err: &[f64],
    q_err: &[f64],
    w_at_t: &FieldProfile,
    epsilon: f64,
    p: u32,
    t: f64,
) -> Result<LatticeState> {
    let fields = AnsatzFields::new(w_at_t, epsilon, p)?;
    let w = sample_to_lattice(&fields.w, epsilon, t)?;
    let pe = sample_to_lattice(&fields.p_eps, epsilon, t)?;
    if u_err.len() != w.len() || q_err.len() != w.len() {
        return Err(Error::config("error sequences do not match lattice size"));
    }
    LatticeState::new(
        w.iter().zip(u_err).map(|(a, b)| a + b).collect(),
        pe.iter().zip(q_err).map(|(a, b)| a + b).collect(),
        t,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::fit_scaling_exponent;
    use crate::gkdv::{soliton_profile, SolitonSpec};
    use crate::model::l2_norm;
    use std::f64::consts::PI;

    fn soliton(points: usize) -> FieldProfile {
        soliton_profile(&SolitonSpec::new(2, 1.0, 32.0).unwrap(), 64.0, points).unwrap()
    }

    #[test]
    fn zero_profile_gives_zero_fields() {
        let z = FieldProfile::zeros(64.0, 256, 0.0).unwrap();
        assert!(build_p_epsilon(&z, 0.1, 2).unwrap().is_zero());
        assert_eq!(verify_first_equation_truncation(&z, 0.1, 3).unwrap(), 0.0);
        let init = initial_lattice_data(&z, 0.1, 2, None, false).unwrap();
        assert!(init.state.u.iter().chain(&init.state.q).all(|&v| v == 0.0));
    }

    #[test]
    fn eps_zero_gives_minus_w() {
        let w = soliton(512);
        let p = build_p_epsilon(&w, 0.0, 2).unwrap();
        for (a, b) in p.values().iter().zip(w.values()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn single_mode_matches_closed_form() {
        // W = sin(k x), p = 2: W^2 = (1 - cos 2kx)/2, W W' = k sin cos.
        let length = 64.0;
        let k = 2.0 * PI / length;
        let eps = 0.1;
        let w = FieldProfile::from_fn(length, 256, 0.0, |x| (k * x).sin()).unwrap();
        let p = build_p_epsilon(&w, eps, 2).unwrap();
        for (x, v) in p.grid().iter().zip(p.values()) {
            let (s, c) = (k * x).sin_cos();
            let expected = -s + 0.5 * eps * k * c + 0.125 * eps * eps * k * k * s
                - 0.5 * eps * eps * s * s
                - eps.powi(3) / 48.0 * k.powi(3) * c
                + 0.25 * eps.powi(3) * 2.0 * s * k * c;
            assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
        }
    }

    #[test]
    fn p_eps_approaches_minus_w_linearly() {
        let w = soliton(1024);
        let pts: Vec<(f64, f64)> = [0.02, 0.01, 0.005]
            .iter()
            .map(|&e| {
                let p = build_p_epsilon(&w, e, 2).unwrap();
                let d = FieldProfile::combination(&[(1.0, &p), (1.0, &w)]).unwrap();
                (e, d.sup_norm())
            })
            .collect();
        let fit = fit_scaling_exponent(&pts).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.05, "slope {}", fit.slope);
    }

    #[test]
    fn truncation_defect_is_fifth_order() {
        let w = soliton(2048);
        let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&e| (e, verify_first_equation_truncation(&w, e, 2).unwrap()))
            .collect();
        let fit = fit_scaling_exponent(&pts).unwrap();
        assert!((fit.slope - 5.0).abs() < 0.3, "slope {}", fit.slope);
        let ratio = pts[0].1 / pts[1].1;
        assert!((ratio / 32.0 - 1.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn unperturbed_initial_error_within_budget() {
        let w = soliton(2048);
        let mut ratios = Vec::new();
        for eps in [0.2_f64, 0.1, 0.05] {
            let init = initial_lattice_data(&w, eps, 2, None, false).unwrap();
            assert!(init.err_u < 1e-12);
            // Only the velocity mismatch eps^3 W_tau survives, so the error is O(eps^{5/2}).
            ratios.push(init.total_error() / eps.powf(2.5));
            if eps <= 0.1 {
                assert!(init.total_error() <= eps.powf(1.5), "eps {eps}: {}", init.total_error());
            }
        }
        for r in &ratios {
            assert!((r / ratios[2] - 1.0).abs() < 0.1, "{ratios:?}");
        }
    }

    #[test]
    fn perturbation_at_budget_boundary() {
        let w = soliton(2048);
        let eps: f64 = 0.1;
        let n = lattice_size(64.0, eps).unwrap();
        let pert = Perturbation::random(n, eps.powf(1.5), 7).unwrap();
        assert!((pert.size() - eps.powf(1.5)).abs() < 1e-14);
        assert!(initial_lattice_data(&w, eps, 2, Some(&pert), false).is_ok());
        let big = Perturbation::random(n, 1.01 * eps.powf(1.5), 7).unwrap();
        assert!(matches!(
            initial_lattice_data(&w, eps, 2, Some(&big), false),
            Err(Error::BudgetViolation { .. })
        ));
        assert!(initial_lattice_data(&w, eps, 2, Some(&big), true).is_ok());
    }

    #[test]
    fn perturbation_is_reproducible() {
        let a = Perturbation::random(100, 0.3, 42).unwrap();
        let b = Perturbation::random(100, 0.3, 42).unwrap();
        let c = Perturbation::random(100, 0.3, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn decompose_round_trip() {
        let w = soliton(1024);
        let eps = 0.1;
        let init = initial_lattice_data(&w, eps, 2, None, false).unwrap();
        let (u0, q0) = decompose(&init.state, &w, eps, 2).unwrap();
        assert!(u0.iter().chain(&q0).all(|&v| v == 0.0));

        let mut state = init.state.clone();
        state.u[0] += 1e-3;
        let (u1, q1) = decompose(&state, &w, eps, 2).unwrap();
        assert!((u1[0] - 1e-3).abs() < 1e-15);
        assert!(u1[1..].iter().chain(&q1).all(|&v| v == 0.0));

        let n = state.sites();
        let pert = Perturbation::random(n, 0.05, 3).unwrap();
        let mut moved = state.clone();
        moved.t = 17.3;
        for i in 0..n {
            moved.u[i] += pert.du[i];
            moved.q[i] += pert.dq[i];
        }
        let (ue, qe) = decompose(&moved, &w, eps, 2).unwrap();
        let back = recompose(&ue, &qe, &w, eps, 2, moved.t).unwrap();
        for i in 0..n {
            assert!((back.u[i] - moved.u[i]).abs() < 1e-14);
            assert!((back.q[i] - moved.q[i]).abs() < 1e-14);
        }
        let _ = l2_norm(&ue).unwrap();
    }

    #[test]
    fn moving_frame_matches_advected_soliton() {
        // sample(W(., eps^3 t), shift t) == sample(W(., 0), shift t - c eps^2 t)
        let spec = SolitonSpec::new(2, 1.0, 32.0).unwrap();
        let eps: f64 = 0.1;
        let t = 250.0;
        let tau = eps.powi(3) * t;
        let w_t = soliton_profile(&spec.at_time(tau), 64.0, 2048).unwrap();
        let w_0 = soliton_profile(&spec, 64.0, 2048).unwrap();
        let a = sample_to_lattice(&w_t, eps, t).unwrap();
        let b = sample_to_lattice(&w_0, eps, t + spec.c * eps * eps * t).unwrap();
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }
}

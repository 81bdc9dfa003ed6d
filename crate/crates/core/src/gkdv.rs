//! Pseudo-spectral solver for the generalized KdV equation
//!
//! ```text
//! 2 W_tau + (1/12) W_xixixi + (W^p)_xi = 0
//! ```
//!
//! on a periodic interval, with exact solitary waves, conserved quantities
//! and Sobolev-norm tracking.
//!
//! Time stepping is ETDRK4 (Cox & Matthews) with the linear propagator
//! `exp(i k^3 dtau / 24)` applied exactly and the phi-function coefficients
//! evaluated by contour integrals (Kassam & Trefethen). The nonlinear term
//! `-(1/2) (W^p)_xi` is a pseudospectral product with optional 2/3-rule
//! dealiasing.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_scaling_exponent, FitResult};
use crate::model::{fractional_sobolev_norm, sobolev_norm, FieldProfile};
use crate::spectral::{fft_forward, fft_inverse, is_nyquist, two_thirds_mask, wavenumbers};

/// Sup-norm threshold beyond which a run is declared blown up.
pub const BLOW_UP_GUARD: f64 = 1e6;

/// Top-band share of `H^s` energy above which a profile is under-resolved.
pub const RESOLUTION_THRESHOLD: f64 = 1e-8;

const CONTOUR_POINTS: usize = 64;

/// Traveling solitary wave `W(xi, tau) = a sech^{2/(p-1)}(b (xi - center - c tau))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonSpec {
    pub p: u32,
    pub c: f64,
    pub center: f64,
}

impl SolitonSpec {
    pub fn new(p: u32, c: f64, center: f64) -> Result<Self> {
        if p < 2 {
            return Err(Error::invalid(format!("p = {p} must be >= 2")));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid(format!("soliton speed c = {c} must be positive")));
        }
        Ok(Self { p, c, center })
    }

    /// `a = (c (p + 1))^{1/(p-1)}`
    pub fn amplitude(&self) -> f64 {
        (self.c * (self.p as f64 + 1.0)).powf(1.0 / (self.p as f64 - 1.0))
    }

    /// `b = (p - 1) sqrt(6 c)`
    pub fn inverse_width(&self) -> f64 {
        (self.p as f64 - 1.0) * (6.0 * self.c).sqrt()
    }

    /// Value at `xi` on a period of length `length`, measuring distance to
    /// the nearest periodic image of the center.
    pub fn eval(&self, xi: f64, length: f64) -> f64 {
        let d = (xi - self.center + 0.5 * length).rem_euclid(length) - 0.5 * length;
        let sech = 1.0 / (self.inverse_width() * d).cosh();
        self.amplitude() * sech.powf(2.0 / (self.p as f64 - 1.0))
    }

    /// The same wave advanced by slow time `tau`.
    pub fn at_time(&self, tau: f64) -> Self {
        Self {
            center: self.center + self.c * tau,
            ..*self
        }
    }
}

/// Samples the solitary wave on an `points`-point grid over `[0, length)`.
pub fn soliton_profile(spec: &SolitonSpec, length: f64, points: usize) -> Result<FieldProfile> {
    SolitonSpec::new(spec.p, spec.c, spec.center)?;
    FieldProfile::from_fn(length, points, 0.0, |x| spec.eval(x, length))
}

/// Max of `|(1/12) W'' + W^p - 2 c W|` on the grid, derivatives spectral.
pub fn steady_residual(w: &FieldProfile, c: f64, p: u32) -> f64 {
    let d2 = w.derivative(2);
    w.values()
        .iter()
        .zip(d2.values())
        .map(|(&v, &v2)| (v2 / 12.0 + v.powi(p as i32) - 2.0 * c * v).abs())
        .fold(0.0, f64::max)
}

/// `W_tau = -(1/24) W_xixixi - (1/2) (W^p)_xi`, evaluated spectrally.
pub fn time_derivative(w: &FieldProfile, p: u32, dealias: bool) -> FieldProfile {
    let mut wp = w.power(p);
    if dealias {
        wp = wp.dealiased();
    }
    let d3 = w.derivative(3);
    let dwp = wp.derivative(1);
    FieldProfile::combination(&[(-1.0 / 24.0, &d3), (-0.5, &dwp)])
        .expect("profiles share a grid")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdvRunConfig {
    pub p: u32,
    pub length: f64,
    pub points: usize,
    pub dtau: f64,
    pub tau_end: f64,
    pub dealias: bool,
}

impl KdvRunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::config(format!("p = {} must be >= 2", self.p)));
        }
        if self.points < 256 || !self.points.is_power_of_two() {
            return Err(Error::config(format!(
                "grid size {} must be a power of two >= 256",
                self.points
            )));
        }
        if !(self.dtau > 0.0) {
            return Err(Error::config("dtau must be positive"));
        }
        if !(self.tau_end >= 0.0) {
            return Err(Error::config("tau_end must be nonnegative"));
        }
        if !(self.length > 0.0) {
            return Err(Error::config("period must be positive"));
        }
        Ok(())
    }

    /// Step count and the uniform step that lands exactly on `tau_end`.
    pub fn schedule(&self) -> (usize, f64) {
        if self.tau_end == 0.0 {
            return (0, self.dtau);
        }
        let steps = (self.tau_end / self.dtau - 1e-9).ceil().max(1.0) as usize;
        (steps, self.tau_end / steps as f64)
    }

    /// Highest mode retained by the solver.
    pub fn retained_modes(&self) -> i64 {
        if self.dealias {
            (self.points / 3) as i64
        } else {
            (self.points / 2) as i64
        }
    }
}

/// ETDRK4 stepper with precomputed coefficients for one step size.
#[derive(Debug, Clone)]
pub struct KdvSolver {
    p: u32,
    length: f64,
    points: usize,
    dtau: f64,
    dealias: bool,
    mask: Vec<bool>,
    nl_factor: Vec<Complex64>,
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
}

impl KdvSolver {
    /// Solver advancing by `cfg.dtau` per step.
    pub fn new(cfg: &KdvRunConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self::with_step(cfg, cfg.dtau))
    }

    /// Solver for an explicit step, which may be negative.
    pub fn with_step(cfg: &KdvRunConfig, dtau: f64) -> Self {
        let m = cfg.points;
        let k = wavenumbers(m, cfg.length);
        let mask = if cfg.dealias {
            two_thirds_mask(m)
        } else {
            vec![true; m]
        };
        let nl_factor = (0..m)
            .map(|j| {
                if is_nyquist(j, m) || !mask[j] {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, -0.5 * k[j])
                }
            })
            .collect();

        let roots: Vec<Complex64> = (0..CONTOUR_POINTS)
            .map(|j| {
                Complex64::from_polar(
                    1.0,
                    2.0 * std::f64::consts::PI * (j as f64 + 0.5) / CONTOUR_POINTS as f64,
                )
            })
            .collect();
        let n = m;
        let mut e = Vec::with_capacity(n);
        let mut e2 = Vec::with_capacity(n);
        let mut q = Vec::with_capacity(n);
        let mut f1 = Vec::with_capacity(n);
        let mut f2 = Vec::with_capacity(n);
        let mut f3 = Vec::with_capacity(n);
        for j in 0..n {
            let lin = if is_nyquist(j, m) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k[j].powi(3) / 24.0)
            };
            let z = lin * dtau;
            e.push(z.exp());
            e2.push((z * 0.5).exp());
            let mut sq = Complex64::new(0.0, 0.0);
            let mut s1 = sq;
            let mut s2 = sq;
            let mut s3 = sq;
            for r in &roots {
                let lr = z + r;
                let el = lr.exp();
                let lr2 = lr * lr;
                let lr3 = lr2 * lr;
                sq += ((lr * 0.5).exp() - 1.0) / lr;
                s1 += (-4.0 - lr + el * (4.0 - lr * 3.0 + lr2)) / lr3;
                s2 += (2.0 + lr + el * (lr - 2.0)) / lr3;
                s3 += (-4.0 - lr * 3.0 - lr2 + el * (4.0 - lr)) / lr3;
            }
            let scale = dtau / CONTOUR_POINTS as f64;
            q.push(sq * scale);
            f1.push(s1 * scale);
            f2.push(s2 * scale);
            f3.push(s3 * scale);
        }
        Self {
            p: cfg.p,
            length: cfg.length,
            points: m,
            dtau,
            dealias: cfg.dealias,
            mask,
            nl_factor,
            e,
            e2,
            q,
            f1,
            f2,
            f3,
        }
    }

    pub fn dtau(&self) -> f64 {
        self.dtau
    }

    /// Nonlinear term in coefficient space; also returns the sup norm of
    /// the synthesized field.
    fn nonlinear(&self, v: &[Complex64], scratch: &mut Vec<Complex64>) -> (Vec<Complex64>, f64) {
        scratch.clear();
        scratch.extend_from_slice(v);
        fft_inverse(scratch);
        let mut sup = 0.0_f64;
        let inv_m = 1.0 / self.points as f64;
        let p = self.p as i32;
        for c in scratch.iter_mut() {
            let w = c.re;
            sup = if w.is_finite() { sup.max(w.abs()) } else { f64::INFINITY };
            *c = Complex64::new(w.powi(p), 0.0);
        }
        fft_forward(scratch);
        let out = scratch
            .iter()
            .zip(&self.nl_factor)
            .map(|(c, f)| c * inv_m * f)
            .collect();
        (out, sup)
    }

    fn check(&self, sup: f64, tau: f64) -> Result<()> {
        if !(sup <= BLOW_UP_GUARD) {
            return Err(Error::BlowUp {
                time: tau,
                sup_norm: sup,
            });
        }
        Ok(())
    }

    fn check_grid(&self, w: &FieldProfile) -> Result<()> {
        if w.points() != self.points || (w.length() - self.length).abs() > 1e-12 * self.length {
            return Err(Error::invalid(format!(
                "profile grid ({}, {}) does not match solver grid ({}, {})",
                w.points(),
                w.length(),
                self.points,
                self.length
            )));
        }
        Ok(())
    }

    fn step_coeffs(&self, v: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>, tau: f64) -> Result<()> {
        let (nv, sup) = self.nonlinear(v, scratch);
        self.check(sup, tau)?;
        let a: Vec<Complex64> = (0..v.len()).map(|j| self.e2[j] * v[j] + self.q[j] * nv[j]).collect();
        let (na, _) = self.nonlinear(&a, scratch);
        let b: Vec<Complex64> = (0..v.len()).map(|j| self.e2[j] * v[j] + self.q[j] * na[j]).collect();
        let (nb, _) = self.nonlinear(&b, scratch);
        let c: Vec<Complex64> = (0..v.len())
            .map(|j| self.e2[j] * a[j] + self.q[j] * (nb[j] * 2.0 - nv[j]))
            .collect();
        let (nc, _) = self.nonlinear(&c, scratch);
        for j in 0..v.len() {
            v[j] = self.e[j] * v[j]
                + self.f1[j] * nv[j]
                + self.f2[j] * (na[j] + nb[j]) * 2.0
                + self.f3[j] * nc[j];
        }
        Ok(())
    }

    fn initial_coeffs(&self, w: &FieldProfile) -> Vec<Complex64> {
        w.coeffs()
            .iter()
            .zip(&self.mask)
            .map(|(c, &keep)| if keep { *c } else { Complex64::new(0.0, 0.0) })
            .collect()
    }

    /// Advances `w` by `steps` steps.
    pub fn advance(&self, w: &FieldProfile, steps: usize) -> Result<FieldProfile> {
        self.check_grid(w)?;
        let mut v = self.initial_coeffs(w);
        let mut scratch = Vec::with_capacity(self.points);
        let mut tau = w.tau();
        for _ in 0..steps {
            self.step_coeffs(&mut v, &mut scratch, tau)?;
            tau += self.dtau;
        }
        let out = FieldProfile::from_coeffs(v, self.length, tau)
            .map_err(|_| Error::BlowUp {
                time: tau,
                sup_norm: f64::INFINITY,
            })?;
        self.check(out.sup_norm(), tau)?;
        Ok(out)
    }

    pub fn step(&self, w: &FieldProfile) -> Result<FieldProfile> {
        self.advance(w, 1)
    }

    pub fn dealias(&self) -> bool {
        self.dealias
    }
}

/// Advances `w` by one step of `cfg.dtau`.
pub fn kdv_step(w: &FieldProfile, cfg: &KdvRunConfig) -> Result<FieldProfile> {
    KdvSolver::new(cfg)?.step(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdvInvariants {
    /// `int W`
    pub mass: f64,
    /// `int W^2`
    pub momentum: f64,
    /// `int (1/24) W_xi^2 - W^{p+1} / (p + 1)`
    pub energy: f64,
}

pub fn kdv_invariants(w: &FieldProfile, p: u32) -> KdvInvariants {
    let length = w.length();
    let k = w.wavenumbers();
    let c = w.coeffs();
    let mass = length * c[0].re;
    let momentum = length * c.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let m = w.points();
    let grad2 = length
        * c.iter()
            .enumerate()
            .filter(|(j, _)| !is_nyquist(*j, m))
            .map(|(j, c)| k[j] * k[j] * c.norm_sqr())
            .sum::<f64>();
    let pot = w.spacing()
        * w.values()
            .iter()
            .map(|v| v.powi(p as i32 + 1))
            .sum::<f64>();
    KdvInvariants {
        mass,
        momentum,
        energy: grad2 / 24.0 - pot / (p as f64 + 1.0),
    }
}

/// Index of the scale-invariant Sobolev space: `3/4, 1/4, 1/12` for
/// `p = 2, 3, 4` and `(p - 5) / (2 (p - 1))` for `p >= 5`.
pub fn critical_index(p: u32) -> f64 {
    match p {
        2 => 0.75,
        3 => 0.25,
        4 => 1.0 / 12.0,
        _ => (p as f64 - 5.0) / (2.0 * (p as f64 - 1.0)),
    }
}

/// `H^{s_p}` norm of `W`.
pub fn critical_norm(w: &FieldProfile, p: u32) -> Result<f64> {
    if p < 2 {
        return Err(Error::invalid(format!("p = {p} must be >= 2")));
    }
    fractional_sobolev_norm(w, critical_index(p))
}

/// True when the top third of the retained band carries more than
/// [`RESOLUTION_THRESHOLD`] of the `H^s` energy.
pub fn is_under_resolved(w: &FieldProfile, s: f64, dealias: bool) -> bool {
    let retained = if dealias {
        w.points() / 3
    } else {
        w.points() / 2
    };
    let cut = (2 * retained / 3) as i64;
    w.band_energy_fraction(s, cut) > RESOLUTION_THRESHOLD
}

/// One row of a KdV run log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdvSample {
    pub tau: f64,
    pub mass: f64,
    pub momentum: f64,
    pub energy: f64,
    pub hs_norm: f64,
    pub sup_norm: f64,
    pub resolution_flag: bool,
}

impl KdvSample {
    pub fn measure(w: &FieldProfile, p: u32, s: u32, dealias: bool) -> Self {
        let inv = kdv_invariants(w, p);
        Self {
            tau: w.tau(),
            mass: inv.mass,
            momentum: inv.momentum,
            energy: inv.energy,
            hs_norm: sobolev_norm(w, s as i32).unwrap_or(f64::NAN),
            sup_norm: w.sup_norm(),
            resolution_flag: is_under_resolved(w, s as f64, dealias),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KdvRun {
    pub samples: Vec<KdvSample>,
    pub final_profile: FieldProfile,
    pub s: u32,
}

/// Integrates from `w0` to `cfg.tau_end`, logging `samples + 1` evenly
/// spaced rows (including the initial one).
pub fn run_kdv(w0: &FieldProfile, cfg: &KdvRunConfig, s: u32, samples: usize) -> Result<KdvRun> {
    cfg.validate()?;
    let samples = samples.max(1);
    let (steps, _) = cfg.schedule();
    let per_sample = (steps as f64 / samples as f64).ceil().max(1.0) as usize;
    let total = per_sample * samples;
    let dtau = if cfg.tau_end > 0.0 {
        cfg.tau_end / total as f64
    } else {
        cfg.dtau
    };
    let solver = KdvSolver::with_step(cfg, dtau);
    let mut w = w0.clone();
    let mut out = Vec::with_capacity(samples + 1);
    out.push(KdvSample::measure(&w, cfg.p, s, cfg.dealias));
    if cfg.tau_end > 0.0 {
        for i in 1..=samples {
            w = solver.advance(&w, per_sample)?.with_tau(i as f64 * cfg.tau_end / samples as f64);
            out.push(KdvSample::measure(&w, cfg.p, s, cfg.dealias));
        }
    }
    Ok(KdvRun {
        samples: out,
        final_profile: w,
        s,
    })
}

/// `H^s` norm time series of a run with derived summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormGrowth {
    pub p: u32,
    pub s: u32,
    pub series: Vec<(f64, f64)>,
    pub resolution_warning: bool,
}

impl NormGrowth {
    /// `delta = sup_tau ||W(tau)||_{H^s}` over the run.
    pub fn sup(&self) -> f64 {
        self.series.iter().map(|s| s.1).fold(0.0, f64::max)
    }

    /// Largest relative deviation from the initial norm.
    pub fn relative_variation(&self) -> f64 {
        let n0 = self.series.first().map(|s| s.1).unwrap_or(0.0);
        if n0 == 0.0 {
            return 0.0;
        }
        self.series
            .iter()
            .map(|s| (s.1 / n0 - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Log-log fit of the norm against `tau` over `tau >= tau_min`.
    pub fn growth_exponent(&self, tau_min: f64) -> Result<FitResult> {
        let pts: Vec<(f64, f64)> = self
            .series
            .iter()
            .filter(|s| s.0 >= tau_min && s.0 > 0.0)
            .cloned()
            .collect();
        fit_scaling_exponent(&pts)
    }

    /// Envelope `delta(tau) <= A e^{K tau}`: `K` from a least-squares fit of
    /// `ln delta(tau)` (clamped at zero), `A` the smallest prefactor that
    /// covers every sample.
    pub fn exponential_envelope(&self) -> (f64, f64) {
        let mut running = 0.0_f64;
        let pts: Vec<(f64, f64)> = self
            .series
            .iter()
            .map(|&(t, n)| {
                running = running.max(n);
                (t, running)
            })
            .collect();
        let n = pts.len() as f64;
        if pts.len() < 2 || running <= 0.0 {
            return (running, 0.0);
        }
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
        let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1.ln() - my)).sum();
        let k = if stt > 0.0 { (sty / stt).max(0.0) } else { 0.0 };
        let a = pts
            .iter()
            .map(|p| p.1 * (-k * p.0).exp())
            .fold(0.0, f64::max);
        (a, k)
    }
}

/// Runs the solver and records the `H^s` norm at `samples + 1` times.
pub fn track_norm_growth(
    w0: &FieldProfile,
    cfg: &KdvRunConfig,
    s: u32,
    samples: usize,
) -> Result<(NormGrowth, KdvRun)> {
    let run = run_kdv(w0, cfg, s, samples)?;
    let growth = NormGrowth {
        p: cfg.p,
        s,
        series: run.samples.iter().map(|r| (r.tau, r.hs_norm)).collect(),
        resolution_warning: run.samples.iter().any(|r| r.resolution_flag),
    };
    Ok((growth, run))
}

//! FPU lattice in strain variables on a periodic chain,
//!
//! ```text
//! du_n/dt = q_{n+1} - q_n
//! dq_n/dt = u_n - u_{n-1} + eps^2 (u_n^p - u_{n-1}^p)
//! ```
//!
//! with its conserved energy and a soliton-ansatz initializer.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ansatz::initial_lattice_data;
use crate::error::{Error, Result};
use crate::gkdv::{soliton_profile, SolitonSpec};
use crate::model::{LatticeState, ModelParams};

/// Sup-norm guard on the strain.
pub const BLOW_UP_GUARD: f64 = 1e6;

/// Largest lattice time step accepted by the explicit integrators.
pub const MAX_DT: f64 = 0.25;

pub const DEFAULT_DT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Classical fourth-order Runge-Kutta.
    Rk4,
    /// Fourth-order symmetric composition (triple jump) of the
    /// kick-drift-kick splitting; symplectic.
    #[default]
    Splitting,
}

impl std::str::FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Integrator::Rk4),
            "splitting" => Ok(Integrator::Splitting),
            other => Err(Error::config(format!("unknown integrator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpuRunConfig {
    pub params: ModelParams,
    pub integrator: Integrator,
    pub t_end: f64,
    pub sample_stride: usize,
}

impl FpuRunConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.t_end >= 0.0) {
            return Err(Error::config("t_end must be nonnegative"));
        }
        if self.sample_stride == 0 {
            return Err(Error::config("sample_stride must be at least 1"));
        }
        if self.params.dt_lattice > MAX_DT {
            return Err(Error::config(format!(
                "dt = {} exceeds the stability cap {MAX_DT}",
                self.params.dt_lattice
            )));
        }
        Ok(())
    }
}

#[inline]
fn force(u: f64, eps2: f64, p: i32) -> f64 {
    u + eps2 * u.powi(p)
}

/// Right-hand side into preallocated buffers.
fn rhs_into(u: &[f64], q: &[f64], eps2: f64, p: i32, du: &mut [f64], dq: &mut [f64]) {
    let n = u.len();
    for i in 0..n {
        let next = if i + 1 == n { 0 } else { i + 1 };
        du[i] = q[next] - q[i];
    }
    let mut prev = force(u[n - 1], eps2, p);
    for i in 0..n {
        let cur = force(u[i], eps2, p);
        dq[i] = cur - prev;
        prev = cur;
    }
}

/// `(du/dt, dq/dt)` at `state`. `epsilon = 0` gives the linear chain.
pub fn fpu_rhs(state: &LatticeState, epsilon: f64, p: u32) -> (Vec<f64>, Vec<f64>) {
    let n = state.sites();
    let mut du = vec![0.0; n];
    let mut dq = vec![0.0; n];
    if n > 0 {
        rhs_into(&state.u, &state.q, epsilon * epsilon, p as i32, &mut du, &mut dq);
    }
    (du, dq)
}

/// `H = (1/2) sum (q_n^2 + u_n^2 + 2 eps^2 u_n^{p+1} / (p + 1))`.
pub fn fpu_energy(state: &LatticeState, epsilon: f64, p: u32) -> f64 {
    let c = 2.0 * epsilon * epsilon / (p as f64 + 1.0);
    0.5 * state
        .u
        .iter()
        .zip(&state.q)
        .map(|(u, q)| q * q + u * u + c * u.powi(p as i32 + 1))
        .sum::<f64>()
}

/// Energy of the unscaled chain `V(u) = u^2/2 + u^{p+1}/(p+1)` whose strain
/// is `eps^{2/(p-1)} u`: `eps^{4/(p-1)} H`.
pub fn physical_energy(h: f64, epsilon: f64, p: u32) -> f64 {
    epsilon.powf(4.0 / (p as f64 - 1.0)) * h
}

/// Fixed-step integrator with reusable scratch space.
#[derive(Debug, Clone)]
pub struct FpuStepper {
    eps2: f64,
    p: i32,
    dt: f64,
    integrator: Integrator,
    k: [Vec<f64>; 8],
    tmp_u: Vec<f64>,
    tmp_q: Vec<f64>,
}

// Triple-jump weights: gamma1 = 1 / (2 - 2^{1/3}), gamma0 = 1 - 2 gamma1.
const TJ1: f64 = 1.351_207_191_959_657_6;
const TJ0: f64 = -1.702_414_383_919_315_3;

impl FpuStepper {
    pub fn new(epsilon: f64, p: u32, dt: f64, integrator: Integrator, sites: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::config(format!("p = {p} must be >= 2")));
        }
        if dt == 0.0 || !dt.is_finite() || dt.abs() > MAX_DT {
            return Err(Error::config(format!("dt = {dt} must be nonzero with |dt| <= {MAX_DT}")));
        }
        let buf = || vec![0.0; sites];
        Ok(Self {
            eps2: epsilon * epsilon,
            p: p as i32,
            dt,
            integrator,
            k: [buf(), buf(), buf(), buf(), buf(), buf(), buf(), buf()],
            tmp_u: buf(),
            tmp_q: buf(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn rk4(&mut self, s: &mut LatticeState) {
        let n = s.sites();
        let h = self.dt;
        let [k1u, k1q, k2u, k2q, k3u, k3q, k4u, k4q] = &mut self.k;
        rhs_into(&s.u, &s.q, self.eps2, self.p, k1u, k1q);
        for i in 0..n {
            self.tmp_u[i] = s.u[i] + 0.5 * h * k1u[i];
            self.tmp_q[i] = s.q[i] + 0.5 * h * k1q[i];
        }
        rhs_into(&self.tmp_u, &self.tmp_q, self.eps2, self.p, k2u, k2q);
        for i in 0..n {
            self.tmp_u[i] = s.u[i] + 0.5 * h * k2u[i];
            self.tmp_q[i] = s.q[i] + 0.5 * h * k2q[i];
        }
        rhs_into(&self.tmp_u, &self.tmp_q, self.eps2, self.p, k3u, k3q);
        for i in 0..n {
            self.tmp_u[i] = s.u[i] + h * k3u[i];
            self.tmp_q[i] = s.q[i] + h * k3q[i];
        }
        rhs_into(&self.tmp_u, &self.tmp_q, self.eps2, self.p, k4u, k4q);
        let c = h / 6.0;
        for i in 0..n {
            s.u[i] += c * (k1u[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i]);
            s.q[i] += c * (k1q[i] + 2.0 * k2q[i] + 2.0 * k3q[i] + k4q[i]);
        }
    }

    /// `q += h (V'(u_n) - V'(u_{n-1}))`
    fn kick(&self, s: &mut LatticeState, h: f64) {
        let n = s.sites();
        let mut prev = force(s.u[n - 1], self.eps2, self.p);
        for i in 0..n {
            let cur = force(s.u[i], self.eps2, self.p);
            s.q[i] += h * (cur - prev);
            prev = cur;
        }
    }

    /// `u += h (q_{n+1} - q_n)`
    fn drift(&self, s: &mut LatticeState, h: f64) {
        let n = s.sites();
        for i in 0..n {
            let next = if i + 1 == n { 0 } else { i + 1 };
            s.u[i] += h * (s.q[next] - s.q[i]);
        }
    }

    fn verlet(&self, s: &mut LatticeState, h: f64) {
        self.kick(s, 0.5 * h);
        self.drift(s, h);
        self.kick(s, 0.5 * h);
    }

    /// One step; fails if the strain leaves the sup-norm guard.
    pub fn step(&mut self, s: &mut LatticeState) -> Result<()> {
        match self.integrator {
            Integrator::Rk4 => self.rk4(s),
            Integrator::Splitting => {
                let h = self.dt;
                self.verlet(s, TJ1 * h);
                self.verlet(s, TJ0 * h);
                self.verlet(s, TJ1 * h);
            }
        }
        s.t += self.dt;
        let sup = s.sup_norm();
        if !(sup <= BLOW_UP_GUARD) || s.q.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp {
                time: s.t,
                sup_norm: sup,
            });
        }
        Ok(())
    }

    pub fn advance(&mut self, s: &mut LatticeState, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step(s)?;
        }
        Ok(())
    }
}

/// Integrates to `cfg.t_end` and returns the state every `sample_stride`
/// steps, starting with the initial state. The last step is shortened so
/// the run ends exactly at `t_end`.
pub fn fpu_integrate(state: &LatticeState, cfg: &FpuRunConfig) -> Result<Vec<LatticeState>> {
    cfg.validate()?;
    if state.sites() != cfg.params.sites {
        return Err(Error::config(format!(
            "state has {} sites, parameters say {}",
            state.sites(),
            cfg.params.sites
        )));
    }
    let dt = cfg.params.dt_lattice;
    let steps = (cfg.t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let dt_eff = if steps > 0 { cfg.t_end / steps as f64 } else { dt };
    let mut stepper = FpuStepper::new(cfg.params.epsilon, cfg.params.p, dt_eff, cfg.integrator, state.sites())?;
    let mut s = state.clone();
    let t0 = s.t;
    let mut out = vec![s.clone()];
    for i in 1..=steps {
        stepper.step(&mut s)?;
        s.t = t0 + i as f64 * dt_eff;
        if i % cfg.sample_stride == 0 || i == steps {
            out.push(s.clone());
        }
    }
    Ok(out)
}

/// Ansatz state of the KdV solitary wave with speed `c` centered at `L/2`,
/// a leading-order surrogate for the exact lattice traveling wave accurate
/// to `O(eps^{3/2})` in `l2`.
pub fn traveling_wave_initializer(
    p: u32,
    c: f64,
    epsilon: f64,
    length: f64,
    points: usize,
) -> Result<LatticeState> {
    let spec = SolitonSpec::new(p, c, 0.5 * length)?;
    let w = soliton_profile(&spec, length, points)?;
    Ok(initial_lattice_data(&w, epsilon, p, None, false)?.state)
}

/// Site of the strain maximum refined by a parabola through its neighbours.
pub fn peak_position(u: &[f64]) -> f64 {
    let n = u.len();
    let (i, _) = u
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let a = u[(i + n - 1) % n];
    let b = u[i];
    let c = u[(i + 1) % n];
    let denom = a - 2.0 * b + c;
    let off = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    i as f64 + off
}

/// Writes `(t, u[0..N), q[0..N))` rows.
pub fn write_trajectory_csv(path: &Path, trajectory: &[LatticeState]) -> Result<()> {
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    let n = trajectory.first().map(|s| s.sites()).unwrap_or(0);
    let mut header = String::from("t");
    for i in 0..n {
        header.push_str(&format!(",u{i}"));
    }
    for i in 0..n {
        header.push_str(&format!(",q{i}"));
    }
    writeln!(out, "{header}").map_err(|e| Error::io(path, e))?;
    for s in trajectory {
        let mut line = format!("{:.16e}", s.t);
        for v in s.u.iter().chain(&s.q) {
            line.push_str(&format!(",{v:.16e}"));
        }
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

//! Experiment orchestration: configuration, time windows, epsilon sweeps
//! and their persistence.
//!
//! A sweep runs one independent cell per `epsilon` (in parallel on the
//! current rayon pool); results are aggregated in the order of
//! [`ExperimentSpec::epsilons`].

mod growth;
mod metastability;
pub mod output;
mod scan;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_scaling_exponent, FitResult};
use crate::gkdv::{soliton_profile, SolitonSpec};
use crate::lattice::{Integrator, DEFAULT_DT, MAX_DT};
use crate::model::{lattice_size, FieldProfile};

pub use growth::{run_norm_growth, NormGrowthReport};
pub use metastability::{orbital_distance, orbital_distance_to_profile, run_metastability, MetastabilityCell, MetastabilityReport};
pub use scan::{run_error_scan, run_residual_scan, ErrorCell, ErrorScanReport, ResidualCell, ResidualScanReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ResidualScan,
    /// Fixed KdV-time window `tau0`.
    ErrorScan,
    Theorem1Window,
    Theorem2Window,
    Metastability,
    KdvNormGrowth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    /// `t0 = r K^{-1} eps^{-3} |ln eps|`
    One,
    /// `t0 = (2pK)^{-1} eps^{-3} ln(r |ln eps|)`
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    #[default]
    None,
    /// Seeded noise of size `size * eps^{3/2}` measured as `||du|| + ||dq||`.
    Random { seed: u64, size: f64 },
}

/// Initial KdV profile of a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialProfile {
    /// Solitary wave of speed `c` centered at `L / 2`.
    #[default]
    Soliton,
    /// `amplitude * exp(-((x - L/2) / width)^2)`
    Gaussian { amplitude: f64, width: f64 },
    Zero,
}

fn default_p() -> u32 {
    2
}
fn default_epsilons() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}
fn default_r() -> f64 {
    0.1
}
fn one() -> f64 {
    1.0
}
fn default_length() -> f64 {
    64.0
}
fn default_points() -> usize {
    2048
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_dtau() -> f64 {
    1e-4
}
fn default_samples() -> usize {
    200
}
fn default_s() -> u32 {
    6
}
fn default_tau_end() -> f64 {
    5.0
}

/// One experiment, read from a single JSON document. Every field except
/// `kind` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default = "default_p")]
    pub p: u32,
    /// Strictly decreasing.
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(rename = "K", default = "one")]
    pub k: f64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(rename = "L", default = "default_length")]
    pub length: f64,
    #[serde(default)]
    pub perturbation: PerturbationMode,
    #[serde(default)]
    pub initial: InitialProfile,
    /// KdV-time window of `error_scan`; also overrides the theorem window
    /// of `metastability` when set.
    #[serde(default)]
    pub tau0: Option<f64>,
    /// KdV grid size.
    #[serde(default = "default_points")]
    pub points: usize,
    /// Largest lattice time step.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Largest KdV time step.
    #[serde(default = "default_dtau")]
    pub dtau: f64,
    /// Diagnostic samples per run (excluding `t = 0`).
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Sobolev index of the norms that are monitored.
    #[serde(default = "default_s")]
    pub s: u32,
    /// Final KdV time of `kdv_norm_growth`.
    #[serde(default = "default_tau_end")]
    pub tau_end: f64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Spec of the given kind with every other field at its default.
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            p: default_p(),
            epsilons: default_epsilons(),
            r: default_r(),
            k: 1.0,
            c: 1.0,
            length: default_length(),
            perturbation: PerturbationMode::None,
            initial: InitialProfile::Soliton,
            tau0: None,
            points: default_points(),
            dt: default_dt(),
            dtau: default_dtau(),
            samples: default_samples(),
            s: default_s(),
            tau_end: default_tau_end(),
            integrator: Integrator::default(),
            output_path: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::config(format!("p = {} must be >= 2", self.p)));
        }
        if self.epsilons.is_empty() {
            return Err(Error::config("epsilon list is empty"));
        }
        for w in self.epsilons.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::config("epsilon list must be strictly decreasing"));
            }
        }
        for &e in &self.epsilons {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::config(format!("epsilon = {e} outside (0, 1)")));
            }
            lattice_size(self.length, e)?;
        }
        if !(self.r > 0.0 && self.r < 0.5) {
            return Err(Error::config(format!("r = {} outside (0, 1/2)", self.r)));
        }
        if !(self.k > 0.0) {
            return Err(Error::config("K must be positive"));
        }
        if !(self.c > 0.0) {
            return Err(Error::config("soliton speed c must be positive"));
        }
        if self.points < 256 || !self.points.is_power_of_two() {
            return Err(Error::config(format!(
                "grid size {} must be a power of two >= 256",
                self.points
            )));
        }
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::config(format!("dt = {} outside (0, {MAX_DT}]", self.dt)));
        }
        if !(self.dtau > 0.0) {
            return Err(Error::config("dtau must be positive"));
        }
        if self.samples < 2 {
            return Err(Error::config("need at least 2 samples"));
        }
        if let Some(t) = self.tau0 {
            if !(t > 0.0) {
                return Err(Error::config("tau0 must be positive"));
            }
        }
        if !(self.tau_end > 0.0) {
            return Err(Error::config("tau_end must be positive"));
        }
        if let PerturbationMode::Random { size, .. } = self.perturbation {
            if !(size >= 0.0) || !size.is_finite() {
                return Err(Error::config("perturbation size must be nonnegative"));
            }
        }
        if let InitialProfile::Gaussian { width, .. } = self.initial {
            if !(width > 0.0) {
                return Err(Error::config("gaussian width must be positive"));
            }
        }
        if let Some(th) = self.theorem() {
            sweep_windows(&self.epsilons, self.r, self.k, self.p, th)?;
        }
        Ok(())
    }

    /// Theorem whose window the run uses, if any.
    pub fn theorem(&self) -> Option<Theorem> {
        match self.kind {
            ExperimentKind::Theorem1Window => Some(Theorem::One),
            ExperimentKind::Theorem2Window => Some(Theorem::Two),
            ExperimentKind::Metastability if self.tau0.is_none() => Some(if self.p <= 3 {
                Theorem::One
            } else {
                Theorem::Two
            }),
            _ => None,
        }
    }

    /// Lattice-time window of the cell at `epsilon`.
    pub fn window(&self, epsilon: f64) -> Result<Window> {
        match self.theorem() {
            Some(th) => time_window(epsilon, self.r, self.k, self.p, th),
            None => {
                let tau0 = self.tau0.unwrap_or(1.0);
                Ok(Window {
                    t0: tau0 / epsilon.powi(3),
                    tau0,
                })
            }
        }
    }

    /// Initial KdV profile on the spec's grid.
    pub fn initial_profile(&self) -> Result<FieldProfile> {
        let center = 0.5 * self.length;
        match self.initial {
            InitialProfile::Soliton => {
                soliton_profile(&SolitonSpec::new(self.p, self.c, center)?, self.length, self.points)
            }
            InitialProfile::Gaussian { amplitude, width } => {
                FieldProfile::from_fn(self.length, self.points, 0.0, |x| {
                    amplitude * (-((x - center) / width).powi(2)).exp()
                })
            }
            InitialProfile::Zero => FieldProfile::zeros(self.length, self.points, 0.0),
        }
    }

    /// Absolute perturbation size at `epsilon`.
    pub fn perturbation_size(&self, epsilon: f64) -> Option<(u64, f64)> {
        match self.perturbation {
            PerturbationMode::None => None,
            PerturbationMode::Random { seed, size } => Some((seed, size * epsilon.powf(1.5))),
        }
    }
}

/// Time window in lattice time and its KdV-time image `tau0 = eps^3 t0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub t0: f64,
    pub tau0: f64,
}

pub fn time_window(epsilon: f64, r: f64, k: f64, p: u32, theorem: Theorem) -> Result<Window> {
    if !(epsilon > 0.0 && epsilon < 1.0) || !(k > 0.0) || !(r > 0.0) {
        return Err(Error::config(format!(
            "invalid window parameters eps = {epsilon}, r = {r}, K = {k}"
        )));
    }
    let log_eps = epsilon.ln().abs();
    let tau0 = match theorem {
        Theorem::One => r * log_eps / k,
        Theorem::Two => {
            let arg = r * log_eps;
            if arg <= 1.0 {
                return Err(Error::config(format!(
                    "r |ln eps| = {arg} must exceed 1 for the double-log window"
                )));
            }
            arg.ln() / (2.0 * p as f64 * k)
        }
    };
    if !(tau0 > 0.0) {
        return Err(Error::config("nonpositive time window"));
    }
    Ok(Window {
        t0: tau0 / epsilon.powi(3),
        tau0,
    })
}

/// Windows over a sweep; `tau0` must increase strictly as `eps` decreases.
pub fn sweep_windows(epsilons: &[f64], r: f64, k: f64, p: u32, theorem: Theorem) -> Result<Vec<Window>> {
    let windows = epsilons
        .iter()
        .map(|&e| time_window(e, r, k, p, theorem))
        .collect::<Result<Vec<_>>>()?;
    for (i, w) in windows.windows(2).enumerate() {
        let (e0, e1) = (epsilons[i], epsilons[i + 1]);
        if (e1 < e0) != (w[1].tau0 > w[0].tau0) {
            return Err(Error::config("tau0 is not monotone along the sweep"));
        }
    }
    Ok(windows)
}

/// `F_K = int_0^inf e^{(2p-1) K tau} e^{-e^{2pK tau}} dtau
///      = Gamma(1 - 1/(2p), 1) / (2pK)`.
pub fn f_k_constant(p: u32, k: f64) -> f64 {
    let a = 1.0 - 1.0 / (2.0 * p as f64);
    statrs::function::gamma::gamma_ur(a, 1.0) * statrs::function::gamma::gamma(a) / (2.0 * p as f64 * k)
}

/// Flags carried by every summary.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryFlags {
    pub blow_up: bool,
    pub under_resolved: bool,
    pub coercivity_violations: usize,
    /// Some cell had `eps >= eps_0`.
    pub coercivity_not_guaranteed: bool,
    /// Some initial perturbation exceeded the `eps^{3/2}` budget.
    pub over_budget: bool,
    /// Orbital distance grew over the window.
    pub growth: bool,
}

impl SummaryFlags {
    /// Numerical failure in the sense of the CLI exit code.
    pub fn failed(&self) -> bool {
        self.blow_up || self.under_resolved
    }
}

/// JSON summary: `{spec, fits, flags, wall_time_s}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub spec: ExperimentSpec,
    pub fits: Vec<NamedFit>,
    pub flags: SummaryFlags,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedFit {
    pub quantity: String,
    #[serde(flatten)]
    pub fit: FitResult,
}

/// Named log-log fit, or `None` when the points do not support one.
pub(crate) fn scan_fit(quantity: &str, pts: &[(f64, f64)]) -> Option<NamedFit> {
    fit_scaling_exponent(pts).ok().map(|fit| NamedFit {
        quantity: quantity.to_string(),
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theorem_one_window() {
        let w = time_window(0.1, 0.25, 1.0, 2, Theorem::One).unwrap();
        assert!((w.t0 - 250.0 * 10f64.ln()).abs() < 1e-9);
        assert!((w.t0 - 575.646).abs() < 1e-3);
        assert!((w.tau0 - 0.25 * 10f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn theorem_two_window() {
        let w = time_window(0.01, 0.45, 1.0, 4, Theorem::Two).unwrap();
        let expected = 1e6 / 8.0 * (0.45 * 100f64.ln()).ln();
        assert!((w.t0 / expected - 1.0).abs() < 1e-12);
        assert!((w.t0 - 9.11e4).abs() < 0.01e4);
        assert!(time_window(0.1, 0.4, 1.0, 4, Theorem::Two).is_err());
    }

    #[test]
    fn windows_grow_as_eps_shrinks() {
        let eps = [0.2, 0.1, 0.05, 0.01];
        let w1 = sweep_windows(&eps, 0.1, 1.0, 2, Theorem::One).unwrap();
        assert!(w1.windows(2).all(|w| w[1].tau0 > w[0].tau0));
        let w2 = sweep_windows(&[0.05, 0.01, 0.001], 0.45, 1.0, 5, Theorem::Two).unwrap();
        assert!(w2.windows(2).all(|w| w[1].tau0 > w[0].tau0));
    }

    #[test]
    fn f_k_matches_quadrature() {
        for (p, k) in [(2, 1.0), (3, 0.5), (5, 2.0)] {
            let pf = p as f64;
            // Substituting x = e^{2pK tau} gives a smooth integrand on [1, inf);
            // truncate at 50 and use composite Simpson on a fine grid.
            let g = |x: f64| x.powf(-1.0 / (2.0 * pf)) * (-x).exp();
            let n = 200_000;
            let (a, b) = (1.0, 50.0);
            let h = (b - a) / n as f64;
            let mut s = g(a) + g(b);
            for i in 1..n {
                s += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            let quad = s * h / 3.0 / (2.0 * pf * k);
            assert!((f_k_constant(p, k) / quad - 1.0).abs() < 1e-9, "p={p}");
        }
    }

    #[test]
    fn spec_defaults_and_validation() {
        let spec = ExperimentSpec::from_json(r#"{"kind": "residual_scan"}"#).unwrap();
        assert_eq!(spec, ExperimentSpec::new(ExperimentKind::ResidualScan));
        let bad = [
            r#"{"kind": "error_scan", "epsilons": [0.1, 0.2, 0.05]}"#,
            r#"{"kind": "error_scan", "r": 0.5}"#,
            r#"{"kind": "error_scan", "K": 0}"#,
            r#"{"kind": "error_scan", "epsilons": [0.3]}"#,
            r#"{"kind": "theorem2_window", "p": 4, "r": 0.3}"#,
            r#"{"kind": "error_scan", "bogus": 1}"#,
            r#"{"kind": "nope"}"#,
        ];
        for b in bad {
            assert!(ExperimentSpec::from_json(b).is_err(), "{b}");
        }
        let spec = ExperimentSpec::from_json(
            r#"{"kind": "theorem1_window", "K": 2.0, "L": 32, "perturbation": {"random": {"seed": 3, "size": 0.5}}}"#,
        )
        .unwrap();
        assert_eq!(spec.k, 2.0);
        assert_eq!(spec.length, 32.0);
        assert_eq!(spec.perturbation_size(0.01), Some((3, 0.5e-3)));
    }

    #[test]
    fn metastability_window_choice() {
        let mut spec = ExperimentSpec::new(ExperimentKind::Metastability);
        assert_eq!(spec.theorem(), Some(Theorem::One));
        spec.p = 4;
        assert_eq!(spec.theorem(), Some(Theorem::Two));
        spec.tau0 = Some(0.5);
        assert_eq!(spec.theorem(), None);
        assert!((spec.window(0.1).unwrap().t0 - 500.0).abs() < 1e-9);
    }
}

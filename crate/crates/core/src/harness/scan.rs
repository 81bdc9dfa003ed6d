use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{scan_fit, ExperimentKind, ExperimentSpec, NamedFit, SummaryFlags};
use crate::ansatz::{initial_lattice_data, verify_first_equation_truncation, AnsatzFields, Perturbation};
use crate::diagnostics::{
    check_energy_derivative_bound, diagnose_with, residuals, EnergySample,
};
use crate::error::{Error, Result};
use crate::fit::{pairwise_exponent, FitResult};
use crate::gkdv::{critical_norm, is_under_resolved, KdvRunConfig, KdvSolver};
use crate::lattice::FpuStepper;
use crate::model::{lattice_size, sobolev_norm, ErrorRecord, FieldProfile, LatticeState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualCell {
    pub epsilon: f64,
    pub sites: usize,
    pub res1_l2: f64,
    pub res2_l2: f64,
    /// Sup norm of the continuum defect of the first lattice equation.
    pub defect_sup: f64,
}

#[derive(Debug, Clone)]
pub struct ResidualScanReport {
    pub cells: Vec<ResidualCell>,
    pub fits: Vec<NamedFit>,
}

impl ResidualScanReport {
    pub fn fit(&self, quantity: &str) -> Option<&FitResult> {
        self.fits.iter().find(|f| f.quantity == quantity).map(|f| &f.fit)
    }
}

/// Residual norms of the spec's initial profile at `t = 0` for each epsilon.
pub fn run_residual_scan(spec: &ExperimentSpec) -> Result<ResidualScanReport> {
    spec.validate()?;
    let w = spec.initial_profile()?;
    let cells = spec
        .epsilons
        .par_iter()
        .map(|&eps| {
            let snap = residuals(&w, eps, spec.p, 0.0)?;
            Ok(ResidualCell {
                epsilon: eps,
                sites: snap.res1.len(),
                res1_l2: snap.res1_l2,
                res2_l2: snap.res2_l2,
                defect_sup: verify_first_equation_truncation(&w, eps, spec.p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let series = |f: fn(&ResidualCell) -> f64| -> Vec<(f64, f64)> {
        cells.iter().map(|c| (c.epsilon, f(c))).collect()
    };
    let fits = [
        scan_fit("res1_l2", &series(|c| c.res1_l2)),
        scan_fit("res2_l2", &series(|c| c.res2_l2)),
        scan_fit("defect_sup", &series(|c| c.defect_sup)),
    ]
    .into_iter()
    .flatten()
    .collect();
    Ok(ResidualScanReport { cells, fits })
}

/// One epsilon of an error scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorCell {
    pub epsilon: f64,
    pub sites: usize,
    pub t0: f64,
    pub tau0: f64,
    /// `sup_t (err_u + err_du)` over the window.
    pub sup_error: f64,
    pub sup_err_u: f64,
    pub sup_err_du: f64,
    pub initial_error: f64,
    pub perturbation_size: f64,
    /// `sup_tau ||W(tau)||_{H^s}`.
    pub delta: f64,
    /// Critical-norm of `W(0)`, recorded for `p >= 5`.
    pub critical_norm: Option<f64>,
    /// `sup (dE/dt)_growth / (2 eps^3 E)`, the rate a Gronwall argument needs.
    pub empirical_k: f64,
    /// Smallest constant of the energy estimate over the probe windows.
    pub derivative_constant: f64,
    /// Largest relative gap between differenced and exact `dE/dt`.
    pub rate_mismatch: f64,
    pub coercivity_violations: usize,
    pub coercivity_guaranteed: bool,
    pub under_resolved: bool,
    pub blow_up: bool,
    pub over_budget: bool,
    pub failure: Option<String>,
    pub records: Vec<ErrorRecord>,
}

#[derive(Debug, Clone)]
pub struct ErrorScanReport {
    pub cells: Vec<ErrorCell>,
    pub fits: Vec<NamedFit>,
    /// Exponent between the last two cells.
    pub pairwise_exponent: Option<f64>,
    pub flags: SummaryFlags,
}

impl ErrorScanReport {
    pub fn fit(&self) -> Option<&FitResult> {
        self.fits.first().map(|f| &f.fit)
    }
}

/// Couples the lattice and KdV integrations over the spec's window for every
/// epsilon and records error norms at `samples + 1` evenly spaced times.
///
/// Blow-up and resolution problems are recorded in the cell flags; only
/// configuration errors abort the sweep.
pub fn run_error_scan(spec: &ExperimentSpec) -> Result<ErrorScanReport> {
    spec.validate()?;
    if matches!(
        spec.kind,
        ExperimentKind::ResidualScan | ExperimentKind::KdvNormGrowth
    ) {
        return Err(Error::config(format!("{:?} is not an error scan", spec.kind)));
    }
    let w0 = spec.initial_profile()?;
    let cells = spec
        .epsilons
        .par_iter()
        .map(|&eps| error_cell(spec, eps, &w0))
        .collect::<Result<Vec<_>>>()?;

    let usable: Vec<(f64, f64)> = cells
        .iter()
        .filter(|c| c.failure.is_none() && c.sup_error > 0.0)
        .map(|c| (c.epsilon, c.sup_error))
        .collect();
    let fits = scan_fit("sup_error", &usable).into_iter().collect();
    let pairwise_exponent = (usable.len() >= 2)
        .then(|| pairwise_exponent(usable[usable.len() - 2], usable[usable.len() - 1]));
    let flags = SummaryFlags {
        blow_up: cells.iter().any(|c| c.blow_up),
        under_resolved: cells.iter().any(|c| c.under_resolved),
        coercivity_violations: cells.iter().map(|c| c.coercivity_violations).sum(),
        coercivity_not_guaranteed: cells.iter().any(|c| !c.coercivity_guaranteed),
        over_budget: cells.iter().any(|c| c.over_budget),
        growth: false,
    };
    Ok(ErrorScanReport {
        cells,
        fits,
        pairwise_exponent,
        flags,
    })
}

struct Probe {
    rate_mismatch: f64,
    constant: f64,
}

fn error_cell(spec: &ExperimentSpec, eps: f64, w0: &FieldProfile) -> Result<ErrorCell> {
    let p = spec.p;
    let sites = lattice_size(spec.length, eps)?;
    let window = spec.window(eps)?;
    let pert = spec
        .perturbation_size(eps)
        .map(|(seed, size)| Perturbation::random(sites, size, seed))
        .transpose()?;
    let init = initial_lattice_data(w0, eps, p, pert.as_ref(), true)?;

    let samples = spec.samples;
    let interval = window.t0 / samples as f64;
    let fpu_steps = (interval / spec.dt - 1e-9).ceil().max(1.0) as usize;
    let dt = interval / fpu_steps as f64;
    let kcfg = KdvRunConfig {
        p,
        length: spec.length,
        points: spec.points,
        dtau: spec.dtau,
        tau_end: window.tau0,
        dealias: true,
    };
    kcfg.validate()?;
    let dtau_interval = eps.powi(3) * interval;
    let kdv_steps = (dtau_interval / spec.dtau - 1e-9).ceil().max(1.0) as usize;
    let kdv = KdvSolver::with_step(&kcfg, dtau_interval / kdv_steps as f64);
    let probe_kdv = KdvSolver::with_step(&kcfg, eps.powi(3) * dt);
    let mut stepper = FpuStepper::new(eps, p, dt, spec.integrator, sites)?;

    let mut cell = ErrorCell {
        epsilon: eps,
        sites,
        t0: window.t0,
        tau0: window.tau0,
        sup_error: 0.0,
        sup_err_u: 0.0,
        sup_err_du: 0.0,
        initial_error: init.total_error(),
        perturbation_size: init.perturbation_size,
        delta: 0.0,
        critical_norm: if p >= 5 {
            Some(critical_norm(w0, p)?)
        } else {
            None
        },
        empirical_k: 0.0,
        derivative_constant: 0.0,
        rate_mismatch: 0.0,
        coercivity_violations: 0,
        coercivity_guaranteed: true,
        under_resolved: false,
        blow_up: false,
        over_budget: init.perturbation_size > eps.powf(1.5) * (1.0 + 1e-12),
        failure: None,
        records: Vec::with_capacity(samples + 1),
    };

    let mut state = init.state;
    let mut w = w0.clone();
    for i in 0..=samples {
        let t = i as f64 * interval;
        state.t = t;
        w = w.with_tau(eps.powi(3) * t);
        cell.under_resolved |= is_under_resolved(&w, spec.s as f64, true);
        cell.delta = cell.delta.max(sobolev_norm(&w, spec.s as i32)?);

        let fields = AnsatzFields::new(&w, eps, p)?;
        let diag = diagnose_with(&state, &fields)?;
        let rec = diag.record;
        cell.sup_error = cell.sup_error.max(rec.total());
        cell.sup_err_u = cell.sup_err_u.max(rec.err_u);
        cell.sup_err_du = cell.sup_err_du.max(rec.err_du);
        if !rec.coercivity_ok {
            cell.coercivity_violations += 1;
        }
        cell.coercivity_guaranteed &= diag.energy.guaranteed;
        if diag.energy.e > 0.0 {
            let k = diag.rate.growth / (2.0 * eps.powi(3) * diag.energy.e);
            cell.empirical_k = cell.empirical_k.max(k);
        }
        cell.records.push(rec);

        match probe(&state, &w, diag.energy.e, &mut stepper, &probe_kdv, cell.delta, eps, p) {
            Ok(pr) => {
                cell.rate_mismatch = cell.rate_mismatch.max(pr.rate_mismatch);
                cell.derivative_constant = cell.derivative_constant.max(pr.constant);
            }
            Err(e) if e.is_numerical() => {
                cell.blow_up = true;
                cell.failure = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
        if i == samples {
            break;
        }
        let advanced = stepper
            .advance(&mut state, fpu_steps)
            .and_then(|_| kdv.advance(&w, kdv_steps));
        match advanced {
            Ok(next) => w = next,
            Err(e) if e.is_numerical() => {
                cell.blow_up = true;
                cell.failure = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(cell)
}

/// Differences `E` over two extra steps from `(state, w)` and compares the
/// centered difference with the exact rate at the middle point.
#[allow(clippy::too_many_arguments)]
fn probe(
    state: &LatticeState,
    w: &FieldProfile,
    e0: f64,
    stepper: &mut FpuStepper,
    kdv: &KdvSolver,
    delta: f64,
    eps: f64,
    p: u32,
) -> Result<Probe> {
    let mut s = state.clone();
    let mut window = vec![EnergySample { t: state.t, e: e0 }];
    let mut wk = w.clone();
    let mut mid_rate = 0.0;
    for j in 1..=2 {
        stepper.step(&mut s)?;
        s.t = state.t + j as f64 * stepper.dt();
        wk = kdv.step(&wk)?;
        let d = diagnose_with(&s, &AnsatzFields::new(&wk, eps, p)?)?;
        if j == 1 {
            mid_rate = d.rate.total();
        }
        window.push(EnergySample { t: s.t, e: d.energy.e });
    }
    let fd = (window[2].e - window[0].e) / (window[2].t - window[0].t);
    let scale = mid_rate.abs().max(fd.abs());
    let rate_mismatch = if scale > 0.0 {
        (fd - mid_rate).abs() / scale
    } else {
        0.0
    };
    let report = check_energy_derivative_bound(&window, delta, eps, p)?;
    Ok(Probe {
        rate_mismatch,
        constant: report.constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::InitialProfile;

    #[test]
    fn zero_profile_gives_zero_error() {
        let mut spec = ExperimentSpec::new(ExperimentKind::ErrorScan);
        spec.initial = InitialProfile::Zero;
        spec.tau0 = Some(0.05);
        spec.samples = 4;
        spec.points = 256;
        let report = run_error_scan(&spec).unwrap();
        for c in &report.cells {
            assert_eq!(c.sup_error, 0.0);
            assert!(c.records.iter().all(|r| r.total() == 0.0 && r.coercivity_ok));
            assert_eq!(c.records.len(), 5);
        }
        assert!(report.fit().is_none());
    }

    #[test]
    fn residual_scan_slopes() {
        let spec = ExperimentSpec::new(ExperimentKind::ResidualScan);
        let report = run_residual_scan(&spec).unwrap();
        assert_eq!(report.cells.len(), 3);
        assert!((report.fit("res1_l2").unwrap().slope - 4.5).abs() < 0.3);
        assert!((report.fit("res2_l2").unwrap().slope - 4.5).abs() < 0.3);
        assert!((report.fit("defect_sup").unwrap().slope - 5.0).abs() < 0.3);
    }

    #[test]
    fn short_scan_records_flags_and_rates() {
        let mut spec = ExperimentSpec::new(ExperimentKind::ErrorScan);
        spec.epsilons = vec![0.2, 0.1];
        spec.tau0 = Some(0.1);
        spec.samples = 10;
        spec.perturbation = crate::harness::PerturbationMode::Random { seed: 1, size: 0.5 };
        let report = run_error_scan(&spec).unwrap();
        for c in &report.cells {
            assert!(c.failure.is_none());
            assert!(!c.blow_up && !c.under_resolved && !c.over_budget);
            assert_eq!(c.coercivity_violations, 0);
            assert!(c.rate_mismatch < 0.01, "mismatch {}", c.rate_mismatch);
            assert!(c.sup_error >= c.initial_error);
            assert!(c.derivative_constant > 0.0);
        }
        assert!(report.pairwise_exponent.is_some());
    }
}

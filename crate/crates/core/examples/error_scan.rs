//! Couples the lattice with the KdV evolution and measures how the
//! approximation error scales with eps over a fixed KdV-time window.

use fpu_kdv::harness::{run_error_scan, ExperimentKind, ExperimentSpec, PerturbationMode};

fn main() -> fpu_kdv::Result<()> {
    let mut spec = ExperimentSpec::new(ExperimentKind::ErrorScan);
    spec.epsilons = vec![0.2, 0.1, 0.05];
    spec.tau0 = Some(0.2);
    spec.samples = 50;
    spec.perturbation = PerturbationMode::Random { seed: 1, size: 0.5 };
    let report = run_error_scan(&spec)?;
    for c in &report.cells {
        println!(
            "eps {:<5} t0 {:>8.1}  sup error {:.4e}  initial {:.4e}  coercivity violations {}  dE/dt mismatch {:.1e}",
            c.epsilon, c.t0, c.sup_error, c.initial_error, c.coercivity_violations, c.rate_mismatch
        );
    }
    if let Some(fit) = report.fit() {
        println!("sup error ~ eps^{:.3}", fit.slope);
    }
    if report.flags.failed() {
        println!("flags: {:?}", report.flags);
    }
    Ok(())
}

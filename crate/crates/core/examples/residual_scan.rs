//! Residual scan: the ansatz defect on the lattice should scale like eps^{9/2}
//! in l2.

use fpu_kdv::harness::{run_residual_scan, ExperimentKind, ExperimentSpec};

fn main() -> fpu_kdv::Result<()> {
    let mut spec = ExperimentSpec::new(ExperimentKind::ResidualScan);
    spec.epsilons = vec![0.2, 0.1, 0.05, 0.025];
    let report = run_residual_scan(&spec)?;
    for c in &report.cells {
        println!("eps {:<6} N {:<5} Res1 {:.4e}  Res2 {:.4e}", c.epsilon, c.sites, c.res1_l2, c.res2_l2);
    }
    for name in ["res1_l2", "res2_l2"] {
        if let Some(fit) = report.fit(name) {
            println!("{name}: slope {:.4}", fit.slope);
        }
    }
    Ok(())
}

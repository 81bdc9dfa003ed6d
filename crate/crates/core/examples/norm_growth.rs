//! Sobolev-norm growth along KdV solutions: flat for a soliton, and at most
//! polynomial for small data with p = 4.

use fpu_kdv::harness::{run_norm_growth, ExperimentKind, ExperimentSpec, InitialProfile};

fn main() -> fpu_kdv::Result<()> {
    let mut spec = ExperimentSpec::new(ExperimentKind::KdvNormGrowth);
    spec.samples = 20;
    spec.tau_end = 2.0;
    let soliton = run_norm_growth(&spec)?;
    println!(
        "p = 2 soliton: H^{} sup {:.6}, relative variation {:.2e}",
        spec.s,
        soliton.growth.sup(),
        soliton.growth.relative_variation()
    );

    spec.p = 4;
    spec.s = 2;
    spec.initial = InitialProfile::Gaussian { amplitude: 0.3, width: 2.0 };
    let small = run_norm_growth(&spec)?;
    let (a, k) = small.envelope;
    println!(
        "p = 4 Gaussian: critical norm {:.4}, growth exponent {:?}, envelope {a:.4} e^({k:.4} tau)",
        small.critical_norm,
        small.exponent()
    );
    if let Some(f) = small.f_k {
        println!("F_K at the measured K: {f:.4}");
    }
    Ok(())
}

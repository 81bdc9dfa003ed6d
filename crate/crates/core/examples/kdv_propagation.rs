//! Propagates a KdV soliton with the ETDRK4 solver and compares it with the
//! exact translate after one unit of KdV time.

use fpu_kdv::gkdv::{run_kdv, soliton_profile, KdvRunConfig, SolitonSpec};
use fpu_kdv::model::l2_norm;

fn main() -> fpu_kdv::Result<()> {
    let (p, c, length) = (2, 1.0, 64.0);
    let spec = SolitonSpec::new(p, c, 0.5 * length)?;
    let w0 = soliton_profile(&spec, length, 2048)?;
    let cfg = KdvRunConfig {
        p,
        length,
        points: 2048,
        dtau: 1e-3,
        tau_end: 1.0,
        dealias: true,
    };
    let run = run_kdv(&w0, &cfg, 6, 10)?;

    let first = run.samples[0];
    for s in &run.samples {
        println!(
            "tau {:4.2}  mass {:+.3e}  momentum {:+.3e}  energy {:+.3e}  H^6 {:.6}",
            s.tau,
            s.mass - first.mass,
            s.momentum - first.momentum,
            s.energy - first.energy,
            s.hs_norm
        );
    }

    let exact = soliton_profile(&spec.at_time(cfg.tau_end), length, 2048)?;
    let diff: Vec<f64> = run
        .final_profile
        .values()
        .iter()
        .zip(exact.values())
        .map(|(a, b)| a - b)
        .collect();
    let rel = l2_norm(&diff)? / l2_norm(exact.values())?;
    println!("relative shape error at tau = 1: {rel:.3e}");
    Ok(())
}

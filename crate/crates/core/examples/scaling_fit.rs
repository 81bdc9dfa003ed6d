//! Log-log least squares on (eps, value) pairs, the building block of every
//! scan.

use fpu_kdv::fit::{fit_scaling_exponent, pairwise_exponent};

fn main() -> fpu_kdv::Result<()> {
    let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05, 0.025]
        .iter()
        .map(|&e: &f64| (e, 3.0 * e.powf(1.4) * (1.0 + 0.2 * e)))
        .collect();
    let fit = fit_scaling_exponent(&pts)?;
    println!("slope {:.4}  prefactor {:.4}  rms {:.2e}", fit.slope, fit.prefactor(), fit.residual_rms);
    for w in pts.windows(2) {
        println!("  {} -> {}: {:.4}", w[0].0, w[1].0, pairwise_exponent(w[0], w[1]));
    }
    Ok(())
}

//! Lattice-time windows over which the approximation is controlled, for the
//! plain and the double-logarithmic regime.

use fpu_kdv::harness::{f_k_constant, sweep_windows, Theorem};

fn main() -> fpu_kdv::Result<()> {
    let eps = [0.2, 0.1, 0.05, 0.01, 0.001];
    let (r, k) = (0.1, 1.0);
    println!("p = 2, r = {r}, K = {k}");
    for (e, w) in eps.iter().zip(sweep_windows(&eps, r, k, 2, Theorem::One)?) {
        println!("  eps {e:<6} tau0 {:.4}  t0 {:.4e}", w.tau0, w.t0);
    }

    // r |ln eps| must exceed 1 in the double-log regime.
    let r = 0.45;
    println!("p = 4, r = {r}, K = {k}");
    for (e, w) in eps[1..].iter().zip(sweep_windows(&eps[1..], r, k, 4, Theorem::Two)?) {
        println!("  eps {e:<6} tau0 {:.4}  t0 {:.4e}", w.tau0, w.t0);
    }
    for p in [4, 5, 6] {
        println!("F_K(p = {p}, K = 1) = {:.6}", f_k_constant(p, 1.0));
    }
    Ok(())
}

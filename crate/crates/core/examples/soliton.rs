//! Closed-form gKdV solitary waves and how well they solve the traveling-wave
//! equation on the periodic grid.
//!
//! ```text
//! cargo run --release --example soliton
//! ```

use fpu_kdv::gkdv::{kdv_invariants, soliton_profile, steady_residual, SolitonSpec};
use fpu_kdv::model::sobolev_norm;

fn main() -> fpu_kdv::Result<()> {
    let length = 64.0;
    println!("{:>2} {:>10} {:>10} {:>12} {:>12} {:>12}", "p", "amplitude", "1/width", "residual", "momentum", "H^6");
    for p in 2..=5 {
        let spec = SolitonSpec::new(p, 1.0, 0.5 * length)?;
        let w = soliton_profile(&spec, length, 2048)?;
        let inv = kdv_invariants(&w, p);
        println!(
            "{p:>2} {:>10.6} {:>10.6} {:>12.3e} {:>12.6} {:>12.4}",
            spec.amplitude(),
            spec.inverse_width(),
            steady_residual(&w, 1.0, p),
            inv.momentum,
            sobolev_norm(&w, 6)?,
        );
    }
    Ok(())
}

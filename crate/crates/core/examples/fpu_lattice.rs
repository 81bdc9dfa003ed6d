//! Integrates the FPU strain system from the KdV-soliton ansatz and watches
//! the energy and the wave speed.

use fpu_kdv::lattice::{fpu_energy, peak_position, traveling_wave_initializer, FpuStepper, Integrator};

fn main() -> fpu_kdv::Result<()> {
    let (p, c, eps, length) = (2, 1.0, 0.1, 64.0);
    let mut state = traveling_wave_initializer(p, c, eps, length, 2048)?;
    let sites = state.sites();
    let h0 = fpu_energy(&state, eps, p);
    let x0 = peak_position(&state.u);

    let dt = 0.05;
    let mut stepper = FpuStepper::new(eps, p, dt, Integrator::Splitting, sites)?;
    let stride = 200;
    for _ in 0..10 {
        stepper.advance(&mut state, stride)?;
        let h = fpu_energy(&state, eps, p);
        println!("t {:6.1}  peak site {:8.3}  |H - H0| / H0 {:.2e}", state.t, peak_position(&state.u), ((h - h0) / h0).abs());
    }

    let mut travelled = peak_position(&state.u) - x0;
    if travelled < 0.0 {
        travelled += sites as f64;
    }
    // u_n(t) ~ W(eps(n - t) - c eps^3 t)
    println!("mean speed {:.5} (KdV prediction {:.5})", travelled / state.t, 1.0 + eps * eps * c);
    Ok(())
}

//! Relaxes the cis torsional ground state of the default surrogate and
//! compares the adiabatic and diabatic relaxations.

use polariflux::model::units::to_ev;
use polariflux::propagator::relax_cis_ground;
use polariflux::RunConfig;

fn main() -> polariflux::Result<()> {
    let cfg = RunConfig::surrogate(0.5, 0.04)?;
    let model = cfg.build_model()?;
    let omega = cfg.omega_c(&model);
    let spec = cfg.grid_spec(omega);
    let cis = relax_cis_ground(&model, omega, spec.n_phi, spec.n_x, spec.x_half_width, &cfg.relax_options())?;

    println!("grid {}x{}, dphi = {:.4} rad", spec.n_phi, spec.n_x, spec.dphi());
    println!("omega0 = {:.10} hartree ({:.5} eV) after {} iterations", cis.omega0, to_ev(cis.omega0), cis.report.iterations);
    if let Some(e) = cis.diabatic_energy {
        println!("lower-diabat relaxation: {:.10} hartree (difference {:.2e})", e, e - cis.omega0);
    }
    println!("cis population {:.12}", cis.report.cis_population.unwrap_or(f64::NAN));
    println!("cavity zero point {:.5} eV", to_ev(0.5 * omega));

    // torsional profile around the cis well
    let n = spec.n_phi;
    let peak = cis.phi_fn.iter().map(|v| v.abs()).fold(0.0, f64::max);
    for j in (0..n).step_by(n / 20) {
        let phi = -std::f64::consts::PI + j as f64 * spec.dphi();
        let bar = (40.0 * cis.phi_fn[j].abs() / peak).round() as usize;
        println!("{phi:+.3} {}", "#".repeat(bar));
    }
    Ok(())
}

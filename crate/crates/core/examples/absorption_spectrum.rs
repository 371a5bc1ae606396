//! Spectral function and two-photon spectrum on the 32x32 coarse problem,
//! checked against the dense eigenbasis sticks.

use polariflux::model::units::{fs, to_ev, to_fs};
use polariflux::oracle::dense_build;
use polariflux::propagator::{PropagateOptions, Simulation, TrajectoryRecord};
use polariflux::spectra::{find_peaks, omega_grid, relative_l2, sigma_spectrum, stick_spectrum_oracle, SpectrumResult, Window};
use polariflux::RunConfig;

fn main() -> polariflux::Result<()> {
    let mut cfg = RunConfig::surrogate(0.5, 0.04)?;
    cfg.n_phi = 32;
    cfg.n_x = 32;
    let sim = Simulation::prepare(&cfg)?;
    let omega0 = sim.cis.omega0;

    let h = 1.0;
    let n_int = (fs(100.0) / h).round() as usize;
    let t_total = n_int as f64 * h;
    let mut opts = PropagateOptions::new(to_fs(t_total), 0.5, 2);
    opts.populations = None;
    opts.record_fock2 = true;
    let (rec, _) = sim.run(&opts, &mut [])?;
    let omega = omega_grid(512, 4.0);
    let result = SpectrumResult::from_record(&rec, &sim.grid.spec, omega.clone(), omega0, Window::Fejer)?;

    let dense = dense_build(&sim.field, &sim.grid)?;
    let sticks = stick_spectrum_oracle(&dense, &sim.psi0, &omega, omega0, t_total, Window::Fejer)?;
    let times: Vec<f64> = (0..=n_int).map(|j| j as f64 * h).collect();
    let exact = TrajectoryRecord { autocorr: dense.autocorrelation(&sim.psi0, &times)?, dt: 0.5, cadence: 2, ..Default::default() };
    let from_exact = sigma_spectrum(&exact, &omega, omega0, Window::Fejer)?;
    println!("relative L2 against the sticks: exact C(t) {:.2e}, split-operator {:.2e}", relative_l2(&from_exact, &sticks), relative_l2(&result.sigma, &sticks));

    println!(" omega/eV   sigma      s/sigma");
    for i in find_peaks(&result.sigma, 0.05) {
        println!("{:8.4}  {:9.3e}  {:.4}", to_ev(omega[i]), result.sigma[i], result.ratio[i].unwrap_or(f64::NAN));
    }
    println!("max s/sigma {:.4}, min value {:.2e}", result.max_ratio(), result.min_value());
    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, result.to_csv())?;
        println!("wrote {path}");
    }
    Ok(())
}

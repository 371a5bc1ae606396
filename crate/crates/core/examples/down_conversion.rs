//! Default down-conversion run: impulsive excitation at half-gap tuning,
//! adiabatic-Fock populations and cis/trans split over 50 fs.
//!
//!     cargo run --release --example down_conversion -- [epsilon] [ratio] [t_fs]

use polariflux::observables::{series_max, time_average, CisTransRecorder};
use polariflux::propagator::Simulation;
use polariflux::sweep::pg2_series;
use polariflux::RunConfig;

fn main() -> polariflux::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let eps = args.first().copied().unwrap_or(0.04);
    let ratio = args.get(1).copied().unwrap_or(0.5);
    let mut cfg = RunConfig::surrogate(ratio, eps)?;
    cfg.total_fs = args.get(2).copied().unwrap_or(50.0);

    let sim = Simulation::prepare(&cfg)?;
    let mut cis_trans = CisTransRecorder::new(&sim.grid, &sim.model, cfg.phi_cut);
    let (rec, _) = sim.run(&Simulation::options(&cfg), &mut [&mut cis_trans])?;

    println!(" t/fs    P_e0    P_g1    P_e1    P_g2   trans   <n>");
    for (i, t) in rec.times_fs.iter().enumerate().step_by(8) {
        let p = &rec.populations[i];
        let ct = &cis_trans.tables[i];
        let trans = ct.single(0, true) + ct.single(1, true);
        println!(
            "{t:5.1}  {:.4}  {:.4}  {:.4}  {:.5}  {:.4}  {:.3}",
            p.get(1, 0),
            p.get(0, 1),
            p.get(1, 1),
            p.get(0, 2),
            trans,
            p.mean_photon_number()
        );
    }
    let pg2 = pg2_series(&rec.populations);
    let (peak, at) = series_max(&rec.times_fs, &pg2);
    let window = cfg.total_fs.min(50.0);
    println!("P_g2 peaks at {peak:.4} ({at:.1} fs); mean over {window} fs {:.3e}", time_average(&rec.times_fs, &pg2, window)?);
    println!("norm drift {:.1e}, relative energy drift {:.1e}, {:.1} s", rec.max_norm_drift(), rec.max_relative_energy_drift(), rec.wall_seconds);
    Ok(())
}

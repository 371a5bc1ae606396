//! One molecule against two at the same collective coupling, on a reduced
//! 48^3 grid: two-photon yield, excitation handed to the second molecule and
//! isomerization of the first.
//!
//!     cargo run --release --example two_molecules -- [n_grid] [t_fs]

use polariflux::observables::series_max;
use polariflux::sweep::{run_compare_case, CompareSpec};
use polariflux::RunConfig;

fn main() -> polariflux::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().map(|&v| v as usize).unwrap_or(48);
    let mut base = RunConfig::surrogate(0.5, 0.04)?;
    base.compare_n_phi = n;
    base.compare_n_x = n;
    base.compare_t_fs = args.get(1).copied().unwrap_or(40.0);
    base.cadence = 20;
    let spec = CompareSpec::from_config(&base, 1);
    println!("estimated memory {} MiB", spec.check_resources()?);

    for (label, n_mol, eps, ratio) in spec.runs().into_iter().take(2) {
        let run = run_compare_case(&spec.run_config(n_mol, eps, ratio), &label)?;
        let (pg2, at) = series_max(&run.times_fs, &run.pg2);
        let (tr, tr_at) = series_max(&run.times_fs, &run.transfer_series());
        let (iso, iso_at) = series_max(&run.times_fs, &run.isomerized_series());
        println!("{label}: N = {n_mol}, eps = {eps:.4}");
        println!("  max P_g2 {pg2:.4} at {at:.1} fs");
        println!("  molecule 1 trans {iso:.4} at {iso_at:.1} fs, molecule 2 excited {tr:.2e} at {tr_at:.1} fs");
    }
    Ok(())
}

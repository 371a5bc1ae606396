//! Polaritonic potential curves and light-induced avoided crossings for the
//! three cavity tunings, with CSV output when a directory is given.

use polariflux::model::surrogate::default_model;
use polariflux::model::units::to_ev;
use polariflux::model::CavitySetup;
use polariflux::polariton::{angle_samples, find_liacs, polaritonic_pes, resonance_angles};

fn main() -> polariflux::Result<()> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from);
    let model = default_model();
    for ratio in [0.25, 0.5, 0.75] {
        let omega = ratio * model.cis_gap();
        let cavity = CavitySetup::new(omega, 0.04)?;
        let roots = resonance_angles(&model, omega, 1e-10);
        println!("ratio {ratio}: omega_c = {:.3} eV, bare resonances {roots:.3?}", to_ev(omega));
        for l in find_liacs(&model, &cavity, 1e-8, 8).entries {
            println!(
                "  {:<12} phi_min {:+.4}  gap {:.4} eV  (2g = {:.4} eV)  curves {}/{}",
                l.branch,
                l.phi_min,
                to_ev(l.gap),
                to_ev(l.gap_first_order),
                l.lower,
                l.upper
            );
        }
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir)?;
            let pes = polaritonic_pes(&model, &cavity, &angle_samples(721), 8)?;
            let path = dir.join(format!("pes_ratio{ratio}.csv"));
            std::fs::write(&path, pes.to_csv())?;
            println!("  wrote {}", path.display());
        }
    }
    Ok(())
}

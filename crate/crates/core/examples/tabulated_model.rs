//! Tabulated diabatic models: the surrogate written to a table and read
//! back, then a user-supplied dipole that fades away from the cis basin,
//! showing how light-induced crossings inside the fade lose their gap.

use std::f64::consts::PI;

use polariflux::model::surrogate::default_model;
use polariflux::model::table::{load_tabulated, write_table};
use polariflux::model::units::to_ev;
use polariflux::model::{CavitySetup, DiabaticModel};
use polariflux::polariton::find_liacs;

fn report(name: &str, model: &DiabaticModel) -> polariflux::Result<()> {
    for ratio in [0.25, 0.5] {
        let cavity = CavitySetup::new(ratio * model.cis_gap(), 0.04)?;
        let liacs = find_liacs(model, &cavity, 1e-8, 8);
        let gaps: Vec<String> = liacs
            .entries
            .iter()
            .filter(|l| l.phi_min > 0.0)
            .map(|l| format!("{:.3} rad: {:.4} eV", l.phi_min, to_ev(l.gap)))
            .collect();
        println!("{name:<10} ratio {ratio}: {}", gaps.join(", "));
    }
    Ok(())
}

fn main() -> polariflux::Result<()> {
    let dir = scratch_dir();
    let surrogate = default_model();
    let path = dir.join("surrogate.dat");
    std::fs::write(&path, write_table(&surrogate, 720))?;
    let table = load_tabulated(&path, surrogate.mass())?;
    let worst = (0..=1000)
        .map(|i| -PI + 2.0 * PI * i as f64 / 1000.0)
        .map(|p| (table.eval(p).v_a - surrogate.eval(p).v_a).abs())
        .fold(0.0, f64::max);
    println!("table of {} rows reproduces V_a to {worst:.1e} hartree", 721);
    report("surrogate", &surrogate)?;

    // illustrative only: the dipole drops to half towards the trans side,
    // over a window centred at 1.2 rad
    let mass = surrogate.mass();
    let faded = DiabaticModel::custom(
        move |phi| {
            let mut p = surrogate.eval(phi);
            p.mu *= 0.75 + 0.25 * ((phi.abs() - 1.2) / 0.3).tanh();
            p
        },
        mass,
    )?;
    let path = dir.join("faded_dipole.dat");
    std::fs::write(&path, write_table(&faded, 720))?;
    report("faded mu", &load_tabulated(&path, mass)?)?;
    println!("tables in {}", dir.display());
    Ok(())
}

fn scratch_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join("polariflux_tables");
    std::fs::create_dir_all(&dir).expect("temp dir is writable");
    dir
}

//! A resonant two-level system in the cavity with frozen nuclei: grid
//! dynamics against the Rabi formula, and the dressed ladder from the Fock
//! basis against 2 g sqrt(n + 1).

use polariflux::grid::build_grid;
use polariflux::hamiltonian::assemble_single;
use polariflux::model::units::{ev, fs, to_fs};
use polariflux::model::{CavitySetup, DiabaticModel, DiabaticPoint};
use polariflux::oracle::{jaynes_cummings_splittings, rabi_reference};
use polariflux::polariton::polaritonic_energies;
use polariflux::propagator::{propagate, PropagateOptions};
use polariflux::{Complex64, GridSpec, Wavefunction};

fn main() -> polariflux::Result<()> {
    let omega = ev(1.35);
    let eps: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0.01);
    let model = DiabaticModel::constant(DiabaticPoint { v_a: omega, v_b: 0.0, v_ab: 0.0, mu: 1.0 }, 1e4)?;
    let cavity = CavitySetup::new(omega, eps)?;
    let g = eps * omega;

    let spec = GridSpec::new(8, 64, GridSpec::default_half_width(omega));
    let grid = build_grid(spec)?;
    let field = assemble_single(&model, &cavity, &grid)?;
    let chi0 = grid.fock_function(0, omega)?;
    let mut psi0 = Wavefunction::product(spec, 0, &chi0, &vec![Complex64::new(1.0, 0.0); spec.n_phi]);
    psi0.normalize();

    let mut opts = PropagateOptions::new(to_fs(std::f64::consts::PI / g), 0.5, 200);
    opts.populations = Some(3);
    let (rec, _) = propagate(&grid, &field, &model, &psi0, &opts, &mut [])?;
    println!("g/omega = {eps}, Rabi period {:.1} fs", to_fs(std::f64::consts::PI / g));
    println!(" t/fs    P_e0(grid)  P_e0(Rabi)   P_g1(grid)  P_g1(Rabi)");
    let mut worst: f64 = 0.0;
    for (i, t) in rec.times_fs.iter().enumerate() {
        let (up, down) = rabi_reference(g, 0.0, fs(*t));
        let p = &rec.populations[i];
        worst = worst.max((p.get(1, 0) - up).abs()).max((p.get(0, 1) - down).abs());
        if i % 4 == 0 {
            println!("{t:6.1}  {:.6}    {:.6}     {:.6}    {:.6}", p.get(1, 0), up, p.get(0, 1), down);
        }
    }
    println!("max deviation {worst:.2e} (counter-rotating terms)");

    let e = polaritonic_energies(&model, &cavity, 0.0, 40);
    let expected = jaynes_cummings_splittings(g, 4);
    println!("dressed splittings (hartree): Fock basis vs 2 g sqrt(n+1)");
    for (n, want) in expected.iter().enumerate() {
        let got = e[2 * n + 2] - e[2 * n + 1];
        println!("  n = {n}: {got:.6e}  {want:.6e}");
    }
    Ok(())
}

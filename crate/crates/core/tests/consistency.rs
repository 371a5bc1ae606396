//! Cross-module agreement between the grid engine and the Fock-basis picture.

use polariflux::grid::{build_grid, GridSpec};
use polariflux::hamiltonian::assemble_single;
use polariflux::model::surrogate::default_model;
use polariflux::model::{CavitySetup, DiabaticModel};
use polariflux::polariton::{find_liacs, polaritonic_energies};
use polariflux::propagator::{relax_ground_state, RelaxOptions};
use polariflux::{Complex64, Wavefunction};

#[test]
fn frozen_angle_relaxation_finds_lowest_polariton() {
    let model = default_model();
    let omega = 0.5 * model.cis_gap();
    let cavity = CavitySetup::new(omega, 0.04).unwrap();
    for phi in [std::f64::consts::PI, 2.14, 1.63, 1.0] {
        let frozen = DiabaticModel::constant(model.eval(phi), model.mass()).unwrap();
        let spec = GridSpec::new(8, 96, GridSpec::default_half_width(omega));
        let grid = build_grid(spec).unwrap();
        let field = assemble_single(&frozen, &cavity, &grid).unwrap();
        let chi0 = grid.fock_function(0, omega).unwrap();
        let flat = vec![Complex64::new(1.0, 0.0); spec.n_phi];
        let mut guess = Wavefunction::product(spec, 0, &chi0, &flat);
        // generic mixture: at the diabat crossing a + b is orthogonal to the ground state
        let other = Wavefunction::product(spec, 1, &chi0, &flat);
        for (a, b) in guess.data.iter_mut().zip(&other.data) {
            *a += 0.3 * b;
        }
        let opts = RelaxOptions { tol: 1e-14, ..Default::default() };
        let (_, report) = relax_ground_state(&grid, &field, &guess, &opts).unwrap();
        let lowest = polaritonic_energies(&model, &cavity, phi, 30)[0];
        assert!((report.energy - lowest).abs() < 1e-6, "phi {phi}: {} vs {lowest}", report.energy);
    }
}

#[test]
fn pes_converged_in_fock_cutoff() {
    let model = default_model();
    let cavity = CavitySetup::new(0.5 * model.cis_gap(), 0.04).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..=60 {
        let phi = -std::f64::consts::PI + i as f64 * std::f64::consts::PI / 30.0;
        let a = polaritonic_energies(&model, &cavity, phi, 8);
        let b = polaritonic_energies(&model, &cavity, phi, 12);
        for j in 0..6 {
            worst = worst.max((a[j] - b[j]).abs());
        }
    }
    assert!(worst < 1e-9, "{worst:e}");
}

#[test]
fn liacs_are_stable_in_fock_cutoff() {
    let model = default_model();
    let cavity = CavitySetup::new(0.5 * model.cis_gap(), 0.04).unwrap();
    let a = find_liacs(&model, &cavity, 1e-8, 8);
    let b = find_liacs(&model, &cavity, 1e-8, 12);
    assert_eq!(a.entries.len(), b.entries.len());
    for (x, y) in a.entries.iter().zip(&b.entries) {
        assert!((x.phi_min - y.phi_min).abs() < 1e-4);
        assert!((x.gap - y.gap).abs() / x.gap < 1e-3);
    }
}

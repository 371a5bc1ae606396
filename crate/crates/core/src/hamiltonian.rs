//! Position-space potential matrix on the grid and the full Hamiltonian.
//!
//! The light-matter term `g (a + a^dag)` is written in the quadrature
//! coordinate as `g sqrt(2 w_c) x`, so the grid and Fock-basis pictures
//! describe the same operator.
//!
//! For two molecules the 4x4 matrix is `M_1 (x) 1 + 1 (x) M_2 + w(x)`, where
//! each `M_i` is a 2x2 block on `(x, phi_i)` and `w(x) = w_c^2 x^2 / 2`. Only
//! the per-molecule blocks and `w` are stored.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{det_sum, Grid, GridSpec, Wavefunction};
use crate::model::{CavitySetup, DiabaticModel};

/// `g(phi) = epsilon * omega_c * mu(phi)`, hartree.
pub fn coupling_strength(model: &DiabaticModel, cavity: &CavitySetup, phi: f64) -> f64 {
    cavity.epsilon * cavity.omega_c * model.eval(phi).mu
}

/// Converts `a + a^dag` to the quadrature coordinate: `a + a^dag = sqrt(2 w_c) x`.
pub fn quadrature_factor(omega_c: f64) -> f64 {
    (2.0 * omega_c).sqrt()
}

/// One molecule's 2x2 block sampled on `[n_x][n_phi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MoleculeBlock {
    pub d_a: Vec<f64>,
    pub d_b: Vec<f64>,
    pub off: Vec<f64>,
}

impl MoleculeBlock {
    fn build(model: &DiabaticModel, cavity: &CavitySetup, grid: &Grid, coupling_scale: f64) -> Self {
        let n_phi = grid.spec.n_phi;
        let c = quadrature_factor(cavity.omega_c);
        let pts: Vec<_> = grid.phi.iter().map(|&p| model.eval(p)).collect();
        let len = grid.spec.n_x * n_phi;
        let mut blk = Self { d_a: vec![0.0; len], d_b: vec![0.0; len], off: vec![0.0; len] };
        for (ix, &x) in grid.x.iter().enumerate() {
            for (j, p) in pts.iter().enumerate() {
                let g = coupling_scale * cavity.epsilon * cavity.omega_c * p.mu;
                let dse = if cavity.include_dse { g * g / cavity.omega_c } else { 0.0 };
                let i = ix * n_phi + j;
                blk.d_a[i] = p.v_a + dse;
                blk.d_b[i] = p.v_b + dse;
                blk.off[i] = p.v_ab + g * c * x;
            }
        }
        blk
    }
}

#[derive(Debug, Clone)]
pub struct PotentialField {
    pub spec: GridSpec,
    pub mass: f64,
    pub omega_c: f64,
    pub include_dse: bool,
    pub molecules: Vec<MoleculeBlock>,
    /// Photon potential `w_c^2 x^2 / 2` per x point.
    pub photon: Vec<f64>,
}

/// Single-molecule field on `(x, phi)`.
pub fn assemble_single(model: &DiabaticModel, cavity: &CavitySetup, grid: &Grid) -> Result<PotentialField> {
    if grid.spec.n_molecules != 1 {
        return Err(Error::Shape("assemble_single needs a one-molecule grid".into()));
    }
    Ok(assemble(model, cavity, grid, &[1.0]))
}

/// Two identical molecules on `(x, phi_1, phi_2)`.
pub fn assemble_pair(model: &DiabaticModel, cavity: &CavitySetup, grid: &Grid) -> Result<PotentialField> {
    assemble_pair_scaled(model, cavity, grid, [1.0, 1.0])
}

/// Pair field with per-molecule multipliers on the light-matter coupling.
pub fn assemble_pair_scaled(
    model: &DiabaticModel,
    cavity: &CavitySetup,
    grid: &Grid,
    coupling_scale: [f64; 2],
) -> Result<PotentialField> {
    if grid.spec.n_molecules != 2 {
        return Err(Error::Shape("assemble_pair needs a two-molecule grid".into()));
    }
    Ok(assemble(model, cavity, grid, &coupling_scale))
}

/// Field for the grid's molecule count.
pub fn assemble_field(model: &DiabaticModel, cavity: &CavitySetup, grid: &Grid) -> Result<PotentialField> {
    match grid.spec.n_molecules {
        1 => assemble_single(model, cavity, grid),
        _ => assemble_pair(model, cavity, grid),
    }
}

fn assemble(model: &DiabaticModel, cavity: &CavitySetup, grid: &Grid, scales: &[f64]) -> PotentialField {
    let w2 = cavity.omega_c * cavity.omega_c;
    PotentialField {
        spec: grid.spec,
        mass: model.mass(),
        omega_c: cavity.omega_c,
        include_dse: cavity.include_dse,
        molecules: scales.iter().map(|&s| MoleculeBlock::build(model, cavity, grid, s)).collect(),
        photon: grid.x.iter().map(|x| 0.5 * w2 * x * x).collect(),
    }
}

impl PotentialField {
    pub fn n_elec(&self) -> usize {
        self.spec.n_elec()
    }

    /// Full electronic matrix at x row `ix` and flat angular index `jphi`,
    /// row-major, basis `{a, b}` or `{aa, ab, ba, bb}`.
    pub fn local_matrix(&self, ix: usize, jphi: usize) -> Vec<f64> {
        let n_phi = self.spec.n_phi;
        let w = self.photon[ix];
        match self.molecules.as_slice() {
            [m] => {
                let i = ix * n_phi + jphi;
                vec![m.d_a[i] + w, m.off[i], m.off[i], m.d_b[i] + w]
            }
            [m1, m2] => {
                let i1 = ix * n_phi + jphi / n_phi;
                let i2 = ix * n_phi + jphi % n_phi;
                let d1 = [m1.d_a[i1], m1.d_b[i1]];
                let d2 = [m2.d_a[i2], m2.d_b[i2]];
                let mut h = vec![0.0; 16];
                for k1 in 0..2 {
                    for k2 in 0..2 {
                        let k = 2 * k1 + k2;
                        h[k * 4 + k] = d1[k1] + d2[k2] + w;
                        // molecule-1 flip keeps k2, molecule-2 flip keeps k1
                        h[k * 4 + (2 * (1 - k1) + k2)] = m1.off[i1];
                        h[k * 4 + (2 * k1 + (1 - k2))] = m2.off[i2];
                    }
                }
                h
            }
            _ => unreachable!("one or two molecules"),
        }
    }

    /// Pointwise `V psi`.
    pub fn apply_potential(&self, psi: &Wavefunction) -> Wavefunction {
        let mut out = Wavefunction::zeros(psi.spec);
        let ne = self.n_elec();
        let pl = self.spec.phi_len();
        let bl = self.spec.block_len();
        let src = &psi.data;
        out.data.par_chunks_mut(pl).enumerate().for_each(|(row, chunk)| {
            let (k, ix) = (row / self.spec.n_x, row % self.spec.n_x);
            for (j, z) in chunk.iter_mut().enumerate() {
                let h = self.local_matrix(ix, j);
                let p = ix * pl + j;
                *z = (0..ne).map(|l| src[l * bl + p] * h[k * ne + l]).sum();
            }
        });
        out
    }

    pub fn potential_expectation(&self, psi: &Wavefunction) -> f64 {
        let v = self.apply_potential(psi);
        psi.inner(&v).map(|z| z.re).unwrap_or(f64::NAN)
    }
}

/// `H psi = (T + V) psi`.
pub fn apply_hamiltonian(field: &PotentialField, grid: &Grid, psi: &Wavefunction) -> Result<Wavefunction> {
    grid.check(psi)?;
    if field.spec != psi.spec {
        return Err(Error::Shape(format!("field grid {:?} differs from wavefunction grid {:?}", field.spec, psi.spec)));
    }
    let mut t = grid.apply_kinetic(psi, field.mass);
    let v = field.apply_potential(psi);
    t.data.par_iter_mut().zip(v.data.par_iter()).for_each(|(a, b)| *a += b);
    Ok(t)
}

/// `<psi|H|psi> / <psi|psi>` with the kinetic part taken in the spectral basis.
pub fn energy(field: &PotentialField, grid: &Grid, psi: &Wavefunction) -> f64 {
    let n2 = psi.norm_sqr();
    (grid.kinetic_expectation(psi, field.mass) + field.potential_expectation(psi)) / n2
}

/// `|| H psi - E psi ||` for normalized `psi`.
pub fn eigen_residual(field: &PotentialField, grid: &Grid, psi: &Wavefunction, e: f64) -> Result<f64> {
    let h = apply_hamiltonian(field, grid, psi)?;
    let w = psi.spec.weight();
    let s = det_sum(h.data.len(), |i| (h.data[i] - psi.data[i] * e).norm_sqr());
    Ok((s * w).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use crate::grid::build_grid;
    use crate::model::surrogate::default_model;
    use crate::model::units::ev;
    use crate::model::DiabaticPoint;
    use std::f64::consts::PI;

    fn random_psi(spec: GridSpec, seed: f64) -> Wavefunction {
        let data = (0..spec.len())
            .map(|i| Complex64::new((i as f64 * seed).sin(), (i as f64 * seed * 1.7 + 0.3).cos()))
            .collect();
        let mut psi = Wavefunction::from_data(spec, data).unwrap();
        psi.normalize();
        psi
    }

    #[test]
    fn coupling_strength_values() {
        let m = default_model();
        let cav = CavitySetup::new(ev(1.35), 0.04).unwrap();
        let g = coupling_strength(&m, &cav, 0.3);
        assert!((g - 0.0077276).abs() < 2e-7, "{g}");
        assert!((g / ev(1.0) - 0.2103).abs() < 1e-3);
        let cav0 = CavitySetup::new(ev(1.35), 0.0).unwrap();
        assert_eq!(coupling_strength(&m, &cav0, 0.3), 0.0);
        let cav1 = CavitySetup::new(ev(1.35), 0.01).unwrap();
        let g1 = coupling_strength(&m, &cav1, 0.3);
        assert!((g1 / ev(1.0) - 0.0526).abs() < 1e-3);
        assert!((g1 / cav1.omega_c - 0.039).abs() < 1e-3);
    }

    #[test]
    fn single_field_entries() {
        let m = default_model();
        let cav = CavitySetup::new(ev(1.35), 0.04).unwrap();
        // x grid containing 0 and 1, phi grid containing -pi and 0
        let grid = build_grid(GridSpec::new(8, 8, 4.0)).unwrap();
        let f = assemble_single(&m, &cav, &grid).unwrap();
        let ix0 = grid.x.iter().position(|&x| x == 0.0).unwrap();
        let ix1 = grid.x.iter().position(|&x| x == 1.0).unwrap();
        let j_pi = 0;
        let j_0 = grid.phi.iter().position(|&p| p.abs() < 1e-14).unwrap();
        let h = f.local_matrix(ix0, j_pi);
        assert!((h[1] - ev(0.05)).abs() < 1e-15);
        assert!((h[0] - h[3] - m.cis_gap()).abs() < 1e-15);
        let h = f.local_matrix(ix1, j_0);
        let g = coupling_strength(&m, &cav, 0.0);
        assert!((h[1] - (0.0018375 + g * quadrature_factor(cav.omega_c))).abs() < 1e-7);
        assert!((h[1] - 0.0018375 - 0.0024341).abs() < 1e-6);
        let w = 0.5 * cav.omega_c.powi(2);
        assert!((h[0] - (m.eval(0.0).v_a + w)).abs() < 1e-15);
        assert_eq!(h[1], h[2]);

        let cav0 = CavitySetup::new(ev(1.35), 0.0).unwrap();
        let f0 = assemble_single(&m.without_diabatic_coupling(), &cav0, &grid).unwrap();
        assert!(f0.molecules[0].off.iter().all(|&o| o == 0.0));

        let fd = assemble_single(&m, &cav.with_dse(true), &grid).unwrap();
        let shift = g * g / cav.omega_c;
        for i in 0..f.molecules[0].d_a.len() {
            assert!((fd.molecules[0].d_a[i] - f.molecules[0].d_a[i] - shift).abs() < 1e-15);
            assert!((fd.molecules[0].d_b[i] - f.molecules[0].d_b[i] - shift).abs() < 1e-15);
        }
    }

    #[test]
    fn pair_field_structure() {
        let m = default_model();
        let cav = CavitySetup::new(ev(1.35), 0.04).unwrap().with_molecules(2).unwrap();
        let spec = GridSpec::new(8, 8, 4.0).with_molecules(2);
        let grid = build_grid(spec).unwrap();
        let f = assemble_pair(&m, &cav, &grid).unwrap();
        let n = 8;
        for ix in [0, 3, 5] {
            for (j1, j2) in [(0, 0), (1, 6), (4, 2)] {
                let h = f.local_matrix(ix, j1 * n + j2);
                let hs = f.local_matrix(ix, j2 * n + j1);
                // swap symmetry with ab <-> ba relabel
                let perm = [0, 2, 1, 3];
                for r in 0..4 {
                    for c in 0..4 {
                        assert_eq!(h[r * 4 + c], hs[perm[r] * 4 + perm[c]]);
                        assert_eq!(h[r * 4 + c], h[c * 4 + r]);
                    }
                }
                let x = grid.x[ix];
                let g1 = coupling_strength(&m, &cav, grid.phi[j1]) * quadrature_factor(cav.omega_c);
                // <ab|H|bb> carries molecule 1's coupling
                assert!((h[4 + 3] - (m.eval(grid.phi[j1]).v_ab + g1 * x)).abs() < 1e-15);
                // no double flips
                assert_eq!(h[3], 0.0);
                assert_eq!(h[4 + 2], 0.0);
            }
        }
        let cav0 = CavitySetup::new(ev(1.35), 0.0).unwrap().with_molecules(2).unwrap();
        let f0 = assemble_pair(&m.without_diabatic_coupling(), &cav0, &grid).unwrap();
        let h = f0.local_matrix(2, 13);
        for r in 0..4 {
            for c in 0..4 {
                if r != c {
                    assert_eq!(h[r * 4 + c], 0.0);
                }
            }
        }
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let m = default_model().with_mass(50.0).unwrap();
        for n_mol in [1, 2] {
            let cav = CavitySetup::new(ev(1.35), 0.04).unwrap().with_molecules(n_mol).unwrap();
            let grid = build_grid(GridSpec::new(8, 10, 12.0).with_molecules(n_mol)).unwrap();
            let f = assemble_field(&m, &cav, &grid).unwrap();
            let a = random_psi(grid.spec, 0.37);
            let b = random_psi(grid.spec, 1.13);
            let hab = a.inner(&apply_hamiltonian(&f, &grid, &b).unwrap()).unwrap();
            let hba = b.inner(&apply_hamiltonian(&f, &grid, &a).unwrap()).unwrap();
            assert!((hab - hba.conj()).norm() < 1e-10 * hab.norm());
            let haa = a.inner(&apply_hamiltonian(&f, &grid, &a).unwrap()).unwrap();
            assert!(haa.im.abs() < 1e-12 * haa.norm());
            assert!((haa.re - energy(&f, &grid, &a)).abs() < 1e-10 * haa.re.abs());
        }
    }

    #[test]
    fn decoupled_oscillator_eigenstate() {
        let w = ev(1.35);
        let flat = DiabaticPoint { v_a: 0.0, v_b: 0.0, v_ab: 0.0, mu: 1.0 };
        let m = DiabaticModel::constant(flat, 1.0).unwrap();
        let cav = CavitySetup::new(w, 0.0).unwrap();
        let grid = build_grid(GridSpec::new(8, 128, GridSpec::default_half_width(w))).unwrap();
        let f = assemble_single(&m, &cav, &grid).unwrap();
        let phi0 = vec![Complex64::new((2.0 * PI).powf(-0.5), 0.0); 8];
        for n in 0..4 {
            let chi = grid.fock_function(n, w).unwrap();
            let psi = Wavefunction::product(grid.spec, 1, &chi, &phi0);
            let e = energy(&f, &grid, &psi);
            assert!((e - w * (n as f64 + 0.5)).abs() < 1e-10, "{n} {e}");
            assert!(eigen_residual(&f, &grid, &psi, e).unwrap() < 1e-8);
        }
    }
}

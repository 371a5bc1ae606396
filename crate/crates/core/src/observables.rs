//! Projection-based observables: adiabatic electron-photon populations,
//! adiabatic densities, cis/trans populations, photon number.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{det_sum, Grid, Wavefunction};
use crate::model::DiabaticModel;

/// Default cis/trans dividing angle, rad.
pub const PHI_CUT: f64 = 1.63;

/// Angle-dependent rotation to the adiabatic electronic basis:
/// `|e> = cos|a> + sin|b>`, `|g> = -sin|a> + cos|b>`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticRotation {
    pub theta: Vec<f64>,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl AdiabaticRotation {
    pub fn new(model: &DiabaticModel, phi: &[f64]) -> Self {
        let mut theta: Vec<Option<f64>> = phi
            .iter()
            .map(|&p| {
                let d = model.eval(p);
                let (dz, off) = (d.v_a - d.v_b, 2.0 * d.v_ab);
                if dz.abs() < 1e-14 && off.abs() < 1e-14 {
                    None
                } else {
                    Some(0.5 * off.atan2(dz))
                }
            })
            .collect();
        // degenerate points take the angle of a neighbour
        if theta.iter().all(Option::is_none) {
            theta.iter_mut().for_each(|t| *t = Some(0.0));
        }
        for j in 0..theta.len() {
            if theta[j].is_none() {
                let prev = (0..j).rev().find_map(|i| theta[i]);
                let next = (j + 1..theta.len()).find_map(|i| theta[i]);
                log::debug!("degenerate electronic matrix at phi = {:.6}; using neighbouring rotation", phi[j]);
                theta[j] = prev.or(next);
            }
        }
        let mut out: Vec<f64> = theta.into_iter().map(Option::unwrap).collect();
        for j in 1..out.len() {
            while out[j] - out[j - 1] > 0.5 * PI {
                out[j] -= PI;
            }
            while out[j] - out[j - 1] < -0.5 * PI {
                out[j] += PI;
            }
        }
        Self { cos: out.iter().map(|t| t.cos()).collect(), sin: out.iter().map(|t| t.sin()).collect(), theta: out }
    }
}

/// Diabatic to adiabatic components (`0 = g`, `1 = e`; pairs as `2 k_1 + k_2`).
/// The rotation matrix is symmetric and orthogonal, so the same call also
/// maps back.
pub fn adiabatic_transform(psi: &Wavefunction, rot: &AdiabaticRotation) -> Wavefunction {
    let spec = psi.spec;
    let n = spec.n_phi;
    let pl = spec.phi_len();
    let bl = spec.block_len();
    let mut out = Wavefunction::zeros(spec);
    let src = &psi.data;
    let apply = |a: Complex64, b: Complex64, j: usize| (-rot.sin[j] * a + rot.cos[j] * b, rot.cos[j] * a + rot.sin[j] * b);
    match spec.n_molecules {
        1 => {
            let (g, e) = out.data.split_at_mut(bl);
            g.par_chunks_mut(pl).zip(e.par_chunks_mut(pl)).enumerate().for_each(|(ix, (rg, re))| {
                for j in 0..n {
                    let p = ix * pl + j;
                    (rg[j], re[j]) = apply(src[p], src[bl + p], j);
                }
            });
        }
        _ => {
            out.data.par_chunks_mut(pl).enumerate().for_each(|(row, chunk)| {
                let (k, ix) = (row / spec.n_x, row % spec.n_x);
                let (k1, k2) = (k / 2, k % 2);
                for j1 in 0..n {
                    for j2 in 0..n {
                        let p = ix * pl + j1 * n + j2;
                        let c = [src[p], src[bl + p], src[2 * bl + p], src[3 * bl + p]];
                        // molecule 1 on the first index, then molecule 2
                        let (g0, e0) = apply(c[0], c[2], j1);
                        let (g1, e1) = apply(c[1], c[3], j1);
                        let (m0, m1) = if k1 == 0 { (g0, g1) } else { (e0, e1) };
                        let (g, e) = apply(m0, m1, j2);
                        chunk[j1 * n + j2] = if k2 == 0 { g } else { e };
                    }
                }
            });
        }
    }
    out
}

/// `P[kappa][n]`; `kappa` labels `g, e` or `gg, ge, eg, ee`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationTable {
    pub n_kappa: usize,
    pub n_max: usize,
    pub entries: Vec<f64>,
    /// `1 - sum(entries)`.
    pub tail: f64,
}

impl PopulationTable {
    pub fn get(&self, kappa: usize, n: usize) -> f64 {
        self.entries[kappa * (self.n_max + 1) + n]
    }

    pub fn label(&self, kappa: usize) -> &'static str {
        match self.n_kappa {
            2 => ["g", "e"][kappa],
            _ => ["gg", "ge", "eg", "ee"][kappa],
        }
    }

    pub fn tail_flagged(&self) -> bool {
        self.tail > 0.01
    }

    /// Photon distribution summed over electronic labels.
    pub fn photon_distribution(&self) -> Vec<f64> {
        (0..=self.n_max).map(|n| (0..self.n_kappa).map(|k| self.get(k, n)).sum()).collect()
    }

    /// `sum_n n P_n`.
    pub fn mean_photon_number(&self) -> f64 {
        self.photon_distribution().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Reduced table of one molecule of a pair (the other traced out).
    pub fn molecule(&self, i: usize) -> PopulationTable {
        if self.n_kappa == 2 {
            return self.clone();
        }
        let mut entries = vec![0.0; 2 * (self.n_max + 1)];
        for k in 0..4 {
            let ki = if i == 0 { k / 2 } else { k % 2 };
            for n in 0..=self.n_max {
                entries[ki * (self.n_max + 1) + n] += self.get(k, n);
            }
        }
        PopulationTable { n_kappa: 2, n_max: self.n_max, entries, tail: self.tail }
    }

    /// Column names `P_g0, P_g1, ...`.
    pub fn headers(&self) -> Vec<String> {
        (0..self.n_kappa).flat_map(|k| (0..=self.n_max).map(move |n| (k, n))).map(|(k, n)| format!("P_{}{}", self.label(k), n)).collect()
    }
}

/// `P_{kappa,n} = int dphi |int dx chi_n(x) psi_kappa(x, phi)|^2`.
pub fn adiabatic_populations(grid: &Grid, psi: &Wavefunction, rot: &AdiabaticRotation, fock: &[Vec<f64>]) -> PopulationTable {
    let ad = adiabatic_transform(psi, rot);
    fock_populations(grid, &ad, fock)
}

/// Fock projections of each stored component, without any rotation.
pub fn fock_populations(grid: &Grid, psi: &Wavefunction, fock: &[Vec<f64>]) -> PopulationTable {
    let spec = grid.spec;
    let pl = spec.phi_len();
    let n_max = fock.len() - 1;
    let dx = spec.dx();
    let dphi_n = spec.dphi().powi(spec.n_molecules as i32);
    let jobs: Vec<(usize, usize)> = (0..psi.n_elec).flat_map(|k| (0..=n_max).map(move |n| (k, n))).collect();
    let entries: Vec<f64> = jobs
        .par_iter()
        .map(|&(k, n)| {
            let c = psi.component(k);
            let mut acc = vec![Complex64::new(0.0, 0.0); pl];
            for (ix, &w) in fock[n].iter().enumerate() {
                for (a, &v) in acc.iter_mut().zip(&c[ix * pl..(ix + 1) * pl]) {
                    *a += v * w;
                }
            }
            acc.iter().map(|a| a.norm_sqr()).sum::<f64>() * dx * dx * dphi_n
        })
        .collect();
    let tail = psi.norm_sqr() - entries.iter().sum::<f64>();
    PopulationTable { n_kappa: psi.n_elec, n_max, entries, tail }
}

#[derive(Debug, Clone)]
pub struct AdiabaticDensity {
    /// `rho_kappa(x, phi...)` per adiabatic label, grid layout.
    pub rho: Vec<Vec<f64>>,
}

pub fn adiabatic_density(psi: &Wavefunction, rot: &AdiabaticRotation) -> AdiabaticDensity {
    let ad = adiabatic_transform(psi, rot);
    AdiabaticDensity { rho: (0..ad.n_elec).map(|k| ad.component(k).iter().map(|z| z.norm_sqr()).collect()).collect() }
}

impl AdiabaticDensity {
    pub fn integrals(&self, grid: &Grid) -> Vec<f64> {
        let w = grid.spec.weight();
        self.rho.iter().map(|r| det_sum(r.len(), |i| r[i]) * w).collect()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.rho.concat()
    }

    /// Angular index with the largest x-integrated density of label `k`.
    pub fn ridge(&self, grid: &Grid, k: usize) -> usize {
        let pl = grid.spec.phi_len();
        let r = &self.rho[k];
        (0..pl)
            .map(|j| (j, (0..grid.spec.n_x).map(|ix| r[ix * pl + j]).sum::<f64>()))
            .fold((0, f64::MIN), |best, c| if c.1 > best.1 { c } else { best })
            .0
    }

    /// Nodes of `rho_k` along x at angular index `j`: interior minima
    /// that fall below `1e-2` of the column maximum.
    pub fn x_nodes(&self, grid: &Grid, k: usize, j: usize) -> usize {
        let pl = grid.spec.phi_len();
        let col: Vec<f64> = (0..grid.spec.n_x).map(|ix| self.rho[k][ix * pl + j]).collect();
        let peak = col.iter().cloned().fold(0.0, f64::max);
        if peak == 0.0 {
            return 0;
        }
        let first = col.iter().position(|&v| v > 1e-2 * peak).unwrap_or(0);
        let last = col.iter().rposition(|&v| v > 1e-2 * peak).unwrap_or(0);
        (first + 1..last).filter(|&i| col[i] <= col[i - 1] && col[i] < col[i + 1] && col[i] < 1e-2 * peak).count()
    }

    /// Downsampled `(x, phi, rho)` rows for plotting (single molecule).
    pub fn to_csv(&self, grid: &Grid, stride: usize) -> String {
        let mut s = String::from("x_au,phi_rad,rho_g,rho_e\n");
        let n = grid.spec.n_phi;
        if grid.spec.n_molecules != 1 {
            return s;
        }
        for ix in (0..grid.spec.n_x).step_by(stride.max(1)) {
            for j in (0..n).step_by(stride.max(1)) {
                let i = ix * n + j;
                s.push_str(&format!("{:.6},{:.6},{:.6e},{:.6e}\n", grid.x[ix], grid.phi[j], self.rho[0][i], self.rho[1][i]));
            }
        }
        s
    }
}

/// Closed cis side `|phi| >= cut`.
pub fn is_cis(phi: f64, cut: f64) -> bool {
    phi.abs() >= cut
}

/// Fraction of the norm with every molecule on the cis side.
pub fn cis_population(grid: &Grid, psi: &Wavefunction, cut: f64) -> f64 {
    let n = grid.spec.n_phi;
    let pl = grid.spec.phi_len();
    let cis: Vec<bool> = (0..pl)
        .map(|j| match grid.spec.n_molecules {
            1 => is_cis(grid.phi[j], cut),
            _ => is_cis(grid.phi[j / n], cut) && is_cis(grid.phi[j % n], cut),
        })
        .collect();
    det_sum(psi.data.len(), |i| if cis[i % pl] { psi.data[i].norm_sqr() } else { 0.0 }) * grid.spec.weight()
}

/// Joint configuration/electronic populations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CisTransTable {
    pub n_molecules: usize,
    /// Single molecule: `[gC, eC, gT, eT]`. Pair: index
    /// `((k1 * 2 + c1) * 2 + k2) * 2 + c2` with `k = 0 (g), 1 (e)` and
    /// `c = 0 (cis), 1 (trans)`.
    pub entries: Vec<f64>,
}

impl CisTransTable {
    pub fn single(&self, kappa: usize, trans: bool) -> f64 {
        self.entries[2 * trans as usize + kappa]
    }

    pub fn joint(&self, k1: usize, t1: bool, k2: usize, t2: bool) -> f64 {
        self.entries[((k1 * 2 + t1 as usize) * 2 + k2) * 2 + t2 as usize]
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    pub fn labels(&self) -> Vec<String> {
        let ks = ["g", "e"];
        let cs = ["C", "T"];
        match self.n_molecules {
            1 => vec!["gC".into(), "eC".into(), "gT".into(), "eT".into()],
            _ => (0..16)
                .map(|i| {
                    let (k1, c1, k2, c2) = (i / 8, (i / 4) % 2, (i / 2) % 2, i % 2);
                    format!("{}{}_{}{}", ks[k1], cs[c1], ks[k2], cs[c2])
                })
                .collect(),
        }
    }
}

pub fn cis_trans_populations(grid: &Grid, psi: &Wavefunction, rot: &AdiabaticRotation, cut: f64) -> CisTransTable {
    let ad = adiabatic_transform(psi, rot);
    let n = grid.spec.n_phi;
    let pl = grid.spec.phi_len();
    let w = grid.spec.weight();
    let trans: Vec<usize> = grid.phi.iter().map(|&p| (!is_cis(p, cut)) as usize).collect();
    match grid.spec.n_molecules {
        1 => {
            let mut e = vec![0.0; 4];
            for k in 0..2 {
                let c = ad.component(k);
                for t in 0..2 {
                    e[2 * t + k] = det_sum(c.len(), |i| if trans[i % pl] == t { c[i].norm_sqr() } else { 0.0 }) * w;
                }
            }
            CisTransTable { n_molecules: 1, entries: e }
        }
        _ => {
            let mut e = vec![0.0; 16];
            for k in 0..4 {
                let (k1, k2) = (k / 2, k % 2);
                let c = ad.component(k);
                for t1 in 0..2 {
                    for t2 in 0..2 {
                        let s = det_sum(c.len(), |i| {
                            let j = i % pl;
                            if trans[j / n] == t1 && trans[j % n] == t2 {
                                c[i].norm_sqr()
                            } else {
                                0.0
                            }
                        });
                        e[((k1 * 2 + t1) * 2 + k2) * 2 + t2] = s * w;
                    }
                }
            }
            CisTransTable { n_molecules: 2, entries: e }
        }
    }
}

/// Records the cis/trans table at every sample.
pub struct CisTransRecorder<'a> {
    grid: &'a Grid,
    rotation: AdiabaticRotation,
    cut: f64,
    pub tables: Vec<CisTransTable>,
}

impl<'a> CisTransRecorder<'a> {
    pub fn new(grid: &'a Grid, model: &DiabaticModel, cut: f64) -> Self {
        Self { grid, rotation: AdiabaticRotation::new(model, &grid.phi), cut, tables: Vec::new() }
    }
}

impl crate::propagator::Observer for CisTransRecorder<'_> {
    fn observe(&mut self, _sample: usize, _t_au: f64, psi: &Wavefunction) -> Result<()> {
        self.tables.push(cis_trans_populations(self.grid, psi, &self.rotation, self.cut));
        Ok(())
    }
}

/// `<a^dag a> = (<p^2>/w_c + w_c <x^2> - 1) / 2`.
pub fn photon_number(grid: &Grid, psi: &Wavefunction, omega_c: f64) -> f64 {
    let pl = grid.spec.phi_len();
    let x2: Vec<f64> = grid.x.iter().map(|x| x * x).collect();
    let n_x = grid.spec.n_x;
    let w = grid.spec.weight();
    let xx = det_sum(psi.data.len(), |i| x2[(i / pl) % n_x] * psi.data[i].norm_sqr()) * w;
    let kx2 = grid.plan().spectral_table(|idx| grid.k_x[idx[0]].powi(2));
    let mut pp = 0.0;
    let mut scratch = Vec::new();
    for k in 0..psi.n_elec {
        let mut block = psi.component(k).to_vec();
        grid.plan().forward(&mut block, &mut scratch);
        pp += det_sum(block.len(), |i| kx2[i] * block[i].norm_sqr());
    }
    pp *= w / grid.spec.block_len() as f64;
    let n2 = psi.norm_sqr();
    0.5 * ((pp / omega_c + omega_c * xx) / n2 - 1.0)
}

/// `(1/T) int_0^T P dt` by trapezoids. The window may run past the last
/// sample by at most one sample spacing, in which case the average covers
/// the sampled span.
pub fn time_average(times: &[f64], values: &[f64], window: f64) -> Result<f64> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::Usage("time_average needs at least two aligned samples".into()));
    }
    let spacing = times[1] - times[0];
    let last = *times.last().unwrap();
    if window > last + spacing * (1.0 + 1e-9) || !(window > 0.0) {
        return Err(Error::Usage(format!("averaging window {window} exceeds the trajectory (last sample {last})")));
    }
    let end = window.min(last);
    let mut acc = 0.0;
    for i in 1..times.len() {
        let (t0, t1) = (times[i - 1], times[i]);
        if t0 >= end {
            break;
        }
        let (v0, v1) = (values[i - 1], values[i]);
        let t_hi = t1.min(end);
        let v_hi = v0 + (v1 - v0) * (t_hi - t0) / (t1 - t0);
        acc += 0.5 * (v0 + v_hi) * (t_hi - t0);
    }
    Ok(acc / (end - times[0]))
}

/// Maximum of a series and the time at which it occurs.
pub fn series_max(times: &[f64], values: &[f64]) -> (f64, f64) {
    values.iter().zip(times).fold((f64::MIN, 0.0), |best, (&v, &t)| if v > best.0 { (v, t) } else { best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};
    use crate::model::surrogate::default_model;
    use crate::model::units::ev;
    use crate::model::DiabaticPoint;

    fn random_psi(spec: GridSpec, seed: f64) -> Wavefunction {
        let data = (0..spec.len()).map(|i| Complex64::new((i as f64 * seed).sin(), (i as f64 * seed * 0.61).cos())).collect();
        let mut psi = Wavefunction::from_data(spec, data).unwrap();
        psi.normalize();
        psi
    }

    #[test]
    fn rotation_is_continuous_and_diagonalizes() {
        let m = default_model();
        let grid = build_grid(GridSpec::new(199, 8, 4.0)).unwrap();
        let rot = AdiabaticRotation::new(&m, &grid.phi);
        for j in 0..199 {
            let d = m.eval(grid.phi[j]);
            let (c, s) = (rot.cos[j], rot.sin[j]);
            // <e|H|g> vanishes and <g|H|g> is the lower energy
            let off = c * (-s) * d.v_a + (c * c - s * s) * d.v_ab + s * c * d.v_b;
            let eg = s * s * d.v_a - 2.0 * s * c * d.v_ab + c * c * d.v_b;
            assert!(off.abs() < 1e-14);
            assert!((eg - d.adiabatic_energies().0).abs() < 1e-14);
            if j > 0 {
                assert!((rot.theta[j] - rot.theta[j - 1]).abs() < 0.5);
            }
        }
        // g overlaps the lower diabat (b) positively at cis
        assert!(rot.cos[0] > 0.99);
    }

    #[test]
    fn uncoupled_rotation_is_a_relabeling() {
        let m = default_model().without_diabatic_coupling();
        let grid = build_grid(GridSpec::new(32, 8, 4.0)).unwrap();
        let rot = AdiabaticRotation::new(&m, &grid.phi);
        for j in 0..32 {
            let d = m.eval(grid.phi[j]);
            let lower_is_b = d.v_b < d.v_a;
            assert!((rot.cos[j].abs() - lower_is_b as u8 as f64).abs() < 1e-15);
        }
        let degenerate = DiabaticModel::constant(DiabaticPoint { v_a: 0.1, v_b: 0.1, v_ab: 0.0, mu: 1.0 }, 1.0).unwrap();
        let rot = AdiabaticRotation::new(&degenerate, &grid.phi);
        assert!(rot.theta.iter().all(|t| t.is_finite()));
    }

    #[test]
    fn transform_is_unitary_and_involutive() {
        let m = default_model();
        for n_mol in [1, 2] {
            let grid = build_grid(GridSpec::new(12, 8, 4.0).with_molecules(n_mol)).unwrap();
            let rot = AdiabaticRotation::new(&m, &grid.phi);
            let psi = random_psi(grid.spec, 0.77);
            let ad = adiabatic_transform(&psi, &rot);
            assert!((ad.norm_sqr() - psi.norm_sqr()).abs() < 1e-12);
            let back = adiabatic_transform(&ad, &rot);
            for (a, b) in back.data.iter().zip(&psi.data) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_projector_and_completeness() {
        let m = default_model();
        let w = ev(1.35);
        let grid = build_grid(GridSpec::new(32, 96, GridSpec::default_half_width(w))).unwrap();
        let rot = AdiabaticRotation::new(&m, &grid.phi);
        let fock = grid.fock_basis(5, w).unwrap();
        // |g(phi)> (x) chi_2 (x) f(phi), assembled in the diabatic basis
        let f: Vec<f64> = grid.phi.iter().map(|p| (-(p + 1.0).powi(2)).exp()).collect();
        let mut psi = Wavefunction::zeros(grid.spec);
        for ix in 0..96 {
            for j in 0..32 {
                let v = fock[2][ix] * f[j];
                let p = psi.index(0, ix, j);
                psi.data[p] = Complex64::new(-rot.sin[j] * v, 0.0);
                let p = psi.index(1, ix, j);
                psi.data[p] = Complex64::new(rot.cos[j] * v, 0.0);
            }
        }
        psi.normalize();
        let table = adiabatic_populations(&grid, &psi, &rot, &fock);
        assert!((table.get(0, 2) - 1.0).abs() < 1e-10);
        assert!(table.tail.abs() < 1e-10);
        assert!((photon_number(&grid, &psi, w) - 2.0).abs() < 1e-8);

        let psi = random_psi(grid.spec, 0.123);
        let table = adiabatic_populations(&grid, &psi, &rot, &fock);
        assert!((table.entries.iter().sum::<f64>() + table.tail - 1.0).abs() < 1e-10);
        assert!(table.entries.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn photon_number_estimators_agree() {
        let w = ev(1.35);
        let grid = build_grid(GridSpec::new(8, 128, GridSpec::default_half_width(w))).unwrap();
        let m = default_model();
        let rot = AdiabaticRotation::new(&m, &grid.phi);
        let fock = grid.fock_basis(5, w).unwrap();
        let mix: Vec<f64> = (0..128).map(|ix| 0.6 * fock[0][ix] + 0.5 * fock[1][ix] + 0.62 * fock[3][ix]).collect();
        let g: Vec<Complex64> = grid.phi.iter().map(|p| Complex64::new(1.0 + 0.3 * p.cos(), 0.2 * p.sin())).collect();
        let mut psi = Wavefunction::product(grid.spec, 1, &mix, &g);
        psi.normalize();
        let table = adiabatic_populations(&grid, &psi, &rot, &fock);
        let n_q = photon_number(&grid, &psi, w);
        assert!((n_q - table.mean_photon_number()).abs() < table.tail.abs() + 1e-8, "{n_q}");
        assert!(n_q >= -1e-10);
    }

    #[test]
    fn densities_and_configurations_are_complete() {
        let m = default_model();
        for n_mol in [1, 2] {
            let grid = build_grid(GridSpec::new(16, 8, 4.0).with_molecules(n_mol)).unwrap();
            let rot = AdiabaticRotation::new(&m, &grid.phi);
            let psi = random_psi(grid.spec, 0.31);
            let dens = adiabatic_density(&psi, &rot);
            assert!((dens.integrals(&grid).iter().sum::<f64>() - 1.0).abs() < 1e-10);
            let ct = cis_trans_populations(&grid, &psi, &rot, PHI_CUT);
            assert!((ct.total() - 1.0).abs() < 1e-12);
            assert_eq!(ct.labels().len(), ct.entries.len());
        }
        assert!(is_cis(1.63, PHI_CUT) && is_cis(-1.63, PHI_CUT) && !is_cis(1.62, PHI_CUT));
    }

    #[test]
    fn node_count_follows_photon_number() {
        let w = ev(1.35);
        let grid = build_grid(GridSpec::new(8, 128, GridSpec::default_half_width(w))).unwrap();
        let rot = AdiabaticRotation::new(&default_model(), &grid.phi);
        for n in 0..4 {
            let chi = grid.fock_function(n, w).unwrap();
            let g = vec![Complex64::new(1.0, 0.0); 8];
            let psi = Wavefunction::product(grid.spec, 1, &chi, &g);
            let dens = adiabatic_density(&psi, &rot);
            let k = if dens.integrals(&grid)[0] > 0.5 { 0 } else { 1 };
            let j = dens.ridge(&grid, k);
            assert_eq!(dens.x_nodes(&grid, k, j), n);
        }
    }

    #[test]
    fn time_average_rules() {
        let t: Vec<f64> = (0..=10).map(|i| i as f64 * 5.0).collect();
        let c = vec![0.3; 11];
        assert!((time_average(&t, &c, 50.0).unwrap() - 0.3).abs() < 1e-15);
        let ramp: Vec<f64> = t.iter().map(|x| x / 50.0).collect();
        assert!((time_average(&t, &ramp, 50.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((time_average(&t, &ramp, 20.0).unwrap() - 0.2).abs() < 1e-15);
        assert!(time_average(&t, &ramp, 52.0).is_ok());
        assert!(matches!(time_average(&t, &ramp, 60.0), Err(Error::Usage(_))));
    }
}

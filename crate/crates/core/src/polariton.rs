//! Polaritonic potential-energy curves from the electronic + cavity
//! Hamiltonian in a truncated Fock basis, and light-induced avoided crossings.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::coupling_strength;
use crate::model::units::to_ev;
use crate::model::{CavitySetup, DiabaticModel};
use crate::observables::AdiabaticRotation;

/// Scan density used to bracket resonances.
pub const SCAN_POINTS: usize = 2001;

/// Dominant `|kappa, n>` component of an eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Character {
    /// 0 = g, 1 = e.
    pub kappa: usize,
    pub n: usize,
    pub weight: f64,
}

impl Character {
    pub fn label(&self) -> String {
        format!("{},{}", ["g", "e"][self.kappa], self.n)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PesCurves {
    pub phi: Vec<f64>,
    /// `energies[i][j]`: j-th eigenvalue at `phi[i]`, hartree, ascending.
    pub energies: Vec<Vec<f64>>,
    pub characters: Vec<Vec<Character>>,
    pub n_fock: usize,
}

impl PesCurves {
    pub fn n_curves(&self) -> usize {
        2 * self.n_fock
    }

    pub fn curve(&self, j: usize) -> Vec<f64> {
        self.energies.iter().map(|e| e[j]).collect()
    }

    /// Characters dominated by one of the two highest Fock levels.
    pub fn truncation_flag(&self, c: &Character) -> bool {
        c.n + 2 >= self.n_fock
    }

    pub fn to_csv(&self) -> String {
        let nc = self.n_curves();
        let mut s = String::from("phi_rad");
        for j in 0..nc {
            write!(s, ",E_{j}_ev").unwrap();
        }
        for j in 0..nc {
            write!(s, ",char_{j},weight_{j}").unwrap();
        }
        s.push('\n');
        for (i, p) in self.phi.iter().enumerate() {
            write!(s, "{p:.8}").unwrap();
            for e in &self.energies[i] {
                write!(s, ",{:.10}", to_ev(*e)).unwrap();
            }
            for c in &self.characters[i] {
                let flag = if self.truncation_flag(c) { "*" } else { "" };
                write!(s, ",{}{},{:.6}", c.label(), flag, c.weight).unwrap();
            }
            s.push('\n');
        }
        s
    }
}

/// Polaritonic Hamiltonian at one angle; basis index `k * n_fock + n`
/// with `k = 0 (a), 1 (b)`.
pub fn polaritonic_matrix(model: &DiabaticModel, cavity: &CavitySetup, phi: f64, n_fock: usize) -> DMatrix<f64> {
    let d = model.eval(phi);
    let g = coupling_strength(model, cavity, phi);
    let dse = if cavity.include_dse { g * g / cavity.omega_c } else { 0.0 };
    let dim = 2 * n_fock;
    let mut h = DMatrix::zeros(dim, dim);
    for n in 0..n_fock {
        let zp = cavity.omega_c * (n as f64 + 0.5) + dse;
        h[(n, n)] = d.v_a + zp;
        h[(n_fock + n, n_fock + n)] = d.v_b + zp;
        for m in 0..n_fock {
            let mut v = if m == n { d.v_ab } else { 0.0 };
            if m == n + 1 {
                v += g * (m as f64).sqrt();
            }
            if n == m + 1 {
                v += g * (n as f64).sqrt();
            }
            h[(n, n_fock + m)] = v;
            h[(n_fock + m, n)] = v;
        }
    }
    h
}

fn sorted_eigen(h: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Sorted eigenvalues of the polaritonic Hamiltonian at one angle.
pub fn polaritonic_energies(model: &DiabaticModel, cavity: &CavitySetup, phi: f64, n_fock: usize) -> Vec<f64> {
    sorted_eigen(polaritonic_matrix(model, cavity, phi, n_fock)).0
}

pub fn polaritonic_pes(model: &DiabaticModel, cavity: &CavitySetup, phi: &[f64], n_fock: usize) -> Result<PesCurves> {
    if n_fock < 3 {
        return Err(Error::Config(format!("n_fock must be at least 3, got {n_fock}")));
    }
    let rot = AdiabaticRotation::new(model, phi);
    let rows: Vec<(Vec<f64>, Vec<Character>)> = phi
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let (vals, vecs) = sorted_eigen(polaritonic_matrix(model, cavity, p, n_fock));
            let (c, s) = (rot.cos[i], rot.sin[i]);
            let chars = (0..vals.len())
                .map(|j| {
                    let mut best = Character { kappa: 0, n: 0, weight: -1.0 };
                    for n in 0..n_fock {
                        let (a, b) = (vecs[(n, j)], vecs[(n_fock + n, j)]);
                        let wg = (-s * a + c * b).powi(2);
                        let we = (c * a + s * b).powi(2);
                        for (kappa, w) in [(0, wg), (1, we)] {
                            if w > best.weight {
                                best = Character { kappa, n, weight: w };
                            }
                        }
                    }
                    best
                })
                .collect();
            (vals, chars)
        })
        .collect();
    let (energies, characters) = rows.into_iter().unzip();
    Ok(PesCurves { phi: phi.to_vec(), energies, characters, n_fock })
}

/// Evenly spaced angles covering `[-pi, pi]` inclusive.
pub fn angle_samples(n: usize) -> Vec<f64> {
    (0..n).map(|i| -PI + 2.0 * PI * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Liac {
    /// Root of `E_up - E_low = omega_c`, rad.
    pub phi_resonance: f64,
    /// Location of the minimum polaritonic gap near the root, rad.
    pub phi_min: f64,
    /// Minimum gap, hartree.
    pub gap: f64,
    /// First-order estimate `2 g(phi_resonance)`, hartree.
    pub gap_first_order: f64,
    pub lower: usize,
    pub upper: usize,
    /// Resonant pair, e.g. `e,0 / g,1`.
    pub branch: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LiacReport {
    pub omega_c: f64,
    pub epsilon: f64,
    pub n_fock: usize,
    pub entries: Vec<Liac>,
}

impl LiacReport {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Angles where the bare adiabatic gap equals `omega_c`.
pub fn resonance_angles(model: &DiabaticModel, omega_c: f64, tol: f64) -> Vec<f64> {
    let f = |p: f64| model.eval(p).adiabatic_gap() - omega_c;
    let xs = angle_samples(SCAN_POINTS);
    let mut roots = Vec::new();
    for w in xs.windows(2) {
        let (a, b) = (f(w[0]), f(w[1]));
        if a == 0.0 {
            roots.push(w[0]);
        } else if (a < 0.0) != (b < 0.0) && b != 0.0 {
            roots.push(bisect(f, w[0], w[1], tol));
        }
    }
    roots
}

/// Golden-section minimum of `f` on `[a, b]`.
fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    while (b - a).abs() > tol {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    0.5 * (a + b)
}

/// Locates the resonances and the polaritonic gap opened at each.
pub fn find_liacs(model: &DiabaticModel, cavity: &CavitySetup, tol: f64, n_fock: usize) -> LiacReport {
    let omega = cavity.omega_c;
    let mut entries = Vec::new();
    for phi_r in resonance_angles(model, omega, tol) {
        let (e_low, _) = model.eval(phi_r).adiabatic_energies();
        // |e,0> and |g,1> meet at E_g + 3w/2 = E_e + w/2
        let target = e_low + 1.5 * omega;
        let vals = polaritonic_energies(model, cavity, phi_r, n_fock);
        let lower = (0..vals.len() - 1)
            .min_by(|&i, &j| {
                let mi = (0.5 * (vals[i] + vals[i + 1]) - target).abs();
                let mj = (0.5 * (vals[j] + vals[j + 1]) - target).abs();
                mi.total_cmp(&mj)
            })
            .unwrap();
        let gap_at = |p: f64| {
            let v = polaritonic_energies(model, cavity, p, n_fock);
            v[lower + 1] - v[lower]
        };
        // scan +-0.2 rad, then refine around the best sample
        let span = 0.2;
        let n_scan = 201;
        let (mut best, mut best_gap) = (phi_r, gap_at(phi_r));
        for i in 0..n_scan {
            let p = phi_r - span + 2.0 * span * i as f64 / (n_scan - 1) as f64;
            let gp = gap_at(p);
            if gp < best_gap {
                best = p;
                best_gap = gp;
            }
        }
        let step = 2.0 * span / (n_scan - 1) as f64;
        let phi_min = golden_min(gap_at, best - step, best + step, tol);
        entries.push(Liac {
            phi_resonance: phi_r,
            phi_min,
            gap: gap_at(phi_min),
            gap_first_order: 2.0 * coupling_strength(model, cavity, phi_r),
            lower,
            upper: lower + 1,
            branch: "e,0 / g,1".into(),
        });
    }
    LiacReport { omega_c: omega, epsilon: cavity.epsilon, n_fock, entries }
}

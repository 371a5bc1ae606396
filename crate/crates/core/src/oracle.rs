//! Independent references: dense exact propagation on small grids and
//! closed-form two-level and oscillator results.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridSpec, Wavefunction};
use crate::hamiltonian::PotentialField;

/// Largest dense dimension accepted.
pub const DENSE_CAP: usize = 4096;

#[derive(Debug, Clone)]
pub struct DenseEigen {
    /// Ascending eigenvalues, hartree.
    pub values: Vec<f64>,
    /// Columns are orthonormal eigenvectors in the flat grid layout.
    pub vectors: DMatrix<f64>,
}

/// Explicit Hamiltonian over the flattened `(electronic, x, phi...)` basis.
#[derive(Debug)]
pub struct DenseProblem {
    pub spec: GridSpec,
    pub matrix: DMatrix<f64>,
    eigen: OnceLock<DenseEigen>,
}

/// Second-derivative kinetic matrix `k^2/2` on a periodic grid of `n` points.
fn kinetic_matrix(k: &[f64], spacing: f64, scale: f64) -> DMatrix<f64> {
    let n = k.len();
    let row: Vec<f64> = (0..n)
        .map(|d| k.iter().map(|&km| km * km * (km * d as f64 * spacing).cos()).sum::<f64>() * scale / n as f64)
        .collect();
    DMatrix::from_fn(n, n, |i, l| row[i.abs_diff(l)])
}

pub fn dense_build(field: &PotentialField, grid: &Grid) -> Result<DenseProblem> {
    let spec = grid.spec;
    let dim = spec.len();
    if dim > DENSE_CAP {
        return Err(Error::TooLarge { dim, cap: DENSE_CAP });
    }
    if field.spec != spec {
        return Err(Error::Shape(format!("field grid {:?} differs from {:?}", field.spec, spec)));
    }
    let ne = spec.n_elec();
    let (nx, np, pl) = (spec.n_x, spec.n_phi, spec.phi_len());
    let tx = kinetic_matrix(&grid.k_x, spec.dx(), 0.5);
    let tp = kinetic_matrix(&grid.k_phi, spec.dphi(), 1.0 / (2.0 * field.mass));
    let idx = |k: usize, ix: usize, j: usize| (k * nx + ix) * pl + j;
    let mut h = DMatrix::zeros(dim, dim);
    for k in 0..ne {
        for ix in 0..nx {
            for j in 0..pl {
                let r = idx(k, ix, j);
                for ix2 in 0..nx {
                    h[(r, idx(k, ix2, j))] += tx[(ix, ix2)];
                }
                // each angular axis: vary one digit of the flat index
                let mut stride = 1;
                for _ in 0..spec.n_molecules {
                    let digit = (j / stride) % np;
                    for d2 in 0..np {
                        let j2 = j - digit * stride + d2 * stride;
                        h[(r, idx(k, ix, j2))] += tp[(digit, d2)];
                    }
                    stride *= np;
                }
                let v = field.local_matrix(ix, j);
                for l in 0..ne {
                    h[(r, idx(l, ix, j))] += v[k * ne + l];
                }
            }
        }
    }
    Ok(DenseProblem { spec, matrix: h, eigen: OnceLock::new() })
}

impl DenseProblem {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    pub fn eigen(&self) -> &DenseEigen {
        self.eigen.get_or_init(|| {
            let eig = SymmetricEigen::new(self.matrix.clone());
            let mut order: Vec<usize> = (0..self.dim()).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
            let vectors = DMatrix::from_fn(self.dim(), self.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
            DenseEigen { values, vectors }
        })
    }

    /// Dense `H v` on raw grid amplitudes.
    pub fn apply(&self, psi: &Wavefunction) -> Result<Wavefunction> {
        self.check(psi)?;
        let re = DVector::from_iterator(self.dim(), psi.data.iter().map(|z| z.re));
        let im = DVector::from_iterator(self.dim(), psi.data.iter().map(|z| z.im));
        let (hr, hi) = (&self.matrix * re, &self.matrix * im);
        Wavefunction::from_data(psi.spec, hr.iter().zip(hi.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect())
    }

    fn check(&self, psi: &Wavefunction) -> Result<()> {
        if psi.spec != self.spec {
            return Err(Error::Shape(format!("dense problem on {:?}, wavefunction on {:?}", self.spec, psi.spec)));
        }
        Ok(())
    }

    /// Amplitudes `c_n = <n|psi>` in the eigenbasis, normalized by the grid weight.
    pub fn coefficients(&self, psi: &Wavefunction) -> Result<Vec<Complex64>> {
        self.check(psi)?;
        let u = &self.eigen().vectors;
        let w = psi.spec.weight().sqrt();
        Ok((0..self.dim())
            .map(|n| u.column(n).iter().zip(&psi.data).map(|(&a, z)| z * a).sum::<Complex64>() * w)
            .collect())
    }

    /// Exact autocorrelation `<psi0|psi(t)>` at each time, a.u.
    pub fn autocorrelation(&self, psi0: &Wavefunction, times: &[f64]) -> Result<Vec<Complex64>> {
        let c = self.coefficients(psi0)?;
        let vals = &self.eigen().values;
        Ok(times
            .iter()
            .map(|&t| c.iter().zip(vals).map(|(cn, &e)| cn.norm_sqr() * Complex64::from_polar(1.0, -e * t)).sum())
            .collect())
    }
}

/// `U exp(-i Lambda t) U^T psi0`.
pub fn dense_propagate(problem: &DenseProblem, psi0: &Wavefunction, t: f64) -> Result<Wavefunction> {
    problem.check(psi0)?;
    let eig = problem.eigen();
    let u = &eig.vectors;
    let n = problem.dim();
    let coef: Vec<Complex64> = (0..n)
        .map(|l| {
            let c: Complex64 = u.column(l).iter().zip(&psi0.data).map(|(&a, z)| z * a).sum();
            c * Complex64::from_polar(1.0, -eig.values[l] * t)
        })
        .collect();
    let cr = DVector::from_iterator(n, coef.iter().map(|z| z.re));
    let ci = DVector::from_iterator(n, coef.iter().map(|z| z.im));
    let (re, im) = (u * cr, u * ci);
    Wavefunction::from_data(psi0.spec, re.iter().zip(im.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect())
}

/// Two-level populations `(P_up, P_down)` starting in the upper state with
/// coupling `g` and detuning `delta`.
pub fn rabi_reference(g: f64, delta: f64, t: f64) -> (f64, f64) {
    let omega = (g * g + 0.25 * delta * delta).sqrt();
    if omega == 0.0 {
        return (1.0, 0.0);
    }
    let down = g * g / (omega * omega) * (omega * t).sin().powi(2);
    (1.0 - down, down)
}

/// Center of a displaced harmonic wavepacket.
pub fn harmonic_reference(omega: f64, x0: f64, t: f64) -> f64 {
    x0 * (omega * t).cos()
}

/// Resonant dressed-state splittings `2 g sqrt(n + 1)`.
pub fn jaynes_cummings_splittings(g: f64, n_levels: usize) -> Vec<f64> {
    (0..n_levels).map(|n| 2.0 * g * ((n + 1) as f64).sqrt()).collect()
}

/// Restriction of a dense problem to angle-independent states, valid when the
/// potential does not depend on the angle. Basis `(k, ix)`.
pub fn frozen_angle_block(problem: &DenseProblem) -> DMatrix<f64> {
    let spec = problem.spec;
    let pl = spec.phi_len();
    let m = spec.n_elec() * spec.n_x;
    DMatrix::from_fn(m, m, |r, c| {
        let mut s = 0.0;
        for j in 0..pl {
            for j2 in 0..pl {
                s += problem.matrix[(r * pl + j, c * pl + j2)];
            }
        }
        s / pl as f64
    })
}

//! Direct-product grids over the cavity coordinate and torsion angle(s), and
//! the wavefunctions that live on them.
//!
//! Amplitudes are stored flat as `[k][x][phi_1][phi_2]` with the last angle
//! contiguous; each electronic component `k` is one contiguous block.

pub mod checkpoint;
pub mod fft;

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use fft::SpectralPlan;

/// Chunk length for deterministic parallel reductions.
pub(crate) const REDUCE_CHUNK: usize = 4096;

/// Sum of `f` over `0..n` with a summation order independent of the thread count.
pub(crate) fn det_sum<T, F>(n: usize, f: F) -> T
where
    T: Send + Copy + std::iter::Sum<T> + std::ops::Add<Output = T>,
    F: Fn(usize) -> T + Sync,
{
    let n_chunks = n.div_ceil(REDUCE_CHUNK);
    let partial: Vec<T> = (0..n_chunks)
        .into_par_iter()
        .map(|c| (c * REDUCE_CHUNK..((c + 1) * REDUCE_CHUNK).min(n)).map(&f).sum())
        .collect();
    partial.into_iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_phi: usize,
    pub n_x: usize,
    pub x_half_width: f64,
    pub n_molecules: usize,
}

impl GridSpec {
    pub fn new(n_phi: usize, n_x: usize, x_half_width: f64) -> Self {
        Self { n_phi, n_x, x_half_width, n_molecules: 1 }
    }

    pub fn with_molecules(mut self, n: usize) -> Self {
        self.n_molecules = n;
        self
    }

    /// Default box half width, wide enough for Fock states through n = 5.
    pub fn default_half_width(omega_c: f64) -> f64 {
        9.0 / omega_c.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_phi < 8 || self.n_x < 8 {
            return Err(Error::Config(format!("grid sizes must be >= 8 (n_phi={}, n_x={})", self.n_phi, self.n_x)));
        }
        if !(self.x_half_width > 0.0) {
            return Err(Error::Config(format!("x_half_width must be positive, got {}", self.x_half_width)));
        }
        if !(1..=2).contains(&self.n_molecules) {
            return Err(Error::Config(format!("n_molecules must be 1 or 2, got {}", self.n_molecules)));
        }
        Ok(())
    }

    pub fn n_elec(&self) -> usize {
        1 << self.n_molecules
    }

    /// Axis lengths of one electronic block, `[n_x, n_phi, (n_phi)]`.
    pub fn block_dims(&self) -> Vec<usize> {
        std::iter::once(self.n_x).chain(std::iter::repeat(self.n_phi).take(self.n_molecules)).collect()
    }

    /// Angular points per x row.
    pub fn phi_len(&self) -> usize {
        self.n_phi.pow(self.n_molecules as u32)
    }

    pub fn block_len(&self) -> usize {
        self.n_x * self.phi_len()
    }

    pub fn len(&self) -> usize {
        self.n_elec() * self.block_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.x_half_width / self.n_x as f64
    }

    pub fn dphi(&self) -> f64 {
        2.0 * PI / self.n_phi as f64
    }

    /// Quadrature weight of one grid point.
    pub fn weight(&self) -> f64 {
        self.dx() * self.dphi().powi(self.n_molecules as i32)
    }

    pub fn memory_bytes(&self) -> u64 {
        (self.len() * std::mem::size_of::<Complex64>()) as u64
    }
}

/// Discrete Fourier wavenumbers in DFT order for `n` points over `length`.
pub fn wavenumbers(n: usize, length: f64) -> Vec<f64> {
    let scale = 2.0 * PI / length;
    (0..n)
        .map(|j| {
            let m = if j < n.div_ceil(2) { j as i64 } else { j as i64 - n as i64 };
            scale * m as f64
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub spec: GridSpec,
    pub phi: Vec<f64>,
    pub x: Vec<f64>,
    /// Integer angular harmonics.
    pub k_phi: Vec<f64>,
    pub k_x: Vec<f64>,
    plan: SpectralPlan,
}

pub fn build_grid(spec: GridSpec) -> Result<Grid> {
    spec.validate()?;
    let dphi = spec.dphi();
    let dx = spec.dx();
    Ok(Grid {
        spec,
        phi: (0..spec.n_phi).map(|j| -PI + j as f64 * dphi).collect(),
        x: (0..spec.n_x).map(|j| -spec.x_half_width + j as f64 * dx).collect(),
        k_phi: wavenumbers(spec.n_phi, 2.0 * PI),
        k_x: wavenumbers(spec.n_x, 2.0 * spec.x_half_width),
        plan: SpectralPlan::new(&spec.block_dims()),
    })
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        build_grid(spec)
    }

    pub fn plan(&self) -> &SpectralPlan {
        &self.plan
    }

    /// Kinetic energy `k_phi^2/2m (per molecule) + k_x^2/2` in spectral layout.
    pub fn kinetic_table(&self, mass: f64) -> Vec<f64> {
        self.plan.spectral_table(|idx| {
            let kx = self.k_x[idx[0]];
            0.5 * kx * kx + idx[1..].iter().map(|&j| self.k_phi[j].powi(2) / (2.0 * mass)).sum::<f64>()
        })
    }

    /// `(T_N + p^2/2) psi`, each electronic component independently.
    pub fn apply_kinetic(&self, psi: &Wavefunction, mass: f64) -> Wavefunction {
        self.check(psi).expect("wavefunction grid mismatch");
        let ratio = psi.boundary_ratio();
        if ratio > 1e-6 {
            log::warn!("x-boundary amplitude ratio {ratio:.2e} exceeds 1e-6; the x box is too small");
        }
        let table = self.kinetic_table(mass);
        self.apply_spectral(psi, &table)
    }

    /// Applies a spectral-layout diagonal multiplier to every component.
    pub fn apply_spectral<M>(&self, psi: &Wavefunction, mult: &[M]) -> Wavefunction
    where
        M: Copy + Sync + std::ops::Mul<Complex64, Output = Complex64>,
    {
        let mut out = psi.clone();
        self.apply_spectral_in_place(&mut out, mult);
        out
    }

    pub fn apply_spectral_in_place<M>(&self, psi: &mut Wavefunction, mult: &[M])
    where
        M: Copy + Sync + std::ops::Mul<Complex64, Output = Complex64>,
    {
        let bl = self.spec.block_len();
        let mut block = Vec::with_capacity(bl);
        let mut scratch = Vec::with_capacity(bl);
        for k in 0..psi.n_elec {
            block.clear();
            block.extend_from_slice(psi.component(k));
            self.plan.apply_diagonal(&mut block, &mut scratch, mult);
            psi.component_mut(k).copy_from_slice(&block);
        }
    }

    /// Kinetic expectation value, evaluated in the spectral basis.
    pub fn kinetic_expectation(&self, psi: &Wavefunction, mass: f64) -> f64 {
        let table = self.kinetic_table(mass);
        let mut total = 0.0;
        let mut scratch = Vec::new();
        for k in 0..psi.n_elec {
            let mut block = psi.component(k).to_vec();
            self.plan.forward(&mut block, &mut scratch);
            total += det_sum(block.len(), |i| table[i] * block[i].norm_sqr());
        }
        total * psi.spec.weight() / self.spec.block_len() as f64
    }

    pub fn check(&self, psi: &Wavefunction) -> Result<()> {
        if psi.spec != self.spec {
            return Err(Error::Shape(format!("wavefunction grid {:?} differs from {:?}", psi.spec, self.spec)));
        }
        Ok(())
    }

    /// `n`-th oscillator eigenfunction of frequency `omega_c` on this x grid.
    pub fn fock_function(&self, n: usize, omega_c: f64) -> Result<Vec<f64>> {
        fock_function(n, omega_c, &self.x)
    }

    /// Fock functions `0..=n_max`.
    pub fn fock_basis(&self, n_max: usize, omega_c: f64) -> Result<Vec<Vec<f64>>> {
        (0..=n_max).map(|n| self.fock_function(n, omega_c)).collect()
    }
}

/// Harmonic-oscillator eigenfunction by the normalized Hermite recurrence,
/// renormalized on the uniform grid `x`.
pub fn fock_function(n: usize, omega_c: f64, x: &[f64]) -> Result<Vec<f64>> {
    let dx = x[1] - x[0];
    let norm0 = (omega_c / PI).powf(0.25);
    let mut out = Vec::with_capacity(x.len());
    for &xi in x {
        let mut prev = 0.0;
        let mut cur = norm0 * (-0.5 * omega_c * xi * xi).exp();
        for m in 0..n {
            let next = (2.0 * omega_c / (m + 1) as f64).sqrt() * xi * cur - (m as f64 / (m + 1) as f64).sqrt() * prev;
            prev = cur;
            cur = next;
        }
        out.push(cur);
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tail = out[0].abs().max(out[x.len() - 1].abs()) / peak;
    if tail >= 1e-8 {
        return Err(Error::TailTruncation { n, tail });
    }
    let norm = (out.iter().map(|v| v * v).sum::<f64>() * dx).sqrt();
    out.iter_mut().for_each(|v| *v /= norm);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    pub spec: GridSpec,
    pub n_elec: usize,
    pub data: Vec<Complex64>,
}

impl Wavefunction {
    pub fn zeros(spec: GridSpec) -> Self {
        Self { spec, n_elec: spec.n_elec(), data: vec![Complex64::new(0.0, 0.0); spec.len()] }
    }

    pub fn from_data(spec: GridSpec, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != spec.len() {
            return Err(Error::Shape(format!("expected {} amplitudes, got {}", spec.len(), data.len())));
        }
        Ok(Self { spec, n_elec: spec.n_elec(), data })
    }

    /// Product state `f(x) * g(phi...)` placed on component `k`.
    pub fn product(spec: GridSpec, k: usize, fx: &[f64], gphi: &[Complex64]) -> Self {
        let mut psi = Self::zeros(spec);
        let pl = spec.phi_len();
        for (ix, &f) in fx.iter().enumerate() {
            let row = &mut psi.component_mut(k)[ix * pl..(ix + 1) * pl];
            for (z, &g) in row.iter_mut().zip(gphi) {
                *z = g * f;
            }
        }
        psi
    }

    pub fn index(&self, k: usize, ix: usize, jphi: usize) -> usize {
        (k * self.spec.n_x + ix) * self.spec.phi_len() + jphi
    }

    pub fn component(&self, k: usize) -> &[Complex64] {
        let bl = self.spec.block_len();
        &self.data[k * bl..(k + 1) * bl]
    }

    pub fn component_mut(&mut self, k: usize) -> &mut [Complex64] {
        let bl = self.spec.block_len();
        &mut self.data[k * bl..(k + 1) * bl]
    }

    pub fn norm_sqr(&self) -> f64 {
        det_sum(self.data.len(), |i| self.data[i].norm_sqr()) * self.spec.weight()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        let s = 1.0 / n;
        self.data.par_iter_mut().for_each(|z| *z *= s);
        n
    }

    pub fn scale(&mut self, s: Complex64) {
        self.data.par_iter_mut().for_each(|z| *z *= s);
    }

    /// `sum_k int psi1_k^* psi2_k` by uniform quadrature.
    pub fn inner(&self, other: &Wavefunction) -> Result<Complex64> {
        if self.spec != other.spec {
            return Err(Error::Shape(format!("inner product of {:?} with {:?}", self.spec, other.spec)));
        }
        Ok(det_sum(self.data.len(), |i| self.data[i].conj() * other.data[i]) * self.spec.weight())
    }

    /// Largest amplitude on the first and last x rows relative to the global maximum.
    pub fn boundary_ratio(&self) -> f64 {
        let pl = self.spec.phi_len();
        let nx = self.spec.n_x;
        let mut edge: f64 = 0.0;
        for k in 0..self.n_elec {
            let c = self.component(k);
            for ix in [0, nx - 1] {
                for z in &c[ix * pl..(ix + 1) * pl] {
                    edge = edge.max(z.norm());
                }
            }
        }
        let peak = self.data.par_iter().map(|z| z.norm()).reduce(|| 0.0, f64::max);
        if peak == 0.0 {
            0.0
        } else {
            edge / peak
        }
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.data.iter().all(|z| z.im.abs() <= tol * (1.0 + z.re.abs()))
    }
}

pub use checkpoint::{read_checkpoint, read_density, write_checkpoint, write_density};

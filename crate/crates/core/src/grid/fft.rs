//! Multi-dimensional FFT over one electronic block.
//!
//! The last axis is contiguous. Each forward pass transforms the last axis
//! and then rotates the block so the first axis becomes last. After all axes
//! are transformed the block sits in the "spectral layout" with axis order
//! `[r-1, 0, 1, .., r-2]`; diagonal operators are applied there and the
//! inverse pass undoes the rotations.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

/// Rows per rayon task for the batched row transforms.
const ROW_BATCH: usize = 16;
const TILE: usize = 32;

#[derive(Clone)]
pub struct SpectralPlan {
    dims: Vec<usize>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

impl fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralPlan").field("dims", &self.dims).finish()
    }
}

impl SpectralPlan {
    pub fn new(dims: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dims: dims.to_vec(),
            fwd: dims.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inv: dims.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Axis order of the spectral layout.
    pub fn spectral_axes(&self) -> Vec<usize> {
        let r = self.dims.len();
        std::iter::once(r - 1).chain(0..r - 1).collect()
    }

    /// Evaluates `f` on original-axis index tuples, laid out in spectral order.
    pub fn spectral_table<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[usize]) -> T + Sync,
    {
        let axes = self.spectral_axes();
        let sdims: Vec<usize> = axes.iter().map(|&a| self.dims[a]).collect();
        (0..self.len())
            .into_par_iter()
            .map(|mut flat| {
                let mut idx = vec![0usize; self.dims.len()];
                for (pos, &a) in axes.iter().enumerate().rev() {
                    idx[a] = flat % sdims[pos];
                    flat /= sdims[pos];
                }
                f(&idx)
            })
            .collect()
    }

    /// Unnormalized forward transform; leaves `block` in spectral layout.
    pub fn forward(&self, block: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>) {
        let r = self.dims.len();
        let mut order: Vec<usize> = (0..r).collect();
        for step in 0..r {
            let axis = *order.last().unwrap();
            rows_fft(&self.fwd[axis], block, self.dims[axis]);
            if step + 1 < r {
                let lead = self.dims[order[0]];
                transpose(block, scratch, lead, block.len() / lead);
                std::mem::swap(block, scratch);
                order.rotate_left(1);
            }
        }
    }

    /// Inverse of [`forward`](Self::forward), including the 1/N factor.
    pub fn inverse(&self, block: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>) {
        let r = self.dims.len();
        let mut order = self.spectral_axes();
        for step in 0..r {
            let axis = *order.last().unwrap();
            let n = self.dims[axis];
            rows_fft(&self.inv[axis], block, n);
            if step + 1 < r {
                transpose(block, scratch, block.len() / n, n);
                std::mem::swap(block, scratch);
                order.rotate_right(1);
            }
        }
        let scale = 1.0 / self.len() as f64;
        block.par_iter_mut().for_each(|z| *z *= scale);
    }

    /// `block <- IFFT(mult * FFT(block))` with a spectral-layout multiplier.
    pub fn apply_diagonal<M>(&self, block: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>, mult: &[M])
    where
        M: Copy + Sync + std::ops::Mul<Complex64, Output = Complex64>,
    {
        self.forward(block, scratch);
        block.par_iter_mut().zip(mult.par_iter()).for_each(|(z, &m)| *z = m * *z);
        self.inverse(block, scratch);
    }
}

fn rows_fft(fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64], n: usize) {
    let scratch_len = fft.get_inplace_scratch_len();
    data.par_chunks_mut(n * ROW_BATCH).for_each_init(
        || vec![Complex64::new(0.0, 0.0); scratch_len],
        |scratch, chunk| fft.process_with_scratch(chunk, scratch),
    );
}

/// `dst[j][i] = src[i][j]` for a `rows x cols` source.
fn transpose(src: &[Complex64], dst: &mut Vec<Complex64>, rows: usize, cols: usize) {
    dst.resize(src.len(), Complex64::new(0.0, 0.0));
    dst.par_chunks_mut(rows * TILE).enumerate().for_each(|(tile, out)| {
        let j0 = tile * TILE;
        let jn = out.len() / rows;
        for i0 in (0..rows).step_by(TILE) {
            let i1 = (i0 + TILE).min(rows);
            for dj in 0..jn {
                let row = &mut out[dj * rows..(dj + 1) * rows];
                let j = j0 + dj;
                for i in i0..i1 {
                    row[i] = src[i * cols + j];
                }
            }
        }
    });
}

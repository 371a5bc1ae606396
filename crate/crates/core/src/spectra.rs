//! Spectral function of the initial wavepacket and its two-photon part.
//!
//! Both spectra are squared norms of the windowed transform
//! `A(w) = int_0^T dt e^{i(w + w0)t} Psi(t)`, divided by `T`. The trapezoid
//! weights of the discrete transform are folded into lag weights so that the
//! full spectrum only needs the autocorrelation.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Wavefunction};
use crate::model::units::{ev, to_ev, to_fs};
use crate::oracle::DenseProblem;
use crate::propagator::TrajectoryRecord;

/// Time window applied to the autocorrelation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    /// `(1/T) |A(w)|^2`: triangular lag window, never negative.
    #[default]
    Fejer,
    /// `int_{-T}^{T} C(tau) e^{i(w+w0)tau} dtau`: sinc kernel, can go negative.
    Dirichlet,
}

/// Evenly spaced `[0, max_ev]` offsets in hartree.
pub fn omega_grid(n: usize, max_ev: f64) -> Vec<f64> {
    let top = ev(max_ev);
    (0..n).map(|i| top * i as f64 / (n.max(2) - 1) as f64).collect()
}

/// Lag weights of `|h sum_j w_j e^{i w t_j} f_j|^2` with trapezoid `w_j`.
fn fejer_lag_weights(n_int: usize, h: f64) -> Vec<f64> {
    let n = n_int as f64;
    (0..=n_int)
        .map(|m| {
            let w = if m == 0 {
                n - 0.5
            } else if m == n_int {
                0.25
            } else {
                n - m as f64
            };
            w * h * h
        })
        .collect()
}

fn check_series(len: usize, h: f64) -> Result<usize> {
    if len < 2 || h <= 0.0 {
        return Err(Error::Usage(format!("spectrum needs at least two samples with positive spacing (got {len}, h = {h})")));
    }
    Ok(len - 1)
}

/// Spectrum from a uniformly sampled autocorrelation starting at `t = 0`.
pub fn sigma_from_autocorr(c: &[Complex64], h: f64, omega: &[f64], omega0: f64, window: Window) -> Result<Vec<f64>> {
    let n_int = check_series(c.len(), h)?;
    let t_total = n_int as f64 * h;
    let lag: Vec<f64> = match window {
        Window::Fejer => fejer_lag_weights(n_int, h).into_iter().map(|w| w / t_total).collect(),
        Window::Dirichlet => (0..=n_int).map(|m| if m == n_int { 0.5 * h } else { h }).collect(),
    };
    Ok(omega
        .par_iter()
        .map(|&w| {
            let big = w + omega0;
            let tail: f64 = (1..=n_int).map(|m| (c[m] * Complex64::from_polar(1.0, big * m as f64 * h)).re * lag[m]).sum();
            lag[0] * c[0].re + 2.0 * tail
        })
        .collect())
}

pub fn sigma_spectrum(record: &TrajectoryRecord, omega: &[f64], omega0: f64, window: Window) -> Result<Vec<f64>> {
    sigma_from_autocorr(&record.autocorr, record.sample_dt(), omega, omega0, window)
}

/// Two-photon spectrum `(1/T) || int dt e^{i(w+w0)t} <2|Psi(t)> ||^2`.
/// `spec` supplies the angular quadrature weight.
pub fn two_photon_spectrum(record: &TrajectoryRecord, spec: &GridSpec, omega: &[f64], omega0: f64) -> Result<Vec<f64>> {
    if record.fock2.is_empty() {
        return Err(Error::Usage("no <2|Psi(t)> samples recorded; rerun with output.record_fock2 = true".into()));
    }
    let h = record.sample_dt();
    let n_int = check_series(record.fock2.len(), h)?;
    let t_total = n_int as f64 * h;
    let w_phi = spec.dphi().powi(spec.n_molecules as i32);
    let len = record.fock2[0].len();
    Ok(omega
        .par_iter()
        .map(|&w| {
            let big = w + omega0;
            let mut acc = vec![Complex64::new(0.0, 0.0); len];
            for (j, slice) in record.fock2.iter().enumerate() {
                let wt = if j == 0 || j == n_int { 0.5 * h } else { h };
                let ph = Complex64::from_polar(wt, big * j as f64 * h);
                for (a, z) in acc.iter_mut().zip(slice) {
                    *a += ph * z;
                }
            }
            acc.iter().map(|z| z.norm_sqr()).sum::<f64>() * w_phi / t_total
        })
        .collect())
}

/// Closed-form spectrum of a discrete set of eigenvalues with weights `|c_n|^2`.
pub fn stick_spectrum(values: &[f64], weights: &[f64], omega: &[f64], omega0: f64, t_total: f64, window: Window) -> Vec<f64> {
    omega
        .par_iter()
        .map(|&w| {
            values
                .iter()
                .zip(weights)
                .map(|(&e, &p)| {
                    let d = e - (w + omega0);
                    let k = match window {
                        Window::Fejer => {
                            let x = 0.5 * d * t_total;
                            let s = if x.abs() < 1e-8 { 1.0 } else { x.sin() / x };
                            t_total * s * s
                        }
                        Window::Dirichlet => {
                            let x = d * t_total;
                            2.0 * t_total * if x.abs() < 1e-8 { 1.0 } else { x.sin() / x }
                        }
                    };
                    p * k
                })
                .sum()
        })
        .collect()
}

/// Reference spectrum from the dense eigenbasis of a coarse problem.
pub fn stick_spectrum_oracle(
    problem: &DenseProblem,
    psi0: &Wavefunction,
    omega: &[f64],
    omega0: f64,
    t_total: f64,
    window: Window,
) -> Result<Vec<f64>> {
    let c = problem.coefficients(psi0)?;
    let weights: Vec<f64> = c.iter().map(|z| z.norm_sqr()).collect();
    Ok(stick_spectrum(&problem.eigen().values, &weights, omega, omega0, t_total, window))
}

/// Indices of local maxima above `rel * max`.
pub fn find_peaks(values: &[f64], rel: f64) -> Vec<usize> {
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > rel * top && values[i] >= values[i - 1] && values[i] > values[i + 1])
        .collect()
}

/// `||a - b|| / ||b||` over the sample points.
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Fraction of the maximum below which the ratio is left undefined.
pub const NOISE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Offsets above `omega0`, hartree.
    pub omega: Vec<f64>,
    pub omega0: f64,
    pub t_total: f64,
    pub window: Window,
    pub sigma: Vec<f64>,
    pub s: Vec<f64>,
    /// `s / sigma` where sigma is above the noise floor.
    pub ratio: Vec<Option<f64>>,
}

impl SpectrumResult {
    pub fn new(omega: Vec<f64>, omega0: f64, t_total: f64, window: Window, sigma: Vec<f64>, s: Vec<f64>) -> Self {
        let top = sigma.iter().copied().fold(0.0, f64::max);
        let ratio = sigma.iter().zip(&s).map(|(&a, &b)| (a > NOISE_FLOOR * top).then(|| b / a)).collect();
        Self { omega, omega0, t_total, window, sigma, s, ratio }
    }

    pub fn from_record(record: &TrajectoryRecord, spec: &GridSpec, omega: Vec<f64>, omega0: f64, window: Window) -> Result<Self> {
        let sigma = sigma_spectrum(record, &omega, omega0, window)?;
        let s = two_photon_spectrum(record, spec, &omega, omega0)?;
        let t_total = (record.autocorr.len() - 1) as f64 * record.sample_dt();
        Ok(Self::new(omega, omega0, t_total, window, sigma, s))
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratio.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.sigma.iter().chain(&self.s).copied().fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega_ev,omega_abs_ev,sigma_au,s_au,ratio\n");
        for i in 0..self.omega.len() {
            let r = self.ratio[i].map(|r| format!("{r:.9}")).unwrap_or_default();
            writeln!(
                out,
                "{:.6},{:.6},{:.9e},{:.9e},{}",
                to_ev(self.omega[i]),
                to_ev(self.omega[i] + self.omega0),
                self.sigma[i],
                self.s[i],
                r
            )
            .unwrap();
        }
        out
    }

    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "omega0_ev": to_ev(self.omega0),
            "omega0_au": self.omega0,
            "t_fs": to_fs(self.t_total),
            "window": self.window,
            "omega_convention": "omega_ev is measured from omega0; omega_abs_ev = omega_ev + omega0",
            "normalization": match self.window {
                Window::Fejer => "(1/T) |int_0^T e^{i(w+w0)t} Psi(t) dt|^2, units a.u. time",
                Window::Dirichlet => "int_{-T}^{T} C(tau) e^{i(w+w0)tau} dtau, units a.u. time",
            },
            "noise_floor": NOISE_FLOOR,
            "max_ratio": self.max_ratio(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(levels: &[(f64, f64)], h: f64, n: usize) -> Vec<Complex64> {
        (0..=n)
            .map(|j| levels.iter().map(|&(e, p)| Complex64::from_polar(p, -e * j as f64 * h)).sum())
            .collect()
    }

    #[test]
    fn single_level_peaks_at_its_energy() {
        let (h, n) = (1.0, 4000);
        let e = 0.08;
        let c = series(&[(e, 1.0)], h, n);
        let omega: Vec<f64> = (0..801).map(|i| 0.07 + 0.02 * i as f64 / 800.0).collect();
        for window in [Window::Fejer, Window::Dirichlet] {
            let s = sigma_from_autocorr(&c, h, &omega, 0.0, window).unwrap();
            let peak = find_peaks(&s, 0.5);
            assert_eq!(peak.len(), 1);
            assert!((omega[peak[0]] - e).abs() < 2e-5);
            let want = stick_spectrum(&[e], &[1.0], &omega, 0.0, n as f64 * h, window);
            assert!(relative_l2(&s, &want) < 1e-4, "{window:?}");
        }
        let s = sigma_from_autocorr(&c, h, &[e], 0.0, Window::Fejer).unwrap();
        assert!((s[0] - 4000.0).abs() < 1.0);
    }

    #[test]
    fn two_levels_weighted() {
        let (h, n) = (0.5, 8000);
        let c = series(&[(0.05, 0.3), (0.09, 0.7)], h, n);
        let omega: Vec<f64> = (0..2001).map(|i| 0.04 + 0.06 * i as f64 / 2000.0).collect();
        let s = sigma_from_autocorr(&c, h, &omega, 0.0, Window::Fejer).unwrap();
        let want = stick_spectrum(&[0.05, 0.09], &[0.3, 0.7], &omega, 0.0, n as f64 * h, Window::Fejer);
        assert!(relative_l2(&s, &want) < 1e-6);
        let peaks = find_peaks(&s, 0.1);
        assert_eq!(peaks.len(), 2);
        let ratio = s[peaks[1]] / s[peaks[0]];
        assert!((ratio - 7.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn doubling_time_doubles_height() {
        let h = 1.0;
        let e = 0.06;
        let a = sigma_from_autocorr(&series(&[(e, 1.0)], h, 2000), h, &[e], 0.0, Window::Fejer).unwrap()[0];
        let b = sigma_from_autocorr(&series(&[(e, 1.0)], h, 4000), h, &[e], 0.0, Window::Fejer).unwrap()[0];
        assert!((b / a - 2.0).abs() < 0.05);
    }

    #[test]
    fn offset_shifts_axis() {
        let (h, n) = (1.0, 3000);
        let c = series(&[(0.1, 1.0)], h, n);
        let omega = omega_grid(400, 1.0);
        let s = sigma_from_autocorr(&c, h, &omega, 0.1 - ev(0.5), Window::Fejer).unwrap();
        let p = find_peaks(&s, 0.5);
        assert!((to_ev(omega[p[0]]) - 0.5).abs() < 0.003);
    }

    #[test]
    fn short_series_is_rejected() {
        assert!(sigma_from_autocorr(&[Complex64::new(1.0, 0.0)], 1.0, &[0.0], 0.0, Window::Fejer).is_err());
        let rec = TrajectoryRecord::default();
        assert!(matches!(two_photon_spectrum(&rec, &GridSpec::new(8, 8, 1.0), &[0.0], 0.0), Err(Error::Usage(_))));
    }

    #[test]
    fn ratio_respects_floor() {
        let r = SpectrumResult::new(vec![0.0, 1.0, 2.0], 0.0, 1.0, Window::Fejer, vec![1.0, 1e-9, 0.5], vec![0.5, 0.0, 0.5]);
        assert_eq!(r.ratio, vec![Some(0.5), None, Some(1.0)]);
        assert_eq!(r.max_ratio(), 1.0);
        assert!(r.to_csv().starts_with("omega_ev,omega_abs_ev,sigma_au,s_au,ratio\n"));
    }

    proptest! {
        #[test]
        fn fejer_is_nonnegative(
            levels in proptest::collection::vec((0.0f64..0.2, 0.0f64..1.0), 1..6),
            w in 0.0f64..0.3,
        ) {
            let c = series(&levels, 1.0, 500);
            let s = sigma_from_autocorr(&c, 1.0, &[w], 0.0, Window::Fejer).unwrap();
            prop_assert!(s[0] > -1e-9);
        }
    }
}

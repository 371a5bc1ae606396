//! Built-in single-cosine surrogate for the torsional potentials.
//!
//! `V_a = delta - (A/2)(1 + cos phi)`, `V_b = (A/2)(1 + cos phi)`, so the cis
//! gap at `phi = ±pi` is `delta`, the trans well of `V_a` sits at `phi = 0`, and
//! the diabats cross where `1 + cos phi = delta / A`.

use serde::{Deserialize, Serialize};

use super::units::ev;
use super::{DiabaticModel, Representation};
use crate::error::{Error, Result};

/// Torsional inertia used when none is configured, atomic units.
pub const DEFAULT_MASS: f64 = 5.5e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    /// Cis gap, eV.
    pub delta: f64,
    /// Cosine amplitude, eV. Derived from `crossing_angle` when absent.
    pub amp: Option<f64>,
    /// Constant diabatic coupling, eV.
    pub v_ab0: f64,
    /// Constant transition dipole, a.u.
    pub mu0: f64,
    /// Diabat crossing angle, rad.
    pub crossing_angle: Option<f64>,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self { delta: 2.70, amp: None, v_ab0: 0.05, mu0: 3.894, crossing_angle: Some(1.63) }
    }
}

const AMP_REL_TOL: f64 = 1e-6;

impl SurrogateParams {
    /// Cosine amplitude in eV after applying the consistency rule.
    pub fn resolved_amp(&self) -> Result<f64> {
        if !(self.delta > 0.0) {
            return Err(Error::Config(format!("surrogate delta must be positive, got {}", self.delta)));
        }
        if !(self.v_ab0 >= 0.0) {
            return Err(Error::Config(format!("surrogate v_ab0 must be non-negative, got {}", self.v_ab0)));
        }
        if !(self.mu0 > 0.0) {
            return Err(Error::Config(format!("surrogate mu0 must be positive, got {}", self.mu0)));
        }
        let from_angle = match self.crossing_angle {
            Some(x) => {
                let denom = 1.0 + x.cos();
                if denom <= 0.0 {
                    return Err(Error::Config(format!("crossing angle {x} rad admits no cosine amplitude")));
                }
                Some(self.delta / denom)
            }
            None => None,
        };
        match (self.amp, from_angle) {
            (Some(a), Some(b)) => {
                if (a - b).abs() > AMP_REL_TOL * b {
                    Err(Error::Config(format!(
                        "inconsistent surrogate: amp {a} eV but delta/(1+cos(crossing_angle)) = {b} eV"
                    )))
                } else {
                    Ok(b)
                }
            }
            (Some(a), None) => {
                if a <= 0.5 * self.delta {
                    Err(Error::Config(format!("amp {a} eV too small for the diabats to cross (delta {} eV)", self.delta)))
                } else {
                    Ok(a)
                }
            }
            (None, Some(b)) => Ok(b),
            (None, None) => Err(Error::Config("surrogate needs `amp` or `crossing_angle`".into())),
        }
    }

    /// Closed-form crossing angle `|phi_x|`.
    pub fn crossing(&self) -> Result<f64> {
        let a = self.resolved_amp()?;
        Ok((self.delta / a - 1.0).acos())
    }

    /// Closed-form angles in `[0, pi]` where `|V_a - V_b| = omega_c` (omega_c in eV).
    pub fn diabatic_resonances(&self, omega_c_ev: f64) -> Result<Vec<f64>> {
        let a = self.resolved_amp()?;
        let mut out: Vec<f64> = [self.delta - omega_c_ev, self.delta + omega_c_ev]
            .iter()
            .map(|s| s / a - 1.0)
            .filter(|c| (-1.0..=1.0).contains(c))
            .map(f64::acos)
            .collect();
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(out)
    }
}

pub fn build_surrogate(params: &SurrogateParams, mass: f64) -> Result<DiabaticModel> {
    let amp = params.resolved_amp()?;
    DiabaticModel::new(
        Representation::Surrogate { delta: ev(params.delta), amp: ev(amp), v_ab0: ev(params.v_ab0), mu0: params.mu0 },
        mass,
    )
}

pub fn default_model() -> DiabaticModel {
    build_surrogate(&SurrogateParams::default(), DEFAULT_MASS).expect("default surrogate is valid")
}

//! Molecular and cavity parameters.
//!
//! A [`DiabaticModel`] bundles the two diabatic torsional potentials, their
//! coupling, the transition dipole and the torsional inertia. Every function
//! is evaluated on the angle reduced to `[-pi, pi)`, so models are
//! 2pi-periodic by construction.

pub mod config;
pub mod surrogate;
pub mod table;
pub mod units;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use config::RunConfig;
pub use surrogate::{build_surrogate, SurrogateParams};
pub use table::{load_tabulated, DiabaticTable};
pub use units::{from_atomic_units, to_atomic_units, Unit};

/// Diabatic quantities at one torsional angle, atomic units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiabaticPoint {
    pub v_a: f64,
    pub v_b: f64,
    pub v_ab: f64,
    pub mu: f64,
}

impl DiabaticPoint {
    /// Eigenvalues of the 2x2 electronic matrix, `(lower, upper)`.
    pub fn adiabatic_energies(&self) -> (f64, f64) {
        let mean = 0.5 * (self.v_a + self.v_b);
        let r = (0.25 * (self.v_a - self.v_b).powi(2) + self.v_ab * self.v_ab).sqrt();
        (mean - r, mean + r)
    }

    pub fn adiabatic_gap(&self) -> f64 {
        let (lo, hi) = self.adiabatic_energies();
        hi - lo
    }
}

pub type PotentialFn = Arc<dyn Fn(f64) -> DiabaticPoint + Send + Sync>;

#[derive(Clone)]
pub enum Representation {
    /// Single-cosine diabats with constant coupling and dipole (hartree / a.u.).
    Surrogate { delta: f64, amp: f64, v_ab0: f64, mu0: f64 },
    /// Angle-independent diabatic quantities.
    Constant(DiabaticPoint),
    Tabulated(Arc<DiabaticTable>),
    /// Arbitrary closure, mainly for test potentials.
    Custom(PotentialFn),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepresentationTag {
    AnalyticSurrogate,
    Constant,
    Tabulated,
    Custom,
}

#[derive(Clone)]
pub struct DiabaticModel {
    repr: Representation,
    mass: f64,
}

impl fmt::Debug for DiabaticModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiabaticModel")
            .field("repr", &self.tag())
            .field("mass", &self.mass)
            .finish()
    }
}

/// Reduces an angle to `[-pi, pi)`.
pub fn wrap_angle(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can return exactly 2pi for tiny negative inputs
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

impl DiabaticModel {
    pub fn new(repr: Representation, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Config(format!("torsional mass must be positive, got {mass}")));
        }
        Ok(Self { repr, mass })
    }

    pub fn constant(point: DiabaticPoint, mass: f64) -> Result<Self> {
        Self::new(Representation::Constant(point), mass)
    }

    pub fn custom<F>(f: F, mass: f64) -> Result<Self>
    where
        F: Fn(f64) -> DiabaticPoint + Send + Sync + 'static,
    {
        Self::new(Representation::Custom(Arc::new(f)), mass)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn with_mass(&self, mass: f64) -> Result<Self> {
        Self::new(self.repr.clone(), mass)
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    pub fn tag(&self) -> RepresentationTag {
        match self.repr {
            Representation::Surrogate { .. } => RepresentationTag::AnalyticSurrogate,
            Representation::Constant(_) => RepresentationTag::Constant,
            Representation::Tabulated(_) => RepresentationTag::Tabulated,
            Representation::Custom(_) => RepresentationTag::Custom,
        }
    }

    pub fn eval(&self, phi: f64) -> DiabaticPoint {
        let phi = wrap_angle(phi);
        match &self.repr {
            Representation::Surrogate { delta, amp, v_ab0, mu0 } => {
                let bump = 0.5 * amp * (1.0 + phi.cos());
                DiabaticPoint { v_a: delta - bump, v_b: bump, v_ab: *v_ab0, mu: *mu0 }
            }
            Representation::Constant(p) => *p,
            Representation::Tabulated(t) => t.eval(phi),
            Representation::Custom(f) => f(phi),
        }
    }

    /// Copy of the model with the diabatic coupling switched off.
    pub fn without_diabatic_coupling(&self) -> Self {
        let inner = self.clone();
        let repr = match &self.repr {
            Representation::Surrogate { delta, amp, mu0, .. } => {
                Representation::Surrogate { delta: *delta, amp: *amp, v_ab0: 0.0, mu0: *mu0 }
            }
            Representation::Constant(p) => Representation::Constant(DiabaticPoint { v_ab: 0.0, ..*p }),
            _ => Representation::Custom(Arc::new(move |phi| DiabaticPoint { v_ab: 0.0, ..inner.eval(phi) })),
        };
        Self { repr, mass: self.mass }
    }

    /// Cis gap `V_a(-pi) - V_b(-pi)`.
    pub fn cis_gap(&self) -> f64 {
        let p = self.eval(-PI);
        p.v_a - p.v_b
    }

    /// Whether the transition dipole is angle independent.
    pub fn has_constant_dipole(&self) -> bool {
        matches!(self.repr, Representation::Surrogate { .. } | Representation::Constant(_))
    }
}

/// Free-function form of [`DiabaticModel::eval`] returning `(v_a, v_b, v_ab, mu)`.
pub fn eval_diabatic(model: &DiabaticModel, phi: f64) -> (f64, f64, f64, f64) {
    let p = model.eval(phi);
    (p.v_a, p.v_b, p.v_ab, p.mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavitySetup {
    /// Photon energy, hartree.
    pub omega_c: f64,
    /// Light-matter coupling scale, atomic units.
    pub epsilon: f64,
    pub include_dse: bool,
    pub n_molecules: usize,
}

impl CavitySetup {
    pub fn new(omega_c: f64, epsilon: f64) -> Result<Self> {
        let c = Self { omega_c, epsilon, include_dse: false, n_molecules: 1 };
        c.validate()?;
        Ok(c)
    }

    pub fn with_dse(mut self, include: bool) -> Self {
        self.include_dse = include;
        self
    }

    pub fn with_molecules(mut self, n: usize) -> Result<Self> {
        self.n_molecules = n;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_c > 0.0 && self.omega_c.is_finite()) {
            return Err(Error::Config(format!("omega_c must be positive, got {}", self.omega_c)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be non-negative, got {}", self.epsilon)));
        }
        if !(1..=2).contains(&self.n_molecules) {
            return Err(Error::Config(format!("n_molecules must be 1 or 2, got {}", self.n_molecules)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_angle(PI), -PI);
        assert_eq!(wrap_angle(-PI), -PI);
        assert!((wrap_angle(3.0 * PI + 0.5) - (-PI + 0.5)).abs() < 1e-12);
        assert!(wrap_angle(-1e-18) < PI);
    }

    #[test]
    fn cavity_validation() {
        assert!(CavitySetup::new(0.0, 0.1).is_err());
        assert!(CavitySetup::new(0.05, -0.1).is_err());
        assert!(CavitySetup::new(0.05, 0.0).unwrap().with_molecules(3).is_err());
        assert!(DiabaticModel::constant(
            DiabaticPoint { v_a: 0.0, v_b: 0.0, v_ab: 0.0, mu: 1.0 },
            0.0
        )
        .is_err());
    }
}

//! Wavepacket dynamics of an isomerizing molecule (or a pair) coupled to one
//! cavity mode, on a direct-product grid over torsion angle(s) and the cavity
//! quadrature coordinate.

pub mod cli;
pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod polariton;
pub mod propagator;
pub mod spectra;
pub mod sweep;

pub use error::{Error, Result};
pub use grid::{Grid, GridSpec, Wavefunction};
pub use hamiltonian::PotentialField;
pub use model::{CavitySetup, DiabaticModel, RunConfig};

pub use num_complex::Complex64;

//! Conversions between the external units (eV, fs) and atomic units.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Hartree per electronvolt.
pub const HARTREE_PER_EV: f64 = 0.036749322;
/// Atomic units of time per femtosecond.
pub const AU_PER_FS: f64 = 41.34137333;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Ev,
    Fs,
    Rad,
    Au,
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ev" => Ok(Unit::Ev),
            "fs" => Ok(Unit::Fs),
            "rad" => Ok(Unit::Rad),
            "au" | "a.u." => Ok(Unit::Au),
            other => Err(Error::Config(format!("unknown unit `{other}`"))),
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Unit::Ev => "eV",
            Unit::Fs => "fs",
            Unit::Rad => "rad",
            Unit::Au => "au",
        };
        f.write_str(s)
    }
}

fn factor(unit: Unit) -> f64 {
    match unit {
        Unit::Ev => HARTREE_PER_EV,
        Unit::Fs => AU_PER_FS,
        Unit::Rad | Unit::Au => 1.0,
    }
}

pub fn to_atomic_units(value: f64, unit: Unit) -> f64 {
    value * factor(unit)
}

pub fn from_atomic_units(value: f64, unit: Unit) -> f64 {
    value / factor(unit)
}

/// Parses the unit tag first; unknown tags are configuration errors.
pub fn convert(value: f64, unit: &str) -> Result<f64> {
    Ok(to_atomic_units(value, unit.parse()?))
}

pub fn ev(value: f64) -> f64 {
    value * HARTREE_PER_EV
}

pub fn to_ev(hartree: f64) -> f64 {
    hartree / HARTREE_PER_EV
}

pub fn fs(value: f64) -> f64 {
    value * AU_PER_FS
}

pub fn to_fs(au: f64) -> f64 {
    au / AU_PER_FS
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cis_gap_in_hartree() {
        assert!((to_atomic_units(2.70, Unit::Ev) - 0.0992232).abs() < 5e-8);
        assert_eq!(to_atomic_units(0.0, Unit::Ev), 0.0);
        assert!((to_atomic_units(100.0, Unit::Fs) - 4134.137).abs() < 1e-3);
        assert_eq!(to_atomic_units(1.63, Unit::Rad), 1.63);
    }

    #[test]
    fn unknown_unit_is_config_error() {
        assert!(matches!(convert(1.0, "kcal"), Err(Error::Config(_))));
        assert!(convert(1.0, "eV").is_ok());
    }

    proptest::proptest! {
        #[test]
        fn round_trip(v in -1e6f64..1e6, idx in 0usize..4) {
            let unit = [Unit::Ev, Unit::Fs, Unit::Rad, Unit::Au][idx];
            let back = from_atomic_units(to_atomic_units(v, unit), unit);
            proptest::prop_assert!((back - v).abs() <= 1e-14 * v.abs().max(1e-300));
        }
    }
}

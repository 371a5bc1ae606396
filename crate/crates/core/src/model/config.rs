//! Flat `key = value` run configuration with namespaced keys and `#` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::surrogate::{build_surrogate, SurrogateParams, DEFAULT_MASS};
use super::table::load_tabulated;
use super::units::ev;
use super::{CavitySetup, DiabaticModel, DiabaticPoint};
use crate::error::{Error, Result};
use crate::grid::GridSpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSource {
    Surrogate(SurrogateParams),
    Table { path: PathBuf },
    /// Angle-independent diabats, energies in eV.
    Constant { v_a: f64, v_b: f64, v_ab: f64, mu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PhotonEnergy {
    Ev(f64),
    /// Fraction of the model's cis gap.
    Ratio(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairExcitation {
    /// Molecule 1 excited, molecule 2 in its cis ground state.
    First,
    /// Excitation shared symmetrically between both molecules.
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: ModelSource,
    pub mass: f64,
    pub photon: PhotonEnergy,
    pub epsilon: f64,
    pub include_dse: bool,
    pub n_molecules: usize,
    pub n_phi: usize,
    pub n_x: usize,
    pub x_half_width: Option<f64>,
    pub dt: f64,
    pub total_fs: f64,
    pub cadence: usize,
    pub checkpoint_fs: f64,
    pub n_max: usize,
    pub out_dir: Option<PathBuf>,
    pub snapshots_fs: Vec<f64>,
    pub record_fock2: bool,
    pub excitation: PairExcitation,
    pub relax_dt: f64,
    pub relax_tol: f64,
    pub relax_max_iter: usize,
    pub cis_monitor: bool,
    pub phi_cut: f64,
    pub pes_n_fock: usize,
    pub pes_n_phi: usize,
    pub pes_ratios: Vec<f64>,
    pub spectrum_t_fs: f64,
    pub spectrum_n_omega: usize,
    pub spectrum_omega_max_ev: f64,
    pub spectrum_cadence: usize,
    pub spectrum_oracle_check: bool,
    pub sweep_epsilons: Vec<f64>,
    pub sweep_ratios: Vec<f64>,
    pub sweep_window_fs: f64,
    pub compare_epsilon_collective: f64,
    pub compare_epsilon_individual: f64,
    pub compare_ratios: Vec<f64>,
    pub compare_t_fs: f64,
    pub compare_n_phi: usize,
    pub compare_n_x: usize,
    pub memory_cap_mib: u64,
    pub validate_gate: f64,
    pub validate_t_fs: f64,
}

const KEYS: &[&str] = &[
    "model.source",
    "model.table_path",
    "model.delta_ev",
    "model.amp_ev",
    "model.crossing_angle_rad",
    "model.v_ab0_ev",
    "model.mu0_au",
    "model.v_a_ev",
    "model.v_b_ev",
    "model.v_ab_ev",
    "model.mu_au",
    "model.mass_au",
    "cavity.omega_c_ev",
    "cavity.ratio",
    "cavity.epsilon_au",
    "cavity.include_dse",
    "cavity.n_molecules",
    "grid.n_phi",
    "grid.n_x",
    "grid.x_half_width_au",
    "time.dt_au",
    "time.total_fs",
    "time.cadence",
    "time.checkpoint_fs",
    "output.n_max",
    "output.dir",
    "output.snapshots_fs",
    "output.record_fock2",
    "initial.excitation",
    "relax.dt_au",
    "relax.tol",
    "relax.max_iter",
    "relax.cis_monitor",
    "relax.phi_cut_rad",
    "pes.n_fock",
    "pes.n_phi",
    "pes.ratios",
    "spectrum.t_fs",
    "spectrum.n_omega",
    "spectrum.omega_max_ev",
    "spectrum.cadence",
    "spectrum.oracle_check",
    "sweep.epsilons",
    "sweep.ratios",
    "sweep.window_fs",
    "compare.epsilon_collective",
    "compare.epsilon_individual",
    "compare.ratios",
    "compare.t_fs",
    "compare.n_phi",
    "compare.n_x",
    "compare.memory_cap_mib",
    "validate.gate",
    "validate.t_fs",
];

struct Raw {
    map: BTreeMap<String, (usize, String)>,
}

impl Raw {
    fn take<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Config(format!("line {line}: cannot parse `{v}` for `{key}`"))),
        }
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.take(key)?.unwrap_or(default))
    }

    fn list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.map.get(key) {
            None => Ok(default.to_vec()),
            Some((line, v)) if v.trim().is_empty() => {
                let _ = line;
                Ok(Vec::new())
            }
            Some((line, v)) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("line {line}: cannot parse `{s}` in list `{key}`")))
                })
                .collect(),
        }
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", idx + 1)))?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key `{k}`", idx + 1)));
            }
            if map.insert(k.to_string(), (idx + 1, v.trim().to_string())).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", idx + 1)));
            }
        }
        let raw = Raw { map };

        let source: String = raw.or("model.source", "surrogate".to_string())?;
        let model = match source.as_str() {
            "surrogate" => {
                let d = SurrogateParams::default();
                let amp = raw.take::<f64>("model.amp_ev")?;
                let crossing = match raw.take::<f64>("model.crossing_angle_rad")? {
                    Some(x) => Some(x),
                    None if amp.is_some() => None,
                    None => d.crossing_angle,
                };
                ModelSource::Surrogate(SurrogateParams {
                    delta: raw.or("model.delta_ev", d.delta)?,
                    amp,
                    v_ab0: raw.or("model.v_ab0_ev", d.v_ab0)?,
                    mu0: raw.or("model.mu0_au", d.mu0)?,
                    crossing_angle: crossing,
                })
            }
            "table" => ModelSource::Table {
                path: raw.take::<PathBuf>("model.table_path")?.ok_or_else(|| Error::MissingKey("model.table_path".into()))?,
            },
            "constant" => ModelSource::Constant {
                v_a: raw.or("model.v_a_ev", 0.0)?,
                v_b: raw.or("model.v_b_ev", 0.0)?,
                v_ab: raw.or("model.v_ab_ev", 0.0)?,
                mu: raw.or("model.mu_au", 1.0)?,
            },
            other => return Err(Error::Config(format!("unknown model.source `{other}`"))),
        };

        let photon = match (raw.take::<f64>("cavity.omega_c_ev")?, raw.take::<f64>("cavity.ratio")?) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either cavity.omega_c_ev or cavity.ratio, not both".into()))
            }
            (Some(w), None) => PhotonEnergy::Ev(w),
            (None, Some(r)) => PhotonEnergy::Ratio(r),
            (None, None) => return Err(Error::MissingKey("cavity.omega_c_ev".into())),
        };
        let epsilon = raw.take::<f64>("cavity.epsilon_au")?.ok_or_else(|| Error::MissingKey("cavity.epsilon_au".into()))?;

        let excitation = match raw.or("initial.excitation", "first".to_string())?.as_str() {
            "first" => PairExcitation::First,
            "symmetric" => PairExcitation::Symmetric,
            other => return Err(Error::Config(format!("unknown initial.excitation `{other}`"))),
        };

        let cfg = Self {
            model,
            mass: raw.or("model.mass_au", DEFAULT_MASS)?,
            photon,
            epsilon,
            include_dse: raw.or("cavity.include_dse", false)?,
            n_molecules: raw.or("cavity.n_molecules", 1)?,
            n_phi: raw.or("grid.n_phi", 199)?,
            n_x: raw.or("grid.n_x", 150)?,
            x_half_width: raw.take("grid.x_half_width_au")?,
            dt: raw.or("time.dt_au", 0.5)?,
            total_fs: raw.or("time.total_fs", 50.0)?,
            cadence: raw.or("time.cadence", 50)?,
            checkpoint_fs: raw.or("time.checkpoint_fs", 5.0)?,
            n_max: raw.or("output.n_max", 5)?,
            out_dir: raw.take("output.dir")?,
            snapshots_fs: raw.list("output.snapshots_fs", &[0.0, 10.0, 20.0, 30.0])?,
            record_fock2: raw.or("output.record_fock2", false)?,
            excitation,
            relax_dt: raw.or("relax.dt_au", 0.5)?,
            relax_tol: raw.or("relax.tol", 1e-11)?,
            relax_max_iter: raw.or("relax.max_iter", 200_000)?,
            cis_monitor: raw.or("relax.cis_monitor", true)?,
            phi_cut: raw.or("relax.phi_cut_rad", 1.63)?,
            pes_n_fock: raw.or("pes.n_fock", 8)?,
            pes_n_phi: raw.or("pes.n_phi", 721)?,
            pes_ratios: raw.list("pes.ratios", &[])?,
            spectrum_t_fs: raw.or("spectrum.t_fs", 100.0)?,
            spectrum_n_omega: raw.or("spectrum.n_omega", 512)?,
            spectrum_omega_max_ev: raw.or("spectrum.omega_max_ev", 4.0)?,
            spectrum_cadence: raw.or("spectrum.cadence", 2)?,
            spectrum_oracle_check: raw.or("spectrum.oracle_check", false)?,
            sweep_epsilons: raw.list("sweep.epsilons", &[0.01, 0.02, 0.03, 0.04, 0.05])?,
            sweep_ratios: raw.list("sweep.ratios", &[0.25, 0.5, 0.75, 1.0])?,
            sweep_window_fs: raw.or("sweep.window_fs", 50.0)?,
            compare_epsilon_collective: raw.or("compare.epsilon_collective", 0.04)?,
            compare_epsilon_individual: raw.or("compare.epsilon_individual", 0.028)?,
            compare_ratios: raw.list("compare.ratios", &[0.5])?,
            compare_t_fs: raw.or("compare.t_fs", 100.0)?,
            compare_n_phi: raw.or("compare.n_phi", 96)?,
            compare_n_x: raw.or("compare.n_x", 96)?,
            memory_cap_mib: raw.or("compare.memory_cap_mib", 8192)?,
            validate_gate: raw.or("validate.gate", 0.01)?,
            validate_t_fs: raw.or("validate.t_fs", 50.0)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default surrogate run at a photon/gap ratio and coupling.
    pub fn surrogate(ratio: f64, epsilon: f64) -> Result<Self> {
        Self::parse(&format!("cavity.ratio = {ratio}\ncavity.epsilon_au = {epsilon}\n"))
    }

    /// Relaxation settings for the cis ground state.
    pub fn relax_options(&self) -> crate::propagator::RelaxOptions {
        crate::propagator::RelaxOptions {
            dt: self.relax_dt,
            tol: self.relax_tol,
            max_iter: self.relax_max_iter,
            cis_cut: self.cis_monitor.then_some(self.phi_cut),
            ..Default::default()
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.dt > 0.0) {
            return bad(format!("time.dt_au must be positive, got {}", self.dt));
        }
        if !(self.total_fs > 0.0) {
            return bad(format!("time.total_fs must be positive, got {}", self.total_fs));
        }
        if self.cadence == 0 {
            return bad("time.cadence must be at least 1".into());
        }
        if self.n_max < 2 {
            return bad(format!("output.n_max must be at least 2, got {}", self.n_max));
        }
        if self.n_phi < 8 || self.n_x < 8 {
            return bad(format!("grid sizes must be at least 8, got n_phi={} n_x={}", self.n_phi, self.n_x));
        }
        if !(self.mass > 0.0) {
            return bad(format!("model.mass_au must be positive, got {}", self.mass));
        }
        let (PhotonEnergy::Ratio(r) | PhotonEnergy::Ev(r)) = self.photon;
        if !(r > 0.0) {
            return bad(format!("cavity photon energy must be positive, got {r}"));
        }
        if self.sweep_ratios.iter().any(|r| !(*r > 0.0)) {
            return bad("sweep.ratios must all be positive".into());
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<DiabaticModel> {
        match &self.model {
            ModelSource::Surrogate(p) => build_surrogate(p, self.mass),
            ModelSource::Table { path } => load_tabulated(path, self.mass),
            ModelSource::Constant { v_a, v_b, v_ab, mu } => {
                DiabaticModel::constant(DiabaticPoint { v_a: ev(*v_a), v_b: ev(*v_b), v_ab: ev(*v_ab), mu: *mu }, self.mass)
            }
        }
    }

    /// Photon energy in hartree for the given model.
    pub fn omega_c(&self, model: &DiabaticModel) -> f64 {
        match self.photon {
            PhotonEnergy::Ev(w) => ev(w),
            PhotonEnergy::Ratio(r) => r * model.cis_gap(),
        }
    }

    pub fn cavity(&self, model: &DiabaticModel) -> Result<CavitySetup> {
        let c = CavitySetup {
            omega_c: self.omega_c(model),
            epsilon: self.epsilon,
            include_dse: self.include_dse,
            n_molecules: self.n_molecules,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn grid_spec(&self, omega_c: f64) -> GridSpec {
        GridSpec {
            n_phi: self.n_phi,
            n_x: self.n_x,
            x_half_width: self.x_half_width.unwrap_or_else(|| GridSpec::default_half_width(omega_c)),
            n_molecules: self.n_molecules,
        }
    }

    /// Resolved configuration with every default written out.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        match &self.model {
            ModelSource::Surrogate(p) => {
                kv("model.source", "surrogate".into());
                kv("model.delta_ev", p.delta.to_string());
                if let Some(a) = p.amp {
                    kv("model.amp_ev", a.to_string());
                }
                if let Some(x) = p.crossing_angle {
                    kv("model.crossing_angle_rad", x.to_string());
                }
                kv("model.v_ab0_ev", p.v_ab0.to_string());
                kv("model.mu0_au", p.mu0.to_string());
            }
            ModelSource::Table { path } => {
                kv("model.source", "table".into());
                kv("model.table_path", path.display().to_string());
            }
            ModelSource::Constant { v_a, v_b, v_ab, mu } => {
                kv("model.source", "constant".into());
                kv("model.v_a_ev", v_a.to_string());
                kv("model.v_b_ev", v_b.to_string());
                kv("model.v_ab_ev", v_ab.to_string());
                kv("model.mu_au", mu.to_string());
            }
        }
        kv("model.mass_au", self.mass.to_string());
        match self.photon {
            PhotonEnergy::Ev(w) => kv("cavity.omega_c_ev", w.to_string()),
            PhotonEnergy::Ratio(r) => kv("cavity.ratio", r.to_string()),
        }
        kv("cavity.epsilon_au", self.epsilon.to_string());
        kv("cavity.include_dse", self.include_dse.to_string());
        kv("cavity.n_molecules", self.n_molecules.to_string());
        kv("grid.n_phi", self.n_phi.to_string());
        kv("grid.n_x", self.n_x.to_string());
        if let Some(w) = self.x_half_width {
            kv("grid.x_half_width_au", w.to_string());
        }
        kv("time.dt_au", self.dt.to_string());
        kv("time.total_fs", self.total_fs.to_string());
        kv("time.cadence", self.cadence.to_string());
        kv("time.checkpoint_fs", self.checkpoint_fs.to_string());
        kv("output.n_max", self.n_max.to_string());
        if let Some(d) = &self.out_dir {
            kv("output.dir", d.display().to_string());
        }
        kv("output.snapshots_fs", fmt_list(&self.snapshots_fs));
        kv("output.record_fock2", self.record_fock2.to_string());
        kv(
            "initial.excitation",
            match self.excitation {
                PairExcitation::First => "first".into(),
                PairExcitation::Symmetric => "symmetric".into(),
            },
        );
        kv("relax.dt_au", self.relax_dt.to_string());
        kv("relax.tol", self.relax_tol.to_string());
        kv("relax.max_iter", self.relax_max_iter.to_string());
        kv("relax.cis_monitor", self.cis_monitor.to_string());
        kv("relax.phi_cut_rad", self.phi_cut.to_string());
        kv("pes.n_fock", self.pes_n_fock.to_string());
        kv("pes.n_phi", self.pes_n_phi.to_string());
        kv("pes.ratios", fmt_list(&self.pes_ratios));
        kv("spectrum.t_fs", self.spectrum_t_fs.to_string());
        kv("spectrum.n_omega", self.spectrum_n_omega.to_string());
        kv("spectrum.omega_max_ev", self.spectrum_omega_max_ev.to_string());
        kv("spectrum.cadence", self.spectrum_cadence.to_string());
        kv("spectrum.oracle_check", self.spectrum_oracle_check.to_string());
        kv("sweep.epsilons", fmt_list(&self.sweep_epsilons));
        kv("sweep.ratios", fmt_list(&self.sweep_ratios));
        kv("sweep.window_fs", self.sweep_window_fs.to_string());
        kv("compare.epsilon_collective", self.compare_epsilon_collective.to_string());
        kv("compare.epsilon_individual", self.compare_epsilon_individual.to_string());
        kv("compare.ratios", fmt_list(&self.compare_ratios));
        kv("compare.t_fs", self.compare_t_fs.to_string());
        kv("compare.n_phi", self.compare_n_phi.to_string());
        kv("compare.n_x", self.compare_n_x.to_string());
        kv("compare.memory_cap_mib", self.memory_cap_mib.to_string());
        kv("validate.gate", self.validate_gate.to_string());
        kv("validate.t_fs", self.validate_t_fs.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "cavity.ratio = 0.5\ncavity.epsilon_au = 0.04 # coupling\n";

    #[test]
    fn defaults_materialize() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.n_phi, 199);
        assert_eq!(cfg.n_x, 150);
        assert_eq!(cfg.dt, 0.5);
        assert_eq!(cfg.snapshots_fs, vec![0.0, 10.0, 20.0, 30.0]);
        let model = cfg.build_model().unwrap();
        assert!((cfg.omega_c(&model) - ev(1.35)).abs() < 1e-12);
        // the resolved text parses back to the same configuration
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn missing_and_unknown_keys() {
        match RunConfig::parse("cavity.ratio = 0.5\n") {
            Err(Error::MissingKey(k)) => assert_eq!(k, "cavity.epsilon_au"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(RunConfig::parse("cavity.epsilon_au = 0.1\n"), Err(Error::MissingKey(_))));
        assert!(matches!(RunConfig::parse("cavity.epsilonn = 0.1\n"), Err(Error::Config(_))));
        assert!(RunConfig::parse(&format!("{MINIMAL}time.dt_au = -1\n")).is_err());
        assert!(RunConfig::parse(&format!("{MINIMAL}output.n_max = 1\n")).is_err());
        assert!(RunConfig::parse(&format!("{MINIMAL}grid.n_x = 4\n")).is_err());
    }
}

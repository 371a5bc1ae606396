//! Coupling/frequency sweeps of the two-photon population and the one- versus
//! two-molecule comparison at fixed collective coupling.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::config::{PhotonEnergy, RunConfig};
use crate::observables::{series_max, time_average, CisTransRecorder, CisTransTable, PopulationTable};
use crate::propagator::Simulation;

#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Settings shared by every cell; epsilon and photon energy are overridden.
    pub base: RunConfig,
    pub epsilons: Vec<f64>,
    pub ratios: Vec<f64>,
    pub n_molecules: usize,
    /// Averaging window, fs.
    pub window_fs: f64,
    pub workers: usize,
    /// Manifest and heatmap location; `None` keeps results in memory only.
    pub out_dir: Option<PathBuf>,
}

impl SweepSpec {
    pub fn from_config(cfg: &RunConfig, workers: usize, out_dir: Option<PathBuf>) -> Self {
        Self {
            base: cfg.clone(),
            epsilons: cfg.sweep_epsilons.clone(),
            ratios: cfg.sweep_ratios.clone(),
            n_molecules: cfg.n_molecules,
            window_fs: cfg.sweep_window_fs,
            workers,
            out_dir,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() || self.ratios.is_empty() {
            return Err(Error::Config("sweep axes must be nonempty".into()));
        }
        if self.ratios.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Config("sweep ratios must be positive".into()));
        }
        if !(self.window_fs > 0.0) {
            return Err(Error::Config("sweep window must be positive".into()));
        }
        Ok(())
    }

    /// Configuration of one cell.
    pub fn cell_config(&self, epsilon: f64, ratio: f64) -> RunConfig {
        let mut cfg = self.base.clone();
        cfg.epsilon = epsilon;
        cfg.photon = PhotonEnergy::Ratio(ratio);
        cfg.n_molecules = self.n_molecules;
        cfg.total_fs = self.window_fs;
        cfg.out_dir = None;
        cfg.record_fock2 = false;
        cfg
    }

    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.epsilons.iter().flat_map(|&e| self.ratios.iter().map(move |&r| (e, r))).collect()
    }
}

/// SHA-256 of the resolved configuration text.
pub fn config_hash(cfg: &RunConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_text().as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub hash: String,
    pub epsilon: f64,
    pub ratio: f64,
    pub mean_pg2: Option<f64>,
    pub max_pg2: Option<f64>,
    pub t_max_fs: Option<f64>,
    pub error: Option<String>,
}

impl CellResult {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// `P_{g,2}` (both molecules in g for a pair).
pub fn pg2_series(populations: &[PopulationTable]) -> Vec<f64> {
    populations.iter().map(|p| p.get(0, 2)).collect()
}

/// Runs one cell; failures are reported in the result.
pub fn run_cell(cfg: &RunConfig, window_fs: f64) -> CellResult {
    let hash = config_hash(cfg);
    let mut out = CellResult { hash, epsilon: cfg.epsilon, ratio: 0.0, mean_pg2: None, max_pg2: None, t_max_fs: None, error: None };
    if let PhotonEnergy::Ratio(r) = cfg.photon {
        out.ratio = r;
    }
    let run = || -> Result<(f64, f64, f64)> {
        let sim = Simulation::prepare(cfg)?;
        let (rec, _) = sim.run(&Simulation::options(cfg), &mut [])?;
        let pg2 = pg2_series(&rec.populations);
        let mean = time_average(&rec.times_fs, &pg2, window_fs)?;
        let (mx, t) = series_max(&rec.times_fs, &pg2);
        Ok((mean, mx, t))
    };
    match run() {
        Ok((mean, mx, t)) => {
            out.mean_pg2 = Some(mean);
            out.max_pg2 = Some(mx);
            out.t_max_fs = Some(t);
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

pub const MANIFEST: &str = "manifest.jsonl";
pub const HEATMAP: &str = "heatmap.csv";

fn read_manifest(path: &Path) -> Result<HashMap<String, CellResult>> {
    let mut done = HashMap::new();
    if !path.exists() {
        return Ok(done);
    }
    for line in BufReader::new(std::fs::File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: CellResult = serde_json::from_str(&line)?;
        if r.is_ok() {
            done.insert(r.hash.clone(), r);
        }
    }
    Ok(done)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    /// One row per cell in `(epsilon, ratio)` order.
    pub cells: Vec<CellResult>,
    /// Cells taken from an existing manifest.
    pub reused: usize,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,ratio,mean_Pg2,max_Pg2,t_max_fs\n");
        let f = |v: Option<f64>| v.map(|x| format!("{x:.9e}")).unwrap_or_default();
        for c in &self.cells {
            writeln!(s, "{},{},{},{},{}", c.epsilon, c.ratio, f(c.mean_pg2), f(c.max_pg2), c.t_max_fs.map(|t| format!("{t:.3}")).unwrap_or_default())
                .unwrap();
        }
        s
    }

    pub fn get(&self, epsilon: f64, ratio: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.epsilon == epsilon && c.ratio == ratio)
    }

    /// Cell with the largest mean two-photon population.
    pub fn best(&self) -> Option<&CellResult> {
        self.cells.iter().filter(|c| c.mean_pg2.is_some()).max_by(|a, b| a.mean_pg2.unwrap().total_cmp(&b.mean_pg2.unwrap()))
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| !c.is_ok()).count()
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    spec.validate()?;
    let manifest_path = spec.out_dir.as_ref().map(|d| d.join(MANIFEST));
    if let Some(d) = &spec.out_dir {
        std::fs::create_dir_all(d)?;
    }
    let done = match &manifest_path {
        Some(p) => read_manifest(p)?,
        None => HashMap::new(),
    };
    let writer = match &manifest_path {
        Some(p) => Some(Mutex::new(OpenOptions::new().create(true).append(true).open(p)?)),
        None => None,
    };
    let jobs: Vec<(RunConfig, String)> = spec
        .cells()
        .into_iter()
        .map(|(e, r)| {
            let cfg = spec.cell_config(e, r);
            let h = config_hash(&cfg);
            (cfg, h)
        })
        .collect();
    let reused = jobs.iter().filter(|(_, h)| done.contains_key(h)).count();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let cells: Vec<Result<CellResult>> = pool.install(|| {
        jobs.par_iter()
            .map(|(cfg, h)| {
                if let Some(r) = done.get(h) {
                    return Ok(r.clone());
                }
                let r = run_cell(cfg, spec.window_fs);
                match &r.error {
                    Some(e) => log::warn!("cell epsilon={} ratio={} failed: {e}", r.epsilon, r.ratio),
                    None => log::info!("cell epsilon={} ratio={} mean P_g2 {:.3e}", r.epsilon, r.ratio, r.mean_pg2.unwrap()),
                }
                if let Some(w) = &writer {
                    let mut f = w.lock().unwrap();
                    writeln!(f, "{}", serde_json::to_string(&r)?)?;
                }
                Ok(r)
            })
            .collect()
    });
    let report = SweepReport { cells: cells.into_iter().collect::<Result<_>>()?, reused };
    if let Some(d) = &spec.out_dir {
        std::fs::write(d.join(HEATMAP), report.to_csv())?;
    }
    Ok(report)
}

/// Rough peak memory of one propagation on this grid, MiB.
pub fn estimate_memory_mib(spec: &crate::grid::GridSpec) -> u64 {
    // state, initial state, FFT block and scratch, observer copy, field
    const COPIES: u64 = 6;
    (spec.memory_bytes() * COPIES).div_ceil(1 << 20)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRun {
    pub label: String,
    pub n_molecules: usize,
    pub epsilon: f64,
    pub ratio: f64,
    pub times_fs: Vec<f64>,
    pub pg2: Vec<f64>,
    /// Molecule-1 reduced populations.
    pub molecule1: Vec<PopulationTable>,
    pub cis_trans: Vec<CisTransTable>,
}

impl CompareRun {
    /// Population with the second molecule electronically excited.
    pub fn transfer_series(&self) -> Vec<f64> {
        self.cis_trans
            .iter()
            .map(|t| match t.n_molecules {
                1 => 0.0,
                _ => (0..2).flat_map(|k1| [false, true].map(|c1| (k1, c1))).map(|(k1, c1)| t.joint(k1, c1, 1, false) + t.joint(k1, c1, 1, true)).sum(),
            })
            .collect()
    }

    /// Population with the first molecule on the trans side.
    pub fn isomerized_series(&self) -> Vec<f64> {
        self.cis_trans
            .iter()
            .map(|t| match t.n_molecules {
                1 => t.single(0, true) + t.single(1, true),
                _ => (0..2).flat_map(|k1| (0..2).flat_map(move |k2| [false, true].map(|c2| (k1, k2, c2)))).map(|(k1, k2, c2)| t.joint(k1, true, k2, c2)).sum(),
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct CompareSpec {
    pub base: RunConfig,
    pub epsilon_collective: f64,
    pub epsilon_individual: f64,
    pub ratios: Vec<f64>,
    pub t_fs: f64,
    pub n_phi: usize,
    pub n_x: usize,
    pub memory_cap_mib: u64,
    pub workers: usize,
}

impl CompareSpec {
    pub fn from_config(cfg: &RunConfig, workers: usize) -> Self {
        Self {
            base: cfg.clone(),
            epsilon_collective: cfg.compare_epsilon_collective,
            epsilon_individual: cfg.compare_epsilon_individual,
            ratios: cfg.compare_ratios.clone(),
            t_fs: cfg.compare_t_fs,
            n_phi: cfg.compare_n_phi,
            n_x: cfg.compare_n_x,
            memory_cap_mib: cfg.memory_cap_mib,
            workers,
        }
    }

    /// `(label, N, epsilon, ratio)` for every run.
    pub fn runs(&self) -> Vec<(String, usize, f64, f64)> {
        let ec = self.epsilon_collective;
        let ei = self.epsilon_individual;
        self.ratios
            .iter()
            .flat_map(|&r| {
                [
                    (format!("N1_eps{ec}"), 1, ec, r),
                    (format!("N2_eps{:.4}", ec / 2f64.sqrt()), 2, ec / 2f64.sqrt(), r),
                    (format!("N1_eps{ei}"), 1, ei, r),
                    (format!("N2_eps{ei}"), 2, ei, r),
                ]
            })
            .collect()
    }

    pub fn run_config(&self, n_molecules: usize, epsilon: f64, ratio: f64) -> RunConfig {
        let mut cfg = self.base.clone();
        cfg.n_molecules = n_molecules;
        cfg.epsilon = epsilon;
        cfg.photon = PhotonEnergy::Ratio(ratio);
        cfg.n_phi = self.n_phi;
        cfg.n_x = self.n_x;
        cfg.total_fs = self.t_fs;
        cfg.out_dir = None;
        cfg.record_fock2 = false;
        cfg
    }

    /// Refuses runs whose estimated memory exceeds the cap.
    pub fn check_resources(&self) -> Result<u64> {
        let model = self.base.build_model()?;
        let mut worst = 0;
        for (_, n, e, r) in self.runs() {
            let cfg = self.run_config(n, e, r);
            let spec = cfg.grid_spec(cfg.omega_c(&model));
            worst = worst.max(estimate_memory_mib(&spec));
        }
        let total = worst * self.workers.max(1) as u64;
        if total > self.memory_cap_mib {
            let per_point = 16 * 6 * 4;
            let side = ((self.memory_cap_mib as f64 * (1 << 20) as f64 / self.workers.max(1) as f64 / per_point as f64).cbrt()) as u64;
            return Err(Error::Resources {
                required_mib: total,
                cap_mib: self.memory_cap_mib,
                detail: format!(
                    "{} worker(s) on {}x{}x{} pair grids; reduce compare.n_phi/compare.n_x to about {side} per axis or lower --workers",
                    self.workers.max(1),
                    self.n_phi,
                    self.n_phi,
                    self.n_x
                ),
            });
        }
        Ok(total)
    }
}

pub fn run_compare_case(cfg: &RunConfig, label: &str) -> Result<CompareRun> {
    let sim = Simulation::prepare(cfg)?;
    let mut rec_ct = CisTransRecorder::new(&sim.grid, &sim.model, cfg.phi_cut);
    let (rec, _) = sim.run(&Simulation::options(cfg), &mut [&mut rec_ct])?;
    let ratio = match cfg.photon {
        PhotonEnergy::Ratio(r) => r,
        PhotonEnergy::Ev(_) => sim.cavity.omega_c / sim.model.cis_gap(),
    };
    Ok(CompareRun {
        label: label.to_string(),
        n_molecules: cfg.n_molecules,
        epsilon: cfg.epsilon,
        ratio,
        pg2: pg2_series(&rec.populations),
        molecule1: rec.populations.iter().map(|p| p.molecule(0)).collect(),
        times_fs: rec.times_fs,
        cis_trans: rec_ct.tables,
    })
}

pub fn collective_compare(spec: &CompareSpec) -> Result<Vec<CompareRun>> {
    spec.check_resources()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(|| {
        spec.runs()
            .par_iter()
            .map(|(label, n, e, r)| run_compare_case(&spec.run_config(*n, *e, *r), label))
            .collect()
    })
}

/// Aligned `P_g2` series of all runs sharing a ratio.
pub fn compare_csv(runs: &[CompareRun]) -> String {
    let mut s = String::from("time_fs");
    for r in runs {
        write!(s, ",Pg2_{}", r.label).unwrap();
    }
    s.push('\n');
    let n = runs.iter().map(|r| r.times_fs.len()).min().unwrap_or(0);
    for i in 0..n {
        write!(s, "{:.4}", runs[0].times_fs[i]).unwrap();
        for r in runs {
            write!(s, ",{:.9e}", r.pg2[i]).unwrap();
        }
        s.push('\n');
    }
    s
}

/// Joint cis/trans populations of one run.
pub fn cis_trans_csv(run: &CompareRun) -> String {
    let mut s = String::from("time_fs");
    if let Some(t) = run.cis_trans.first() {
        for l in t.labels() {
            write!(s, ",{l}").unwrap();
        }
    }
    s.push('\n');
    for (t, row) in run.times_fs.iter().zip(&run.cis_trans) {
        write!(s, "{t:.4}").unwrap();
        for v in &row.entries {
            write!(s, ",{v:.9e}").unwrap();
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        let mut cfg = RunConfig::surrogate(0.5, 0.04).unwrap();
        cfg.n_phi = 32;
        cfg.n_x = 32;
        cfg.cadence = 20;
        cfg.relax_tol = 1e-9;
        cfg
    }

    fn spec(dir: Option<PathBuf>, workers: usize) -> SweepSpec {
        SweepSpec {
            base: small(),
            epsilons: vec![0.0, 0.04],
            ratios: vec![0.5, 0.75],
            n_molecules: 1,
            window_fs: 2.0,
            workers,
            out_dir: dir,
        }
    }

    #[test]
    fn deterministic_and_resumable() {
        let dir = tempfile::tempdir().unwrap();
        let a = run_sweep(&spec(Some(dir.path().into()), 1)).unwrap();
        assert_eq!(a.reused, 0);
        assert_eq!(a.failures(), 0);
        let b = run_sweep(&spec(None, 3)).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        let again = run_sweep(&spec(Some(dir.path().into()), 2)).unwrap();
        assert_eq!(again.reused, 4);
        assert_eq!(again.to_csv(), a.to_csv());
        let lines = std::fs::read_to_string(dir.path().join(MANIFEST)).unwrap();
        assert_eq!(lines.lines().count(), 4);
        assert!(std::fs::read_to_string(dir.path().join(HEATMAP)).unwrap().starts_with("epsilon,ratio,mean_Pg2"));
        // no coupling: only the discrete Fock overlap on the coarse x grid
        let p = a.get(0.0, 0.5).unwrap().max_pg2.unwrap();
        assert!(p < 1e-10, "{p}");
    }

    #[test]
    fn single_cell_matches_direct_run() {
        let s = SweepSpec { epsilons: vec![0.04], ratios: vec![0.5], ..spec(None, 1) };
        let rep = run_sweep(&s).unwrap();
        let cfg = s.cell_config(0.04, 0.5);
        let sim = Simulation::prepare(&cfg).unwrap();
        let (rec, _) = sim.run(&Simulation::options(&cfg), &mut []).unwrap();
        let pg2 = pg2_series(&rec.populations);
        let c = &rep.cells[0];
        assert_eq!(c.mean_pg2.unwrap(), time_average(&rec.times_fs, &pg2, 2.0).unwrap());
        assert_eq!(c.max_pg2.unwrap(), series_max(&rec.times_fs, &pg2).0);
    }

    #[test]
    fn failures_are_recorded() {
        let mut s = SweepSpec { epsilons: vec![0.04], ratios: vec![0.5], ..spec(None, 1) };
        s.base.relax_max_iter = 3;
        let rep = run_sweep(&s).unwrap();
        assert_eq!(rep.failures(), 1);
        assert!(rep.cells[0].error.as_ref().unwrap().contains("converge"));
        assert!(SweepSpec { ratios: vec![], ..spec(None, 1) }.validate().is_err());
        assert!(SweepSpec { ratios: vec![-0.5], ..spec(None, 1) }.validate().is_err());
    }

    #[test]
    fn compare_refuses_oversized_grids() {
        let cfg = small();
        let mut c = CompareSpec::from_config(&cfg, 1);
        c.n_phi = 199;
        c.n_x = 150;
        c.memory_cap_mib = 1024;
        match c.check_resources() {
            Err(Error::Resources { required_mib, detail, .. }) => {
                assert!(required_mib > 1024);
                assert!(detail.contains("199x199x150"));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(c.runs().len(), 4);
        assert!((c.runs()[1].2 - 0.04 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn uncoupled_second_molecule_is_frozen() {
        let mut cfg = small();
        cfg.n_x = 24;
        cfg.n_molecules = 2;
        cfg.epsilon = 0.0;
        cfg.total_fs = 2.0;
        let run = run_compare_case(&cfg, "pair").unwrap();
        for t in &run.cis_trans {
            assert!((t.total() - 1.0).abs() < 1e-9);
        }
        let tr = run.transfer_series();
        assert!(tr.iter().all(|v| (v - tr[0]).abs() < 1e-6), "{tr:?}");
    }
}

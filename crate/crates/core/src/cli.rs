//! Command-line entry point: `polariflux <command> --config <path>`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::grid::checkpoint::{write_checkpoint, write_density};
use crate::grid::{Grid, Wavefunction};
use crate::hamiltonian::{assemble_field, eigen_residual};
use crate::model::config::{PhotonEnergy, RunConfig};
use crate::model::units::{to_ev, to_fs};
use crate::model::{CavitySetup, DiabaticModel};
use crate::observables::{adiabatic_density, AdiabaticRotation, CisTransRecorder, CisTransTable};
use crate::oracle::{dense_build, DENSE_CAP};
use crate::polariton::{angle_samples, find_liacs, polaritonic_pes};
use crate::propagator::{relax_cis_ground, Observer, PropagateOptions, Simulation, TrajectoryRecord};
use crate::spectra::{omega_grid, relative_l2, sigma_from_autocorr, stick_spectrum_oracle, SpectrumResult, Window};
use crate::sweep::{cis_trans_csv, collective_compare, compare_csv, estimate_memory_mib, pg2_series, run_sweep, CompareSpec, SweepSpec};

pub const OUT_ENV: &str = "POLARIFLUX_OUT";
pub const GIT_DESCRIBE: &str = env!("POLARIFLUX_GIT_DESCRIBE");

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CommandKind {
    Relax,
    Propagate,
    Pes,
    Spectrum,
    Sweep,
    Compare,
    Validate,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Relax => "relax",
            Self::Propagate => "propagate",
            Self::Pes => "pes",
            Self::Spectrum => "spectrum",
            Self::Sweep => "sweep",
            Self::Compare => "compare",
            Self::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "polariflux", version, about = "Cavity-coupled isomerization dynamics on a grid")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: CommandKind,
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; falls back to $POLARIFLUX_OUT, then `output.dir`, then `./out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Print the resolved configuration and cost estimates only.
    #[arg(long)]
    pub dry_run: bool,
}

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUN: i32 = 2;
pub const EXIT_GATE: i32 = 3;

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonConvergence { .. }
        | Error::Delocalized { .. }
        | Error::Conservation { .. }
        | Error::TailTruncation { .. }
        | Error::Usage(_) => EXIT_RUN,
        _ => EXIT_CONFIG,
    }
}

#[derive(Debug, Clone)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
    pub metadata: Value,
}

struct Output {
    dir: PathBuf,
    artifacts: Vec<PathBuf>,
}

impl Output {
    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let p = self.dir.join(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&p, contents)?;
        self.artifacts.push(p.clone());
        Ok(p)
    }

    fn record(&mut self, p: PathBuf) {
        self.artifacts.push(p);
    }
}

fn resolve_out(cli_out: Option<&Path>, cfg: Option<&RunConfig>) -> PathBuf {
    if let Some(p) = cli_out {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    cfg.and_then(|c| c.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

/// Parses arguments, runs the command, writes metadata and returns the outcome.
pub fn run(cli: &Cli) -> CommandOutcome {
    let start = Instant::now();
    let cfg = RunConfig::from_path(&cli.config);
    let out_dir = resolve_out(cli.out.as_deref(), cfg.as_ref().ok());
    let mut out = Output { dir: out_dir.clone(), artifacts: Vec::new() };
    let mut meta = json!({
        "command": cli.command.name(),
        "config_path": cli.config.display().to_string(),
        "git_describe": GIT_DESCRIBE,
        "version": env!("CARGO_PKG_VERSION"),
        "workers": cli.workers,
    });
    let result = cfg.and_then(|cfg| {
        meta["config"] = Value::String(cfg.to_text());
        if cli.dry_run {
            return dry_run(cli.command, &cfg).map(|v| (v, 0));
        }
        std::fs::create_dir_all(&out_dir)?;
        match cli.command {
            CommandKind::Relax => cmd_relax(&cfg, &mut out),
            CommandKind::Propagate => cmd_propagate(&cfg, &mut out),
            CommandKind::Pes => cmd_pes(&cfg, &mut out),
            CommandKind::Spectrum => cmd_spectrum(&cfg, &mut out),
            CommandKind::Sweep => cmd_sweep(&cfg, cli.workers, &mut out),
            CommandKind::Compare => cmd_compare(&cfg, cli.workers, &mut out),
            CommandKind::Validate => cmd_validate(&cfg, &mut out),
        }
    });
    let exit_code = match result {
        Ok((v, code)) => {
            meta["result"] = v;
            code
        }
        Err(e) => {
            meta["error"] = json!({ "kind": format!("{e:?}").split(['(', ' ', '{']).next().unwrap_or(""), "message": e.to_string() });
            exit_code(&e)
        }
    };
    meta["exit_code"] = json!(exit_code);
    meta["wall_seconds"] = json!(start.elapsed().as_secs_f64());
    if !cli.dry_run {
        let name = format!("{}_metadata.json", cli.command.name());
        let text = serde_json::to_string_pretty(&meta).unwrap_or_default();
        if std::fs::create_dir_all(&out_dir).is_ok() {
            if let Err(e) = out.write(&name, text) {
                log::error!("cannot write metadata: {e}");
            }
        }
    }
    CommandOutcome { exit_code, artifacts: out.artifacts, metadata: meta }
}

fn dry_run(cmd: CommandKind, cfg: &RunConfig) -> Result<Value> {
    let model = cfg.build_model()?;
    let cavity = cfg.cavity(&model)?;
    let spec = cfg.grid_spec(cavity.omega_c);
    spec.validate()?;
    let (total_fs, cadence) = match cmd {
        CommandKind::Spectrum => (cfg.spectrum_t_fs, cfg.spectrum_cadence),
        CommandKind::Sweep => (cfg.sweep_window_fs, cfg.cadence),
        CommandKind::Compare => (cfg.compare_t_fs, cfg.cadence),
        CommandKind::Validate => (cfg.validate_t_fs, cfg.cadence),
        _ => (cfg.total_fs, cfg.cadence),
    };
    let opts = PropagateOptions::new(total_fs, cfg.dt, cadence);
    let runs = match cmd {
        CommandKind::Sweep => cfg.sweep_epsilons.len() * cfg.sweep_ratios.len(),
        CommandKind::Compare => 4 * cfg.compare_ratios.len(),
        CommandKind::Validate => 6,
        CommandKind::Relax | CommandKind::Pes => 0,
        _ => 1,
    };
    let v = json!({
        "grid": { "n_phi": spec.n_phi, "n_x": spec.n_x, "x_half_width_au": spec.x_half_width, "n_molecules": spec.n_molecules, "points": spec.len() },
        "omega_c_ev": to_ev(cavity.omega_c),
        "memory_mib": estimate_memory_mib(&spec),
        "steps_per_run": opts.n_steps(),
        "samples_per_run": opts.n_samples(),
        "runs": runs,
    });
    print!("{}", cfg.to_text());
    println!("# estimate: {}", serde_json::to_string(&v)?);
    Ok(v)
}

/// Ground state `chi_0(x) phi_cis(phi) |g(phi)>` in the diabatic basis.
fn ground_state(model: &DiabaticModel, grid: &Grid, omega_c: f64, phi_fn: &[f64]) -> Result<Wavefunction> {
    let chi0 = grid.fock_function(0, omega_c)?;
    let rot = AdiabaticRotation::new(model, &grid.phi);
    let mut psi = Wavefunction::zeros(grid.spec);
    let n = grid.spec.n_phi;
    for (ix, &c) in chi0.iter().enumerate() {
        for j in 0..n {
            let amp = c * phi_fn[j];
            let i = psi.index(0, ix, j);
            psi.data[i].re = -rot.sin[j] * amp;
            let i = psi.index(1, ix, j);
            psi.data[i].re = rot.cos[j] * amp;
        }
    }
    psi.normalize();
    Ok(psi)
}

fn cmd_relax(cfg: &RunConfig, out: &mut Output) -> Result<(Value, i32)> {
    let model = cfg.build_model()?;
    let cavity = cfg.cavity(&model)?;
    let spec = cfg.grid_spec(cavity.omega_c).with_molecules(1);
    let grid = Grid::new(spec)?;
    let cis = relax_cis_ground(&model, cavity.omega_c, cfg.n_phi, cfg.n_x, spec.x_half_width, &cfg.relax_options())?;
    let psi = ground_state(&model, &grid, cavity.omega_c, &cis.phi_fn)?;
    let decoupled = CavitySetup::new(cavity.omega_c, 0.0)?;
    let field = assemble_field(&model, &decoupled, &grid)?;
    let residual = eigen_residual(&field, &grid, &psi, cis.omega0)?;
    let p = out.dir.join("ground_state.plwf");
    write_checkpoint(&p, &psi, 0.0)?;
    out.record(p);
    let mut csv = String::from("phi_rad,amplitude\n");
    for (p, v) in grid.phi.iter().zip(&cis.phi_fn) {
        writeln!(csv, "{p:.8},{v:.10e}").unwrap();
    }
    out.write("ground_phi.csv", csv)?;
    Ok((
        json!({
            "e0_au": cis.omega0,
            "e0_ev": to_ev(cis.omega0),
            "omega0_au": cis.omega0,
            "energy_zero": "raw Hamiltonian expectation, decoupled cavity zero point included",
            "iterations": cis.report.iterations,
            "last_delta_au": cis.report.last_delta,
            "cis_population": cis.report.cis_population,
            "diabatic_e0_au": cis.diabatic_energy,
            "nonstationarity_au": residual,
        }),
        0,
    ))
}

/// Writes density snapshots at the samples closest to the requested times.
struct SnapshotWriter<'a> {
    grid: &'a Grid,
    rotation: AdiabaticRotation,
    targets: Vec<f64>,
    sample_fs: f64,
    dir: PathBuf,
    written: Vec<(f64, PathBuf)>,
}

impl Observer for SnapshotWriter<'_> {
    fn observe(&mut self, _sample: usize, t_au: f64, psi: &Wavefunction) -> Result<()> {
        let t = to_fs(t_au);
        let due: Vec<f64> = self.targets.iter().copied().filter(|&s| (s - t).abs() <= 0.5 * self.sample_fs + 1e-9).collect();
        if due.is_empty() {
            return Ok(());
        }
        self.targets.retain(|s| !due.contains(s));
        let rho = adiabatic_density(psi, &self.rotation);
        let stem = format!("density_{t:07.3}fs");
        let bin = self.dir.join(format!("{stem}.plrd"));
        write_density(&bin, &self.grid.spec, psi.n_elec, &rho.flat(), t_au)?;
        self.written.push((t, bin));
        if self.grid.spec.n_molecules == 1 {
            let csv = self.dir.join(format!("{stem}.csv"));
            std::fs::write(&csv, rho.to_csv(self.grid, 2))?;
            self.written.push((t, csv));
        }
        Ok(())
    }
}

fn trajectory_csv(rec: &TrajectoryRecord, ct: &[CisTransTable]) -> String {
    let mut s = String::from("time_fs,norm,energy_hartree,re_autocorr,im_autocorr");
    if let Some(p) = rec.populations.first() {
        for h in p.headers() {
            write!(s, ",{h}").unwrap();
        }
        s.push_str(",tail,mean_photons");
    }
    if let Some(t) = ct.first() {
        for l in t.labels() {
            write!(s, ",{l}").unwrap();
        }
    }
    s.push('\n');
    for i in 0..rec.times_fs.len() {
        let c = rec.autocorr[i];
        let e = rec.energy.get(i).copied().unwrap_or(f64::NAN);
        write!(s, "{:.4},{:.15},{e:.14},{:.12e},{:.12e}", rec.times_fs[i], rec.norm[i], c.re, c.im).unwrap();
        if let Some(p) = rec.populations.get(i) {
            for v in &p.entries {
                write!(s, ",{v:.9e}").unwrap();
            }
            write!(s, ",{:.3e},{:.9e}", p.tail, p.mean_photon_number()).unwrap();
        }
        if let Some(t) = ct.get(i) {
            for v in &t.entries {
                write!(s, ",{v:.9e}").unwrap();
            }
        }
        s.push('\n');
    }
    s
}

fn conservation(rec: &TrajectoryRecord) -> Value {
    json!({
        "max_norm_drift": rec.max_norm_drift(),
        "max_relative_energy_drift": rec.max_relative_energy_drift(),
        "max_population_tail": rec.populations.iter().map(|p| p.tail).fold(0.0, f64::max),
        "n_steps": rec.n_steps,
        "propagation_seconds": rec.wall_seconds,
    })
}

fn cmd_propagate(cfg: &RunConfig, out: &mut Output) -> Result<(Value, i32)> {
    let sim = Simulation::prepare(cfg)?;
    let mut opts = Simulation::options(cfg);
    opts.checkpoint_dir = Some(out.dir.join("checkpoints"));
    let mut snaps = SnapshotWriter {
        grid: &sim.grid,
        rotation: AdiabaticRotation::new(&sim.model, &sim.grid.phi),
        targets: cfg.snapshots_fs.clone(),
        sample_fs: to_fs(cfg.dt * cfg.cadence as f64),
        dir: out.dir.clone(),
        written: Vec::new(),
    };
    let mut ct = CisTransRecorder::new(&sim.grid, &sim.model, cfg.phi_cut);
    let (rec, _) = sim.run(&opts, &mut [&mut snaps, &mut ct])?;
    let missing = snaps.targets.clone();
    if !missing.is_empty() {
        log::warn!("snapshot times {missing:?} fs lie outside the run");
    }
    let snapshots: Vec<Value> = snaps.written.iter().map(|(t, p)| json!({ "time_fs": t, "path": p.display().to_string() })).collect();
    out.artifacts.extend(snaps.written.iter().map(|(_, p)| p.clone()));
    out.artifacts.extend(rec.checkpoints.iter().cloned());
    out.write("trajectory.csv", trajectory_csv(&rec, &ct.tables))?;
    let pg2 = pg2_series(&rec.populations);
    let (mx, tmax) = crate::observables::series_max(&rec.times_fs, &pg2);
    Ok((
        json!({
            "omega_c_ev": to_ev(sim.cavity.omega_c),
            "omega0_au": sim.cis.omega0,
            "initial_energy_ev": rec.energy.first().map(|e| to_ev(*e)),
            "energy_zero": "raw Hamiltonian expectation",
            "conservation": conservation(&rec),
            "max_pg2": mx,
            "t_max_pg2_fs": tmax,
            "snapshots": snapshots,
            "unreached_snapshots_fs": missing,
        }),
        0,
    ))
}

fn cmd_pes(cfg: &RunConfig, out: &mut Output) -> Result<(Value, i32)> {
    let model = cfg.build_model()?;
    let base = cfg.cavity(&model)?;
    let mut cavities: Vec<(String, CavitySetup)> = Vec::new();
    if cfg.pes_ratios.is_empty() {
        let tag = match cfg.photon {
            PhotonEnergy::Ratio(r) => format!("ratio{r}"),
            PhotonEnergy::Ev(w) => format!("omega{w}ev"),
        };
        cavities.push((tag, base));
    } else {
        for &r in &cfg.pes_ratios {
            cavities.push((format!("ratio{r}"), CavitySetup { omega_c: r * model.cis_gap(), ..base }));
        }
    }
    let phi = angle_samples(cfg.pes_n_phi);
    let mut reports = Vec::new();
    for (tag, cav) in cavities {
        let pes = polaritonic_pes(&model, &cav, &phi, cfg.pes_n_fock)?;
        out.write(&format!("pes_{tag}.csv"), pes.to_csv())?;
        let liacs = find_liacs(&model, &cav, 1e-6, cfg.pes_n_fock);
        out.write(&format!("liacs_{tag}.json"), serde_json::to_string_pretty(&liacs)?)?;
        reports.push(json!({
            "tag": tag,
            "omega_c_ev": to_ev(cav.omega_c),
            "liacs": liacs.entries.iter().map(|l| json!({
                "phi_resonance_rad": l.phi_resonance,
                "phi_min_rad": l.phi_min,
                "gap_ev": to_ev(l.gap),
                "two_g_ev": to_ev(l.gap_first_order),
                "curves": [l.lower, l.upper],
            })).collect::<Vec<_>>(),
        }));
    }
    Ok((json!({ "n_fock": cfg.pes_n_fock, "truncation_flag": "characters marked * are dominated by the two highest Fock levels", "sets": reports }), 0))
}

fn cmd_spectrum(cfg: &RunConfig, out: &mut Output) -> Result<(Value, i32)> {
    if !cfg.record_fock2 {
        return Err(Error::Usage("the spectrum command needs <2|Psi(t)> samples; set output.record_fock2 = true".into()));
    }
    let mut run_cfg = cfg.clone();
    run_cfg.total_fs = cfg.spectrum_t_fs;
    run_cfg.cadence = cfg.spectrum_cadence;
    let sim = Simulation::prepare(&run_cfg)?;
    let mut opts = Simulation::options(&run_cfg);
    opts.checkpoint_dir = None;
    opts.populations = None;
    let (rec, _) = sim.run(&opts, &mut [])?;
    let omega = omega_grid(cfg.spectrum_n_omega, cfg.spectrum_omega_max_ev);
    let res = SpectrumResult::from_record(&rec, &sim.grid.spec, omega.clone(), sim.cis.omega0, Window::Fejer)?;
    out.write("spectrum.csv", res.to_csv())?;
    let mut meta = res.metadata();
    meta["conservation"] = conservation(&rec);
    meta["min_value"] = json!(res.min_value());
    let mut code = 0;
    if cfg.spectrum_oracle_check {
        if sim.grid.spec.len() > DENSE_CAP {
            return Err(Error::TooLarge { dim: sim.grid.spec.len(), cap: DENSE_CAP });
        }
        let dense = dense_build(&sim.field, &sim.grid)?;
        let t_total = res.t_total;
        let h = rec.sample_dt();
        let times: Vec<f64> = (0..rec.autocorr.len()).map(|j| j as f64 * h).collect();
        let c = dense.autocorrelation(&sim.psi0, &times)?;
        let exact = sigma_from_autocorr(&c, h, &omega, sim.cis.omega0, Window::Fejer)?;
        let sticks = stick_spectrum_oracle(&dense, &sim.psi0, &omega, sim.cis.omega0, t_total, Window::Fejer)?;
        let quad = relative_l2(&exact, &sticks);
        let split = relative_l2(&res.sigma, &sticks);
        meta["oracle"] = json!({ "quadrature_rel_l2": quad, "split_operator_rel_l2": split, "gate": 1e-6 });
        if quad > 1e-6 {
            code = EXIT_GATE;
        }
    }
    out.write("spectrum.json", serde_json::to_string_pretty(&meta)?)?;
    Ok((meta, code))
}

fn cmd_sweep(cfg: &RunConfig, workers: usize, out: &mut Output) -> Result<(Value, i32)> {
    let spec = SweepSpec::from_config(cfg, workers, Some(out.dir.clone()));
    let rep = run_sweep(&spec)?;
    out.record(out.dir.join(crate::sweep::MANIFEST));
    out.record(out.dir.join(crate::sweep::HEATMAP));
    let best = rep.best().map(|c| json!({ "epsilon": c.epsilon, "ratio": c.ratio, "mean_pg2": c.mean_pg2 }));
    let failed: Vec<Value> = rep.cells.iter().filter(|c| !c.is_ok()).map(|c| json!({ "epsilon": c.epsilon, "ratio": c.ratio, "error": c.error })).collect();
    Ok((json!({ "cells": rep.cells.len(), "reused": rep.reused, "best": best, "failures": failed }), 0))
}

fn cmd_compare(cfg: &RunConfig, workers: usize, out: &mut Output) -> Result<(Value, i32)> {
    let spec = CompareSpec::from_config(cfg, workers);
    let mem = spec.check_resources()?;
    let runs = collective_compare(&spec)?;
    let mut summary = Vec::new();
    for &r in &spec.ratios {
        let group: Vec<_> = runs.iter().filter(|c| c.ratio == r).cloned().collect();
        out.write(&format!("compare_ratio{r}.csv"), compare_csv(&group))?;
        for c in &group {
            out.write(&format!("cistrans_{}_ratio{r}.csv", c.label), cis_trans_csv(c))?;
            let (mx, t) = crate::observables::series_max(&c.times_fs, &c.pg2);
            let transfer = c.transfer_series().into_iter().fold(0.0, f64::max);
            let isom = c.isomerized_series().into_iter().fold(0.0, f64::max);
            summary.push(json!({
                "label": c.label, "ratio": r, "n_molecules": c.n_molecules, "epsilon": c.epsilon,
                "max_pg2": mx, "t_max_fs": t, "max_transfer": transfer, "max_isomerized": isom,
            }));
        }
    }
    Ok((json!({ "estimated_memory_mib": mem, "runs": summary }), 0))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Population table entries of a run flattened per sample.
fn run_series(cfg: &RunConfig) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    let sim = Simulation::prepare(cfg)?;
    let mut opts = Simulation::options(cfg);
    opts.checkpoint_dir = None;
    let (rec, _) = sim.run(&opts, &mut [])?;
    let all = rec.populations.iter().map(|p| p.entries.clone()).collect();
    Ok((rec.times_fs.clone(), pg2_series(&rec.populations), all))
}

fn cmd_validate(cfg: &RunConfig, out: &mut Output) -> Result<(Value, i32)> {
    let mut base = cfg.clone();
    base.total_fs = cfg.validate_t_fs;
    base.out_dir = None;
    let variant = |f: &dyn Fn(&mut RunConfig)| {
        let mut c = base.clone();
        f(&mut c);
        c
    };
    let (times, p_ref, all_ref) = run_series(&base)?;
    let (_, p_phi, _) = run_series(&variant(&|c| c.n_phi *= 2))?;
    let (_, p_x, _) = run_series(&variant(&|c| c.n_x *= 2))?;
    let (_, p_dt2, _) = run_series(&variant(&|c| {
        c.dt *= 0.5;
        c.cadence *= 2;
    }))?;
    let (_, p_dt4, _) = run_series(&variant(&|c| {
        c.dt *= 0.25;
        c.cadence *= 4;
    }))?;
    let (_, _, all_dse) = run_series(&variant(&|c| c.include_dse = !c.include_dse))?;

    let d_phi = max_abs_diff(&p_ref, &p_phi);
    let d_x = max_abs_diff(&p_ref, &p_x);
    let e1 = max_abs_diff(&p_ref, &p_dt2);
    let e2 = max_abs_diff(&p_dt2, &p_dt4);
    let richardson = e1 / e2;
    let d_dse = all_ref.iter().zip(&all_dse).map(|(a, b)| max_abs_diff(a, b)).fold(0.0, f64::max);
    let constant_mu = base.build_model()?.has_constant_dipole();

    let mut csv = String::from("time_fs,Pg2_ref,Pg2_nphi2,Pg2_nx2,Pg2_dt2,Pg2_dt4\n");
    for i in 0..times.len() {
        writeln!(csv, "{:.4},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}", times[i], p_ref[i], p_phi[i], p_x[i], p_dt2[i], p_dt4[i]).unwrap();
    }
    out.write("validate.csv", csv)?;

    let grid_ok = d_phi < cfg.validate_gate && d_x < cfg.validate_gate;
    let dse_ok = !constant_mu || d_dse < 1e-10;
    let rich_ok = (3.5..=4.5).contains(&richardson);
    let code = if grid_ok && dse_ok && rich_ok { 0 } else { EXIT_GATE };
    Ok((
        json!({
            "gate": cfg.validate_gate,
            "max_dev_n_phi_doubled": d_phi,
            "max_dev_n_x_doubled": d_x,
            "max_dev_dt_halved": e1,
            "max_dev_dt_quartered_vs_halved": e2,
            "richardson_factor": richardson,
            "dse_toggle_max_dev": d_dse,
            "constant_dipole": constant_mu,
            "passed": { "grid": grid_ok, "dse": dse_ok, "richardson": rich_ok },
        }),
        code,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(cmd: CommandKind, cfg: &Path, out: &Path) -> Cli {
        Cli { command: cmd, config: cfg.into(), out: Some(out.into()), workers: 1, dry_run: false }
    }

    #[test]
    fn flag_surface() {
        let c = Cli::try_parse_from(["polariflux", "sweep", "--config", "a.cfg", "--out", "o", "--workers", "3", "--dry-run"]).unwrap();
        assert_eq!(c.command, CommandKind::Sweep);
        assert_eq!(c.workers, 3);
        assert!(c.dry_run);
        assert!(Cli::try_parse_from(["polariflux", "bogus", "--config", "a"]).is_err());
    }

    #[test]
    fn missing_key_exits_with_config_code() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("bad.cfg");
        std::fs::write(&cfg, "cavity.ratio = 0.5\n").unwrap();
        let o = run(&cli(CommandKind::Relax, &cfg, dir.path()));
        assert_eq!(o.exit_code, EXIT_CONFIG);
        assert!(o.metadata["error"]["message"].as_str().unwrap().contains("cavity.epsilon_au"));
        assert!(dir.path().join("relax_metadata.json").exists());
    }

    #[test]
    fn relax_of_decoupled_oscillator() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("osc.cfg");
        std::fs::write(
            &cfg,
            "model.source = constant\nmodel.v_a_ev = 2.0\nmodel.v_b_ev = 0.0\nmodel.v_ab_ev = 0.0\nmodel.mu_au = 1.0\n\
             cavity.omega_c_ev = 1.35\ncavity.epsilon_au = 0.0\ngrid.n_phi = 16\ngrid.n_x = 48\nrelax.cis_monitor = false\nrelax.dt_au = 0.25\n",
        )
        .unwrap();
        let o = run(&cli(CommandKind::Relax, &cfg, dir.path()));
        assert_eq!(o.exit_code, 0, "{}", o.metadata);
        let e0 = o.metadata["result"]["e0_au"].as_f64().unwrap();
        // the slowest angular mode decays at 1/2m, leaving ~1e-8 at the stopping tolerance
        assert!((e0 - 0.5 * crate::model::units::ev(1.35)).abs() < 1e-7, "{e0}");
        assert!(dir.path().join("ground_state.plwf").exists());
    }

    #[test]
    fn spectrum_without_recording_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("s.cfg");
        std::fs::write(&cfg, "cavity.ratio = 0.5\ncavity.epsilon_au = 0.04\n").unwrap();
        let o = run(&cli(CommandKind::Spectrum, &cfg, dir.path()));
        assert_eq!(o.exit_code, EXIT_RUN);
        assert!(o.metadata["error"]["message"].as_str().unwrap().contains("record_fock2"));
    }

    #[test]
    fn dry_run_computes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("d.cfg");
        std::fs::write(&cfg, "cavity.ratio = 0.5\ncavity.epsilon_au = 0.04\n").unwrap();
        let out = dir.path().join("never");
        let o = run(&Cli { dry_run: true, ..cli(CommandKind::Propagate, &cfg, &out) });
        assert_eq!(o.exit_code, 0);
        assert_eq!(o.metadata["result"]["steps_per_run"], json!(4134));
        assert!(!out.exists());
    }
}

//! Strang split-operator propagation in real and imaginary time.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{checkpoint::write_checkpoint, Grid, GridSpec, Wavefunction};
use crate::hamiltonian::{assemble_field, assemble_single, energy, PotentialField};
use crate::model::units::{fs, to_fs};
use crate::model::config::RunConfig;
use crate::model::{CavitySetup, DiabaticModel, DiabaticPoint};
use crate::observables::{adiabatic_populations, cis_population, AdiabaticRotation, PopulationTable};

/// Exponential of one molecule's 2x2 block, `exp(-z M)`, per `(x, phi)` point.
#[derive(Debug, Clone)]
struct BlockExp {
    aa: Vec<Complex64>,
    ab: Vec<Complex64>,
    bb: Vec<Complex64>,
}

/// `exp(-z [[d_a, o], [o, d_b]])` in closed form.
pub fn exp_2x2(d_a: f64, d_b: f64, off: f64, z: Complex64) -> [Complex64; 3] {
    let m0 = 0.5 * (d_a + d_b);
    let dz = 0.5 * (d_a - d_b);
    let r = (dz * dz + off * off).sqrt();
    let pre = (-z * m0).exp();
    let zr = z * r;
    let ch = zr.cosh();
    let sh_r = if r > 0.0 { zr.sinh() / r } else { z };
    [pre * (ch - sh_r * dz), -pre * sh_r * off, pre * (ch + sh_r * dz)]
}

impl BlockExp {
    fn new(field: &PotentialField, mol: usize, z: Complex64, with_photon: bool) -> Self {
        let m = &field.molecules[mol];
        let n_phi = field.spec.n_phi;
        let len = m.d_a.len();
        let mut out = Self { aa: Vec::with_capacity(len), ab: Vec::with_capacity(len), bb: Vec::with_capacity(len) };
        for i in 0..len {
            let w = if with_photon { field.photon[i / n_phi] } else { 0.0 };
            let [aa, ab, bb] = exp_2x2(m.d_a[i] + w, m.d_b[i] + w, m.off[i], z);
            out.aa.push(aa);
            out.ab.push(ab);
            out.bb.push(bb);
        }
        out
    }
}

#[inline]
fn rot(u: &BlockExp, i: usize, a: &mut Complex64, b: &mut Complex64) {
    let (na, nb) = (u.aa[i] * *a + u.ab[i] * *b, u.ab[i] * *a + u.bb[i] * *b);
    *a = na;
    *b = nb;
}

/// Exact exponential of the potential part at every grid point.
#[derive(Debug, Clone)]
pub struct PotentialExp {
    spec: GridSpec,
    blocks: Vec<BlockExp>,
}

impl PotentialExp {
    pub fn new(field: &PotentialField, z: Complex64) -> Self {
        let blocks = (0..field.molecules.len()).map(|m| BlockExp::new(field, m, z, m == 0)).collect();
        Self { spec: field.spec, blocks }
    }

    pub fn apply(&self, psi: &mut Wavefunction) {
        let pl = self.spec.phi_len();
        let n_phi = self.spec.n_phi;
        let bl = self.spec.block_len();
        match self.blocks.as_slice() {
            [u] => {
                let (a, b) = psi.data.split_at_mut(bl);
                a.par_chunks_mut(pl).zip(b.par_chunks_mut(pl)).enumerate().for_each(|(ix, (ra, rb))| {
                    for j in 0..pl {
                        rot(u, ix * n_phi + j, &mut ra[j], &mut rb[j]);
                    }
                });
            }
            [u1, u2] => {
                let (c01, c23) = psi.data.split_at_mut(2 * bl);
                let (c0, c1) = c01.split_at_mut(bl);
                let (c2, c3) = c23.split_at_mut(bl);
                c0.par_chunks_mut(pl)
                    .zip(c1.par_chunks_mut(pl))
                    .zip(c2.par_chunks_mut(pl).zip(c3.par_chunks_mut(pl)))
                    .enumerate()
                    .for_each(|(ix, ((aa, ab), (ba, bb)))| {
                        for j1 in 0..n_phi {
                            let i1 = ix * n_phi + j1;
                            for j2 in 0..n_phi {
                                let p = j1 * n_phi + j2;
                                let i2 = ix * n_phi + j2;
                                // molecule 1 mixes aa<->ba and ab<->bb
                                rot(u1, i1, &mut aa[p], &mut ba[p]);
                                rot(u1, i1, &mut ab[p], &mut bb[p]);
                                rot(u2, i2, &mut aa[p], &mut ab[p]);
                                rot(u2, i2, &mut ba[p], &mut bb[p]);
                            }
                        }
                    });
            }
            _ => unreachable!("one or two molecules"),
        }
    }
}

/// One Strang step `exp(-zV/2) exp(-zT) exp(-zV/2)`; `z = i dt` in real time,
/// `z = dt` in imaginary time.
#[derive(Debug, Clone)]
pub struct SplitOperator {
    half_v: PotentialExp,
    kinetic: Vec<Complex64>,
    pub dt: f64,
    pub imaginary: bool,
}

impl SplitOperator {
    pub fn new(field: &PotentialField, grid: &Grid, dt: f64) -> Result<Self> {
        Self::build(field, grid, dt, false)
    }

    pub fn imaginary(field: &PotentialField, grid: &Grid, dt: f64) -> Result<Self> {
        Self::build(field, grid, dt, true)
    }

    fn build(field: &PotentialField, grid: &Grid, dt: f64, imaginary: bool) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if field.spec != grid.spec {
            return Err(Error::Shape("field and grid disagree".into()));
        }
        let z = if imaginary { Complex64::new(dt, 0.0) } else { Complex64::new(0.0, dt) };
        let kinetic = grid.kinetic_table(field.mass).into_iter().map(|t| (-z * t).exp()).collect();
        Ok(Self { half_v: PotentialExp::new(field, z * 0.5), kinetic, dt, imaginary })
    }

    pub fn step(&self, grid: &Grid, psi: &mut Wavefunction) {
        self.half_v.apply(psi);
        grid.apply_spectral_in_place(psi, &self.kinetic);
        self.half_v.apply(psi);
    }
}

/// Single Strang step.
pub fn split_step(grid: &Grid, field: &PotentialField, psi: &mut Wavefunction, dt: f64) -> Result<()> {
    SplitOperator::new(field, grid, dt)?.step(grid, psi);
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RelaxOptions {
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Iterations between energy checks.
    pub check_every: usize,
    /// Require the cis population to stay above 0.999 (cut in rad).
    pub cis_cut: Option<f64>,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self { dt: 0.5, tol: 1e-11, max_iter: 200_000, check_every: 10, cis_cut: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RelaxReport {
    pub energy: f64,
    pub iterations: usize,
    pub last_delta: f64,
    pub cis_population: Option<f64>,
}

/// Imaginary-time relaxation with renormalization after every step.
pub fn relax_ground_state(
    grid: &Grid,
    field: &PotentialField,
    guess: &Wavefunction,
    opts: &RelaxOptions,
) -> Result<(Wavefunction, RelaxReport)> {
    let op = SplitOperator::imaginary(field, grid, opts.dt)?;
    let mut psi = guess.clone();
    psi.normalize();
    let mut e_prev = energy(field, grid, &psi);
    let mut delta = f64::INFINITY;
    let mut it = 0;
    while it < opts.max_iter {
        for _ in 0..opts.check_every {
            op.step(grid, &mut psi);
            psi.normalize();
        }
        it += opts.check_every;
        let e = energy(field, grid, &psi);
        delta = (e - e_prev).abs();
        e_prev = e;
        if let Some(cut) = opts.cis_cut {
            let p = cis_population(grid, &psi, cut);
            if p <= 0.999 {
                return Err(Error::Delocalized { cis_population: p });
            }
        }
        if delta < opts.tol {
            let cis = opts.cis_cut.map(|c| cis_population(grid, &psi, c));
            log::info!("relaxed to E = {e:.12} hartree after {it} iterations");
            return Ok((psi, RelaxReport { energy: e, iterations: it, last_delta: delta, cis_population: cis }));
        }
    }
    Err(Error::NonConvergence { iterations: it, delta })
}

/// The relaxed torsional function used to build initial states.
#[derive(Debug, Clone)]
pub struct CisGround {
    /// Real, normalized on the angular grid.
    pub phi_fn: Vec<f64>,
    /// Relaxation energy including the cavity zero point.
    pub omega0: f64,
    pub report: RelaxReport,
    /// Same relaxation on the lower diabat, for comparison.
    pub diabatic_energy: Option<f64>,
}

fn harmonic_guess(grid: &Grid, model: &DiabaticModel, center: f64) -> Vec<f64> {
    // curvature of the lower diabat at the center by finite differences
    let h = 1e-3;
    let f = |p: f64| model.eval(p).v_b.min(model.eval(p).v_a);
    let k = ((f(center + h) - 2.0 * f(center) + f(center - h)) / (h * h)).max(1e-8);
    let alpha = (k * model.mass()).sqrt();
    grid.phi
        .iter()
        .map(|&p| {
            let d = crate::model::wrap_angle(p - center);
            (-0.5 * alpha * d * d).exp()
        })
        .collect()
}

/// Relaxes the torsional ground function of the cis basin on the lower
/// adiabatic surface with the cavity decoupled.
pub fn relax_cis_ground(
    model: &DiabaticModel,
    omega_c: f64,
    n_phi: usize,
    n_x: usize,
    x_half_width: f64,
    opts: &RelaxOptions,
) -> Result<CisGround> {
    let spec = GridSpec::new(n_phi, n_x, x_half_width);
    let grid = Grid::new(spec)?;
    let cavity = CavitySetup::new(omega_c, 0.0)?;
    let lower = {
        let m = model.clone();
        DiabaticModel::custom(
            move |p| {
                let (lo, _) = m.eval(p).adiabatic_energies();
                DiabaticPoint { v_a: lo + 1.0, v_b: lo, v_ab: 0.0, mu: 0.0 }
            },
            model.mass(),
        )?
    };
    let chi0 = grid.fock_function(0, omega_c)?;
    let guess_phi: Vec<Complex64> = harmonic_guess(&grid, model, -PI).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    let guess = Wavefunction::product(spec, 1, &chi0, &guess_phi);

    let relax = |m: &DiabaticModel| -> Result<(Wavefunction, RelaxReport)> {
        let field = assemble_single(m, &cavity, &grid)?;
        relax_ground_state(&grid, &field, &guess, opts)
    };
    let (psi, report) = relax(&lower)?;
    let diabatic_energy = {
        let diab = {
            let m = model.clone();
            DiabaticModel::custom(
                move |p| {
                    let d = m.eval(p);
                    DiabaticPoint { v_a: d.v_b + 1.0, v_b: d.v_b, v_ab: 0.0, mu: 0.0 }
                },
                model.mass(),
            )?
        };
        relax(&diab).ok().map(|(_, r)| r.energy)
    };
    if let Some(ed) = diabatic_energy {
        log::info!("cis ground energy: adiabatic {:.10}, diabatic {:.10} hartree", report.energy, ed);
    }

    // project out the x factor and keep a real, positive torsional function
    let comp = psi.component(1);
    let dx = spec.dx();
    let mut phi_fn: Vec<f64> = (0..n_phi)
        .map(|j| (0..n_x).map(|ix| chi0[ix] * comp[ix * n_phi + j]).sum::<Complex64>())
        .map(|z| z.re * dx)
        .collect();
    let norm = (phi_fn.iter().map(|v| v * v).sum::<f64>() * spec.dphi()).sqrt();
    let sign = if phi_fn[0] < 0.0 { -1.0 } else { 1.0 };
    phi_fn.iter_mut().for_each(|v| *v *= sign / norm);
    Ok(CisGround { phi_fn, omega0: report.energy, report, diabatic_energy })
}

/// How the excitation is placed in a two-molecule initial state.
pub use crate::model::config::PairExcitation;

/// `phi_b(phi) chi_0(x) |a>` for one molecule; for two molecules molecule 1
/// sits on `|a>` and molecule 2 on its adiabatic ground state (or the
/// symmetric superposition of the two assignments).
pub fn make_initial_state(
    model: &DiabaticModel,
    cavity: &CavitySetup,
    grid: &Grid,
    cis: &CisGround,
    excitation: PairExcitation,
) -> Result<Wavefunction> {
    let spec = grid.spec;
    if cis.phi_fn.len() != spec.n_phi {
        return Err(Error::Shape("torsional function does not match the grid".into()));
    }
    let chi0 = grid.fock_function(0, cavity.omega_c)?;
    let phi_fn: Vec<Complex64> = cis.phi_fn.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut psi = match spec.n_molecules {
        1 => Wavefunction::product(spec, 0, &chi0, &phi_fn),
        _ => {
            let rotation = AdiabaticRotation::new(model, &grid.phi);
            let n = spec.n_phi;
            let bl = spec.block_len();
            let mut psi = Wavefunction::zeros(spec);
            // excited molecule on |a>, the other on |g> = -sin|a> + cos|b>
            let mut place = |first_excited: bool, weight: f64| {
                for (ix, &c) in chi0.iter().enumerate() {
                    for j1 in 0..n {
                        for j2 in 0..n {
                            let amp = weight * c * cis.phi_fn[j1] * cis.phi_fn[j2];
                            let (jg, kb) = if first_excited { (j2, 1) } else { (j1, 2) };
                            let p = (ix * n + j1) * n + j2;
                            psi.data[p] += -rotation.sin[jg] * amp;
                            psi.data[kb * bl + p] += rotation.cos[jg] * amp;
                        }
                    }
                }
            };
            match excitation {
                PairExcitation::First => place(true, 1.0),
                PairExcitation::Symmetric => {
                    place(true, std::f64::consts::FRAC_1_SQRT_2);
                    place(false, std::f64::consts::FRAC_1_SQRT_2);
                }
            }
            psi
        }
    };
    psi.normalize();
    Ok(psi)
}

/// Receives the state at every sample.
pub trait Observer {
    fn observe(&mut self, sample: usize, t_au: f64, psi: &Wavefunction) -> Result<()>;
}

#[derive(Debug, Clone)]
pub struct PropagateOptions {
    pub total_fs: f64,
    pub dt: f64,
    pub cadence: usize,
    /// Adiabatic population tables up to this photon number.
    pub populations: Option<usize>,
    /// Record the Fock-2 slices needed by the two-photon spectrum.
    pub record_fock2: bool,
    pub compute_energy: bool,
    pub checkpoint_dir: Option<PathBuf>,
    pub checkpoint_fs: f64,
    /// Abort when the norm drifts further than this.
    pub norm_abort: f64,
}

impl PropagateOptions {
    pub fn new(total_fs: f64, dt: f64, cadence: usize) -> Self {
        Self {
            total_fs,
            dt,
            cadence,
            populations: Some(5),
            record_fock2: false,
            compute_energy: true,
            checkpoint_dir: None,
            checkpoint_fs: 5.0,
            norm_abort: 1e-6,
        }
    }

    pub fn n_steps(&self) -> usize {
        (fs(self.total_fs) / self.dt).round() as usize
    }

    pub fn n_samples(&self) -> usize {
        self.n_steps() / self.cadence + 1
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TrajectoryRecord {
    pub times_fs: Vec<f64>,
    pub norm: Vec<f64>,
    pub energy: Vec<f64>,
    pub autocorr: Vec<Complex64>,
    pub populations: Vec<PopulationTable>,
    /// `<2|Psi(t)>` over `(k, phi...)` per sample, diabatic electronic basis.
    #[serde(skip)]
    pub fock2: Vec<Vec<Complex64>>,
    pub checkpoints: Vec<PathBuf>,
    pub dt: f64,
    pub cadence: usize,
    pub n_steps: usize,
    pub wall_seconds: f64,
}

impl TrajectoryRecord {
    pub fn max_norm_drift(&self) -> f64 {
        self.norm.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn max_relative_energy_drift(&self) -> f64 {
        match self.energy.first() {
            Some(&e0) => self.energy.iter().map(|e| ((e - e0) / e0).abs()).fold(0.0, f64::max),
            None => 0.0,
        }
    }

    /// Series of one population entry, `(kappa index, photon number)`.
    pub fn population_series(&self, kappa: usize, n: usize) -> Vec<f64> {
        self.populations.iter().map(|p| p.get(kappa, n)).collect()
    }

    /// Sample spacing of the autocorrelation in a.u.
    pub fn sample_dt(&self) -> f64 {
        self.dt * self.cadence as f64
    }
}

/// `<2|psi>` integrated over x, per electronic component and angle.
pub fn fock_slice(grid: &Grid, psi: &Wavefunction, chi: &[f64]) -> Vec<Complex64> {
    let pl = grid.spec.phi_len();
    let dx = grid.spec.dx();
    let mut out = vec![Complex64::new(0.0, 0.0); psi.n_elec * pl];
    for k in 0..psi.n_elec {
        let c = psi.component(k);
        let o = &mut out[k * pl..(k + 1) * pl];
        for (ix, &w) in chi.iter().enumerate() {
            for (z, &v) in o.iter_mut().zip(&c[ix * pl..(ix + 1) * pl]) {
                *z += v * (w * dx);
            }
        }
    }
    out
}

/// Real-time propagation with sampling every `cadence` steps.
pub fn propagate(
    grid: &Grid,
    field: &PotentialField,
    model: &DiabaticModel,
    psi0: &Wavefunction,
    opts: &PropagateOptions,
    observers: &mut [&mut dyn Observer],
) -> Result<(TrajectoryRecord, Wavefunction)> {
    if opts.cadence == 0 {
        return Err(Error::Config("cadence must be at least 1".into()));
    }
    let start = Instant::now();
    let op = SplitOperator::new(field, grid, opts.dt)?;
    let n_steps = opts.n_steps();
    let chi2 = if opts.record_fock2 { Some(grid.fock_function(2, field.omega_c)?) } else { None };
    let rotation = AdiabaticRotation::new(model, &grid.phi);
    let fock = match opts.populations {
        Some(n_max) => Some(grid.fock_basis(n_max, field.omega_c)?),
        None => None,
    };
    let checkpoint_every = if opts.checkpoint_dir.is_some() && opts.checkpoint_fs > 0.0 {
        ((fs(opts.checkpoint_fs) / opts.dt).round() as usize).max(1)
    } else {
        usize::MAX
    };
    if let Some(dir) = &opts.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut rec = TrajectoryRecord { dt: opts.dt, cadence: opts.cadence, n_steps, ..Default::default() };
    let mut psi = psi0.clone();
    let mut sample = 0;
    for step in 0..=n_steps {
        let t = step as f64 * opts.dt;
        if step % opts.cadence == 0 {
            let norm = psi.norm_sqr();
            if (norm - 1.0).abs() > opts.norm_abort {
                return Err(Error::Conservation { norm, time_fs: to_fs(t) });
            }
            rec.times_fs.push(to_fs(t));
            rec.norm.push(norm);
            if opts.compute_energy {
                rec.energy.push(energy(field, grid, &psi));
            }
            rec.autocorr.push(psi0.inner(&psi)?);
            if let Some(f) = &fock {
                rec.populations.push(adiabatic_populations(grid, &psi, &rotation, f));
            }
            if let Some(chi) = &chi2 {
                rec.fock2.push(fock_slice(grid, &psi, chi));
            }
            for o in observers.iter_mut() {
                o.observe(sample, t, &psi)?;
            }
            sample += 1;
        }
        if step > 0 && step % checkpoint_every == 0 {
            let dir = opts.checkpoint_dir.as_ref().unwrap();
            let path = dir.join(format!("psi_{:08.3}fs.plwf", to_fs(t)));
            write_checkpoint(&path, &psi, t)?;
            rec.checkpoints.push(path);
        }
        if step < n_steps {
            op.step(grid, &mut psi);
        }
    }
    rec.wall_seconds = start.elapsed().as_secs_f64();
    Ok((rec, psi))
}

/// Everything needed to run the configured dynamics.
pub struct Simulation {
    pub model: DiabaticModel,
    pub cavity: CavitySetup,
    pub grid: Grid,
    pub field: PotentialField,
    pub cis: CisGround,
    pub psi0: Wavefunction,
}

impl Simulation {
    /// Builds the model, grid and field, relaxes the cis ground state and
    /// places the initial excitation.
    pub fn prepare(cfg: &RunConfig) -> Result<Self> {
        let model = cfg.build_model()?;
        let cavity = cfg.cavity(&model)?;
        let spec = cfg.grid_spec(cavity.omega_c);
        let grid = Grid::new(spec)?;
        let field = assemble_field(&model, &cavity, &grid)?;
        let cis = relax_cis_ground(&model, cavity.omega_c, cfg.n_phi, cfg.n_x, spec.x_half_width, &cfg.relax_options())?;
        let psi0 = make_initial_state(&model, &cavity, &grid, &cis, cfg.excitation)?;
        Ok(Self { model, cavity, grid, field, cis, psi0 })
    }

    pub fn options(cfg: &RunConfig) -> PropagateOptions {
        PropagateOptions {
            populations: Some(cfg.n_max),
            record_fock2: cfg.record_fock2,
            compute_energy: true,
            checkpoint_dir: cfg.out_dir.as_ref().map(|d| d.join("checkpoints")),
            checkpoint_fs: cfg.checkpoint_fs,
            ..PropagateOptions::new(cfg.total_fs, cfg.dt, cfg.cadence)
        }
    }

    pub fn run(&self, opts: &PropagateOptions, observers: &mut [&mut dyn Observer]) -> Result<(TrajectoryRecord, Wavefunction)> {
        propagate(&self.grid, &self.field, &self.model, &self.psi0, opts, observers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::hamiltonian::{assemble_field, assemble_pair};
    use crate::model::surrogate::default_model;
    use crate::model::units::ev;
    use crate::observables::{adiabatic_populations, cis_trans_populations, photon_number, PHI_CUT};
    use nalgebra::{DMatrix, SymmetricEigen};

    fn dense_exp(h: &[f64], n: usize, z: Complex64) -> Vec<Complex64> {
        let m = DMatrix::from_row_slice(n, n, h);
        let eig = SymmetricEigen::new(m);
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                out[r * n + c] =
                    (0..n).map(|l| eig.eigenvectors[(r, l)] * eig.eigenvectors[(c, l)] * (-z * eig.eigenvalues[l]).exp()).sum();
            }
        }
        out
    }

    #[test]
    fn closed_form_matches_dense_exponential() {
        for (da, db, off) in [(0.3, -0.1, 0.05), (0.2, 0.2, 0.0), (0.1, 0.4, -0.3)] {
            for z in [Complex64::new(0.0, 0.7), Complex64::new(0.5, 0.0)] {
                let [aa, ab, bb] = exp_2x2(da, db, off, z);
                let d = dense_exp(&[da, off, off, db], 2, z);
                assert!((aa - d[0]).norm() < 1e-14 && (ab - d[1]).norm() < 1e-14 && (bb - d[3]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn pair_potential_step_matches_dense_4x4() {
        let m = default_model();
        let cav = CavitySetup::new(ev(1.35), 0.04).unwrap().with_molecules(2).unwrap();
        let grid = build_grid(GridSpec::new(8, 8, 12.0).with_molecules(2)).unwrap();
        let field = assemble_pair(&m, &cav, &grid).unwrap();
        let z = Complex64::new(0.0, 0.25);
        let exp = PotentialExp::new(&field, z);
        let data: Vec<Complex64> = (0..grid.spec.len()).map(|i| Complex64::new((i as f64 * 0.3).sin(), (i as f64 * 0.11).cos())).collect();
        let mut psi = Wavefunction::from_data(grid.spec, data).unwrap();
        let orig = psi.clone();
        exp.apply(&mut psi);
        let bl = grid.spec.block_len();
        let pl = grid.spec.phi_len();
        for ix in [0, 4, 7] {
            for j in [0, 9, 63] {
                let u = dense_exp(&field.local_matrix(ix, j), 4, z);
                let p = ix * pl + j;
                for r in 0..4 {
                    let want: Complex64 = (0..4).map(|c| u[r * 4 + c] * orig.data[c * bl + p]).sum();
                    assert!((psi.data[r * bl + p] - want).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn unitary_over_many_steps() {
        let m = default_model().with_mass(2000.0).unwrap();
        let cav = CavitySetup::new(ev(1.35), 0.04).unwrap();
        let grid = build_grid(GridSpec::new(16, 32, GridSpec::default_half_width(cav.omega_c))).unwrap();
        let field = assemble_field(&m, &cav, &grid).unwrap();
        let chi = grid.fock_function(1, cav.omega_c).unwrap();
        let g: Vec<Complex64> = grid.phi.iter().map(|&p| Complex64::new((-(p + 2.0).powi(2)).exp(), 0.0)).collect();
        let mut psi = Wavefunction::product(grid.spec, 0, &chi, &g);
        psi.normalize();
        let op = SplitOperator::new(&field, &grid, 0.5).unwrap();
        for _ in 0..10_000 {
            op.step(&grid, &mut psi);
        }
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn coherent_state_center_follows_cosine() {
        let w = ev(1.35);
        let flat = DiabaticPoint { v_a: 0.0, v_b: 0.0, v_ab: 0.0, mu: 1.0 };
        let m = DiabaticModel::constant(flat, 1.0).unwrap();
        let cav = CavitySetup::new(w, 0.0).unwrap();
        let grid = build_grid(GridSpec::new(8, 128, 12.0 / w.sqrt())).unwrap();
        let field = assemble_field(&m, &cav, &grid).unwrap();
        let x0 = 2.0 / w.sqrt();
        let chi: Vec<f64> = grid.x.iter().map(|x| (-0.5 * w * (x - x0).powi(2)).exp()).collect();
        let ones = vec![Complex64::new(1.0, 0.0); 8];
        let mut psi = Wavefunction::product(grid.spec, 0, &chi, &ones);
        psi.normalize();
        let period = 2.0 * PI / w;
        let steps = 250;
        let op = SplitOperator::new(&field, &grid, period / steps as f64).unwrap();
        let center = |psi: &Wavefunction| {
            let pl = grid.spec.phi_len();
            psi.data.iter().enumerate().map(|(i, z)| z.norm_sqr() * grid.x[(i / pl) % grid.spec.n_x]).sum::<f64>() * grid.spec.weight()
        };
        for period_count in 1..=3 {
            for _ in 0..steps {
                op.step(&grid, &mut psi);
            }
            let want = crate::oracle::harmonic_reference(w, x0, period_count as f64 * period);
            assert!((center(&psi) - want).abs() < 1e-6 * x0, "{period_count}");
        }
        for _ in 0..steps / 2 {
            op.step(&grid, &mut psi);
        }
        assert!((center(&psi) + x0).abs() < 1e-6 * x0);
    }

    #[test]
    fn relaxation_reaches_oscillator_energies() {
        let w = ev(1.35);
        let cav = CavitySetup::new(w, 0.0).unwrap();
        let grid = build_grid(GridSpec::new(64, 64, GridSpec::default_half_width(w))).unwrap();
        let opts = RelaxOptions { dt: 0.25, tol: 1e-12, ..Default::default() };
        let guess_x: Vec<f64> = grid.x.iter().map(|x| (-0.02 * x * x).exp()).collect();

        let flat = DiabaticModel::constant(DiabaticPoint { v_a: 0.0, v_b: 0.0, v_ab: 0.0, mu: 1.0 }, 1.0).unwrap();
        let field = assemble_field(&flat, &cav, &grid).unwrap();
        let guess = Wavefunction::product(grid.spec, 0, &guess_x, &vec![Complex64::new(1.0, 0.0); 64]);
        let (_, r) = relax_ground_state(&grid, &field, &guess, &opts).unwrap();
        assert!((r.energy - w / 2.0).abs() < 1e-10, "{}", r.energy);

        let (k, mass) = (0.5, 800.0);
        let well = DiabaticModel::custom(
            move |p| DiabaticPoint { v_a: 0.5 * k * p * p, v_b: 1.0, v_ab: 0.0, mu: 1.0 },
            mass,
        )
        .unwrap();
        let field = assemble_field(&well, &cav, &grid).unwrap();
        let gphi: Vec<Complex64> = grid.phi.iter().map(|p| Complex64::new((-3.0 * p * p).exp(), 0.0)).collect();
        let guess = Wavefunction::product(grid.spec, 0, &guess_x, &gphi);
        let (psi, r) = relax_ground_state(&grid, &field, &guess, &opts).unwrap();
        let want = 0.5 * (k / mass).sqrt() + w / 2.0;
        assert!((r.energy - want).abs() < 1e-9, "{} vs {}", r.energy, want);
        let res = crate::hamiltonian::eigen_residual(&field, &grid, &psi, r.energy).unwrap();
        assert!(res < 1e-5, "{res}");
    }

    #[test]
    fn non_convergence_and_delocalization_are_reported() {
        let w = ev(1.35);
        let cav = CavitySetup::new(w, 0.0).unwrap();
        let grid = build_grid(GridSpec::new(32, 32, GridSpec::default_half_width(w))).unwrap();
        let flat = DiabaticModel::constant(DiabaticPoint { v_a: 0.0, v_b: 0.0, v_ab: 0.0, mu: 1.0 }, 1.0).unwrap();
        let field = assemble_field(&flat, &cav, &grid).unwrap();
        let gx: Vec<f64> = grid.x.iter().map(|x| (-0.01 * x * x).exp()).collect();
        let gphi: Vec<Complex64> = grid.phi.iter().map(|p| Complex64::new((-4.0 * (p.abs() - PI).powi(2)).exp(), 0.0)).collect();
        let guess = Wavefunction::product(grid.spec, 0, &gx, &gphi);
        let short = RelaxOptions { max_iter: 20, tol: 1e-14, ..Default::default() };
        assert!(matches!(relax_ground_state(&grid, &field, &guess, &short), Err(Error::NonConvergence { .. })));
        // flat angular potential: the cis-localized guess spreads out
        let monitored = RelaxOptions { cis_cut: Some(PHI_CUT), ..Default::default() };
        assert!(matches!(relax_ground_state(&grid, &field, &guess, &monitored), Err(Error::Delocalized { .. })));
    }

    fn small_setup(n_mol: usize) -> (DiabaticModel, CavitySetup, Grid, CisGround) {
        let m = default_model();
        let cav = CavitySetup::new(ev(1.35), 0.04).unwrap().with_molecules(n_mol).unwrap();
        let spec = GridSpec::new(48, 48, GridSpec::default_half_width(cav.omega_c)).with_molecules(n_mol);
        let grid = build_grid(spec).unwrap();
        let opts = RelaxOptions { cis_cut: Some(PHI_CUT), ..Default::default() };
        let cis = relax_cis_ground(&m, cav.omega_c, 48, 48, spec.x_half_width, &opts).unwrap();
        (m, cav, grid, cis)
    }

    #[test]
    fn initial_state_properties() {
        let (m, cav, grid, cis) = small_setup(1);
        let psi = make_initial_state(&m, &cav, &grid, &cis, PairExcitation::First).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(psi.is_real(0.0));
        let rot = AdiabaticRotation::new(&m, &grid.phi);
        let fock = grid.fock_basis(5, cav.omega_c).unwrap();
        let p = adiabatic_populations(&grid, &psi, &rot, &fock);
        assert!(p.get(1, 0) >= 0.99);
        for k in 0..2 {
            for n in 0..=5 {
                if (k, n) != (1, 0) {
                    assert!(p.get(k, n) < 0.01);
                }
            }
        }
        assert!(photon_number(&grid, &psi, cav.omega_c).abs() < 1e-10);
        assert!(cis_population(&grid, &psi, PHI_CUT) > 0.999);
        let ct = cis_trans_populations(&grid, &psi, &rot, PHI_CUT);
        assert!(ct.single(1, false) >= 0.99);
        assert!(cis.diabatic_energy.is_some());
    }

    #[test]
    fn pair_initial_state_has_molecule_one_excited() {
        let (m, cav, grid, cis) = small_setup(2);
        let rot = AdiabaticRotation::new(&m, &grid.phi);
        let psi = make_initial_state(&m, &cav, &grid, &cis, PairExcitation::First).unwrap();
        let ct = cis_trans_populations(&grid, &psi, &rot, PHI_CUT);
        assert!(ct.joint(1, false, 0, false) >= 0.99);
        assert!((ct.total() - 1.0).abs() < 1e-12);
        let sym = make_initial_state(&m, &cav, &grid, &cis, PairExcitation::Symmetric).unwrap();
        let ct = cis_trans_populations(&grid, &sym, &rot, PHI_CUT);
        assert!((ct.joint(1, false, 0, false) - ct.joint(0, false, 1, false)).abs() < 1e-12);
        assert!(ct.joint(1, false, 0, false) > 0.45);
    }

    #[test]
    fn step_counting_and_decoupled_photons() {
        let opts = PropagateOptions::new(50.0, 0.5, 50);
        assert_eq!(opts.n_steps(), 4134);
        assert_eq!(opts.n_samples(), 83);

        let (m, _, grid, cis) = small_setup(1);
        let cav = CavitySetup::new(ev(1.35), 0.0).unwrap();
        let field = assemble_field(&m, &cav, &grid).unwrap();
        let psi0 = make_initial_state(&m, &cav, &grid, &cis, PairExcitation::First).unwrap();
        let mut opts = PropagateOptions::new(10.0, 0.5, 40);
        opts.populations = Some(3);
        let (rec, _) = propagate(&grid, &field, &m, &psi0, &opts, &mut []).unwrap();
        assert_eq!(rec.times_fs.len(), opts.n_samples());
        assert!(rec.times_fs.windows(2).all(|w| w[1] > w[0]));
        let first = rec.populations[0].photon_distribution();
        for p in &rec.populations {
            for (a, b) in p.photon_distribution().iter().zip(&first) {
                assert!((a - b).abs() < 1e-8);
            }
        }
        assert!(rec.max_norm_drift() < 1e-9);
        assert!((rec.autocorr[0] - 1.0).norm() < 1e-12);
    }

    #[test]
    fn checkpoints_are_written() {
        let (m, cav, grid, cis) = small_setup(1);
        let field = assemble_field(&m, &cav, &grid).unwrap();
        let psi0 = make_initial_state(&m, &cav, &grid, &cis, PairExcitation::First).unwrap();
        let dir = tempfile::tempdir().unwrap();
        // 166 steps, checkpoints every 83 steps
        let mut opts = PropagateOptions::new(to_fs(83.0), 0.5, 10);
        opts.checkpoint_dir = Some(dir.path().to_path_buf());
        opts.checkpoint_fs = 1.0;
        let (rec, last) = propagate(&grid, &field, &m, &psi0, &opts, &mut []).unwrap();
        assert_eq!(rec.n_steps, 166);
        assert_eq!(rec.checkpoints.len(), 2);
        let (back, t) = crate::grid::read_checkpoint(rec.checkpoints.last().unwrap(), grid.spec.x_half_width).unwrap();
        assert_eq!(t, 83.0);
        assert_eq!(back, last);
    }
}

//! Coupling and tuning sweep of the mean two-photon population. Results are
//! kept in a manifest, so rerunning with the same directory only fills gaps.
//!
//!     cargo run --release --example coupling_sweep -- out/sweep [workers]

use std::path::PathBuf;

use polariflux::sweep::{run_sweep, SweepSpec};
use polariflux::RunConfig;

fn main() -> polariflux::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/sweep".into()));
    let workers = std::env::args().nth(2).and_then(|w| w.parse().ok()).unwrap_or(1);
    let mut cfg = RunConfig::surrogate(0.5, 0.04)?;
    cfg.sweep_epsilons = vec![0.01, 0.02, 0.04];
    cfg.sweep_ratios = vec![0.25, 0.5, 0.75];
    let spec = SweepSpec::from_config(&cfg, workers, Some(dir.clone()));
    let report = run_sweep(&spec)?;
    println!("{} cells, {} reused, {} failed", report.cells.len(), report.reused, report.failures());

    print!("eps \\ ratio");
    for r in &spec.ratios {
        print!("  {r:>9}");
    }
    println!();
    for &e in &spec.epsilons {
        print!("{e:<11}");
        for &r in &spec.ratios {
            match report.get(e, r).and_then(|c| c.mean_pg2) {
                Some(v) => print!("  {v:9.3e}"),
                None => print!("  {:>9}", "failed"),
            }
        }
        println!();
    }
    if let Some(b) = report.best() {
        println!("largest mean P_g2 at eps {} ratio {}", b.epsilon, b.ratio);
    }
    println!("heatmap in {}", dir.display());
    Ok(())
}

//! Two-photon yield grows with coupling on the default grid at half-gap tuning.

use polariflux::sweep::{run_sweep, SweepSpec, HEATMAP, MANIFEST};
use polariflux::RunConfig;

#[test]
fn mean_pg2_is_monotone_in_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::surrogate(0.5, 0.04).unwrap();
    cfg.sweep_epsilons = vec![0.01, 0.02, 0.04];
    cfg.sweep_ratios = vec![0.5];
    let spec = SweepSpec::from_config(&cfg, 1, Some(dir.path().to_path_buf()));
    let report = run_sweep(&spec).unwrap();
    assert_eq!(report.failures(), 0);
    let means: Vec<f64> = [0.01, 0.02, 0.04].iter().map(|&e| report.get(e, 0.5).unwrap().mean_pg2.unwrap()).collect();
    assert!(means.windows(2).all(|w| w[1] > w[0]), "{means:?}");
    assert_eq!(report.best().unwrap().epsilon, 0.04);

    let heat = std::fs::read_to_string(dir.path().join(HEATMAP)).unwrap();
    assert!(heat.starts_with("epsilon,ratio,mean_Pg2,max_Pg2,t_max_fs"));
    assert_eq!(heat.lines().count(), 4);
    assert_eq!(std::fs::read_to_string(dir.path().join(MANIFEST)).unwrap().lines().count(), 3);

    // everything is reused on a second pass
    let again = run_sweep(&spec).unwrap();
    assert_eq!(again.reused, 3);
    assert_eq!(again.cells, report.cells);
}

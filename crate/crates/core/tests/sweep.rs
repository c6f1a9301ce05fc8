use std::fs;

use nfimaging::config::{Config, SolverKind};
use nfimaging::experiment::{run, run_dir};

const GRID: &str = r#"
[scene]
kind = "random-voxels"
grid = [3, 3, 3]
active = 3
reflectivity = "ar1"
psi = 0.8

[arrays]
kind = "corner-units"
rows = 4
cols = 4

[subcarriers]
count = 2

[solver]
name = "sbl"
max_iters = 60

[experiment]
run_id = "repro"
seeds = [1, 2]
powers = ["20 dBm", "30 dBm"]
solvers = ["sbl", "ls", "omp", "ista"]
"#;

#[test]
fn identical_inputs_give_identical_bytes() {
    let cfg = Config::from_toml_str(GRID).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run(&cfg, Some(a.path())).unwrap();
    run(&cfg, Some(b.path())).unwrap();
    assert_eq!(ra.cells.len(), 16);
    assert!(ra.cells.iter().all(|c| c.outcome.is_ok()));
    for f in ["cells.csv", "summary.csv", "metrics.csv", "image_sbl_p30dBm_z10m_s2.csv"] {
        let x = fs::read(a.path().join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f} differs between runs");
    }
}

#[test]
fn summary_has_one_row_per_group_and_metric() {
    let cfg = Config::from_toml_str(GRID).unwrap();
    let r = run(&cfg, None).unwrap();
    // 4 solvers × 2 powers × 1 depth, five metrics each.
    assert_eq!(r.aggregates.len(), 4 * 2 * 5);
    assert!(r.aggregates.iter().all(|a| a.count == 2));
    let p = r.mean(SolverKind::Sbl, 30.0, 10.0, "pcc").unwrap();
    assert!(p > 0.0 && p <= 1.0);
}

#[test]
fn snapshot_reloads_to_the_same_config() {
    let cfg = Config::from_toml_str(GRID).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("c.toml");
    fs::write(&path, cfg.to_toml_string()).unwrap();
    assert_eq!(Config::load(&path).unwrap(), cfg);
    assert_eq!(run_dir(tmp.path(), &cfg), tmp.path().join("runs").join("repro"));
}

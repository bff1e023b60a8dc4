use cpdeconv::estimator::{estimate_changepoint, BandwidthConfig, Estimator, Rule};
use cpdeconv::harness::{parse_config, risk_csv_path, run_sweep};
use cpdeconv::kernels::{gamma_kernel, green_kernel};
use cpdeconv::observation::{load_path, save_path, sidecar_path, PathSimulator};
use cpdeconv::probe::ProbeCurve;
use cpdeconv::smoother::{Smoother, DEFAULT_ETA};
use cpdeconv::spectral::Grid;
use cpdeconv::testbed::{make_jump_function, ClassSpec};
use cpdeconv::Error;
use std::sync::OnceLock;

fn smoother() -> &'static Smoother {
    static S: OnceLock<Smoother> = OnceLock::new();
    S.get_or_init(|| Smoother::new(DEFAULT_ETA).unwrap())
}

const CLASS: ClassSpec = ClassSpec::Fm { m: 1.0, l: 400.0, a: 50.0 };

#[test]
fn saved_path_gives_the_same_estimate() {
    let grid = Grid::observation_default();
    let f = make_jump_function(0.3, 200.0, 0.5, &[], CLASS, grid).unwrap();
    let k = gamma_kernel(0.5).unwrap();
    let path = PathSimulator::new(&f, &k, &grid).unwrap().simulate(0.01, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("obs.csv");
    save_path(&path, &file).unwrap();
    let back = load_path(&file).unwrap();
    assert_eq!(back, path);

    let cfg = BandwidthConfig::new(Rule::Singular);
    let a = estimate_changepoint(&path, &k, smoother(), &cfg, &CLASS, false).unwrap();
    let b = estimate_changepoint(&back, &k, smoother(), &cfg, &CLASS, false).unwrap();
    assert_eq!(a, b);
    assert!((a.theta_tilde - 0.3).abs() < a.h / 4.0, "{a:?}");
}

#[test]
fn tampered_path_is_rejected() {
    let grid = Grid::new(-1.0, 2.0, 256).unwrap();
    let f = make_jump_function(0.5, 1.0, 0.2, &[], ClassSpec::Fm { m: 1.0, l: 5.0, a: 1.0 }, grid).unwrap();
    let k = green_kernel(&[1.0]).unwrap();
    let path = PathSimulator::new(&f, &k, &grid).unwrap().simulate(0.1, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("obs.csv");
    save_path(&path, &file).unwrap();
    let text = std::fs::read_to_string(&file).unwrap().replacen(",", ",1", 2);
    std::fs::write(&file, text).unwrap();
    assert!(matches!(load_path(&file), Err(Error::Checksum { .. })), "{:?}", load_path(&file));

    save_path(&path, &file).unwrap();
    let meta = std::fs::read_to_string(sidecar_path(&file)).unwrap();
    std::fs::write(sidecar_path(&file), meta.replace("\"format_version\": 1", "\"format_version\": 7")).unwrap();
    assert!(matches!(load_path(&file), Err(Error::Version { found: 7, .. })));
}

#[test]
fn probe_curve_round_trip() {
    let grid = Grid::observation_default();
    let f = make_jump_function(0.6, 100.0, 0.5, &[], CLASS, grid).unwrap();
    let k = green_kernel(&[1.0]).unwrap();
    let path = PathSimulator::new(&f, &k, &grid).unwrap().simulate(0.02, 3).unwrap();
    let est = Estimator::new(&k, smoother(), 0.08, &grid, false).unwrap();
    let curve = est.curve(&path).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("curve.csv");
    curve.save(&file).unwrap();
    assert_eq!(ProbeCurve::load(&file).unwrap(), curve);
}

#[test]
fn noiseless_path_needs_manual_rule() {
    let grid = Grid::observation_default();
    let f = make_jump_function(0.41, 100.0, 0.5, &[], CLASS, grid).unwrap();
    let k = green_kernel(&[1.0]).unwrap();
    let path = PathSimulator::new(&f, &k, &grid).unwrap().simulate(0.0, 0).unwrap();
    let auto = BandwidthConfig::new(Rule::RegularFm);
    assert!(estimate_changepoint(&path, &k, smoother(), &auto, &CLASS, false).is_err());
    let r = estimate_changepoint(&path, &k, smoother(), &BandwidthConfig::manual(0.05), &CLASS, true).unwrap();
    assert!((r.theta_tilde - 0.41).abs() < 1e-3);
    assert!((r.baseline_theta.unwrap() - 0.41).abs() < 1e-3);
}

const SMALL: &str = r#"{
  "schema_version": 1,
  "scenarios": [
    {
      "name": "small",
      "function": {"theta": 0.41, "a": 300.0, "class": {"kind": "Fm", "m": 1, "L": 600, "a": 100}},
      "kernel": {"family": "green", "b": [1.0]},
      "rule": {"rule": "regular_fm", "C1s": 5.0},
      "eps_list": [0.05, 0.02, 0.01, 0.005],
      "n_reps": 30,
      "base_seed": 11,
      "checks": {"slope": [0.5, 1.2]}
    }
  ]
}"#;

#[test]
fn sweep_is_reproducible_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, SMALL).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let one = run_sweep(&cfg, &a, Some(1)).unwrap();
    let many = run_sweep(&cfg, &b, Some(3)).unwrap();
    assert_eq!(one, many);
    assert!(one.pass, "{:?}", one.checks);
    let csv = std::fs::read_to_string(risk_csv_path(&a, "small")).unwrap();
    assert_eq!(csv, std::fs::read_to_string(risk_csv_path(&b, "small")).unwrap());
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("eps,h,rmse,rmse_stderr,baseline_rmse,n_reps\n"));
    assert!(a.join("loglog_small.dat").exists() && a.join("summary.json").exists());
    assert!(run_sweep(&cfg, &a, Some(0)).is_err());
}

#[test]
fn reference_config_parses() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/reference.json")).unwrap();
    let cfg = parse_config(&text).unwrap();
    let names: Vec<_> = cfg.scenarios.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["regular_fm", "singular", "analytic"]);
}

#[test]
fn config_errors_point_at_the_problem() {
    let missing = SMALL.replace(r#""n_reps": 30,"#, "");
    match parse_config(&missing).unwrap_err() {
        Error::ConfigParse { detail, .. } => assert!(detail.contains("n_reps"), "{detail}"),
        e => panic!("{e}"),
    }
    let bad_class = SMALL.replace(r#""m": 1, "L": 600"#, r#""m": 1, "L": -1"#);
    match parse_config(&bad_class).unwrap_err() {
        Error::Scenario { scenario, detail } => {
            assert_eq!(scenario, "small");
            assert!(detail.starts_with("line 5:"), "{detail}");
        }
        e => panic!("{e}"),
    }
}

#[test]
fn golden_risk_falls_with_noise() {
    // rmse is non-increasing as eps shrinks, up to two standard errors.
    for name in ["regular_fm", "singular", "analytic"] {
        let path = format!("{}/tests/golden/risk_{name}.csv", env!("CARGO_MANIFEST_DIR"));
        let rows: Vec<Vec<f64>> = std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').take(4).map(|c| c.parse().unwrap()).collect())
            .collect();
        for w in rows.windows(2) {
            let slack = 2.0 * (w[0][3] + w[1][3]);
            assert!(w[1][2] <= w[0][2] + slack, "{name}: {:?} then {:?}", w[0], w[1]);
        }
    }
}

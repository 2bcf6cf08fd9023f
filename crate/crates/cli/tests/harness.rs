use std::path::Path;

use dmd_core::experiment::{
    build_polynomial_regression_game, load_discrete_run, load_trajectory, synthetic_dataset, GameConfig,
    RegularizerTemplate,
};
use dmd_core::game::MonotonicityClass;
use dmd_core::{preset, run_experiment, Algorithm, Dynamics, ExperimentConfig, RunConfig, RunKind, RunOutput};

/// Equal to the 12 significant digits the CSV writer keeps.
fn close(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a == b || (a - b).abs() <= 1e-11 * a.abs().max(b.abs())
}

fn all_close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| close(*x, *y))
}

fn rows_close(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| all_close(x, y))
}

fn small_config() -> ExperimentConfig {
    let mut cfg = preset("quadratic-monotone").unwrap();
    cfg.name = "small".into();
    cfg.horizon = 2.0;
    cfg.record_every = 10;
    let mut md = RunConfig::new(RunKind::Md).with_regularizer(RegularizerTemplate::BoltzmannShannon { shift: 0.0 });
    md.initial_offset = Some(0.4);
    let mut psgd = RunConfig::new(RunKind::Psgd);
    psgd.initial = Some(vec![90.0, -95.0]);
    let mut pdmd = RunConfig::new(RunKind::DiscretePdmd);
    pdmd.max_iter = Some(5000);
    let mut itr = RunConfig::new(RunKind::Itr);
    itr.max_iter = Some(5000);
    cfg.runs.truncate(2);
    cfg.runs.extend([md, psgd, pdmd, itr]);
    for r in &mut cfg.runs {
        r.dt = None;
        r.record_every = None;
    }
    cfg
}

fn flow_dynamics(kind: RunKind) -> Dynamics {
    match kind {
        RunKind::Dmd => Dynamics::Dmd,
        RunKind::Md => Dynamics::Md,
        RunKind::Psgd => Dynamics::Psgd,
        _ => unreachable!(),
    }
}

#[test]
fn csv_files_parse_back_to_the_in_memory_runs() {
    let dir = tempfile::tempdir().unwrap();
    let res = run_experiment(&small_config(), Some(dir.path())).unwrap();
    assert_eq!(res.outputs.len(), 6);
    for run in &res.summary.runs {
        let path = dir.path().join(&run.file);
        assert!(path.is_file(), "{}", path.display());
        match res.output(&run.label).unwrap() {
            RunOutput::Flow(t) => {
                let back = load_trajectory(&path, flow_dynamics(run.dynamics)).unwrap();
                assert_eq!(back.dynamics, t.dynamics);
                assert!(all_close(&back.times, &t.times), "{}", run.label);
                assert!(rows_close(&back.x_path, &t.x_path), "{}", run.label);
                assert!(rows_close(&back.z_path, &t.z_path), "{}", run.label);
                assert!(all_close(&back.residuals, &t.residuals), "{}", run.label);
                assert_eq!(back.saturation_flags, t.saturation_flags);
                match (&back.lyapunov, &t.lyapunov) {
                    (Some(a), Some(b)) => assert!(all_close(a, b)),
                    (None, None) => {}
                    _ => panic!("{}: Lyapunov column mismatch", run.label),
                }
            }
            RunOutput::Discrete(d) => {
                let alg = if run.dynamics == RunKind::Itr {
                    Algorithm::Itr
                } else {
                    Algorithm::DiscretePdmd
                };
                let back = load_discrete_run(&path, alg).unwrap();
                assert_eq!(back.iterations, d.iterations);
                assert!(rows_close(&back.iterates, &d.iterates), "{}", run.label);
                assert!(all_close(&back.residual_history, &d.residual_history), "{}", run.label);
            }
        }
    }
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timing.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn identical_config_and_seed_give_identical_files() {
    let mut cfg = small_config();
    cfg.game = GameConfig::PolyRegression {
        degree: 2,
        points: 8,
        data: None,
    };
    cfg.target = None;
    cfg.seed = 11;
    cfg.runs = vec![RunConfig::new(RunKind::Dmd), RunConfig::new(RunKind::Psgd)];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&cfg, Some(a.path())).unwrap();
    run_experiment(&cfg, Some(b.path())).unwrap();
    let (fa, fb) = (read_dir_sorted(a.path()), read_dir_sorted(b.path()));
    assert_eq!(fa.len(), 3);
    assert_eq!(fa, fb);

    cfg.seed = 12;
    let c = tempfile::tempdir().unwrap();
    run_experiment(&cfg, Some(c.path())).unwrap();
    assert_ne!(read_dir_sorted(c.path()), fa);
}

/// Solves `A^T A w = A^T b` by Gaussian elimination with partial pivoting.
fn normal_equations(a: &[f64], b: &[f64], degree: usize) -> Vec<f64> {
    let m = degree + 1;
    let mut g = vec![vec![0.0; m + 1]; m];
    for (ai, bi) in a.iter().zip(b) {
        let row: Vec<f64> = (0..m).map(|j| ai.powi(j as i32)).collect();
        for r in 0..m {
            for c in 0..m {
                g[r][c] += row[r] * row[c];
            }
            g[r][m] += row[r] * bi;
        }
    }
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| g[i][col].abs().total_cmp(&g[j][col].abs())).unwrap();
        g.swap(col, piv);
        for r in col + 1..m {
            let f = g[r][col] / g[col][col];
            for c in col..=m {
                g[r][c] -= f * g[col][c];
            }
        }
    }
    let mut w = vec![0.0; m];
    for r in (0..m).rev() {
        let s: f64 = (r + 1..m).map(|c| g[r][c] * w[c]).sum();
        w[r] = (g[r][m] - s) / g[r][r];
    }
    w
}

#[test]
fn regression_coefficients_match_normal_equations() {
    let data = synthetic_dataset(20, 0);
    let a: Vec<f64> = data.iter().map(|p| p.a).collect();
    let b: Vec<f64> = data.iter().map(|p| p.b).collect();
    let p = build_polynomial_regression_game(&data, 3).unwrap();
    let oracle = normal_equations(&a, &b, 3);
    for (c, o) in p.coefficients.iter().zip(&oracle) {
        assert!((c - o).abs() <= 1e-8, "{:?} vs {oracle:?}", p.coefficients);
    }
    assert_eq!(p.game.classify_monotonicity().class, MonotonicityClass::Monotone);
}

#[test]
fn poly_regression_preset_targets_the_least_squares_fit() {
    let mut cfg = preset("poly-regression").unwrap();
    cfg.horizon = 5.0;
    cfg.runs.truncate(1);
    let dir = tempfile::tempdir().unwrap();
    let res = run_experiment(&cfg, Some(dir.path())).unwrap();
    let reg = res.summary.regression.as_ref().unwrap();
    let data = synthetic_dataset(20, cfg.seed);
    let a: Vec<f64> = data.iter().map(|p| p.a).collect();
    let b: Vec<f64> = data.iter().map(|p| p.b).collect();
    let oracle = normal_equations(&a, &b, 3);
    assert!(reg.coefficients.iter().zip(&oracle).all(|(c, o)| (c - o).abs() <= 1e-8));
    assert_eq!(res.summary.game.dims, vec![4, 20]);
    assert!(res.summary.target.is_some());
}

#[test]
fn summary_json_lists_every_run_in_config_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    run_experiment(&cfg, Some(dir.path())).unwrap();
    let text = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let labels: Vec<&str> = v["runs"].as_array().unwrap().iter().map(|r| r["label"].as_str().unwrap()).collect();
    let expected: Vec<String> = cfg.runs.iter().map(RunConfig::label).collect();
    assert_eq!(labels, expected);
    assert_eq!(v["any_diverged"], false);
    // The undiscounted run has no rest point reference, the DMD ones do.
    assert!(v["runs"][0]["lyapunov"].is_object());
    assert!(v["runs"][2]["lyapunov"].is_null());
}

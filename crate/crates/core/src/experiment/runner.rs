use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::{
    build_polynomial_regression_game, synthetic_dataset, ExperimentConfig, Expectation, GameConfig,
    PolynomialRegression, RegularizerTemplate, RunConfig, RunKind,
};
use crate::analysis::{
    audit_lyapunov_decay, detect_convergence, detect_convergence_samples, distance_to_equilibrium_set,
    ConvergenceOptions, ConvergenceStatus, ConvergenceVerdict, EquilibriumSet, LyapunovAudit,
};
use crate::discrete::{run_discrete_pdmd, run_itr, Algorithm, DiscreteRun, ItrSettings, PdmdSettings, Target};
use crate::equilibrium::rest_point;
use crate::error::{Error, Result};
use crate::flows::{integrate, Dynamics, FlowSpec, IntegrateSettings, Trajectory};
use crate::game::{mean_learning, Game, MonotonicityReport, QuadraticGame};
use crate::regularizer::{RegularizerKind, RegularizerProfile};

#[derive(Clone, Debug, PartialEq)]
pub enum RunOutput {
    Flow(Trajectory),
    Discrete(DiscreteRun),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub dynamics: RunKind,
    pub regularizer: RegularizerTemplate,
    pub epsilon: f64,
    pub gamma: Option<f64>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub initial: Vec<f64>,
    pub file: String,
    pub samples: usize,
    pub final_x: Vec<f64>,
    pub verdict: ConvergenceVerdict,
    pub diverged_at: Option<f64>,
    pub saturated: bool,
    pub rest_point: Option<Vec<f64>>,
    pub rest_point_distance: Option<f64>,
    pub rest_point_error: Option<String>,
    pub lyapunov: Option<LyapunovAudit>,
    pub iterations: Option<usize>,
    pub first_within: Option<usize>,
    pub settled_within: Option<usize>,
    pub expect: Option<Expectation>,
    pub matches_expectation: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameSummary {
    pub kind: &'static str,
    pub dims: Vec<usize>,
    pub monotonicity: MonotonicityReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegressionSummary {
    pub coefficients: Vec<f64>,
    pub equilibrium: Vec<f64>,
}

/// Contents of `summary.json`. Wall-clock times live in `timing.json` so
/// that the summary is byte-for-byte reproducible.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub seed: u64,
    pub game: GameSummary,
    pub target: Option<EquilibriumSet>,
    pub regression: Option<RegressionSummary>,
    pub runs: Vec<RunSummary>,
    pub any_diverged: bool,
    pub all_as_expected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunTiming {
    pub label: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timing {
    pub runs: Vec<RunTiming>,
    pub total_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub dir: PathBuf,
    pub summary: Summary,
    pub timing: Timing,
    /// In-memory outputs in run order, keyed by label.
    pub outputs: Vec<(String, RunOutput)>,
}

impl ExperimentResult {
    pub fn output(&self, label: &str) -> Option<&RunOutput> {
        self.outputs.iter().find(|(l, _)| l == label).map(|(_, o)| o)
    }

    pub fn run(&self, label: &str) -> Option<&RunSummary> {
        self.summary.runs.iter().find(|r| r.label == label)
    }
}

struct BuiltGame {
    kind: &'static str,
    q: QuadraticGame,
    dims: Vec<usize>,
    regression: Option<PolynomialRegression>,
}

fn build_game(cfg: &ExperimentConfig) -> Result<BuiltGame> {
    Ok(match &cfg.game {
        GameConfig::Quadratic { r, b, dims } => {
            let q = QuadraticGame::from_rows(r, b)?;
            let dims = dims.clone().unwrap_or_else(|| vec![1; b.len()]);
            if dims.iter().sum::<usize>() != b.len() || dims.contains(&0) {
                return Err(Error::Config(format!(
                    "player dimensions {dims:?} do not partition {} coordinates",
                    b.len()
                )));
            }
            BuiltGame {
                kind: "quadratic",
                q,
                dims,
                regression: None,
            }
        }
        GameConfig::MeanLearning { v } => {
            if !v.is_finite() {
                return Err(Error::Config("mean-learning target must be finite".into()));
            }
            BuiltGame {
                kind: "mean_learning",
                q: mean_learning(*v),
                dims: vec![1, 1],
                regression: None,
            }
        }
        GameConfig::PolyRegression { degree, points, data } => {
            let data = match data {
                Some(d) => d.clone(),
                None => synthetic_dataset(*points, cfg.seed),
            };
            let p = build_polynomial_regression_game(&data, *degree)?;
            BuiltGame {
                kind: "poly_regression",
                q: p.game.clone(),
                dims: p.dims.clone(),
                regression: Some(p),
            }
        }
    })
}

fn profile(template: &RegularizerTemplate, dims: &[usize], eps: f64) -> Result<RegularizerProfile> {
    RegularizerProfile::new(
        dims.iter()
            .map(|d| template.instantiate(*d, eps))
            .collect::<Result<_>>()?,
    )
}

fn expectation_met(e: Expectation, status: ConvergenceStatus) -> bool {
    match e {
        Expectation::Converged => status == ConvergenceStatus::Converged,
        Expectation::NonConverged => status != ConvergenceStatus::Converged,
        Expectation::Cycling => status == ConvergenceStatus::Cycling,
        Expectation::Diverged => status == ConvergenceStatus::Diverged,
    }
}

struct RunResult {
    summary: RunSummary,
    output: RunOutput,
    seconds: f64,
}

fn execute(
    cfg: &ExperimentConfig,
    built: &BuiltGame,
    target: Option<&EquilibriumSet>,
    run: &RunConfig,
    dir: &Path,
) -> Result<RunResult> {
    let start = Instant::now();
    let label = run.label();
    let n: usize = built.dims.iter().sum();
    let eps = run.epsilon.unwrap_or(cfg.epsilon);
    let gamma = run.gamma.unwrap_or(cfg.gamma);
    let dt = run.dt.unwrap_or(cfg.dt);
    let horizon = run.horizon.unwrap_or(cfg.horizon);
    let record_every = run.record_every.unwrap_or(cfg.record_every);
    let mut initial = run.initial.clone().unwrap_or_else(|| vec![0.0; n]);
    if initial.len() != n {
        return Err(Error::Config(format!(
            "run {label}: initial state has {} entries, the game has {n}",
            initial.len()
        )));
    }
    if let Some(o) = run.initial_offset {
        initial.iter_mut().for_each(|v| *v += o);
    }
    let regs = profile(&run.regularizer, &built.dims, eps)?;
    let game = Game::quadratic(built.q.clone(), regs.domains())?;
    let euclidean = regs
        .regs()
        .iter()
        .all(|r| matches!(r.kind(), RegularizerKind::Euclidean { .. }));
    if !run.dynamics.is_mirror_flow() && !euclidean {
        return Err(Error::Config(format!(
            "run {label}: {} uses Euclidean projections; its regularizer must be euclidean",
            run.dynamics.name()
        )));
    }

    let file = format!("{label}.csv");
    let opts = ConvergenceOptions {
        target: target.cloned(),
        ..Default::default()
    };
    let mut rest = None;
    let mut rest_error = None;
    if matches!(run.dynamics, RunKind::Dmd | RunKind::DiscretePdmd) {
        match rest_point(&game, &regs) {
            Ok(rp) => rest = Some(rp),
            Err(e) => rest_error = Some(e.to_string()),
        }
    }

    let (output, verdict, final_x, samples, diverged_at, saturated, lyapunov, discrete) = match run.dynamics {
        RunKind::Dmd | RunKind::Md | RunKind::Psgd => {
            let flow = match run.dynamics {
                RunKind::Dmd => FlowSpec::dmd(game.clone(), regs.clone(), gamma, initial.clone())?,
                RunKind::Md => FlowSpec::md(game.clone(), regs.clone(), gamma, initial.clone())?,
                _ => FlowSpec::psgd(game.clone(), gamma, initial.clone())?,
            };
            let mut settings = IntegrateSettings::new(horizon, dt, record_every);
            if run.dynamics == RunKind::Dmd {
                if let Some(rp) = &rest {
                    settings = settings.with_lyapunov_ref(rp.z.clone());
                }
            }
            let tr = integrate(&flow, &settings)?;
            let verdict = detect_convergence(&tr, &opts)?;
            let lyap = tr.lyapunov.as_ref().map(|_| audit_lyapunov_decay(&tr)).transpose()?;
            let fx = tr.final_x().map(<[f64]>::to_vec).unwrap_or_default();
            let (len, div, sat) = (tr.len(), tr.diverged_at, tr.any_saturated());
            (RunOutput::Flow(tr), verdict, fx, len, div, sat, lyap, None)
        }
        RunKind::DiscretePdmd | RunKind::Itr => {
            let tgt = target.map(|set| Target {
                set: set.clone(),
                radius: cfg.target_radius,
            });
            let max_iter = run.max_iter.unwrap_or(1_000_000);
            let dr = if run.dynamics == RunKind::DiscretePdmd {
                run_discrete_pdmd(
                    &game,
                    &initial,
                    &PdmdSettings {
                        step: run.step.unwrap_or(1e-3),
                        epsilon: eps,
                        max_iter,
                        record_every,
                        target: tgt,
                    },
                )?
            } else {
                run_itr(
                    &game,
                    &initial,
                    &ItrSettings {
                        step_exponent: run.step_exponent.unwrap_or(0.48),
                        regularization_exponent: run.regularization_exponent.unwrap_or(0.51),
                        max_iter,
                        record_every,
                        target: tgt,
                    },
                )?
            };
            let verdict = detect_convergence_samples(&dr.iterates, dr.diverged_at.is_some(), &opts)?;
            let fx = dr.final_x().map(<[f64]>::to_vec).unwrap_or_default();
            let len = dr.iterates.len();
            let div = dr.diverged_at.map(|k| k as f64);
            let extra = (dr.iteration_count, dr.first_within, dr.settled_within);
            (RunOutput::Discrete(dr), verdict, fx, len, div, false, None, Some(extra))
        }
    };

    let path = dir.join(&file);
    let mut w = BufWriter::new(File::create(&path)?);
    match &output {
        RunOutput::Flow(tr) => tr.write_csv(&mut w)?,
        RunOutput::Discrete(dr) => dr.write_csv(&mut w)?,
    }
    w.flush()?;

    let flow_like = !run.dynamics.is_discrete();
    let summary = RunSummary {
        label: label.clone(),
        dynamics: run.dynamics,
        regularizer: run.regularizer.clone(),
        epsilon: eps,
        gamma: flow_like.then_some(gamma),
        dt: flow_like.then_some(dt),
        horizon: flow_like.then_some(horizon),
        initial,
        file,
        samples,
        rest_point_distance: rest
            .as_ref()
            .filter(|_| !final_x.is_empty())
            .map(|rp| crate::linalg::dist2(&final_x, &rp.x)),
        final_x,
        diverged_at,
        saturated,
        rest_point: rest.map(|rp| rp.x),
        rest_point_error: rest_error,
        lyapunov,
        iterations: discrete.map(|d| d.0),
        first_within: discrete.and_then(|d| d.1),
        settled_within: discrete.and_then(|d| d.2),
        expect: run.expect,
        matches_expectation: run.expect.map(|e| expectation_met(e, verdict.status)),
        verdict,
    };
    Ok(RunResult {
        summary,
        output,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs every configured dynamics concurrently and writes `<label>.csv`
/// per run, then `summary.json` and `timing.json` into `dir` (or the
/// config's `out`, or `out/<name>`).
pub fn run_experiment(cfg: &ExperimentConfig, dir: Option<&Path>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let start = Instant::now();
    let dir = dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    std::fs::create_dir_all(&dir)?;

    let built = build_game(cfg)?;
    let target = cfg
        .target
        .clone()
        .or_else(|| built.regression.as_ref().map(|p| EquilibriumSet::point(p.equilibrium.clone())));
    if let Some(t) = &target {
        distance_to_equilibrium_set(&vec![0.0; built.q.b().len()], t)
            .map_err(|e| Error::Config(format!("target: {e}")))?;
    }

    let results: Vec<Result<RunResult>> = std::thread::scope(|s| {
        let handles: Vec<_> = cfg
            .runs
            .iter()
            .map(|run| {
                let (built, target, dir) = (&built, target.as_ref(), dir.as_path());
                s.spawn(move || execute(cfg, built, target, run, dir))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Settings("run thread panicked".into()))))
            .collect()
    });

    let mut runs = Vec::with_capacity(results.len());
    let mut outputs = Vec::with_capacity(results.len());
    let mut timings = Vec::with_capacity(results.len());
    for r in results {
        let r = r?;
        timings.push(RunTiming {
            label: r.summary.label.clone(),
            seconds: r.seconds,
        });
        outputs.push((r.summary.label.clone(), r.output));
        runs.push(r.summary);
    }

    let summary = Summary {
        name: cfg.name.clone(),
        seed: cfg.seed,
        game: GameSummary {
            kind: built.kind,
            dims: built.dims.clone(),
            monotonicity: built.q.classify_monotonicity(),
        },
        target,
        regression: built.regression.as_ref().map(|p| RegressionSummary {
            coefficients: p.coefficients.clone(),
            equilibrium: p.equilibrium.clone(),
        }),
        any_diverged: runs.iter().any(|r| r.verdict.status == ConvergenceStatus::Diverged),
        all_as_expected: runs.iter().all(|r| r.matches_expectation != Some(false)),
        runs,
    };
    let timing = Timing {
        runs: timings,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&dir.join("timing.json"), &timing)?;
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(ExperimentResult {
        dir,
        summary,
        timing,
        outputs,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_trajectory(path: &Path, dynamics: Dynamics) -> Result<Trajectory> {
    Trajectory::read_csv(BufReader::new(File::open(path)?), dynamics)
}

pub fn load_discrete_run(path: &Path, algorithm: Algorithm) -> Result<DiscreteRun> {
    DiscreteRun::read_csv(BufReader::new(File::open(path)?), algorithm)
}

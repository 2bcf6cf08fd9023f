use serde::Serialize;

use super::{
    ExperimentConfig, Expectation, GameConfig, RegularizerTemplate, RunConfig, RunKind,
};
use crate::analysis::EquilibriumSet;
use crate::error::{Error, Result};

pub const PRESET_NAMES: [&str; 5] = [
    "quadratic-monotone",
    "quadratic-hypo",
    "mean-learning",
    "poly-regression",
    "pdmd-vs-itr",
];

#[derive(Clone, Debug, Serialize)]
pub struct PresetDescriptor {
    pub name: &'static str,
    pub description: &'static str,
    /// The plot the preset's output reproduces.
    pub figure: &'static str,
    pub config: ExperimentConfig,
}

pub fn preset_catalog() -> Vec<PresetDescriptor> {
    PRESET_NAMES
        .iter()
        .map(|n| describe(n).expect("registered preset"))
        .collect()
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    describe(name).map(|d| d.config)
}

fn euclid() -> RegularizerTemplate {
    RegularizerTemplate::default()
}

fn bs(shift: f64) -> RegularizerTemplate {
    RegularizerTemplate::BoltzmannShannon { shift }
}

fn fd() -> RegularizerTemplate {
    RegularizerTemplate::FermiDirac {
        lower: -100.0,
        upper: 100.0,
    }
}

fn hellinger() -> RegularizerTemplate {
    RegularizerTemplate::Hellinger {
        center: 0.0,
        radius: 100.0,
    }
}

fn flow(kind: RunKind, reg: RegularizerTemplate, offset: f64, expect: Expectation) -> RunConfig {
    let mut r = RunConfig::new(kind).with_regularizer(reg);
    if offset != 0.0 {
        r.initial_offset = Some(offset);
    }
    r.expect = Some(expect);
    r
}

/// Hellinger runs are stiff near the centre of the ball; they get a
/// smaller step and a matching recording stride.
fn fine(mut r: RunConfig) -> RunConfig {
    r.dt = Some(1e-4);
    r.record_every = Some(1000);
    r
}

fn quadratic(r: [[f64; 2]; 2]) -> GameConfig {
    GameConfig::Quadratic {
        r: r.iter().map(|row| row.to_vec()).collect(),
        b: vec![500.0, -500.0],
        dims: None,
    }
}

fn ne_line() -> EquilibriumSet {
    EquilibriumSet::hyperplane(vec![1.0, -1.0], 50.0)
}

fn base(name: &str, game: GameConfig, epsilon: f64, runs: Vec<RunConfig>) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        seed: 0,
        game,
        gamma: 1.0,
        epsilon,
        horizon: 50.0,
        dt: 1e-3,
        record_every: 100,
        target: None,
        target_radius: 1.0,
        out: None,
        runs,
    }
}

fn describe(name: &str) -> Result<PresetDescriptor> {
    use Expectation::*;
    use RunKind::*;
    let monotone_r = [[-10.0, 10.0], [10.0, -10.0]];
    let d = match name {
        "quadratic-monotone" => {
            let mut c = base(
                name,
                quadratic(monotone_r),
                0.5,
                vec![
                    flow(Dmd, euclid(), 0.0, Converged),
                    flow(Dmd, bs(0.0), 0.1, Converged),
                    flow(Dmd, fd(), 0.2, Converged),
                    fine(flow(Dmd, hellinger(), 0.3, Converged)),
                ],
            );
            c.target = Some(ne_line());
            PresetDescriptor {
                name: "quadratic-monotone",
                description: "Monotone two-player quadratic game with a line of equilibria; \
                              DMD with four regularizers at eps = 0.5",
                figure: "primal trajectories of the four DMD variants approaching the line x1 - x2 = 50",
                config: c,
            }
        }
        "quadratic-hypo" => {
            let mut runs = vec![
                flow(Dmd, euclid(), 0.0, Converged),
                flow(Dmd, bs(0.0), 0.1, NonConverged),
                flow(Dmd, fd(), 0.2, NonConverged),
                fine(flow(Dmd, hellinger(), 0.3, NonConverged)),
            ];
            for (reg, offset) in [(bs(0.0), 0.1), (fd(), 0.2), (hellinger(), 0.3)] {
                let mut r = flow(Dmd, reg, offset, NonConverged);
                r.epsilon = Some(1.0);
                r.label = Some(format!("{}_eps1", r.label()));
                if matches!(r.regularizer, RegularizerTemplate::Hellinger { .. }) {
                    r = fine(r);
                }
                runs.push(r);
            }
            let mut c = base(name, quadratic([[-10.0, 15.0], [15.0, -10.0]]), 5.1, runs);
            c.target = Some(EquilibriumSet::point(vec![20.0, -20.0]));
            PresetDescriptor {
                name: "quadratic-hypo",
                description: "Hypo-monotone quadratic game (mu = 5); Euclidean DMD above the \
                              eps > mu / rho threshold against the Legendre regularizers",
                figure: "Euclidean DMD settling near (16.6, -16.6) while the other dynamics miss it",
                config: c,
            }
        }
        "mean-learning" => {
            let regs = [(euclid(), 0.0), (bs(100.0), 0.1), (fd(), 0.2), (hellinger(), 0.3)];
            let mut runs: Vec<RunConfig> = regs.iter().map(|(r, o)| flow(Dmd, r.clone(), *o, Converged)).collect();
            runs.extend(regs.iter().map(|(r, o)| flow(Md, r.clone(), *o, Cycling)));
            let mut c = base(name, GameConfig::MeanLearning { v: 50.0 }, 0.1, runs);
            c.dt = 1e-4;
            c.record_every = 1000;
            c.target = Some(EquilibriumSet::point(vec![50.0, 0.0]));
            PresetDescriptor {
                name: "mean-learning",
                description: "Scalar mean-learning game with equilibrium (50, 0); discounted \
                              against undiscounted mirror descent at eps = 0.1",
                figure: "DMD spirals converging to (50, 0) next to the closed orbits of MD",
                config: c,
            }
        }
        "poly-regression" => {
            // The design matrix scales the mirror-map slope, so the Legendre
            // variants need a finer step than on the two-player games.
            let fd_run = fine(flow(Dmd, fd(), 0.0, Converged));
            let mut hel_run = flow(Dmd, hellinger(), 0.0, Converged);
            hel_run.dt = Some(5e-5);
            hel_run.record_every = Some(2000);
            let runs = vec![flow(Dmd, euclid(), 0.0, Converged), fd_run, hel_run, RunConfig::new(Psgd)];
            let mut c = base(
                name,
                GameConfig::PolyRegression {
                    degree: 3,
                    points: 20,
                    data: None,
                },
                0.1,
                runs,
            );
            c.horizon = 200.0;
            c.record_every = 1000;
            PresetDescriptor {
                name: "poly-regression",
                description: "Cubic least-squares fit of a seeded 20-point dataset posed as a \
                              zero-sum game between coefficients and residuals",
                figure: "coefficient trajectories of three DMD variants and PSGD",
                config: c,
            }
        }
        "pdmd-vs-itr" => {
            let mut pdmd = RunConfig::new(DiscretePdmd);
            pdmd.step = Some(1e-3);
            pdmd.epsilon = Some(0.1);
            pdmd.max_iter = Some(1_000_000);
            pdmd.record_every = Some(1000);
            let mut itr = RunConfig::new(Itr);
            itr.step_exponent = Some(0.48);
            itr.regularization_exponent = Some(0.51);
            itr.max_iter = Some(1_000_000);
            itr.record_every = Some(1000);
            let mut c = base(name, quadratic(monotone_r), 0.1, vec![pdmd, itr]);
            c.target = Some(ne_line());
            PresetDescriptor {
                name: "pdmd-vs-itr",
                description: "Discrete PDMD (t = 0.001, eps = 0.1) against iterative Tikhonov \
                              regularization (t_k = k^-0.48, eps_k = k^-0.51) on the monotone game",
                figure: "iterates of both schemes approaching the line x1 - x2 = 50",
                config: c,
            }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; available: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    d.config.validate()?;
    Ok(d)
}

//! Declarative experiments: a TOML-serializable [`ExperimentConfig`], the
//! built-in presets and the runner that writes CSV trajectories and a JSON
//! summary.

mod presets;
mod regression;
mod runner;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::analysis::EquilibriumSet;
use crate::error::{Error, Result};
use crate::regularizer::Regularizer;
use crate::sets::ActionSet;

pub use presets::{preset, preset_catalog, PresetDescriptor, PRESET_NAMES};
pub use regression::{build_polynomial_regression_game, synthetic_dataset, DataPoint, PolynomialRegression};
pub use runner::{
    load_discrete_run, load_trajectory, run_experiment, ExperimentResult, GameSummary, RegressionSummary, RunOutput,
    RunSummary, RunTiming, Summary, Timing,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Dmd,
    Md,
    Psgd,
    DiscretePdmd,
    Itr,
}

impl RunKind {
    pub fn name(self) -> &'static str {
        match self {
            RunKind::Dmd => "dmd",
            RunKind::Md => "md",
            RunKind::Psgd => "psgd",
            RunKind::DiscretePdmd => "discrete_pdmd",
            RunKind::Itr => "itr",
        }
    }

    pub fn is_mirror_flow(self) -> bool {
        matches!(self, RunKind::Dmd | RunKind::Md)
    }

    pub fn is_discrete(self) -> bool {
        matches!(self, RunKind::DiscretePdmd | RunKind::Itr)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameConfig {
    /// `U(x) = R x + b`; `dims` defaults to one coordinate per player.
    Quadratic {
        r: Vec<Vec<f64>>,
        b: Vec<f64>,
        #[serde(default)]
        dims: Option<Vec<usize>>,
    },
    /// Two-player game `U(x) = (x_2, v - x_1)` with equilibrium `(v, 0)`.
    MeanLearning { v: f64 },
    /// Polynomial least squares as a zero-sum game; without explicit data a
    /// synthetic dataset of `points` samples is drawn from the seed.
    PolyRegression {
        degree: usize,
        #[serde(default = "default_points")]
        points: usize,
        #[serde(default)]
        data: Option<Vec<DataPoint>>,
    },
}

fn default_points() -> usize {
    20
}

/// Per-player regularizer, instantiated for each player's dimension. Its
/// domain is the action set the run actually uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegularizerTemplate {
    /// Euclidean on the box `[lower, upper]^n`.
    #[serde(alias = "euclidean_box")]
    Euclidean {
        #[serde(default = "default_lower")]
        lower: f64,
        #[serde(default = "default_upper")]
        upper: f64,
    },
    SimplexEntropy,
    BoltzmannShannon {
        #[serde(default)]
        shift: f64,
    },
    FermiDirac {
        #[serde(default = "default_lower")]
        lower: f64,
        #[serde(default = "default_upper")]
        upper: f64,
    },
    /// Hellinger on the ball of `radius` around `center * 1`.
    Hellinger {
        #[serde(default)]
        center: f64,
        #[serde(default = "default_upper")]
        radius: f64,
    },
}

fn default_lower() -> f64 {
    -100.0
}

fn default_upper() -> f64 {
    100.0
}

impl Default for RegularizerTemplate {
    fn default() -> Self {
        RegularizerTemplate::Euclidean {
            lower: default_lower(),
            upper: default_upper(),
        }
    }
}

impl RegularizerTemplate {
    pub fn name(&self) -> &'static str {
        match self {
            RegularizerTemplate::Euclidean { .. } => "euclidean",
            RegularizerTemplate::SimplexEntropy => "simplex_entropy",
            RegularizerTemplate::BoltzmannShannon { .. } => "boltzmann_shannon",
            RegularizerTemplate::FermiDirac { .. } => "fermi_dirac",
            RegularizerTemplate::Hellinger { .. } => "hellinger",
        }
    }

    pub fn instantiate(&self, dim: usize, epsilon: f64) -> Result<Regularizer> {
        match *self {
            RegularizerTemplate::Euclidean { lower, upper } => {
                Regularizer::euclidean(ActionSet::cube(dim, lower, upper)?, epsilon)
            }
            RegularizerTemplate::SimplexEntropy => Regularizer::simplex_entropy(dim, epsilon),
            RegularizerTemplate::BoltzmannShannon { shift } => Regularizer::boltzmann_shannon(dim, shift, epsilon),
            RegularizerTemplate::FermiDirac { lower, upper } => Regularizer::fermi_dirac(dim, lower, upper, epsilon),
            RegularizerTemplate::Hellinger { center, radius } => {
                Regularizer::hellinger(vec![center; dim], radius, epsilon)
            }
        }
    }
}

/// Outcome a run is expected to show; recorded in the summary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Converged,
    NonConverged,
    Cycling,
    Diverged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// File stem of the run's CSV; defaults to `<dynamics>_<regularizer>`
    /// for flows and `<dynamics>` for discrete schemes.
    #[serde(default)]
    pub label: Option<String>,
    pub dynamics: RunKind,
    #[serde(default)]
    pub regularizer: RegularizerTemplate,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub record_every: Option<usize>,
    /// Initial state: `z(0)` for mirror flows and discrete PDMD, `x(0)` for
    /// psgd and ITR. Defaults to zero.
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    /// Added to every coordinate of the initial state.
    #[serde(default)]
    pub initial_offset: Option<f64>,
    /// Discrete PDMD step.
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    /// ITR schedule exponents.
    #[serde(default)]
    pub step_exponent: Option<f64>,
    #[serde(default)]
    pub regularization_exponent: Option<f64>,
    #[serde(default)]
    pub expect: Option<Expectation>,
}

impl RunConfig {
    pub fn new(dynamics: RunKind) -> Self {
        RunConfig {
            label: None,
            dynamics,
            regularizer: RegularizerTemplate::default(),
            epsilon: None,
            gamma: None,
            dt: None,
            horizon: None,
            record_every: None,
            initial: None,
            initial_offset: None,
            step: None,
            max_iter: None,
            step_exponent: None,
            regularization_exponent: None,
            expect: None,
        }
    }

    pub fn with_regularizer(mut self, t: RegularizerTemplate) -> Self {
        self.regularizer = t;
        self
    }

    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let k = self.dynamics;
        if k.is_mirror_flow() {
            format!("{}_{}", k.name(), self.regularizer.name())
        } else {
            k.name().to_string()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub game: GameConfig,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Equilibrium set distances are reported against.
    #[serde(default)]
    pub target: Option<EquilibriumSet>,
    /// Radius around `target` used for the discrete schemes' hitting
    /// iteration.
    #[serde(default = "default_target_radius")]
    pub target_radius: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub runs: Vec<RunConfig>,
}

fn default_gamma() -> f64 {
    1.0
}
fn default_epsilon() -> f64 {
    0.5
}
fn default_horizon() -> f64 {
    50.0
}
fn default_dt() -> f64 {
    1e-3
}
fn default_record_every() -> usize {
    100
}
fn default_target_radius() -> f64 {
    1.0
}

/// Command-line overrides applied on top of a config.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Overrides replace both the top-level value and any per-run value.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(dt) = o.dt {
            self.dt = dt;
            for r in &mut self.runs {
                r.dt = None;
            }
        }
        if let Some(h) = o.horizon {
            self.horizon = h;
            for r in &mut self.runs {
                r.horizon = None;
            }
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.runs.is_empty() {
            return bad("an experiment needs at least one run".into());
        }
        for (name, v) in [
            ("gamma", self.gamma),
            ("epsilon", self.epsilon),
            ("horizon", self.horizon),
            ("dt", self.dt),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        let mut labels = std::collections::BTreeSet::new();
        for r in &self.runs {
            let label = r.label();
            if label.is_empty()
                || !label
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
                || label.starts_with('.')
            {
                return bad(format!("run label {label:?} is not a plain file stem"));
            }
            if !labels.insert(label.clone()) {
                return bad(format!("duplicate run label {label:?}"));
            }
        }
        Ok(())
    }
}

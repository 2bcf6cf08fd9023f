//! Discounted mirror descent for N-player concave games.
//!
//! The crate provides the game model ([`Game`], [`QuadraticGame`]), the
//! regularizer catalogue ([`Regularizer`]), continuous-time flows integrated
//! with fixed-step RK4 ([`flows`]), the discrete-time schemes
//! ([`discrete`]), trajectory analysis ([`analysis`]) and a config-driven
//! experiment runner ([`experiment`]).

pub mod analysis;
pub mod csv;
pub mod discrete;
pub mod equilibrium;
pub mod experiment;
pub mod error;
pub mod flows;
pub mod game;
pub mod linalg;
pub mod regularizer;
pub mod sets;

pub use error::{Error, Result};
pub use flows::{integrate, Dynamics, FlowSpec, IntegrateSettings, Trajectory};
pub use game::{
    FnPseudoGradient, Game, MonotonicityClass, MonotonicityEvidence, MonotonicityReport,
    PseudoGradient, QuadraticGame,
};
pub use analysis::{
    audit_lyapunov_decay, detect_convergence, distance_to_equilibrium_set, verify_mirror_map_properties,
    ConvergenceOptions, ConvergenceStatus, ConvergenceVerdict, EquilibriumSet, LyapunovAudit, MirrorMapReport,
};
pub use discrete::{run_discrete_pdmd, run_itr, Algorithm, DiscreteRun, ItrSettings, PdmdSettings, Target};
pub use equilibrium::{perturbed_equilibrium, rest_point, RestPoint};
pub use regularizer::{Convexity, NormKind, Regularizer, RegularizerKind, RegularizerProfile};
pub use sets::ActionSet;
pub use experiment::{
    preset, preset_catalog, run_experiment, ExperimentConfig, ExperimentResult, RunConfig, RunKind, RunOutput,
    Summary,
};

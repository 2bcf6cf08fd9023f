//! Trajectory diagnostics: convergence and cycling verdicts, distances to
//! equilibrium sets, Lyapunov audits and mirror-map property reports.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::flows::Trajectory;
use crate::linalg::{dist2, dot, norm2, norm_inf};
use crate::regularizer::{Convexity, NormKind, Regularizer};
use crate::sets::ActionSet;

/// Tail-window defaults.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.25;
pub const DEFAULT_TOL: f64 = 1e-3;
/// Sup-norm beyond which a state counts as diverged.
pub const DIVERGENCE_GUARD: f64 = 1e6;
pub const MIN_SAMPLES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceStatus {
    Converged,
    Cycling,
    Diverged,
    Undetermined,
}

impl ConvergenceStatus {
    pub fn name(self) -> &'static str {
        match self {
            ConvergenceStatus::Converged => "converged",
            ConvergenceStatus::Cycling => "cycling",
            ConvergenceStatus::Diverged => "diverged",
            ConvergenceStatus::Undetermined => "undetermined",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceVerdict {
    pub status: ConvergenceStatus,
    /// Mean of the tail window (last finite state if diverged).
    pub limit_estimate: Vec<f64>,
    /// Largest distance from the mean over the tail window.
    pub window_radius: f64,
    pub target_distance: Option<f64>,
}

/// Set of equilibria to measure distances against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EquilibriumSet {
    Point { x: Vec<f64> },
    /// `{x : normal^T x = offset}`.
    Hyperplane { normal: Vec<f64>, offset: f64 },
}

impl EquilibriumSet {
    pub fn point(x: Vec<f64>) -> Self {
        EquilibriumSet::Point { x }
    }

    pub fn hyperplane(normal: Vec<f64>, offset: f64) -> Self {
        EquilibriumSet::Hyperplane { normal, offset }
    }
}

pub fn distance_to_equilibrium_set(x: &[f64], set: &EquilibriumSet) -> Result<f64> {
    match set {
        EquilibriumSet::Point { x: p } => {
            check_dim(p.len(), x.len())?;
            Ok(dist2(x, p))
        }
        EquilibriumSet::Hyperplane { normal, offset } => {
            check_dim(normal.len(), x.len())?;
            let n = norm2(normal);
            if !(n.is_finite() && n > 0.0 && offset.is_finite()) {
                return Err(Error::Settings("hyperplane needs a finite nonzero normal".into()));
            }
            Ok((dot(normal, x) - offset).abs() / n)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceOptions {
    pub tail_fraction: f64,
    pub tol: f64,
    pub guard: f64,
    pub target: Option<EquilibriumSet>,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions {
            tail_fraction: DEFAULT_TAIL_FRACTION,
            tol: DEFAULT_TOL,
            guard: DIVERGENCE_GUARD,
            target: None,
        }
    }
}

impl ConvergenceOptions {
    pub fn with_target(mut self, target: EquilibriumSet) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Verdict on the primal path of a flow.
pub fn detect_convergence(traj: &Trajectory, opts: &ConvergenceOptions) -> Result<ConvergenceVerdict> {
    detect_convergence_samples(&traj.x_path, traj.diverged(), opts)
}

/// Verdict on a sequence of states; `diverged` marks a path that was cut
/// short by a non-finite value.
pub fn detect_convergence_samples(
    path: &[Vec<f64>],
    diverged: bool,
    opts: &ConvergenceOptions,
) -> Result<ConvergenceVerdict> {
    if !(opts.tail_fraction > 0.0 && opts.tail_fraction <= 1.0) {
        return Err(Error::Settings(format!(
            "tail_fraction must lie in (0, 1], got {}",
            opts.tail_fraction
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Settings(format!("tol must be positive, got {}", opts.tol)));
    }
    let last_finite = path
        .iter()
        .rev()
        .find(|x| x.iter().all(|v| v.is_finite()))
        .cloned()
        .unwrap_or_default();
    let target_distance = |x: &[f64]| -> Result<Option<f64>> {
        match &opts.target {
            Some(t) if !x.is_empty() => Ok(Some(distance_to_equilibrium_set(x, t)?)),
            _ => Ok(None),
        }
    };
    let non_finite = path.iter().any(|x| !x.iter().all(|v| v.is_finite()));
    if diverged || non_finite {
        return Ok(ConvergenceVerdict {
            status: ConvergenceStatus::Diverged,
            target_distance: target_distance(&last_finite)?,
            limit_estimate: last_finite,
            window_radius: f64::INFINITY,
        });
    }
    if path.len() < MIN_SAMPLES {
        return Ok(ConvergenceVerdict {
            status: ConvergenceStatus::Undetermined,
            target_distance: target_distance(&last_finite)?,
            limit_estimate: last_finite,
            window_radius: f64::NAN,
        });
    }
    let tail_len = ((opts.tail_fraction * path.len() as f64).ceil() as usize).clamp(2, path.len());
    let tail = &path[path.len() - tail_len..];
    let n = tail[0].len();
    let mut mean = vec![0.0; n];
    for x in tail {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= tail_len as f64;
    }
    let radius = tail.iter().map(|x| dist2(x, &mean)).fold(0.0, f64::max);
    let sup = tail.iter().map(|x| norm_inf(x)).fold(0.0, f64::max);
    let status = if sup > opts.guard {
        ConvergenceStatus::Diverged
    } else if radius <= opts.tol {
        ConvergenceStatus::Converged
    } else {
        ConvergenceStatus::Cycling
    };
    Ok(ConvergenceVerdict {
        status,
        target_distance: target_distance(&mean)?,
        limit_estimate: mean,
        window_radius: radius,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovAudit {
    /// `max_k V(t_{k+1}) - V(t_k)`; zero for fewer than two samples.
    pub max_increase: f64,
    pub max_value: f64,
    /// `max_increase <= 1e-6 (1 + max_value)`.
    pub monotone_up_to_slack: bool,
}

pub fn audit_lyapunov_decay(traj: &Trajectory) -> Result<LyapunovAudit> {
    let v = traj.lyapunov.as_ref().ok_or(Error::MissingLyapunov)?;
    if v.is_empty() {
        return Err(Error::MissingLyapunov);
    }
    let max_increase = v.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let max_value = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(LyapunovAudit {
        max_increase,
        max_value,
        monotone_up_to_slack: max_increase <= 1e-6 * (1.0 + max_value),
    })
}

/// Half-width of the dual sampling box.
pub const DUAL_SAMPLE_BOX: f64 = 10.0;

/// Worst cases of the mirror-map properties over seeded samples. Fields
/// that do not apply to the regularizer's convexity class are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MirrorMapReport {
    pub kind: String,
    pub epsilon: f64,
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    /// `max |C(z)-C(z')| / |z-z'|_*` and its bound `1 / (eps rho)`.
    pub lipschitz_ratio: Option<f64>,
    pub lipschitz_bound: Option<f64>,
    /// `min (C(z)-C(z'))^T (z-z') - eps rho |C(z)-C(z')|^2`.
    pub cocoercivity_gap: Option<f64>,
    /// `min (C(z)-C(z'))^T (z-z')` over distinct pairs.
    pub monotonicity_gap: f64,
    /// `max |C(grad psi(x)) - x|` over interior samples.
    pub left_inverse_error: f64,
    pub interior_samples: usize,
    /// `max |D_h psi*(z) - C(z)| / (1 + |C(z)|)` with central differences.
    pub conjugate_gradient_error: f64,
    pub lipschitz_pass: Option<bool>,
    pub cocoercivity_pass: Option<bool>,
    pub monotonicity_pass: bool,
    pub left_inverse_pass: bool,
    pub conjugate_gradient_pass: bool,
    pub passed: bool,
}

pub const LEFT_INVERSE_TOL: f64 = 1e-9;
pub const CONJUGATE_GRADIENT_TOL: f64 = 1e-5;

/// Canonical domain used for property checks of each kind: Euclidean on
/// `[-1, 1]^dim`, the simplex, the orthant, Fermi-Dirac on `[0, 1]` and
/// the unit ball.
pub fn canonical_regularizer(kind: &str, dim: usize, epsilon: f64) -> Result<Regularizer> {
    match kind {
        "euclidean" | "euclidean_box" => Regularizer::euclidean(ActionSet::cube(dim, -1.0, 1.0)?, epsilon),
        "simplex_entropy" => Regularizer::simplex_entropy(dim, epsilon),
        "boltzmann_shannon" => Regularizer::boltzmann_shannon(dim, 0.0, epsilon),
        "fermi_dirac" => Regularizer::fermi_dirac(dim, 0.0, 1.0, epsilon),
        "hellinger" => Regularizer::hellinger(vec![0.0; dim], 1.0, epsilon),
        other => Err(Error::InvalidRegularizer(format!("unknown kind {other:?}"))),
    }
}

pub const REGULARIZER_KINDS: [&str; 5] = [
    "euclidean",
    "simplex_entropy",
    "boltzmann_shannon",
    "fermi_dirac",
    "hellinger",
];

/// Samples `sample_count` dual pairs in `[-10, 10]^n` and as many primal
/// points in the domain, and reports the worst case of each property.
pub fn verify_mirror_map_properties(reg: &Regularizer, sample_count: usize, seed: u64) -> Result<MirrorMapReport> {
    if sample_count < 2 {
        return Err(Error::Settings("sample_count must be at least 2".into()));
    }
    let n = reg.dim();
    let eps = reg.epsilon();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw_z = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-DUAL_SAMPLE_BOX..=DUAL_SAMPLE_BOX)).collect()
    };

    let strong = match reg.convexity() {
        Convexity::Strong { rho, norm } => Some((rho, norm)),
        Convexity::Legendre => None,
    };
    let mut lipschitz: f64 = 0.0;
    let mut cocoercivity = f64::INFINITY;
    let mut monotonicity = f64::INFINITY;
    let mut fd_error: f64 = 0.0;

    for _ in 0..sample_count {
        let z = draw_z(&mut rng);
        let zp = draw_z(&mut rng);
        let dz: Vec<f64> = z.iter().zip(&zp).map(|(a, b)| a - b).collect();
        let dc = reg.mirror_map_difference(&z, &zp)?;
        let pairing = dot(&dc, &dz);
        if norm_inf(&dz) > 0.0 {
            monotonicity = monotonicity.min(pairing);
        }
        if let Some((rho, norm)) = strong {
            let primal = norm.norm(&dc);
            let dual = norm.dual_norm(&dz);
            if dual > 0.0 {
                lipschitz = lipschitz.max(primal / dual);
            }
            cocoercivity = cocoercivity.min(pairing - eps * rho * primal * primal);
        }
        fd_error = fd_error.max(conjugate_fd_error(reg, &z)?);
    }

    let domain = reg.domain();
    let mut left_inverse: f64 = 0.0;
    let mut interior = 0;
    for _ in 0..sample_count {
        let x = domain.sample(&mut rng, DUAL_SAMPLE_BOX);
        let Ok(g) = reg.gradient(&x) else { continue };
        let back = reg.mirror_map(&g)?;
        left_inverse = left_inverse.max(dist2(&back, &x));
        interior += 1;
    }

    let lipschitz_bound = strong.map(|(rho, _)| 1.0 / (eps * rho));
    let lipschitz_pass = lipschitz_bound.map(|b| lipschitz <= b * (1.0 + 1e-9));
    let cocoercivity_pass = strong.map(|_| cocoercivity >= -1e-9);
    // strict monotonicity is only claimed for the Legendre kinds
    let monotonicity_pass = if strong.is_some() { monotonicity >= -1e-9 } else { monotonicity > 0.0 };
    let left_inverse_pass = interior > 0 && left_inverse <= LEFT_INVERSE_TOL;
    let conjugate_gradient_pass = fd_error <= CONJUGATE_GRADIENT_TOL;
    let passed = lipschitz_pass.unwrap_or(true)
        && cocoercivity_pass.unwrap_or(true)
        && monotonicity_pass
        && left_inverse_pass
        && conjugate_gradient_pass;
    Ok(MirrorMapReport {
        kind: reg.name().to_string(),
        epsilon: eps,
        dim: n,
        samples: sample_count,
        seed,
        lipschitz_ratio: strong.map(|_| lipschitz),
        lipschitz_bound,
        cocoercivity_gap: strong.map(|_| cocoercivity),
        monotonicity_gap: monotonicity,
        left_inverse_error: left_inverse,
        interior_samples: interior,
        conjugate_gradient_error: fd_error,
        lipschitz_pass,
        cocoercivity_pass,
        monotonicity_pass,
        left_inverse_pass,
        conjugate_gradient_pass,
        passed,
    })
}

fn conjugate_fd_error(reg: &Regularizer, z: &[f64]) -> Result<f64> {
    let c = reg.mirror_map(z)?;
    let h = 1e-5 * reg.epsilon();
    let mut zt = z.to_vec();
    let mut diff = Vec::with_capacity(z.len());
    for j in 0..z.len() {
        zt[j] = z[j] + h;
        let up = reg.conjugate(&zt)?;
        zt[j] = z[j] - h;
        let down = reg.conjugate(&zt)?;
        zt[j] = z[j];
        diff.push((up - down) / (2.0 * h) - c[j]);
    }
    Ok(norm2(&diff) / (1.0 + norm2(&c)))
}

impl NormKind {
    pub fn name(self) -> &'static str {
        match self {
            NormKind::L1 => "l1",
            NormKind::L2 => "l2",
        }
    }
}

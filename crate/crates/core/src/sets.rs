//! Closed convex action sets and their Euclidean projections.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist2, norm2};

/// Tolerance used when deciding whether a point belongs to a set.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// A player's action set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionSet {
    /// Axis-aligned box `lower <= x <= upper`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Unit simplex `{x >= 0, sum x = 1}`.
    Simplex { dim: usize },
    /// Shifted orthant `[-shift, inf)^dim`.
    ShiftedOrthant { shift: f64, dim: usize },
    /// Closed Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// All of `R^dim`.
    WholeSpace { dim: usize },
}

impl ActionSet {
    pub fn cube(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new_box(vec![lower; dim], vec![upper; dim])
    }

    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let set = ActionSet::Box { lower, upper };
        set.validate()?;
        Ok(set)
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        let set = ActionSet::Simplex { dim };
        set.validate()?;
        Ok(set)
    }

    pub fn shifted_orthant(dim: usize, shift: f64) -> Result<Self> {
        let set = ActionSet::ShiftedOrthant { shift, dim };
        set.validate()?;
        Ok(set)
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let set = ActionSet::Ball { center, radius };
        set.validate()?;
        Ok(set)
    }

    pub fn whole_space(dim: usize) -> Result<Self> {
        let set = ActionSet::WholeSpace { dim };
        set.validate()?;
        Ok(set)
    }

    /// Checks the structural invariants. Deserialized sets must pass this
    /// before use.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSet(msg));
        match self {
            ActionSet::Box { lower, upper } => {
                if lower.is_empty() {
                    return bad("box must have positive dimension".into());
                }
                if lower.len() != upper.len() {
                    return bad(format!(
                        "box bounds have lengths {} and {}",
                        lower.len(),
                        upper.len()
                    ));
                }
                for (i, (l, u)) in lower.iter().zip(upper).enumerate() {
                    if !(l.is_finite() && u.is_finite()) || l >= u {
                        return bad(format!("box coordinate {i} needs lower < upper, got [{l}, {u}]"));
                    }
                }
            }
            ActionSet::Simplex { dim } | ActionSet::WholeSpace { dim } => {
                if *dim == 0 {
                    return bad("dimension must be positive".into());
                }
            }
            ActionSet::ShiftedOrthant { shift, dim } => {
                if *dim == 0 {
                    return bad("dimension must be positive".into());
                }
                if !(shift.is_finite() && *shift >= 0.0) {
                    return bad(format!("orthant shift must be finite and >= 0, got {shift}"));
                }
            }
            ActionSet::Ball { center, radius } => {
                if center.is_empty() {
                    return bad("ball must have positive dimension".into());
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad(format!("ball radius must be positive, got {radius}"));
                }
                if center.iter().any(|c| !c.is_finite()) {
                    return bad("ball center must be finite".into());
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ActionSet::Box { lower, .. } => lower.len(),
            ActionSet::Simplex { dim }
            | ActionSet::ShiftedOrthant { dim, .. }
            | ActionSet::WholeSpace { dim } => *dim,
            ActionSet::Ball { center, .. } => center.len(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(
            self,
            ActionSet::ShiftedOrthant { .. } | ActionSet::WholeSpace { .. }
        )
    }

    /// Euclidean projection written into `out`.
    pub fn project_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            ActionSet::Box { lower, upper } => {
                for i in 0..x.len() {
                    out[i] = x[i].clamp(lower[i], upper[i]);
                }
            }
            ActionSet::Simplex { .. } => project_simplex(x, out),
            ActionSet::ShiftedOrthant { shift, .. } => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = xi.max(-shift);
                }
            }
            ActionSet::Ball { center, radius } => {
                let d = dist2(x, center);
                if d <= *radius {
                    out.copy_from_slice(x);
                } else {
                    let s = radius / d;
                    for i in 0..x.len() {
                        out[i] = center[i] + s * (x[i] - center[i]);
                    }
                }
            }
            ActionSet::WholeSpace { .. } => out.copy_from_slice(x),
        }
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut out = vec![0.0; x.len()];
        self.project_into(x, &mut out);
        Ok(out)
    }

    /// Largest constraint violation of `x` (zero when feasible).
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            ActionSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(xi, (l, u))| (l - xi).max(xi - u).max(0.0))
                .fold(0.0, f64::max),
            ActionSet::Simplex { .. } => {
                let neg = x.iter().fold(0.0_f64, |m, xi| m.max(-xi));
                let sum: f64 = x.iter().sum();
                neg.max((sum - 1.0).abs())
            }
            ActionSet::ShiftedOrthant { shift, .. } => {
                x.iter().fold(0.0_f64, |m, xi| m.max(-shift - xi))
            }
            ActionSet::Ball { center, radius } => (dist2(x, center) - radius).max(0.0),
            ActionSet::WholeSpace { .. } => 0.0,
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim() && x.iter().all(|v| v.is_finite()) && self.violation(x) <= tol
    }

    /// A point of the relative interior; used to witness non-emptiness.
    pub fn interior_point(&self) -> Vec<f64> {
        match self {
            ActionSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| 0.5 * (l + u))
                .collect(),
            ActionSet::Simplex { dim } => vec![1.0 / *dim as f64; *dim],
            ActionSet::ShiftedOrthant { shift, dim } => vec![1.0 - shift; *dim],
            ActionSet::Ball { center, .. } => center.clone(),
            ActionSet::WholeSpace { dim } => vec![0.0; *dim],
        }
    }

    /// Draws a point from the set. Unbounded sets are sampled inside the
    /// box `[-half_width, half_width]` (clipped to the set).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, half_width: f64) -> Vec<f64> {
        match self {
            ActionSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| rng.gen_range(*l..=*u))
                .collect(),
            ActionSet::Simplex { dim } => {
                let e: Vec<f64> = (0..*dim)
                    .map(|_| -(1.0 - rng.gen::<f64>()).ln())
                    .collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|v| v / s).collect()
            }
            ActionSet::ShiftedOrthant { shift, dim } => (0..*dim)
                .map(|_| -shift + rng.gen_range(0.0..=half_width))
                .collect(),
            ActionSet::Ball { center, radius } => {
                let n = center.len();
                let dir = loop {
                    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                    let nv = norm2(&v);
                    if nv > 1e-3 && nv <= 1.0 {
                        break v.into_iter().map(|c| c / nv).collect::<Vec<_>>();
                    }
                };
                let r = radius * rng.gen::<f64>().powf(1.0 / n as f64);
                center.iter().zip(dir).map(|(c, d)| c + r * d).collect()
            }
            ActionSet::WholeSpace { dim } => (0..*dim)
                .map(|_| rng.gen_range(-half_width..=half_width))
                .collect(),
        }
    }
}

/// Euclidean projection onto the unit simplex by sorting and thresholding.
fn project_simplex(x: &[f64], out: &mut [f64]) {
    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        cumulative += v;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    for (o, xi) in out.iter_mut().zip(x) {
        *o = (xi - theta).max(0.0);
    }
}

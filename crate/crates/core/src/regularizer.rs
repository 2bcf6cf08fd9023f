//! Regularizer catalogue.
//!
//! Every regularizer is stored as its unscaled kind together with the
//! weight `epsilon`; all methods act on the scaled function
//! `psi = epsilon * theta`:
//!
//! | kind                | domain                | mirror map `C(z)`, `w = z / epsilon`  |
//! |---------------------|-----------------------|---------------------------------------|
//! | `euclidean`         | any closed convex set | `Pi_Omega(w)`                         |
//! | `simplex_entropy`   | unit simplex          | `softmax(w)`                          |
//! | `boltzmann_shannon` | `[-c, inf)^n`         | `exp(w) - c`                          |
//! | `fermi_dirac`       | `[a, b]^n`            | `(a + b exp(w)) / (exp(w) + 1)`       |
//! | `hellinger`         | ball `B_a(c)`         | `c + a w / sqrt(1 + |w|^2)`           |
//!
//! The first two are strongly convex (modulus 1 in the 2-norm and the
//! 1-norm respectively); the last three are Legendre. For `fermi_dirac` on
//! a general interval the generating entropy is the unit-interval
//! Fermi-Dirac entropy of `t = (x - a) / (b - a)`, scaled by `b - a`.
//! For `hellinger` the centre enters with a plus sign so that `C` maps
//! onto the ball centred at `c` and `grad psi` is its left inverse.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::linalg::{dot, norm2};
use crate::sets::{ActionSet, MEMBERSHIP_TOL};

/// Exponent arguments are clamped here before exponentiation.
pub const EXP_CLAMP: f64 = 700.0;

/// Points closer than this to the relative boundary are not interior.
pub const INTERIOR_MARGIN: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegularizerKind {
    #[serde(alias = "euclidean_box")]
    Euclidean { set: ActionSet },
    SimplexEntropy { dim: usize },
    BoltzmannShannon { shift: f64, dim: usize },
    FermiDirac { lower: f64, upper: f64, dim: usize },
    Hellinger { center: Vec<f64>, radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L1,
    L2,
}

impl NormKind {
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            NormKind::L1 => crate::linalg::norm1(v),
            NormKind::L2 => norm2(v),
        }
    }

    pub fn dual_norm(self, v: &[f64]) -> f64 {
        match self {
            NormKind::L1 => crate::linalg::norm_inf(v),
            NormKind::L2 => norm2(v),
        }
    }
}

/// Convexity class of the unscaled regularizer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Convexity {
    /// `rho`-strongly convex with respect to `norm`.
    Strong { rho: f64, norm: NormKind },
    Legendre,
}

/// `psi = epsilon * theta` for one player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regularizer {
    #[serde(flatten)]
    kind: RegularizerKind,
    epsilon: f64,
}

impl Regularizer {
    pub fn new(kind: RegularizerKind, epsilon: f64) -> Result<Self> {
        let reg = Regularizer { kind, epsilon };
        reg.validate()?;
        Ok(reg)
    }

    pub fn euclidean(set: ActionSet, epsilon: f64) -> Result<Self> {
        Self::new(RegularizerKind::Euclidean { set }, epsilon)
    }

    pub fn simplex_entropy(dim: usize, epsilon: f64) -> Result<Self> {
        Self::new(RegularizerKind::SimplexEntropy { dim }, epsilon)
    }

    pub fn boltzmann_shannon(dim: usize, shift: f64, epsilon: f64) -> Result<Self> {
        Self::new(RegularizerKind::BoltzmannShannon { shift, dim }, epsilon)
    }

    pub fn fermi_dirac(dim: usize, lower: f64, upper: f64, epsilon: f64) -> Result<Self> {
        Self::new(RegularizerKind::FermiDirac { lower, upper, dim }, epsilon)
    }

    pub fn hellinger(center: Vec<f64>, radius: f64, epsilon: f64) -> Result<Self> {
        Self::new(RegularizerKind::Hellinger { center, radius }, epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidRegularizer(m));
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        match &self.kind {
            RegularizerKind::Euclidean { set } => set.validate()?,
            RegularizerKind::SimplexEntropy { dim } => {
                if *dim == 0 {
                    return bad("dimension must be positive".into());
                }
            }
            RegularizerKind::BoltzmannShannon { shift, dim } => {
                if *dim == 0 {
                    return bad("dimension must be positive".into());
                }
                if !(shift.is_finite() && *shift >= 0.0) {
                    return bad(format!("shift must be >= 0, got {shift}"));
                }
            }
            RegularizerKind::FermiDirac { lower, upper, dim } => {
                if *dim == 0 {
                    return bad("dimension must be positive".into());
                }
                if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                    return bad(format!("interval needs lower < upper, got [{lower}, {upper}]"));
                }
            }
            RegularizerKind::Hellinger { center, radius } => {
                if center.is_empty() {
                    return bad("dimension must be positive".into());
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad(format!("radius must be positive, got {radius}"));
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> &RegularizerKind {
        &self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.kind.clone(), epsilon)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            RegularizerKind::Euclidean { .. } => "euclidean",
            RegularizerKind::SimplexEntropy { .. } => "simplex_entropy",
            RegularizerKind::BoltzmannShannon { .. } => "boltzmann_shannon",
            RegularizerKind::FermiDirac { .. } => "fermi_dirac",
            RegularizerKind::Hellinger { .. } => "hellinger",
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            RegularizerKind::Euclidean { set } => set.dim(),
            RegularizerKind::SimplexEntropy { dim }
            | RegularizerKind::BoltzmannShannon { dim, .. }
            | RegularizerKind::FermiDirac { dim, .. } => *dim,
            RegularizerKind::Hellinger { center, .. } => center.len(),
        }
    }

    /// `dom(psi)` as an action set.
    pub fn domain(&self) -> ActionSet {
        match &self.kind {
            RegularizerKind::Euclidean { set } => set.clone(),
            RegularizerKind::SimplexEntropy { dim } => ActionSet::Simplex { dim: *dim },
            RegularizerKind::BoltzmannShannon { shift, dim } => ActionSet::ShiftedOrthant {
                shift: *shift,
                dim: *dim,
            },
            RegularizerKind::FermiDirac { lower, upper, dim } => ActionSet::Box {
                lower: vec![*lower; *dim],
                upper: vec![*upper; *dim],
            },
            RegularizerKind::Hellinger { center, radius } => ActionSet::Ball {
                center: center.clone(),
                radius: *radius,
            },
        }
    }

    pub fn convexity(&self) -> Convexity {
        match self.kind {
            RegularizerKind::Euclidean { .. } => Convexity::Strong {
                rho: 1.0,
                norm: NormKind::L2,
            },
            RegularizerKind::SimplexEntropy { .. } => Convexity::Strong {
                rho: 1.0,
                norm: NormKind::L1,
            },
            _ => Convexity::Legendre,
        }
    }

    /// Steep regularizers keep the mirror map inside the relative interior.
    pub fn is_steep(&self) -> bool {
        !matches!(self.kind, RegularizerKind::Euclidean { .. })
    }

    /// `C(z)` written into `out` without validation. Returns `true` when an
    /// exponent had to be clamped at [`EXP_CLAMP`].
    pub fn mirror_map_into(&self, z: &[f64], out: &mut [f64]) -> bool {
        let eps = self.epsilon;
        match &self.kind {
            RegularizerKind::Euclidean { set } => {
                let w: Vec<f64> = z.iter().map(|v| v / eps).collect();
                set.project_into(&w, out);
                false
            }
            RegularizerKind::SimplexEntropy { .. } => {
                let m = z.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v / eps));
                let mut sum = 0.0;
                for (o, v) in out.iter_mut().zip(z) {
                    *o = (v / eps - m).exp();
                    sum += *o;
                }
                for o in out.iter_mut() {
                    *o /= sum;
                }
                false
            }
            RegularizerKind::BoltzmannShannon { shift, .. } => {
                let mut saturated = false;
                for (o, v) in out.iter_mut().zip(z) {
                    let w = v / eps;
                    if w > EXP_CLAMP {
                        saturated = true;
                    }
                    *o = w.min(EXP_CLAMP).exp() - shift;
                }
                saturated
            }
            RegularizerKind::FermiDirac { lower, upper, .. } => {
                let width = upper - lower;
                for (o, v) in out.iter_mut().zip(z) {
                    let w = v / eps;
                    *o = if w >= 0.0 {
                        upper - width * logistic(-w)
                    } else {
                        lower + width * logistic(w)
                    };
                }
                false
            }
            RegularizerKind::Hellinger { center, radius } => {
                let w: Vec<f64> = z.iter().map(|v| v / eps).collect();
                let scale = radius * inv_sqrt_one_plus_sq(norm2(&w));
                for ((o, c), wi) in out.iter_mut().zip(center).zip(&w) {
                    *o = c + scale * wi;
                }
                false
            }
        }
    }

    /// `C(z) = argmax_{y in dom} [y^T z - psi(y)] = grad psi*(z)`.
    pub fn mirror_map(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), z.len())?;
        check_finite(z, "mirror map")?;
        let mut out = vec![0.0; z.len()];
        self.mirror_map_into(z, &mut out);
        Ok(out)
    }

    /// `C(z1) - C(z2)`, evaluated without cancellation where the map
    /// saturates towards a bound.
    pub fn mirror_map_difference(&self, z1: &[f64], z2: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), z1.len())?;
        check_dim(self.dim(), z2.len())?;
        check_finite(z1, "mirror map")?;
        check_finite(z2, "mirror map")?;
        if let RegularizerKind::FermiDirac { lower, upper, .. } = &self.kind {
            let width = upper - lower;
            let eps = self.epsilon;
            return Ok(z1
                .iter()
                .zip(z2)
                .map(|(a, b)| width * logistic_difference(a / eps, b / eps))
                .collect());
        }
        let c1 = self.mirror_map(z1)?;
        let c2 = self.mirror_map(z2)?;
        Ok(c1.iter().zip(&c2).map(|(a, b)| a - b).collect())
    }

    /// `grad psi(x)`, the left inverse of the mirror map. Steep kinds need
    /// `x` strictly inside the domain; the Euclidean kind accepts any
    /// feasible point.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        check_finite(x, "regularizer gradient")?;
        let eps = self.epsilon;
        match &self.kind {
            RegularizerKind::Euclidean { set } => {
                let violation = set.violation(x);
                if violation > MEMBERSHIP_TOL {
                    return Err(Error::Infeasible { violation });
                }
                Ok(x.iter().map(|v| eps * v).collect())
            }
            RegularizerKind::SimplexEntropy { .. } => {
                let sum: f64 = x.iter().sum();
                if (sum - 1.0).abs() > MEMBERSHIP_TOL || x.iter().any(|v| *v <= INTERIOR_MARGIN) {
                    return Err(Error::NotInterior);
                }
                Ok(x.iter().map(|v| eps * (v.ln() + 1.0)).collect())
            }
            RegularizerKind::BoltzmannShannon { shift, .. } => {
                if x.iter().any(|v| v + shift <= INTERIOR_MARGIN) {
                    return Err(Error::NotInterior);
                }
                Ok(x.iter().map(|v| eps * (v + shift).ln()).collect())
            }
            RegularizerKind::FermiDirac { lower, upper, .. } => {
                if x
                    .iter()
                    .any(|v| v - lower <= INTERIOR_MARGIN || upper - v <= INTERIOR_MARGIN)
                {
                    return Err(Error::NotInterior);
                }
                Ok(x.iter()
                    .map(|v| eps * ((v - lower) / (upper - v)).ln())
                    .collect())
            }
            RegularizerKind::Hellinger { center, radius } => {
                let d: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                let r = norm2(&d);
                if radius - r <= INTERIOR_MARGIN {
                    return Err(Error::NotInterior);
                }
                let s = ((radius - r) * (radius + r)).sqrt();
                Ok(d.iter().map(|v| eps * v / s).collect())
            }
        }
    }

    /// `psi(x)` for `x` in the closed domain.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        check_finite(x, "regularizer value")?;
        let domain = self.domain();
        let violation = domain.violation(x);
        if violation > MEMBERSHIP_TOL {
            return Err(Error::Infeasible { violation });
        }
        let eps = self.epsilon;
        Ok(match &self.kind {
            RegularizerKind::Euclidean { .. } => 0.5 * eps * dot(x, x),
            RegularizerKind::SimplexEntropy { .. } => eps * x.iter().map(|v| xlogx(*v)).sum::<f64>(),
            RegularizerKind::BoltzmannShannon { shift, .. } => {
                eps * x
                    .iter()
                    .map(|v| {
                        let y = (v + shift).max(0.0);
                        xlogx(y) - y
                    })
                    .sum::<f64>()
            }
            RegularizerKind::FermiDirac { lower, upper, .. } => {
                let width = upper - lower;
                eps * width
                    * x.iter()
                        .map(|v| {
                            let t = ((v - lower) / width).clamp(0.0, 1.0);
                            xlogx(t) + xlogx(1.0 - t)
                        })
                        .sum::<f64>()
            }
            RegularizerKind::Hellinger { center, radius } => {
                let r = crate::linalg::dist2(x, center).min(*radius);
                -eps * ((radius - r) * (radius + r)).sqrt()
            }
        })
    }

    /// Convex conjugate `psi*(z)`.
    pub fn conjugate(&self, z: &[f64]) -> Result<f64> {
        check_dim(self.dim(), z.len())?;
        check_finite(z, "conjugate")?;
        Ok(self.conjugate_unchecked(z))
    }

    pub(crate) fn conjugate_unchecked(&self, z: &[f64]) -> f64 {
        let eps = self.epsilon;
        match &self.kind {
            RegularizerKind::Euclidean { set } => {
                let w: Vec<f64> = z.iter().map(|v| v / eps).collect();
                let mut p = vec![0.0; w.len()];
                set.project_into(&w, &mut p);
                dot(z, &p) - 0.5 * eps * dot(&p, &p)
            }
            RegularizerKind::SimplexEntropy { .. } => {
                let m = z.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v / eps));
                let s: f64 = z.iter().map(|v| (v / eps - m).exp()).sum();
                eps * (m + s.ln())
            }
            RegularizerKind::BoltzmannShannon { shift, .. } => z
                .iter()
                .map(|v| eps * (v / eps).min(EXP_CLAMP).exp() - shift * v)
                .sum(),
            RegularizerKind::FermiDirac { lower, upper, .. } => {
                let width = upper - lower;
                z.iter()
                    .map(|v| lower * v + eps * width * softplus(v / eps))
                    .sum()
            }
            RegularizerKind::Hellinger { center, radius } => {
                let w: Vec<f64> = z.iter().map(|v| v / eps).collect();
                eps * radius * sqrt_one_plus_sq(norm2(&w)) + dot(center, z)
            }
        }
    }

    /// `D_psi(x, q) = psi(x) - psi(q) - grad psi(q)^T (x - q)`.
    pub fn bregman_divergence(&self, x: &[f64], q: &[f64]) -> Result<f64> {
        let gq = self.gradient(q)?;
        let fx = self.value(x)?;
        let fq = self.value(q)?;
        let lin: f64 = gq.iter().zip(x.iter().zip(q)).map(|(g, (a, b))| g * (a - b)).sum();
        Ok((fx - fq - lin).max(0.0))
    }

    /// Bregman divergence of the conjugate,
    /// `psi*(z) - psi*(z_ref) - C(z_ref)^T (z - z_ref)`.
    pub fn dual_bregman_divergence(&self, z: &[f64], z_ref: &[f64]) -> Result<f64> {
        check_dim(self.dim(), z.len())?;
        check_dim(self.dim(), z_ref.len())?;
        check_finite(z, "dual Bregman divergence")?;
        check_finite(z_ref, "dual Bregman divergence")?;
        Ok(self.dual_bregman_unchecked(z, z_ref))
    }

    pub(crate) fn dual_bregman_unchecked(&self, z: &[f64], z_ref: &[f64]) -> f64 {
        let mut c_ref = vec![0.0; z_ref.len()];
        self.mirror_map_into(z_ref, &mut c_ref);
        let lin: f64 = c_ref
            .iter()
            .zip(z.iter().zip(z_ref))
            .map(|(c, (a, b))| c * (a - b))
            .sum();
        (self.conjugate_unchecked(z) - self.conjugate_unchecked(z_ref) - lin).max(0.0)
    }
}

/// One regularizer per player, laid out along the stacked profile.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularizerProfile {
    regs: Vec<Regularizer>,
    offsets: Vec<usize>,
}

impl RegularizerProfile {
    pub fn new(regs: Vec<Regularizer>) -> Result<Self> {
        if regs.is_empty() {
            return Err(Error::InvalidRegularizer("profile needs at least one player".into()));
        }
        let mut offsets = Vec::with_capacity(regs.len() + 1);
        offsets.push(0);
        for r in &regs {
            r.validate()?;
            offsets.push(offsets.last().unwrap() + r.dim());
        }
        Ok(RegularizerProfile { regs, offsets })
    }

    /// Checks player count and per-player dimensions against `dims`.
    pub fn check_dims(&self, dims: &[usize]) -> Result<()> {
        check_dim(dims.len(), self.regs.len())?;
        for (r, d) in self.regs.iter().zip(dims) {
            check_dim(*d, r.dim())?;
        }
        Ok(())
    }

    pub fn regs(&self) -> &[Regularizer] {
        &self.regs
    }

    pub fn players(&self) -> usize {
        self.regs.len()
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block(&self, p: usize) -> std::ops::Range<usize> {
        self.offsets[p]..self.offsets[p + 1]
    }

    /// Same kinds, every weight replaced by `epsilon`.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(
            self.regs
                .iter()
                .map(|r| r.with_epsilon(epsilon))
                .collect::<Result<_>>()?,
        )
    }

    pub fn domains(&self) -> Vec<ActionSet> {
        self.regs.iter().map(Regularizer::domain).collect()
    }

    /// Stacked `C(z)`; returns the saturation flag of any block.
    pub fn mirror_map_into(&self, z: &[f64], out: &mut [f64]) -> bool {
        let mut saturated = false;
        for (p, r) in self.regs.iter().enumerate() {
            let b = self.block(p);
            saturated |= r.mirror_map_into(&z[b.clone()], &mut out[b]);
        }
        saturated
    }

    pub fn mirror_map(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), z.len())?;
        check_finite(z, "mirror map")?;
        let mut out = vec![0.0; z.len()];
        self.mirror_map_into(z, &mut out);
        Ok(out)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut out = Vec::with_capacity(x.len());
        for (p, r) in self.regs.iter().enumerate() {
            out.extend(r.gradient(&x[self.block(p)])?);
        }
        Ok(out)
    }

    /// `sum_p D_{psi_p*}(z^p, z_ref^p)`.
    pub fn dual_bregman_divergence(&self, z: &[f64], z_ref: &[f64]) -> Result<f64> {
        check_dim(self.dim(), z.len())?;
        check_dim(self.dim(), z_ref.len())?;
        check_finite(z, "dual Bregman divergence")?;
        check_finite(z_ref, "dual Bregman divergence")?;
        Ok(self.dual_bregman_unchecked(z, z_ref))
    }

    pub(crate) fn dual_bregman_unchecked(&self, z: &[f64], z_ref: &[f64]) -> f64 {
        self.regs
            .iter()
            .enumerate()
            .map(|(p, r)| {
                let b = self.block(p);
                r.dual_bregman_unchecked(&z[b.clone()], &z_ref[b])
            })
            .sum()
    }
}

#[inline]
fn xlogx(v: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}

/// `1 / (1 + exp(-t))` for `t <= 0` without overflow.
#[inline]
fn logistic(t: f64) -> f64 {
    debug_assert!(t <= 0.0);
    let e = t.exp();
    e / (1.0 + e)
}

/// `sigma(a) - sigma(b)` with `sigma` the logistic function, computed on
/// the side where both values are represented to full relative accuracy.
fn logistic_difference(a: f64, b: f64) -> f64 {
    let sig = |t: f64| {
        if t >= 0.0 {
            1.0 / (1.0 + (-t).exp())
        } else {
            logistic(t)
        }
    };
    if a >= 0.0 && b >= 0.0 {
        // 1 - sigma(t) = sigma(-t)
        logistic(-b) - logistic(-a)
    } else {
        sig(a) - sig(b)
    }
}

/// `log(1 + exp(t))`.
#[inline]
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[inline]
fn sqrt_one_plus_sq(n: f64) -> f64 {
    if n > 1.0 {
        n * (1.0 + 1.0 / (n * n)).sqrt()
    } else {
        (1.0 + n * n).sqrt()
    }
}

#[inline]
fn inv_sqrt_one_plus_sq(n: f64) -> f64 {
    1.0 / sqrt_one_plus_sq(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit_box(dim: usize) -> ActionSet {
        ActionSet::cube(dim, 0.0, 1.0).unwrap()
    }

    #[test]
    fn mirror_map_examples() {
        for eps in [0.1, 1.0, 7.0] {
            let r = Regularizer::simplex_entropy(3, eps).unwrap();
            for v in r.mirror_map(&[0.0; 3]).unwrap() {
                assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
            }
            let r = Regularizer::fermi_dirac(2, 0.0, 1.0, eps).unwrap();
            assert_eq!(r.mirror_map(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        }
        let r = Regularizer::euclidean(unit_box(2), 0.5).unwrap();
        assert_eq!(r.mirror_map(&[0.25, -1.0]).unwrap(), vec![0.5, 0.0]);

        let r = Regularizer::boltzmann_shannon(1, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(r.mirror_map(&[2f64.ln()]).unwrap()[0], 2.0, epsilon = 1e-14);

        let r = Regularizer::hellinger(vec![0.0, 0.0], 1.0, 1.0).unwrap();
        let x = r.mirror_map(&[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(x[0], 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn general_fermi_dirac_and_shifted_maps() {
        let r = Regularizer::fermi_dirac(1, -100.0, 100.0, 0.5).unwrap();
        assert_eq!(r.mirror_map(&[0.0]).unwrap(), vec![0.0]);
        let r = Regularizer::boltzmann_shannon(2, 3.0, 1.0).unwrap();
        assert_eq!(r.mirror_map(&[0.0, 0.0]).unwrap(), vec![-2.0, -2.0]);
        let r = Regularizer::hellinger(vec![5.0, 5.0], 2.0, 1.0).unwrap();
        assert_eq!(r.mirror_map(&[0.0, 0.0]).unwrap(), vec![5.0, 5.0]);
    }

    #[test]
    fn mirror_map_rejects_non_finite() {
        let r = Regularizer::simplex_entropy(2, 1.0).unwrap();
        assert!(matches!(r.mirror_map(&[f64::NAN, 0.0]), Err(Error::NonFinite(_))));
        assert!(r.mirror_map(&[0.0]).is_err());
    }

    #[test]
    fn exponent_clamp_sets_saturation_flag() {
        let r = Regularizer::boltzmann_shannon(1, 0.0, 0.1).unwrap();
        let mut out = [0.0];
        assert!(r.mirror_map_into(&[100.0], &mut out));
        assert!(out[0].is_finite());
        assert!(!r.mirror_map_into(&[1.0], &mut out));
        // softmax and softplus paths never overflow
        let s = Regularizer::simplex_entropy(2, 1e-3).unwrap();
        let x = s.mirror_map(&[1e3, -1e3]).unwrap();
        assert_eq!(x, vec![1.0, 0.0]);
        let f = Regularizer::fermi_dirac(1, 0.0, 1.0, 1e-3).unwrap();
        assert!(f.conjugate(&[1e3]).unwrap().is_finite());
    }

    #[test]
    fn gradient_examples() {
        let r = Regularizer::euclidean(ActionSet::whole_space(2).unwrap(), 2.0).unwrap();
        assert_eq!(r.gradient(&[3.0, -1.0]).unwrap(), vec![6.0, -2.0]);
        let r = Regularizer::simplex_entropy(2, 1.0).unwrap();
        let g = r.gradient(&[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(g[0], 0.5f64.ln() + 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], 0.5f64.ln() + 1.0, epsilon = 1e-15);
        let r = Regularizer::fermi_dirac(1, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(r.gradient(&[0.5]).unwrap(), vec![0.0]);
    }

    #[test]
    fn gradient_rejects_boundary_points_of_steep_kinds() {
        let r = Regularizer::simplex_entropy(2, 1.0).unwrap();
        assert!(matches!(r.gradient(&[1.0, 0.0]), Err(Error::NotInterior)));
        let r = Regularizer::boltzmann_shannon(1, 0.0, 1.0).unwrap();
        assert!(matches!(r.gradient(&[0.0]), Err(Error::NotInterior)));
        let r = Regularizer::fermi_dirac(1, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(r.gradient(&[1.0]), Err(Error::NotInterior)));
        let r = Regularizer::hellinger(vec![0.0], 1.0, 1.0).unwrap();
        assert!(matches!(r.gradient(&[-1.0]), Err(Error::NotInterior)));
        // non-steep: boundary is fine, exterior is not
        let r = Regularizer::euclidean(unit_box(1), 1.0).unwrap();
        assert!(r.gradient(&[1.0]).is_ok());
        assert!(matches!(r.gradient(&[1.5]), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn conjugate_examples() {
        let r = Regularizer::simplex_entropy(2, 1.0).unwrap();
        assert_abs_diff_eq!(r.conjugate(&[0.0, 0.0]).unwrap(), 2f64.ln(), epsilon = 1e-15);
        let r = Regularizer::fermi_dirac(1, 0.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(r.conjugate(&[0.0]).unwrap(), 2f64.ln(), epsilon = 1e-15);
        let r = Regularizer::euclidean(ActionSet::cube(1, -1.0, 1.0).unwrap(), 1.0).unwrap();
        assert_abs_diff_eq!(r.conjugate(&[0.5]).unwrap(), 0.125, epsilon = 1e-15);
    }

    #[test]
    fn bregman_examples() {
        let r = Regularizer::euclidean(ActionSet::whole_space(2).unwrap(), 1.0).unwrap();
        assert_abs_diff_eq!(r.bregman_divergence(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5, epsilon = 1e-15);
        let r = Regularizer::simplex_entropy(2, 1.0).unwrap();
        let kl = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert_abs_diff_eq!(r.bregman_divergence(&[0.5, 0.5], &[0.25, 0.75]).unwrap(), kl, epsilon = 1e-14);
        assert_abs_diff_eq!(kl, 0.14384, epsilon = 1e-5);
        let regs = [
            Regularizer::simplex_entropy(2, 0.3).unwrap(),
            Regularizer::boltzmann_shannon(2, 1.0, 0.3).unwrap(),
            Regularizer::fermi_dirac(2, -1.0, 2.0, 0.3).unwrap(),
            Regularizer::hellinger(vec![1.0, 1.0], 2.0, 0.3).unwrap(),
            Regularizer::euclidean(unit_box(2), 0.3).unwrap(),
        ];
        let q = [0.3, 0.7];
        for r in &regs {
            assert_eq!(r.bregman_divergence(&q, &q).unwrap(), 0.0, "{}", r.name());
        }
        // boundary reference rejected for steep kinds
        let r = Regularizer::simplex_entropy(2, 1.0).unwrap();
        assert!(r.bregman_divergence(&[0.5, 0.5], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn dual_bregman_examples() {
        let r = Regularizer::euclidean(ActionSet::cube(2, -1e3, 1e3).unwrap(), 1.0).unwrap();
        assert_abs_diff_eq!(r.dual_bregman_divergence(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5, epsilon = 1e-15);
        let r = Regularizer::simplex_entropy(2, 1.0).unwrap();
        let expected = 1.5f64.ln() - 0.5 * 2f64.ln();
        assert_abs_diff_eq!(r.dual_bregman_divergence(&[2f64.ln(), 0.0], &[0.0, 0.0]).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.05889, epsilon = 1e-5);
        assert_eq!(r.dual_bregman_divergence(&[0.4, -2.0], &[0.4, -2.0]).unwrap(), 0.0);
    }

    #[test]
    fn difference_matches_plain_difference_away_from_saturation() {
        let r = Regularizer::fermi_dirac(2, 0.0, 1.0, 0.5).unwrap();
        let a = [0.3, -0.2];
        let b = [-0.7, 0.4];
        let d = r.mirror_map_difference(&a, &b).unwrap();
        let ca = r.mirror_map(&a).unwrap();
        let cb = r.mirror_map(&b).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(d[i], ca[i] - cb[i], epsilon = 1e-15);
        }
        // both saturated at the upper bound: plain difference is 0, the
        // stable one keeps the sign
        let d = r.mirror_map_difference(&[30.0, 0.0], &[25.0, 0.0]).unwrap();
        assert!(d[0] > 0.0);
    }

    fn arb_reg() -> impl Strategy<Value = Regularizer> {
        let eps = prop_oneof![Just(0.1), Just(0.5), Just(1.0), 0.05..3.0f64];
        (0usize..5, 1usize..4, eps).prop_map(|(k, d, e)| match k {
            0 => Regularizer::euclidean(ActionSet::cube(d, -1.0, 2.0).unwrap(), e).unwrap(),
            1 => Regularizer::simplex_entropy(d + 1, e).unwrap(),
            2 => Regularizer::boltzmann_shannon(d, 0.5, e).unwrap(),
            3 => Regularizer::fermi_dirac(d, -1.0, 3.0, e).unwrap(),
            _ => Regularizer::hellinger(vec![0.5; d], 2.0, e).unwrap(),
        })
    }

    fn vec_in(n: usize, half: f64, seed: u64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-half..half)).collect()
    }

    proptest! {
        #[test]
        fn range_is_in_domain(reg in arb_reg(), seed in any::<u64>()) {
            let z = vec_in(reg.dim(), 5.0 * reg.epsilon(), seed);
            let x = reg.mirror_map(&z).unwrap();
            prop_assert!(reg.domain().contains(&x, 1e-9));
            if reg.is_steep() {
                prop_assert!(reg.gradient(&x).is_ok(), "steep map left the interior");
            }
        }

        #[test]
        fn argmax_optimality(reg in arb_reg(), seed in any::<u64>()) {
            use rand::SeedableRng;
            let z = vec_in(reg.dim(), 5.0 * reg.epsilon(), seed);
            let xc = reg.mirror_map(&z).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let score = |y: &[f64]| dot(y, &z) - reg.value(y).unwrap();
            let best = score(&xc);
            for _ in 0..20 {
                let y = reg.domain().sample(&mut rng, 10.0);
                prop_assert!(score(&y) <= best + 1e-8 * (1.0 + best.abs()));
                if let Ok(g) = reg.gradient(&xc) {
                    let lhs: f64 = g.iter().zip(&z).zip(y.iter().zip(&xc))
                        .map(|((gi, zi), (yi, xi))| (gi - zi) * (yi - xi)).sum();
                    if reg.is_steep() {
                        prop_assert!(lhs >= -1e-8 * (1.0 + crate::linalg::norm2(&z)));
                    }
                }
            }
        }

        #[test]
        fn conjugate_is_fenchel_value(reg in arb_reg(), seed in any::<u64>()) {
            // psi*(z) = z^T C(z) - psi(C(z))
            let z = vec_in(reg.dim(), 3.0 * reg.epsilon(), seed);
            let x = reg.mirror_map(&z).unwrap();
            let direct = dot(&z, &x) - reg.value(&x).unwrap();
            let conj = reg.conjugate(&z).unwrap();
            prop_assert!((direct - conj).abs() <= 1e-9 * (1.0 + conj.abs()), "{direct} vs {conj}");
        }

        #[test]
        fn legendre_inverse_round_trip(reg in arb_reg(), seed in any::<u64>()) {
            prop_assume!(matches!(reg.convexity(), Convexity::Legendre));
            let z = vec_in(reg.dim(), 5.0 * reg.epsilon(), seed);
            let back = reg.gradient(&reg.mirror_map(&z).unwrap()).unwrap();
            let err = crate::linalg::dist2(&back, &z);
            prop_assert!(err <= 1e-8 * (1.0 + norm2(&z)), "err {err}");
        }

        #[test]
        fn dual_bregman_is_nonnegative(reg in arb_reg(), s1 in any::<u64>(), s2 in any::<u64>()) {
            let z = vec_in(reg.dim(), 10.0, s1);
            let zr = vec_in(reg.dim(), 10.0, s2);
            prop_assert!(reg.dual_bregman_divergence(&z, &zr).unwrap() >= 0.0);
        }
    }
}

//! Concave games described by a pseudo-gradient oracle and per-player
//! action sets.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::linalg::{dot, norm2};
use crate::sets::{ActionSet, MEMBERSHIP_TOL};

/// The stacked map `x -> U(x)` of each player's partial gradient of its own
/// payoff. Implementations must be deterministic.
pub trait PseudoGradient: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Writes `U(x)` into `out`. Both slices have length `dim()`.
    fn evaluate(&self, x: &[f64], out: &mut [f64]);

    fn as_quadratic(&self) -> Option<&QuadraticGame> {
        None
    }
}

/// Quadratic game with pseudo-gradient `U(x) = R x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticGame {
    r: DMatrix<f64>,
    b: DVector<f64>,
    /// Payoff constants `c^p`; they do not enter the dynamics.
    pub payoff_offsets: Vec<f64>,
}

impl QuadraticGame {
    pub fn new(r: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if !r.is_square() {
            return Err(Error::InvalidGame(format!(
                "R must be square, got {}x{}",
                r.nrows(),
                r.ncols()
            )));
        }
        if r.nrows() != b.len() {
            return Err(Error::InvalidGame(format!(
                "R is {0}x{0} but b has length {1}",
                r.nrows(),
                b.len()
            )));
        }
        if r.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidGame("R and b must be finite".into()));
        }
        Ok(QuadraticGame {
            r,
            b,
            payoff_offsets: Vec::new(),
        })
    }

    /// Builds from row-major `R` and `b`.
    pub fn from_rows(rows: &[Vec<f64>], b: &[f64]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidGame("R must be square".into()));
        }
        let r = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(r, DVector::from_column_slice(b))
    }

    /// Assembles the pseudo-gradient from the payoff description
    /// `U^p(x) = 1/2 x^T A^p x + (b^p)^T x + c^p`: block row `p` of `R` is
    /// block row `p` of `A^p` and block `p` of `b` is block `p` of `b^p`.
    pub fn from_payoffs(
        dims: &[usize],
        a: &[DMatrix<f64>],
        b: &[DVector<f64>],
        c: &[f64],
    ) -> Result<Self> {
        let n: usize = dims.iter().sum();
        if a.len() != dims.len() || b.len() != dims.len() || c.len() != dims.len() {
            return Err(Error::InvalidGame("one payoff per player required".into()));
        }
        let mut r = DMatrix::zeros(n, n);
        let mut stacked = DVector::zeros(n);
        let mut offset = 0;
        for (p, &np) in dims.iter().enumerate() {
            if a[p].nrows() != n || a[p].ncols() != n || b[p].len() != n {
                return Err(Error::InvalidGame(format!(
                    "payoff of player {p} must be over the full {n}-dimensional profile"
                )));
            }
            r.rows_mut(offset, np).copy_from(&a[p].rows(offset, np));
            stacked.rows_mut(offset, np).copy_from(&b[p].rows(offset, np));
            offset += np;
        }
        let mut game = Self::new(r, stacked)?;
        game.payoff_offsets = c.to_vec();
        Ok(game)
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Exact classification from the spectrum of `R + R^T`.
    pub fn classify_monotonicity(&self) -> MonotonicityReport {
        let sym = &self.r + self.r.transpose();
        let eig = SymmetricEigen::new(sym.clone());
        let lambda_max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let scale = sym.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let zero_tol = 1e-10 * scale;
        let (class, modulus) = if lambda_max > zero_tol {
            (MonotonicityClass::HypoMonotone, lambda_max / 2.0)
        } else if lambda_max < -zero_tol {
            (MonotonicityClass::StronglyMonotone, -lambda_max / 2.0)
        } else {
            (MonotonicityClass::Monotone, 0.0)
        };
        MonotonicityReport {
            class,
            modulus,
            evidence: MonotonicityEvidence::SymmetrizedSpectrum { lambda_max },
        }
    }
}

impl PseudoGradient for QuadraticGame {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn evaluate(&self, x: &[f64], out: &mut [f64]) {
        let n = self.b.len();
        for i in 0..n {
            let mut acc = self.b[i];
            for j in 0..n {
                acc += self.r[(i, j)] * x[j];
            }
            out[i] = acc;
        }
    }

    fn as_quadratic(&self) -> Option<&QuadraticGame> {
        Some(self)
    }
}

/// Pseudo-gradient supplied as a closure.
pub struct FnPseudoGradient<F> {
    dim: usize,
    f: F,
}

impl<F> FnPseudoGradient<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnPseudoGradient { dim, f }
    }
}

impl<F> fmt::Debug for FnPseudoGradient<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnPseudoGradient").field("dim", &self.dim).finish()
    }
}

impl<F> PseudoGradient for FnPseudoGradient<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// An N-player concave game. Cloning is cheap; the oracle is shared.
#[derive(Clone, Debug)]
pub struct Game {
    sets: Vec<ActionSet>,
    offsets: Vec<usize>,
    oracle: Arc<dyn PseudoGradient>,
}

impl Game {
    pub fn new(sets: Vec<ActionSet>, oracle: Arc<dyn PseudoGradient>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::InvalidGame("a game needs at least one player".into()));
        }
        for s in &sets {
            s.validate()?;
        }
        let mut offsets = Vec::with_capacity(sets.len() + 1);
        offsets.push(0);
        for s in &sets {
            offsets.push(offsets.last().unwrap() + s.dim());
        }
        let n = *offsets.last().unwrap();
        if n != oracle.dim() {
            return Err(Error::InvalidGame(format!(
                "player dimensions sum to {n} but the pseudo-gradient has dimension {}",
                oracle.dim()
            )));
        }
        Ok(Game {
            sets,
            offsets,
            oracle,
        })
    }

    pub fn quadratic(game: QuadraticGame, sets: Vec<ActionSet>) -> Result<Self> {
        Self::new(sets, Arc::new(game))
    }

    /// Same oracle over different action sets (e.g. the truncated sets a
    /// particular regularizer lives on).
    pub fn with_sets(&self, sets: Vec<ActionSet>) -> Result<Self> {
        Self::new(sets, Arc::clone(&self.oracle))
    }

    pub fn players(&self) -> usize {
        self.sets.len()
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.sets.iter().map(ActionSet::dim).collect()
    }

    pub fn sets(&self) -> &[ActionSet] {
        &self.sets
    }

    /// Index range of player `p` inside the stacked profile.
    pub fn block(&self, p: usize) -> Range<usize> {
        self.offsets[p]..self.offsets[p + 1]
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticGame> {
        self.oracle.as_quadratic()
    }

    pub fn oracle(&self) -> &Arc<dyn PseudoGradient> {
        &self.oracle
    }

    /// `U(x)` without validation; `x` and `out` must have length `dim()`.
    #[inline]
    pub fn pseudo_gradient_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        self.oracle.evaluate(x, out)
    }

    pub fn pseudo_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut out = vec![0.0; x.len()];
        self.oracle.evaluate(x, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinitePseudoGradient { x: x.to_vec() });
        }
        Ok(out)
    }

    /// Blockwise Euclidean projection onto `Omega`.
    pub fn project_into(&self, x: &[f64], out: &mut [f64]) {
        for (p, set) in self.sets.iter().enumerate() {
            let r = self.block(p);
            set.project_into(&x[r.clone()], &mut out[r]);
        }
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut out = vec![0.0; x.len()];
        self.project_into(x, &mut out);
        Ok(out)
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        self.sets
            .iter()
            .enumerate()
            .map(|(p, s)| s.violation(&x[self.block(p)]))
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim() && x.iter().all(|v| v.is_finite()) && self.violation(x) <= tol
    }

    pub(crate) fn check_feasible(&self, x: &[f64]) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        check_finite(x, "feasibility check")?;
        let violation = self.violation(x);
        if violation > MEMBERSHIP_TOL {
            return Err(Error::Infeasible { violation });
        }
        Ok(())
    }

    /// `||x - Pi_Omega(x + U(x))||_2`; zero exactly at Nash equilibria.
    pub fn nash_residual(&self, x: &[f64]) -> Result<f64> {
        self.check_feasible(x)?;
        let u = self.pseudo_gradient(x)?;
        Ok(self.projected_residual(x, &u))
    }

    /// `||x - Pi_Omega(x + d)||_2` for an arbitrary direction `d`.
    pub(crate) fn projected_residual(&self, x: &[f64], d: &[f64]) -> f64 {
        let shifted: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + b).collect();
        let mut p = vec![0.0; x.len()];
        self.project_into(&shifted, &mut p);
        let diff: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a - b).collect();
        norm2(&diff)
    }

    /// Monotonicity class of the game. Quadratic games are classified
    /// exactly; other games by sampling `samples` pairs in `Omega`.
    pub fn classify_monotonicity(&self, samples: usize, seed: u64) -> MonotonicityReport {
        match self.as_quadratic() {
            Some(q) => q.classify_monotonicity(),
            None => self.classify_monotonicity_sampled(samples, seed),
        }
    }

    /// Sampled check: worst value of `-(U(x)-U(x'))^T (x-x') / ||x-x'||^2`
    /// over `samples` pairs drawn from `Omega` (unbounded sets are sampled
    /// in `[-10, 10]`).
    pub fn classify_monotonicity_sampled(&self, samples: usize, seed: u64) -> MonotonicityReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.dim();
        let mut worst = f64::INFINITY;
        let mut worst_pair = None;
        let mut ux = vec![0.0; n];
        let mut uy = vec![0.0; n];
        for _ in 0..samples {
            let x = self.sample_point(&mut rng);
            let y = self.sample_point(&mut rng);
            let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let sq = dot(&dx, &dx);
            if sq < 1e-24 {
                continue;
            }
            self.oracle.evaluate(&x, &mut ux);
            self.oracle.evaluate(&y, &mut uy);
            let du: Vec<f64> = ux.iter().zip(&uy).map(|(a, b)| a - b).collect();
            let ratio = -dot(&du, &dx) / sq;
            if !ratio.is_finite() {
                return MonotonicityReport {
                    class: MonotonicityClass::Indeterminate,
                    modulus: 0.0,
                    evidence: MonotonicityEvidence::Sampled {
                        worst_ratio: ratio,
                        pair: Some((x, y)),
                    },
                };
            }
            if ratio < worst {
                worst = ratio;
                worst_pair = Some((x, y));
            }
        }
        let Some(pair) = worst_pair else {
            return MonotonicityReport {
                class: MonotonicityClass::Indeterminate,
                modulus: 0.0,
                evidence: MonotonicityEvidence::Sampled {
                    worst_ratio: f64::NAN,
                    pair: None,
                },
            };
        };
        // A finite sample can refute monotonicity but never certify a
        // positive modulus, so a nonnegative worst gap is reported as
        // plain monotone; the gap itself stays in the evidence.
        let tol = 1e-9;
        let (class, modulus) = if worst >= -tol {
            (MonotonicityClass::Monotone, 0.0)
        } else {
            (MonotonicityClass::HypoMonotone, -worst)
        };
        MonotonicityReport {
            class,
            modulus,
            evidence: MonotonicityEvidence::Sampled {
                worst_ratio: worst,
                pair: Some(pair),
            },
        }
    }

    fn sample_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        for s in &self.sets {
            x.extend(s.sample(rng, 10.0));
        }
        x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotonicityClass {
    StronglyMonotone,
    StrictlyMonotone,
    Monotone,
    HypoMonotone,
    Indeterminate,
}

impl MonotonicityClass {
    /// Whether `-U` is (at least) monotone.
    pub fn is_monotone(self) -> bool {
        matches!(
            self,
            MonotonicityClass::StronglyMonotone
                | MonotonicityClass::StrictlyMonotone
                | MonotonicityClass::Monotone
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MonotonicityEvidence {
    /// Largest eigenvalue of `R + R^T`.
    SymmetrizedSpectrum { lambda_max: f64 },
    Sampled {
        worst_ratio: f64,
        pair: Option<(Vec<f64>, Vec<f64>)>,
    },
}

/// Monotonicity class with its modulus: `eta` for strong monotonicity, `mu`
/// for hypo-monotonicity, zero otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub class: MonotonicityClass,
    pub modulus: f64,
    pub evidence: MonotonicityEvidence,
}

/// The two-player monotone quadratic game with a line of equilibria
/// `x1 = 50 + x2`.
pub fn monotone_quadratic() -> QuadraticGame {
    QuadraticGame::from_rows(&[vec![-10.0, 10.0], vec![10.0, -10.0]], &[500.0, -500.0])
        .expect("valid literal game")
}

/// The two-player hypo-monotone quadratic game (`mu = 5`) with equilibrium
/// `(20, -20)`.
pub fn hypo_quadratic() -> QuadraticGame {
    QuadraticGame::from_rows(&[vec![-10.0, 15.0], vec![15.0, -10.0]], &[500.0, -500.0])
        .expect("valid literal game")
}

/// Scalar mean-learning zero-sum game `U(x) = [[0,1],[-1,0]] x + (0, v)`
/// with equilibrium `(v, 0)`.
pub fn mean_learning(v: f64) -> QuadraticGame {
    QuadraticGame::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]], &[0.0, v])
        .expect("valid literal game")
}

/// Scalar-player game over `[-bound, bound]` per player.
pub fn boxed_players(players: usize, bound: f64) -> Vec<ActionSet> {
    (0..players)
        .map(|_| ActionSet::cube(1, -bound, bound).expect("bound > 0"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn boxed(q: QuadraticGame) -> Game {
        Game::quadratic(q, boxed_players(2, 100.0)).unwrap()
    }

    #[test]
    fn pseudo_gradient_examples() {
        let g = boxed(monotone_quadratic());
        assert_eq!(g.pseudo_gradient(&[0.0, 0.0]).unwrap(), vec![500.0, -500.0]);
        let g = boxed(mean_learning(50.0));
        assert_eq!(g.pseudo_gradient(&[50.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let g = boxed(hypo_quadratic());
        assert_eq!(g.pseudo_gradient(&[20.0, -20.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn pseudo_gradient_rejects_wrong_dimension() {
        let g = boxed(monotone_quadratic());
        assert!(matches!(
            g.pseudo_gradient(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn pseudo_gradient_is_deterministic() {
        let g = boxed(hypo_quadratic());
        let x = [0.123456789, -98.7654321];
        let a = g.pseudo_gradient(&x).unwrap();
        let b = g.pseudo_gradient(&x).unwrap();
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn payoff_blocks_assemble_r() {
        let a1 = DMatrix::from_row_slice(2, 2, &[-10.0, 10.0, 5.0, -5.0]);
        let a2 = DMatrix::from_row_slice(2, 2, &[-5.0, 5.0, 10.0, -10.0]);
        let b1 = DVector::from_column_slice(&[500.0, 0.0]);
        let b2 = DVector::from_column_slice(&[0.0, -500.0]);
        let q = QuadraticGame::from_payoffs(&[1, 1], &[a1, a2], &[b1, b2], &[0.0, 0.0]).unwrap();
        assert_eq!(q, {
            let mut m = monotone_quadratic();
            m.payoff_offsets = vec![0.0, 0.0];
            m
        });
    }

    #[test]
    fn classify_examples() {
        let r = monotone_quadratic().classify_monotonicity();
        assert_eq!(r.class, MonotonicityClass::Monotone);
        assert_eq!(r.modulus, 0.0);

        let r = hypo_quadratic().classify_monotonicity();
        assert_eq!(r.class, MonotonicityClass::HypoMonotone);
        assert_abs_diff_eq!(r.modulus, 5.0, epsilon = 1e-12);

        let q = QuadraticGame::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0]], &[3.0, 4.0]).unwrap();
        let r = q.classify_monotonicity();
        assert_eq!(r.class, MonotonicityClass::StronglyMonotone);
        assert_abs_diff_eq!(r.modulus, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn classify_rejects_non_conforming() {
        assert!(QuadraticGame::new(DMatrix::zeros(2, 3), DVector::zeros(2)).is_err());
        assert!(QuadraticGame::new(DMatrix::zeros(2, 2), DVector::zeros(3)).is_err());
        let q = monotone_quadratic();
        assert!(Game::quadratic(q, boxed_players(3, 1.0)).is_err());
    }

    #[test]
    fn sampled_classification_agrees_with_exact() {
        for q in [monotone_quadratic(), hypo_quadratic(), mean_learning(50.0)] {
            let exact = q.classify_monotonicity().class;
            let oracle = Arc::new(FnPseudoGradient::new(2, move |x: &[f64], out: &mut [f64]| {
                q.evaluate(x, out)
            }));
            let g = Game::new(boxed_players(2, 100.0), oracle).unwrap();
            assert!(g.as_quadratic().is_none());
            let sampled = g.classify_monotonicity(1000, 3).class;
            assert_eq!(sampled, exact);
        }
    }

    #[test]
    fn monotone_gap_is_nonnegative_on_samples() {
        use rand::Rng;
        let g = boxed(monotone_quadratic());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let ux = g.pseudo_gradient(&x).unwrap();
            let uy = g.pseudo_gradient(&y).unwrap();
            let gap: f64 = -(0..2).map(|i| (ux[i] - uy[i]) * (x[i] - y[i])).sum::<f64>();
            assert!(gap >= -1e-9, "gap {gap}");
        }
    }

    #[test]
    fn nash_residual_examples() {
        let g = boxed(hypo_quadratic());
        assert!(g.nash_residual(&[20.0, -20.0]).unwrap() <= 1e-9);
        let g = boxed(monotone_quadratic());
        assert!(g.nash_residual(&[25.0, -25.0]).unwrap() <= 1e-9);
        let r = g.nash_residual(&[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(r, 100.0 * 2f64.sqrt(), epsilon = 1e-9);
        assert_eq!(r, g.nash_residual(&[0.0, 0.0]).unwrap());
    }

    #[test]
    fn nash_residual_rejects_infeasible_points() {
        let g = boxed(monotone_quadratic());
        assert!(matches!(
            g.nash_residual(&[100.1, 0.0]),
            Err(Error::Infeasible { .. })
        ));
        // within the membership tolerance
        assert!(g.nash_residual(&[100.0 + 1e-10, 0.0]).is_ok());
    }
}

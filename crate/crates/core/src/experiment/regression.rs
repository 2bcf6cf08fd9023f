//! Least-squares polynomial fitting posed as a two-player zero-sum game.
//!
//! Player 1 picks coefficients `w` (length `M + 1`), player 2 picks
//! residuals `y` (length `N`); the pseudo-gradient is
//! `U(w, y) = (-A^T y, A w - y - b)` with `A` the Vandermonde matrix, so
//! `R = [[0, -A^T], [A, -I]]` and the equilibrium is the least-squares fit
//! together with its residual vector.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::QuadraticGame;

#[derive(Clone, Debug)]
pub struct PolynomialRegression {
    pub game: QuadraticGame,
    /// `[M + 1, N]`.
    pub dims: Vec<usize>,
    pub design: DMatrix<f64>,
    /// Least-squares coefficients, lowest degree first.
    pub coefficients: Vec<f64>,
    /// Full equilibrium `(w*, A w* - b)`.
    pub equilibrium: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub a: f64,
    pub b: f64,
}

pub fn build_polynomial_regression_game(data: &[DataPoint], degree: usize) -> Result<PolynomialRegression> {
    let n = data.len();
    let m = degree + 1;
    if n < m {
        return Err(Error::InvalidGame(format!(
            "degree {degree} needs at least {m} data points, got {n}"
        )));
    }
    if data.iter().any(|p| !(p.a.is_finite() && p.b.is_finite())) {
        return Err(Error::NonFinite("regression data"));
    }
    let design = DMatrix::from_fn(n, m, |i, j| data[i].a.powi(j as i32));
    let rhs = DVector::from_iterator(n, data.iter().map(|p| p.b));

    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = (n.max(m) as f64) * smax * f64::EPSILON;
    if svd.singular_values.iter().any(|s| *s <= tol) {
        return Err(Error::RankDeficient);
    }
    let coef = svd.solve(&rhs, tol).map_err(|e| Error::InvalidGame(e.to_string()))?;
    let residual = &design * &coef - &rhs;

    let dim = m + n;
    let mut r = DMatrix::zeros(dim, dim);
    r.view_mut((0, m), (m, n)).copy_from(&(-design.transpose()));
    r.view_mut((m, 0), (n, m)).copy_from(&design);
    for i in 0..n {
        r[(m + i, m + i)] = -1.0;
    }
    let mut b = DVector::zeros(dim);
    b.rows_mut(m, n).copy_from(&(-&rhs));
    let game = QuadraticGame::new(r, b)?;

    let coefficients: Vec<f64> = coef.iter().copied().collect();
    let mut equilibrium = coefficients.clone();
    equilibrium.extend(residual.iter());
    Ok(PolynomialRegression {
        game,
        dims: vec![m, n],
        design,
        coefficients,
        equilibrium,
    })
}

/// `points` abscissae uniform on `[0, 2]` (sorted) with ordinates
/// `1 - 2a + 0.5a^2 + 0.3a^3` plus uniform noise in `[-0.1, 0.1]`.
pub fn synthetic_dataset(points: usize, seed: u64) -> Vec<DataPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a: Vec<f64> = (0..points).map(|_| rng.gen_range(0.0..=2.0)).collect();
    a.sort_by(f64::total_cmp);
    a.into_iter()
        .map(|a| {
            let clean = 1.0 - 2.0 * a + 0.5 * a * a + 0.3 * a * a * a;
            DataPoint {
                a,
                b: clean + rng.gen_range(-0.1..=0.1),
            }
        })
        .collect()
}

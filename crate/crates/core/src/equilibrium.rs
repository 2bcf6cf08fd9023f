//! Perturbed Nash equilibria: the rest points of the discounted dynamics.
//!
//! `x_bar` solves `x_bar = C(U(x_bar))`, equivalently
//! `U(x_bar) - grad psi(x_bar)` lies in the normal cone of `Omega` at
//! `x_bar`. The solver tries, in order:
//!
//! 1. a direct linear solve of `(R - E) x = -b` (quadratic game, all
//!    players Euclidean, `E` the block-diagonal weights), accepted only if
//!    the solution is feasible;
//! 2. Newton's method on `F(z) = U(C(z)) - z` with a central-difference
//!    Jacobian and backtracking on `|F|`;
//! 3. the damped iteration `x <- (1 - a) x + a C(U(x))`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Game;
use crate::linalg::norm2;
use crate::regularizer::{RegularizerKind, RegularizerProfile};
use crate::sets::MEMBERSHIP_TOL;

/// Projection residual accepted as a rest point.
pub const RESIDUAL_TARGET: f64 = 1e-8;

const NEWTON_MAX_ITER: usize = 100;
const DAMPING: f64 = 0.1;
const DAMPED_MAX_ITER: usize = 1_000_000;

/// Rest point of the discounted dynamics: primal `x` and dual `z = U(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestPoint {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub residual: f64,
}

/// Perturbed equilibrium with every player's weight set to `epsilon`.
pub fn perturbed_equilibrium(
    game: &Game,
    regs: &RegularizerProfile,
    epsilon: f64,
) -> Result<Vec<f64>> {
    Ok(rest_point(game, &regs.with_epsilon(epsilon)?)?.x)
}

/// `||x - Pi_Omega(x + U(x) - grad psi(x))||_2`.
pub fn perturbed_residual(game: &Game, regs: &RegularizerProfile, x: &[f64]) -> Result<f64> {
    check_compatible(game, regs)?;
    game.check_feasible(x)?;
    let u = game.pseudo_gradient(x)?;
    let g = regs.gradient(x)?;
    let d: Vec<f64> = u.iter().zip(&g).map(|(a, b)| a - b).collect();
    Ok(game.projected_residual(x, &d))
}

/// Rest point using each regularizer's own weight.
pub fn rest_point(game: &Game, regs: &RegularizerProfile) -> Result<RestPoint> {
    check_compatible(game, regs)?;
    if let Some(x) = linear_solve(game, regs) {
        return finish(game, regs, x, None);
    }
    if let Some((x, z)) = newton(game, regs) {
        return finish(game, regs, x, Some(z));
    }
    let x = damped_fixed_point(game, regs, DAMPING, DAMPED_MAX_ITER)?;
    finish(game, regs, x, None)
}

fn check_compatible(game: &Game, regs: &RegularizerProfile) -> Result<()> {
    regs.check_dims(&game.dims())?;
    for (p, (set, reg)) in game.sets().iter().zip(regs.regs()).enumerate() {
        if *set != reg.domain() {
            return Err(Error::InvalidGame(format!(
                "action set of player {p} differs from the domain of its {} regularizer",
                reg.name()
            )));
        }
    }
    Ok(())
}

fn finish(
    game: &Game,
    regs: &RegularizerProfile,
    x: Vec<f64>,
    z_hint: Option<Vec<f64>>,
) -> Result<RestPoint> {
    let residual = residual_with_hint(game, regs, &x, z_hint.as_deref())?;
    let z = game.pseudo_gradient(&x)?;
    Ok(RestPoint { x, z, residual })
}

/// Residual at `x`; when `x = C(z)` sits numerically on the boundary of a
/// steep domain, `z` stands in for `grad psi(x)`.
fn residual_with_hint(
    game: &Game,
    regs: &RegularizerProfile,
    x: &[f64],
    z: Option<&[f64]>,
) -> Result<f64> {
    let u = game.pseudo_gradient(x)?;
    let g = match (regs.gradient(x), z) {
        (Ok(g), _) => g,
        (Err(Error::NotInterior), Some(z)) => z.to_vec(),
        (Err(e), _) => return Err(e),
    };
    let d: Vec<f64> = u.iter().zip(&g).map(|(a, b)| a - b).collect();
    Ok(game.projected_residual(x, &d))
}

fn linear_solve(game: &Game, regs: &RegularizerProfile) -> Option<Vec<f64>> {
    let q = game.as_quadratic()?;
    let n = game.dim();
    let mut m: DMatrix<f64> = q.r().clone();
    for (p, reg) in regs.regs().iter().enumerate() {
        if !matches!(reg.kind(), RegularizerKind::Euclidean { .. }) {
            return None;
        }
        for i in regs.block(p) {
            m[(i, i)] -= reg.epsilon();
        }
    }
    let rhs: DVector<f64> = -q.b();
    let x = m.lu().solve(&rhs)?;
    let x: Vec<f64> = x.iter().copied().collect();
    debug_assert_eq!(x.len(), n);
    if !game.contains(&x, MEMBERSHIP_TOL) {
        return None;
    }
    let r = residual_with_hint(game, regs, &x, None).ok()?;
    (r <= RESIDUAL_TARGET).then_some(x)
}

fn fixed_point_map(game: &Game, regs: &RegularizerProfile, z: &[f64], x: &mut [f64], f: &mut [f64]) {
    regs.mirror_map_into(z, x);
    game.pseudo_gradient_into(x, f);
    for (fi, zi) in f.iter_mut().zip(z) {
        *fi -= zi;
    }
}

fn newton(game: &Game, regs: &RegularizerProfile) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = game.dim();
    let mut z = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut xt = vec![0.0; n];
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    fixed_point_map(game, regs, &z, &mut x, &mut f);
    for _ in 0..NEWTON_MAX_ITER {
        if !f.iter().all(|v| v.is_finite()) {
            return None;
        }
        if let Ok(r) = residual_with_hint(game, regs, &x, Some(&z)) {
            if r <= RESIDUAL_TARGET {
                return Some((x, z));
            }
        }
        let mut jac = DMatrix::<f64>::zeros(n, n);
        let mut zt = z.clone();
        for j in 0..n {
            let h = 1e-7 * z[j].abs().max(1.0);
            zt[j] = z[j] + h;
            fixed_point_map(game, regs, &zt, &mut xt, &mut fp);
            zt[j] = z[j] - h;
            fixed_point_map(game, regs, &zt, &mut xt, &mut fm);
            zt[j] = z[j];
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let rhs = DVector::from_iterator(n, f.iter().map(|v| -v));
        let step = jac.lu().solve(&rhs)?;
        let f_norm = norm2(&f);
        let mut lambda = 1.0;
        loop {
            for i in 0..n {
                zt[i] = z[i] + lambda * step[i];
            }
            fixed_point_map(game, regs, &zt, &mut xt, &mut fp);
            let trial = norm2(&fp);
            if trial.is_finite() && trial <= (1.0 - 1e-4 * lambda) * f_norm {
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-10 {
                return None;
            }
        }
        z.copy_from_slice(&zt);
        x.copy_from_slice(&xt);
        f.copy_from_slice(&fp);
    }
    None
}

/// `x <- (1 - alpha) x + alpha C(U(x))` from `C(0)`, checking the residual
/// every 64 iterations.
pub(crate) fn damped_fixed_point(
    game: &Game,
    regs: &RegularizerProfile,
    alpha: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = game.dim();
    let mut x = vec![0.0; n];
    regs.mirror_map_into(&vec![0.0; n], &mut x);
    let mut u = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for k in 0..max_iter {
        if k % 64 == 0 {
            residual = residual_with_hint(game, regs, &x, None).unwrap_or(f64::INFINITY);
            if residual <= RESIDUAL_TARGET {
                return Ok(x);
            }
        }
        game.pseudo_gradient_into(&x, &mut u);
        regs.mirror_map_into(&u, &mut c);
        for (xi, ci) in x.iter_mut().zip(&c) {
            *xi = (1.0 - alpha) * *xi + alpha * ci;
        }
        if !x.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    if x.iter().all(|v| v.is_finite()) {
        residual = residual_with_hint(game, regs, &x, None).unwrap_or(f64::INFINITY);
        if residual <= RESIDUAL_TARGET {
            return Ok(x);
        }
    }
    Err(Error::NotConverged {
        last: x,
        residual,
        iterations: max_iter,
    })
}

//! Discrete-time schemes: Euler-discretized DMD with a Euclidean
//! regularizer (discrete PDMD) and iterative Tikhonov regularization (ITR).
//!
//! Both run for the full iteration budget; when a target set is supplied
//! the first iteration that comes within the target radius is reported.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::analysis::{distance_to_equilibrium_set, EquilibriumSet};
use crate::csv::{format_sig, read_table, write_row};
use crate::error::{check_dim, check_finite, Error, Result};
use crate::game::Game;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    DiscretePdmd,
    Itr,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::DiscretePdmd => "discrete_pdmd",
            Algorithm::Itr => "itr",
        }
    }
}

/// Reports the first iteration whose iterate lies within `radius` of `set`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub set: EquilibriumSet,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdmdSettings {
    /// Constant step `t` in `(0, 1)`.
    pub step: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub record_every: usize,
    pub target: Option<Target>,
}

impl Default for PdmdSettings {
    fn default() -> Self {
        PdmdSettings {
            step: 1e-3,
            epsilon: 0.1,
            max_iter: 1_000_000,
            record_every: 1000,
            target: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItrSettings {
    /// `t_k = k^-step_exponent`.
    pub step_exponent: f64,
    /// `eps_k = k^-regularization_exponent`.
    pub regularization_exponent: f64,
    pub max_iter: usize,
    pub record_every: usize,
    pub target: Option<Target>,
}

impl Default for ItrSettings {
    fn default() -> Self {
        ItrSettings {
            step_exponent: 0.48,
            regularization_exponent: 0.51,
            max_iter: 1_000_000,
            record_every: 1000,
            target: None,
        }
    }
}

/// Iterates of a discrete scheme, sampled every `record_every` iterations
/// plus the initial and final ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteRun {
    pub algorithm: Algorithm,
    pub step_schedule: String,
    pub iterations: Vec<usize>,
    pub iterates: Vec<Vec<f64>>,
    pub residual_history: Vec<f64>,
    /// Number of updates performed.
    pub iteration_count: usize,
    /// Iteration producing the first non-finite iterate, if any.
    pub diverged_at: Option<usize>,
    /// First iteration within the target radius.
    pub first_within: Option<usize>,
    /// First iteration after which every iterate stays within the target
    /// radius.
    pub settled_within: Option<usize>,
}

impl DiscreteRun {
    pub fn final_x(&self) -> Option<&[f64]> {
        self.iterates.last().map(Vec::as_slice)
    }

    pub fn csv_header(n: usize) -> Vec<String> {
        let mut h = vec!["k".to_string()];
        h.extend((1..=n).map(|i| format!("x_{i}")));
        h.push("residual".into());
        h
    }

    /// Writes `k,x_1..x_n,residual` with 12 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.iterates.first().map_or(0, Vec::len);
        write_row(&mut w, &Self::csv_header(n))?;
        for (j, k) in self.iterations.iter().enumerate() {
            let mut row = Vec::with_capacity(n + 2);
            row.push(k.to_string());
            row.extend(self.iterates[j].iter().map(|v| format_sig(*v, 12)));
            row.push(format_sig(self.residual_history[j], 12));
            write_row(&mut w, &row)?;
        }
        Ok(())
    }

    /// Parses a CSV written by [`DiscreteRun::write_csv`]; summary fields
    /// that are not part of the format are left empty.
    pub fn read_csv<R: BufRead>(r: R, algorithm: Algorithm) -> Result<Self> {
        let (header, rows) = read_table(r)?;
        if header.len() < 3 || header != Self::csv_header(header.len() - 2) {
            return Err(Error::Parse(format!("unexpected run header {header:?}")));
        }
        let n = header.len() - 2;
        let mut run = DiscreteRun {
            algorithm,
            step_schedule: String::new(),
            iterations: Vec::with_capacity(rows.len()),
            iterates: Vec::with_capacity(rows.len()),
            residual_history: Vec::with_capacity(rows.len()),
            iteration_count: 0,
            diverged_at: None,
            first_within: None,
            settled_within: None,
        };
        for row in rows {
            let vals = row
                .into_iter()
                .map(|v| v.ok_or_else(|| Error::Parse("empty field".into())))
                .collect::<Result<Vec<f64>>>()?;
            let k = vals[0];
            if k < 0.0 || k.fract() != 0.0 {
                return Err(Error::Parse(format!("bad iteration index {k}")));
            }
            run.iterations.push(k as usize);
            run.iterates.push(vals[1..=n].to_vec());
            run.residual_history.push(vals[n + 1]);
        }
        run.iteration_count = run.iterations.last().copied().unwrap_or(0);
        Ok(run)
    }
}

struct Recorder<'a> {
    game: &'a Game,
    record_every: usize,
    target: Option<&'a Target>,
    run: DiscreteRun,
    u: Vec<f64>,
    last_outside: Option<usize>,
}

impl<'a> Recorder<'a> {
    fn new(game: &'a Game, algorithm: Algorithm, schedule: String, record_every: usize, target: Option<&'a Target>) -> Self {
        Recorder {
            game,
            record_every,
            target,
            run: DiscreteRun {
                algorithm,
                step_schedule: schedule,
                iterations: Vec::new(),
                iterates: Vec::new(),
                residual_history: Vec::new(),
                iteration_count: 0,
                diverged_at: None,
                first_within: None,
                settled_within: None,
            },
            u: vec![0.0; game.dim()],
            last_outside: None,
        }
    }

    /// Observes iterate `k`; returns false if it is non-finite.
    fn observe(&mut self, k: usize, x: &[f64], last: bool) -> bool {
        if !x.iter().all(|v| v.is_finite()) {
            self.run.diverged_at = Some(k);
            return false;
        }
        self.run.iteration_count = k;
        if let Some(t) = self.target {
            let d = distance_to_equilibrium_set(x, &t.set).unwrap_or(f64::INFINITY);
            if d <= t.radius {
                if self.run.first_within.is_none() {
                    self.run.first_within = Some(k);
                }
            } else {
                self.last_outside = Some(k);
            }
        }
        if k.is_multiple_of(self.record_every) || last {
            self.game.pseudo_gradient_into(x, &mut self.u);
            self.run.iterations.push(k);
            self.run.iterates.push(x.to_vec());
            self.run.residual_history.push(self.game.projected_residual(x, &self.u));
        }
        true
    }

    fn finish(mut self, x: &[f64]) -> DiscreteRun {
        if self.run.diverged_at.is_none() {
            let k = self.run.iteration_count;
            if self.run.iterations.last() != Some(&k) {
                self.observe(k, x, true);
            }
            if self.target.is_some() {
                self.run.settled_within = match self.last_outside {
                    None => Some(0),
                    Some(j) if j < k => Some(j + 1),
                    Some(_) => None,
                };
            }
        }
        self.run
    }
}

fn check_target(game: &Game, target: Option<&Target>) -> Result<()> {
    if let Some(t) = target {
        if !(t.radius.is_finite() && t.radius >= 0.0) {
            return Err(Error::Settings(format!("target radius must be >= 0, got {}", t.radius)));
        }
        distance_to_equilibrium_set(&vec![0.0; game.dim()], &t.set)?;
    }
    Ok(())
}

/// `z <- z + t (-z + U(x))`, `x <- Pi_Omega(z / eps)` from `z0`.
pub fn run_discrete_pdmd(game: &Game, z0: &[f64], settings: &PdmdSettings) -> Result<DiscreteRun> {
    let PdmdSettings {
        step,
        epsilon,
        max_iter,
        record_every,
        ref target,
    } = *settings;
    check_dim(game.dim(), z0.len())?;
    check_finite(z0, "initial dual state")?;
    if !(step > 0.0 && step < 1.0) {
        return Err(Error::Settings(format!("step must lie in (0, 1), got {step}")));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Settings(format!("epsilon must be positive, got {epsilon}")));
    }
    if record_every == 0 {
        return Err(Error::Settings("record_every must be at least 1".into()));
    }
    check_target(game, target.as_ref())?;

    let n = game.dim();
    let mut z = z0.to_vec();
    let mut w = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut u = vec![0.0; n];
    let project = |z: &[f64], w: &mut [f64], x: &mut [f64]| {
        for (wi, zi) in w.iter_mut().zip(z) {
            *wi = zi / epsilon;
        }
        game.project_into(w, x);
    };
    project(&z, &mut w, &mut x);
    let mut rec = Recorder::new(
        game,
        Algorithm::DiscretePdmd,
        format!("t = {step}, eps = {epsilon}"),
        record_every,
        target.as_ref(),
    );
    rec.observe(0, &x, max_iter == 0);
    for k in 1..=max_iter {
        game.pseudo_gradient_into(&x, &mut u);
        for i in 0..n {
            z[i] += step * (u[i] - z[i]);
        }
        project(&z, &mut w, &mut x);
        if !rec.observe(k, &x, k == max_iter) {
            break;
        }
    }
    Ok(rec.finish(&x))
}

/// `x <- Pi_Omega(x - t_k (-U(x) + eps_k x))` with `t_k = k^-p_t`,
/// `eps_k = k^-p_e`, `k = 1, 2, ...`.
pub fn run_itr(game: &Game, x0: &[f64], settings: &ItrSettings) -> Result<DiscreteRun> {
    let ItrSettings {
        step_exponent,
        regularization_exponent,
        max_iter,
        record_every,
        ref target,
    } = *settings;
    game.check_feasible(x0)?;
    for (name, p) in [("step", step_exponent), ("regularization", regularization_exponent)] {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Settings(format!("{name} exponent must lie in (0, 1), got {p}")));
        }
    }
    if record_every == 0 {
        return Err(Error::Settings("record_every must be at least 1".into()));
    }
    check_target(game, target.as_ref())?;

    let n = game.dim();
    let mut x = x0.to_vec();
    let mut y = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut rec = Recorder::new(
        game,
        Algorithm::Itr,
        format!("t_k = k^-{step_exponent}, eps_k = k^-{regularization_exponent}"),
        record_every,
        target.as_ref(),
    );
    rec.observe(0, &x, max_iter == 0);
    for k in 1..=max_iter {
        let kf = k as f64;
        let t = kf.powf(-step_exponent);
        let eps = kf.powf(-regularization_exponent);
        game.pseudo_gradient_into(&x, &mut u);
        for i in 0..n {
            y[i] = x[i] + t * (u[i] - eps * x[i]);
        }
        game.project_into(&y, &mut x);
        if !rec.observe(k, &x, k == max_iter) {
            break;
        }
    }
    Ok(rec.finish(&x))
}

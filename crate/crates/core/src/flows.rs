//! Continuous-time learning dynamics, integrated with fixed-step RK4.
//!
//! * `dmd`:  `z' = gamma (-z + U(C(z)))`, `x = C(z)`
//! * `md`:   `z' = gamma U(C(z))`
//! * `psgd`: `x' = gamma U(x)` (interior flow; the state is `x`)

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::csv::{format_sig, read_table, write_row};
use crate::error::{check_dim, check_finite, Error, Result};
use crate::game::Game;
use crate::regularizer::RegularizerProfile;
use crate::sets::MEMBERSHIP_TOL;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    Dmd,
    Md,
    Psgd,
}

impl Dynamics {
    pub fn name(self) -> &'static str {
        match self {
            Dynamics::Dmd => "dmd",
            Dynamics::Md => "md",
            Dynamics::Psgd => "psgd",
        }
    }
}

/// A flow to integrate. `initial` is `z(0)` for the mirror flows and
/// `x(0)` for `psgd`.
#[derive(Clone, Debug)]
pub struct FlowSpec {
    dynamics: Dynamics,
    gamma: f64,
    game: Game,
    regs: Option<RegularizerProfile>,
    initial: Vec<f64>,
}

impl FlowSpec {
    /// Mirror flow (`dmd` or `md`). Each player's action set must be the
    /// domain of its regularizer.
    pub fn mirror(
        dynamics: Dynamics,
        game: Game,
        regs: RegularizerProfile,
        gamma: f64,
        z0: Vec<f64>,
    ) -> Result<Self> {
        if dynamics == Dynamics::Psgd {
            return Err(Error::Settings("psgd is not a mirror flow; use FlowSpec::psgd".into()));
        }
        check_gamma(gamma)?;
        regs.check_dims(&game.dims())?;
        for (p, (set, reg)) in game.sets().iter().zip(regs.regs()).enumerate() {
            if *set != reg.domain() {
                return Err(Error::InvalidGame(format!(
                    "action set of player {p} differs from the domain of its {} regularizer",
                    reg.name()
                )));
            }
        }
        check_dim(game.dim(), z0.len())?;
        check_finite(&z0, "initial dual state")?;
        Ok(FlowSpec {
            dynamics,
            gamma,
            game,
            regs: Some(regs),
            initial: z0,
        })
    }

    pub fn dmd(game: Game, regs: RegularizerProfile, gamma: f64, z0: Vec<f64>) -> Result<Self> {
        Self::mirror(Dynamics::Dmd, game, regs, gamma, z0)
    }

    pub fn md(game: Game, regs: RegularizerProfile, gamma: f64, z0: Vec<f64>) -> Result<Self> {
        Self::mirror(Dynamics::Md, game, regs, gamma, z0)
    }

    pub fn psgd(game: Game, gamma: f64, x0: Vec<f64>) -> Result<Self> {
        check_gamma(gamma)?;
        game.check_feasible(&x0)?;
        Ok(FlowSpec {
            dynamics: Dynamics::Psgd,
            gamma,
            game,
            regs: None,
            initial: x0,
        })
    }

    pub fn dynamics(&self) -> Dynamics {
        self.dynamics
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn game(&self) -> &Game {
        &self.game
    }

    pub fn regs(&self) -> Option<&RegularizerProfile> {
        self.regs.as_ref()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Primal point of a state.
    fn primal_into(&self, s: &[f64], x: &mut [f64]) -> bool {
        match &self.regs {
            Some(r) => r.mirror_map_into(s, x),
            None => {
                x.copy_from_slice(s);
                false
            }
        }
    }

    /// Vector field at `s` into `out`; `x` is scratch for the primal point.
    fn field_into(&self, s: &[f64], x: &mut [f64], out: &mut [f64]) -> bool {
        let saturated = self.primal_into(s, x);
        self.game.pseudo_gradient_into(x, out);
        match self.dynamics {
            Dynamics::Dmd => {
                for (o, si) in out.iter_mut().zip(s) {
                    *o = self.gamma * (*o - si);
                }
            }
            Dynamics::Md | Dynamics::Psgd => {
                for o in out.iter_mut() {
                    *o *= self.gamma;
                }
            }
        }
        saturated
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::Settings(format!("gamma must be positive, got {gamma}")))
    }
}

fn mirror_field(
    dynamics: Dynamics,
    game: &Game,
    regs: &RegularizerProfile,
    gamma: f64,
    z: &[f64],
) -> Result<Vec<f64>> {
    regs.check_dims(&game.dims())?;
    check_dim(game.dim(), z.len())?;
    check_finite(z, "vector field")?;
    check_gamma(gamma)?;
    let x = regs.mirror_map(z)?;
    let u = game.pseudo_gradient(&x)?;
    Ok(match dynamics {
        Dynamics::Dmd => u.iter().zip(z).map(|(ui, zi)| gamma * (ui - zi)).collect(),
        _ => u.iter().map(|ui| gamma * ui).collect(),
    })
}

/// `gamma (-z + U(C(z)))`.
pub fn dmd_vector_field(game: &Game, regs: &RegularizerProfile, gamma: f64, z: &[f64]) -> Result<Vec<f64>> {
    mirror_field(Dynamics::Dmd, game, regs, gamma, z)
}

/// `gamma U(C(z))`.
pub fn md_vector_field(game: &Game, regs: &RegularizerProfile, gamma: f64, z: &[f64]) -> Result<Vec<f64>> {
    mirror_field(Dynamics::Md, game, regs, gamma, z)
}

/// `gamma U(x)`.
pub fn psgd_vector_field(game: &Game, gamma: f64, x: &[f64]) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    game.check_feasible(x)?;
    Ok(game.pseudo_gradient(x)?.into_iter().map(|u| gamma * u).collect())
}

/// `V(z) = sum_p D_{psi_p*}(z^p, z_ref^p)`.
pub fn lyapunov_value(regs: &RegularizerProfile, z: &[f64], z_ref: &[f64]) -> Result<f64> {
    regs.dual_bregman_divergence(z, z_ref)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrateSettings {
    pub horizon: f64,
    pub dt: f64,
    /// Record every this many steps; the initial and final states are
    /// always recorded.
    pub record_every: usize,
    /// Rest point `z_bar` for Lyapunov sampling.
    pub lyapunov_ref: Option<Vec<f64>>,
}

impl IntegrateSettings {
    pub fn new(horizon: f64, dt: f64, record_every: usize) -> Self {
        IntegrateSettings {
            horizon,
            dt,
            record_every,
            lyapunov_ref: None,
        }
    }

    pub fn with_lyapunov_ref(mut self, z_ref: Vec<f64>) -> Self {
        self.lyapunov_ref = Some(z_ref);
        self
    }
}

/// Sampled path of a flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dynamics: Dynamics,
    pub times: Vec<f64>,
    /// State path: `z` for mirror flows, `x` for `psgd`.
    pub z_path: Vec<Vec<f64>>,
    pub x_path: Vec<Vec<f64>>,
    pub lyapunov: Option<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// Whether an exponent was clamped while evaluating the sample.
    pub saturation_flags: Vec<bool>,
    /// Time of the first non-finite state, if any; the path stops before it.
    pub diverged_at: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x_path.first().map_or(0, Vec::len)
    }

    pub fn final_x(&self) -> Option<&[f64]> {
        self.x_path.last().map(Vec::as_slice)
    }

    pub fn final_z(&self) -> Option<&[f64]> {
        self.z_path.last().map(Vec::as_slice)
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn any_saturated(&self) -> bool {
        self.saturation_flags.iter().any(|f| *f)
    }

    pub fn csv_header(n: usize) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((1..=n).map(|i| format!("z_{i}")));
        h.extend((1..=n).map(|i| format!("x_{i}")));
        h.push("V".into());
        h.push("residual".into());
        h
    }

    /// Writes `t,z_1..z_n,x_1..x_n,V,residual` with 12 significant digits;
    /// `V` is left empty when no reference was given.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.dim();
        write_row(&mut w, &Self::csv_header(n))?;
        for k in 0..self.len() {
            let mut row = Vec::with_capacity(2 * n + 3);
            row.push(format_sig(self.times[k], 12));
            row.extend(self.z_path[k].iter().map(|v| format_sig(*v, 12)));
            row.extend(self.x_path[k].iter().map(|v| format_sig(*v, 12)));
            row.push(
                self.lyapunov
                    .as_ref()
                    .map_or(String::new(), |l| format_sig(l[k], 12)),
            );
            row.push(format_sig(self.residuals[k], 12));
            write_row(&mut w, &row)?;
        }
        Ok(())
    }

    /// Parses a CSV written by [`Trajectory::write_csv`]. Saturation flags
    /// and the divergence time are not part of the format.
    pub fn read_csv<R: BufRead>(r: R, dynamics: Dynamics) -> Result<Self> {
        let (header, rows) = read_table(r)?;
        if header.len() < 5 || (header.len() - 3) % 2 != 0 {
            return Err(Error::Parse(format!("unexpected trajectory header {header:?}")));
        }
        let n = (header.len() - 3) / 2;
        if header != Self::csv_header(n) {
            return Err(Error::Parse(format!("unexpected trajectory header {header:?}")));
        }
        let req = |v: Option<f64>, col: &str| v.ok_or_else(|| Error::Parse(format!("missing {col}")));
        let mut tr = Trajectory {
            dynamics,
            times: Vec::with_capacity(rows.len()),
            z_path: Vec::with_capacity(rows.len()),
            x_path: Vec::with_capacity(rows.len()),
            lyapunov: None,
            residuals: Vec::with_capacity(rows.len()),
            saturation_flags: vec![false; rows.len()],
            diverged_at: None,
        };
        let mut lyap = Vec::with_capacity(rows.len());
        let mut any_v = false;
        for row in &rows {
            tr.times.push(req(row[0], "t")?);
            tr.z_path.push(row[1..=n].iter().map(|v| req(*v, "z")).collect::<Result<_>>()?);
            tr.x_path.push(row[n + 1..=2 * n].iter().map(|v| req(*v, "x")).collect::<Result<_>>()?);
            if let Some(v) = row[2 * n + 1] {
                any_v = true;
                lyap.push(v);
            }
            tr.residuals.push(req(row[2 * n + 2], "residual")?);
        }
        if any_v {
            if lyap.len() != rows.len() {
                return Err(Error::Parse("V column is only partially filled".into()));
            }
            tr.lyapunov = Some(lyap);
        }
        Ok(tr)
    }
}

/// Integrates `flow` over `[0, horizon]` with classical RK4.
///
/// The step count is `ceil(horizon / dt)` with the last step shortened to
/// land on `horizon`. A non-finite state or pseudo-gradient ends the run;
/// the samples before it are kept and `diverged_at` is set.
pub fn integrate(flow: &FlowSpec, settings: &IntegrateSettings) -> Result<Trajectory> {
    let IntegrateSettings {
        horizon,
        dt,
        record_every,
        ref lyapunov_ref,
    } = *settings;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Settings(format!("horizon must be positive, got {horizon}")));
    }
    if !(dt.is_finite() && dt > 0.0 && dt <= horizon) {
        return Err(Error::Settings(format!("dt must lie in (0, horizon], got {dt}")));
    }
    if flow.gamma * dt >= 1.0 {
        return Err(Error::Settings(format!(
            "gamma * dt = {} must be below 1",
            flow.gamma * dt
        )));
    }
    if record_every == 0 {
        return Err(Error::Settings("record_every must be at least 1".into()));
    }
    let n = flow.game.dim();
    if let Some(r) = lyapunov_ref {
        if flow.regs.is_none() {
            return Err(Error::Settings("psgd has no Lyapunov function".into()));
        }
        check_dim(n, r.len())?;
        check_finite(r, "Lyapunov reference")?;
    }

    let steps = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut tr = Trajectory {
        dynamics: flow.dynamics,
        times: Vec::new(),
        z_path: Vec::new(),
        x_path: Vec::new(),
        lyapunov: lyapunov_ref.as_ref().map(|_| Vec::new()),
        residuals: Vec::new(),
        saturation_flags: Vec::new(),
        diverged_at: None,
    };

    let mut s = flow.initial.clone();
    let mut x = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    let record = |tr: &mut Trajectory, t: f64, s: &[f64], x: &mut [f64], u: &mut [f64]| -> bool {
        let saturated = flow.primal_into(s, x);
        flow.game.pseudo_gradient_into(x, u);
        let residual = if flow.regs.is_none() && flow.game.violation(x) > MEMBERSHIP_TOL {
            f64::NAN
        } else {
            flow.game.projected_residual(x, u)
        };
        if !x.iter().all(|v| v.is_finite()) {
            return false;
        }
        tr.times.push(t);
        tr.z_path.push(s.to_vec());
        tr.x_path.push(x.to_vec());
        tr.residuals.push(residual);
        tr.saturation_flags.push(saturated);
        if let (Some(l), Some(r), Some(regs)) = (tr.lyapunov.as_mut(), lyapunov_ref, flow.regs.as_ref()) {
            l.push(regs.dual_bregman_unchecked(s, r));
        }
        true
    };

    if !record(&mut tr, 0.0, &s, &mut x, &mut u) {
        tr.diverged_at = Some(0.0);
        return Ok(tr);
    }
    let mut t = 0.0;
    for step in 1..=steps {
        let h = if step == steps { horizon - (steps - 1) as f64 * dt } else { dt };
        let mut sat = flow.field_into(&s, &mut x, &mut k1);
        for i in 0..n {
            tmp[i] = s[i] + 0.5 * h * k1[i];
        }
        sat |= flow.field_into(&tmp, &mut x, &mut k2);
        for i in 0..n {
            tmp[i] = s[i] + 0.5 * h * k2[i];
        }
        sat |= flow.field_into(&tmp, &mut x, &mut k3);
        for i in 0..n {
            tmp[i] = s[i] + h * k3[i];
        }
        sat |= flow.field_into(&tmp, &mut x, &mut k4);
        for i in 0..n {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t = if step == steps { horizon } else { step as f64 * dt };
        if !s.iter().all(|v| v.is_finite()) {
            tr.diverged_at = Some(t);
            return Ok(tr);
        }
        if step % record_every == 0 || step == steps {
            if !record(&mut tr, t, &s, &mut x, &mut u) {
                tr.diverged_at = Some(t);
                return Ok(tr);
            }
            if sat {
                *tr.saturation_flags.last_mut().unwrap() = true;
            }
        }
    }
    debug_assert_eq!(t, horizon);
    Ok(tr)
}

//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed; exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use dmd_core::analysis::{canonical_regularizer, REGULARIZER_KINDS};
use dmd_core::experiment::ExperimentResult;
use dmd_core::game::{hypo_quadratic, monotone_quadratic};
use dmd_core::linalg::dist2;
use dmd_core::{
    audit_lyapunov_decay, distance_to_equilibrium_set, integrate, perturbed_equilibrium, preset,
    run_discrete_pdmd, run_experiment, verify_mirror_map_properties, ActionSet, ConvergenceStatus,
    EquilibriumSet, FlowSpec, Game, IntegrateSettings, PdmdSettings, QuadraticGame, Regularizer,
    RegularizerProfile, RunOutput, Trajectory,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn pass_if(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Solves the 2x2 system `(R - eps I) x = -b` by Cramer's rule.
fn cramer_perturbed(q: &QuadraticGame, eps: f64) -> [f64; 2] {
    let r = q.r();
    let b = q.b();
    let (a11, a12, a21, a22) = (r[(0, 0)] - eps, r[(0, 1)], r[(1, 0)], r[(1, 1)] - eps);
    let det = a11 * a22 - a12 * a21;
    [(-b[0] * a22 + b[1] * a12) / det, (-a11 * b[1] + a21 * b[0]) / det]
}

fn run_preset(name: &str) -> ExperimentResult {
    let dir = tempfile::tempdir().expect("tempdir");
    run_experiment(&preset(name).expect("preset"), Some(dir.path())).expect("preset run")
}

fn flow<'a>(res: &'a ExperimentResult, label: &str) -> &'a Trajectory {
    match res.output(label) {
        Some(RunOutput::Flow(t)) => t,
        _ => panic!("no flow output {label}"),
    }
}

fn criterion_1(res: &ExperimentResult) -> Outcome {
    let cfg = preset("quadratic-monotone").unwrap();
    assert_eq!((cfg.epsilon, cfg.gamma, cfg.horizon, cfg.dt), (0.5, 1.0, 50.0, 1e-3));
    let oracle = cramer_perturbed(&monotone_quadratic(), 0.5);
    let run = res.run("dmd_euclidean").unwrap();
    assert_eq!(run.initial, vec![0.0, 0.0]);
    let d_oracle = dist2(&run.verdict.limit_estimate, &oracle);
    let d_line = distance_to_equilibrium_set(
        &run.verdict.limit_estimate,
        &EquilibriumSet::hyperplane(vec![1.0, -1.0], 50.0),
    )
    .unwrap();
    let status = run.verdict.status;
    pass_if(
        status == ConvergenceStatus::Converged && d_oracle <= 5e-2 && d_line <= 1.0,
        format!(
            "status {}, limit {:?}, oracle {:.3?} at distance {d_oracle:.2e}, NE line distance {d_line:.3}",
            status.name(),
            run.verdict.limit_estimate,
            oracle
        ),
    )
}

fn criterion_2(res: &ExperimentResult) -> Outcome {
    let cfg = preset("quadratic-hypo").unwrap();
    assert_eq!(cfg.epsilon, 5.1);
    let oracle = cramer_perturbed(&hypo_quadratic(), 5.1);
    let eu = res.run("dmd_euclidean").unwrap();
    let d = dist2(&eu.verdict.limit_estimate, &oracle);
    let mut pass = eu.verdict.status == ConvergenceStatus::Converged && d <= 0.5;
    let mut detail = format!(
        "euclidean {} at {d:.2e} from {:.3?}",
        eu.verdict.status.name(),
        oracle
    );
    for label in ["dmd_boltzmann_shannon", "dmd_fermi_dirac", "dmd_hellinger"] {
        let r = res.run(label).unwrap();
        assert_eq!(r.epsilon, 5.1);
        let ok = r.verdict.status != ConvergenceStatus::Converged;
        pass &= ok;
        let at = if r.verdict.status == ConvergenceStatus::Converged {
            format!(" at ({:.2}, {:.2})", r.verdict.limit_estimate[0], r.verdict.limit_estimate[1])
        } else {
            String::new()
        };
        detail.push_str(&format!("; {label} {}{at}", r.verdict.status.name()));
    }
    pass_if(pass, detail)
}

fn criterion_3(res: &ExperimentResult) -> Outcome {
    let cfg = preset("mean-learning").unwrap();
    assert_eq!(cfg.epsilon, 0.1);
    let ne = [50.0, 0.0];
    let mut pass = true;
    let mut detail = Vec::new();
    for reg in ["euclidean", "boltzmann_shannon", "fermi_dirac", "hellinger"] {
        let d = res.run(&format!("dmd_{reg}")).unwrap();
        let dist = dist2(&d.verdict.limit_estimate, &ne);
        pass &= d.verdict.status == ConvergenceStatus::Converged && dist <= 1.0;
        let m = res.run(&format!("md_{reg}")).unwrap();
        let bounded = m.final_x.iter().all(|v| v.abs() < 1e6);
        pass &= m.verdict.status == ConvergenceStatus::Cycling && m.verdict.window_radius > 1.0 && bounded;
        detail.push(format!(
            "{reg}: dmd {} ({dist:.3} from NE), md {} (radius {:.1})",
            d.verdict.status.name(),
            m.verdict.status.name(),
            m.verdict.window_radius
        ));
    }
    pass_if(pass, detail.join("; "))
}

fn criterion_4(monotone: &ExperimentResult, mean: &ExperimentResult) -> Outcome {
    let mut pass = true;
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut audited = 0;
    for res in [monotone, mean] {
        for label in ["dmd_euclidean", "dmd_boltzmann_shannon", "dmd_fermi_dirac", "dmd_hellinger"] {
            let audit = audit_lyapunov_decay(flow(res, label)).expect("lyapunov samples");
            pass &= audit.monotone_up_to_slack;
            worst = worst.max(audit.max_increase / (1.0 + audit.max_value));
            audited += 1;
        }
    }
    pass_if(
        pass,
        format!("{audited} DMD trajectories, worst relative increase {worst:.2e}"),
    )
}

fn criterion_5() -> Outcome {
    let mut pass = true;
    let mut failures = Vec::new();
    let mut count = 0;
    for kind in REGULARIZER_KINDS {
        for eps in [0.1, 0.5, 1.0] {
            let reg = canonical_regularizer(kind, 3, eps).unwrap();
            let rep = verify_mirror_map_properties(&reg, 1000, 2024).unwrap();
            count += 1;
            if !rep.passed {
                pass = false;
                failures.push(format!("{kind}@{eps}"));
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("{count} kind/epsilon configurations, 1000 samples each")
    } else {
        format!("failed: {}", failures.join(", "))
    };
    pass_if(pass, detail)
}

fn criterion_6(res: &ExperimentResult) -> Outcome {
    let p = res.run("discrete_pdmd").unwrap();
    let i = res.run("itr").unwrap();
    let pass = match (p.first_within, i.first_within) {
        (Some(kp), Some(ki)) => kp < ki,
        _ => false,
    };
    pass_if(
        pass,
        format!(
            "iterations to NE-line distance 1.0: pdmd {:?}, itr {:?}; final distances {:.3?} / {:.3?}",
            p.first_within, i.first_within, p.verdict.target_distance, i.verdict.target_distance
        ),
    )
}

fn criterion_7() -> Outcome {
    let b = [3.0, -4.0];
    let q = QuadraticGame::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0]], &b).unwrap();
    let space = ActionSet::whole_space(2).unwrap();
    let game = Game::quadratic(q, vec![space.clone()]).unwrap();
    let regs = RegularizerProfile::new(vec![Regularizer::euclidean(space, 1.0).unwrap()]).unwrap();
    let nb = (b[0] * b[0] + b[1] * b[1]).sqrt();
    let mut prev = f64::INFINITY;
    let mut pass = true;
    let mut errs = Vec::new();
    for eps in [1.0, 0.1, 0.01] {
        let x = perturbed_equilibrium(&game, &regs, eps).unwrap();
        let d = dist2(&x, &b);
        let err = (d - eps * nb / (1.0 + eps)).abs();
        pass &= d < prev && err <= 1e-9;
        prev = d;
        errs.push(format!("eps {eps}: {d:.6} (err {err:.1e})"));
    }
    pass_if(pass, errs.join(", "))
}

/// Max distance between PDMD iterates with step `t` and an RK4 DMD path
/// sampled at the matching times `k t` over `[0, 1]`.
fn pdmd_deviation(game: &Game, eps: f64, t: f64, reference: &Trajectory, ref_dt: f64) -> f64 {
    let steps = (1.0 / t).round() as usize;
    let run = run_discrete_pdmd(
        game,
        &[0.0, 0.0],
        &PdmdSettings {
            step: t,
            epsilon: eps,
            max_iter: steps,
            record_every: 1,
            target: None,
        },
    )
    .unwrap();
    let stride = (t / ref_dt).round() as usize;
    run.iterations
        .iter()
        .zip(&run.iterates)
        .map(|(k, x)| dist2(x, &reference.x_path[k * stride]))
        .fold(0.0, f64::max)
}

fn criterion_8() -> Outcome {
    let eps = 1.0;
    let set = ActionSet::cube(1, -100.0, 100.0).unwrap();
    let game = Game::quadratic(monotone_quadratic(), vec![set.clone(), set.clone()]).unwrap();
    let reg = Regularizer::euclidean(set, eps).unwrap();
    let regs = RegularizerProfile::new(vec![reg.clone(), reg]).unwrap();
    let ref_dt = 1e-5;
    let spec = FlowSpec::dmd(game.clone(), regs.clone(), 1.0, vec![0.0, 0.0]).unwrap();
    let reference = integrate(&spec, &IntegrateSettings::new(1.0, ref_dt, 1)).unwrap();
    let coarse = pdmd_deviation(&game, eps, 1e-2, &reference, ref_dt);
    let fine = pdmd_deviation(&game, eps, 1e-3, &reference, ref_dt);
    let ratio = coarse / fine;
    pass_if(
        (8.0..=12.0).contains(&ratio),
        format!("max deviation {coarse:.4e} (t = 1e-2) vs {fine:.4e} (t = 1e-3), ratio {ratio:.2}"),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: u32, limit: Duration, start: Instant, o: Outcome| {
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= limit;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {id}: {} [{:.2}s of {}s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    };
    let secs = Duration::from_secs;

    let t = Instant::now();
    let monotone = run_preset("quadratic-monotone");
    report(1, secs(10), t, criterion_1(&monotone));

    let t = Instant::now();
    let hypo = run_preset("quadratic-hypo");
    report(2, secs(30), t, criterion_2(&hypo));

    let t = Instant::now();
    let mean = run_preset("mean-learning");
    report(3, secs(30), t, criterion_3(&mean));

    let t = Instant::now();
    report(4, secs(10), t, criterion_4(&monotone, &mean));

    let t = Instant::now();
    report(5, secs(5), t, criterion_5());

    let t = Instant::now();
    let discrete = run_preset("pdmd-vs-itr");
    report(6, secs(60), t, criterion_6(&discrete));

    let t = Instant::now();
    report(7, secs(5), t, criterion_7());

    let t = Instant::now();
    report(8, secs(30), t, criterion_8());

    println!("{} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

use crate::deviation::{mdp_tail_estimate, SpeedFunction, TailReport, TailSample};
use crate::error::{invalid, Error, Result};
use crate::noise::NoiseRealization;
use crate::solvers::{EngineForcing, EngineProblem, Outcome, Recording, ReferencePath, SolverContext};

use super::{
    map_paths, mean_stderr, ConvergenceReport, ConvergenceRow, EnsembleSpec, Experiment,
    ExperimentSetup, NamedCheck,
};

/// Sup-in-time statistic of one path at one `ε`.
#[derive(Debug, Clone, Copy)]
struct PathStat {
    value: f64,
    rejected: bool,
}

struct Prepared {
    ctx: SolverContext,
    reference: ReferencePath,
}

fn prepare(spec: &EnsembleSpec, setup: &ExperimentSetup, expected: Experiment) -> Result<Prepared> {
    spec.validate()?;
    if spec.experiment != expected {
        return Err(invalid(format!(
            "ensemble is configured for {:?}, not {:?}",
            spec.experiment, expected
        )));
    }
    setup.params.validate_for_limit_theorems()?;
    let ctx = SolverContext::new(&setup.params, &setup.noise, &setup.solver)?;
    ctx.check_forcing(&setup.g)?;
    let u0 = ctx.solve_deterministic(&setup.initial)?;
    let reference = ctx.reference(&u0)?;
    Ok(Prepared { ctx, reference })
}

fn abort_status(outcome: &Outcome) -> Result<bool> {
    match &outcome.abort {
        None => Ok(false),
        Some(e) if e.is_numerical_abort() => Ok(true),
        Some(Error::InvalidParameter(m)) => Err(Error::InvalidParameter(m.clone())),
        Some(e) => Err(invalid(e.to_string())),
    }
}

/// Integrates `Z` around the reference with state scale `scale` and noise amplitude `noise_scale`.
fn perturbation(
    prep: &Prepared,
    setup: &ExperimentSetup,
    noise: &NoiseRealization,
    scale: f64,
    noise_scale: f64,
    path: bool,
) -> Outcome {
    let n_modes = prep.ctx.basis().n_modes();
    prep.ctx.integrate_outcome(
        vec![0.0; n_modes],
        EngineProblem::around(&prep.reference, scale),
        EngineForcing::noise(setup.g, noise, noise_scale),
        Recording {
            path,
            norms: !path,
            guard: true,
        },
    )
}

/// Noise per `ε` for one path, sampled once when coupled.
fn path_noises(spec: &EnsembleSpec, setup: &ExperimentSetup, path: usize) -> Result<Vec<NoiseRealization>> {
    if spec.coupled {
        let n = setup.noise_for(spec.path_seed(0, path))?;
        Ok(vec![n; 1])
    } else {
        (0..spec.eps_list.len())
            .map(|e| setup.noise_for(spec.path_seed(e, path)))
            .collect()
    }
}

fn noise_at(noises: &[NoiseRealization], e: usize) -> &NoiseRealization {
    &noises[e.min(noises.len() - 1)]
}

fn collect_rows(spec: &EnsembleSpec, stats: &[Vec<PathStat>]) -> Vec<ConvergenceRow> {
    spec.eps_list
        .iter()
        .enumerate()
        .map(|(e, &eps)| {
            let accepted: Vec<f64> = stats
                .iter()
                .filter(|s| !s[e].rejected)
                .map(|s| s[e].value)
                .collect();
            let censored: Vec<f64> = stats.iter().map(|s| s[e].value).collect();
            let (mean, stderr) = mean_stderr(&accepted);
            ConvergenceRow {
                eps,
                mean,
                stderr,
                n_accepted: accepted.len(),
                n_rejected: stats.len() - accepted.len(),
                censored_mean: mean_stderr(&censored).0,
            }
        })
        .collect()
}

/// `E[sup_t ‖u_ε(t) − u₀(t)‖^p_{L^p}]` per `ε`, computed as `ε^{p/2} sup_t ‖v_ε‖^p`
/// with `v_ε = (u_ε − u₀)/√ε` integrated directly.
pub fn run_prop31(spec: &EnsembleSpec, setup: &ExperimentSetup) -> Result<ConvergenceReport> {
    let prep = prepare(spec, setup, Experiment::Prop31)?;
    let p = setup.params.p();
    let stats = map_paths(spec.n_paths, spec.workers, |i| {
        let noises = path_noises(spec, setup, i)?;
        spec.eps_list
            .iter()
            .enumerate()
            .map(|(e, &eps)| {
                let out = perturbation(&prep, setup, noise_at(&noises, e), eps.sqrt(), 1.0, false);
                let rejected = abort_status(&out)?;
                let sup = out.trajectory.sup_norm();
                Ok(PathStat {
                    value: (eps.sqrt() * sup).powf(p),
                    rejected,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let rows = collect_rows(spec, &stats);
    let target = p / 2.0;
    let fit = super::fit_loglog(&rows.iter().map(|r| (r.eps, r.mean)).collect::<Vec<_>>()).ok();
    let checks = vec![
        NamedCheck {
            name: "slope_at_least_target_minus_0.3".into(),
            pass: fit.as_ref().map(|f| f.slope >= target - 0.3),
        },
        NamedCheck {
            name: "r2_at_least_0.99".into(),
            pass: fit.as_ref().map(|f| f.r2 >= 0.99),
        },
    ];
    Ok(ConvergenceReport::finish(
        Experiment::Prop31,
        "E[sup_t ||u_eps - u_0||_Lp^p]",
        rows,
        target,
        checks,
    ))
}

/// `E[sup_t ‖v_ε(t) − v(t)‖_{L^p}]` per `ε` under a shared noise path.
pub fn run_clt(spec: &EnsembleSpec, setup: &ExperimentSetup) -> Result<ConvergenceReport> {
    if !spec.coupled {
        return Err(invalid("the CLT experiment needs coupled noise"));
    }
    let prep = prepare(spec, setup, Experiment::Clt)?;
    let basis = prep.ctx.basis();
    let p = setup.params.p();
    let stats = map_paths(spec.n_paths, spec.workers, |i| {
        let noise = setup.noise_for(spec.path_seed(0, i))?;
        let limit = perturbation(&prep, setup, &noise, 0.0, 1.0, true);
        let limit_rejected = abort_status(&limit)?;
        let mut diff = vec![0.0; basis.n_modes()];
        let mut scratch = vec![0.0; basis.n_points()];
        spec.eps_list
            .iter()
            .map(|&eps| {
                let out = perturbation(&prep, setup, &noise, eps.sqrt(), 1.0, true);
                let rejected = abort_status(&out)? || limit_rejected;
                let levels = out.trajectory.len().min(limit.trajectory.len());
                let mut sup: f64 = 0.0;
                for k in 0..levels {
                    for ((d, a), b) in diff
                        .iter_mut()
                        .zip(out.trajectory.coeffs_at(k))
                        .zip(limit.trajectory.coeffs_at(k))
                    {
                        *d = a - b;
                    }
                    sup = sup.max(basis.lp_norm_of_coeffs(&diff, p, &mut scratch));
                }
                Ok(PathStat {
                    value: sup,
                    rejected,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let rows = collect_rows(spec, &stats);
    let fit = super::fit_loglog(&rows.iter().map(|r| (r.eps, r.mean)).collect::<Vec<_>>()).ok();
    let decreasing = if rows.len() >= 2 {
        Some(rows.windows(2).all(|w| w[1].mean < w[0].mean))
    } else {
        None
    };
    let checks = vec![
        NamedCheck {
            name: "strictly_decreasing".into(),
            pass: decreasing,
        },
        NamedCheck {
            name: "order_at_least_0.4".into(),
            pass: fit.as_ref().map(|f| f.slope >= 0.4),
        },
    ];
    Ok(ConvergenceReport::finish(
        Experiment::Clt,
        "E[sup_t ||v_eps - v||_Lp]",
        rows,
        0.5,
        checks,
    ))
}

/// Tail probabilities of `sup_t ‖Z_ε(t)‖_{L^p}` over the ensemble, per `ε` and `ρ`.
pub fn run_mdp_tail(
    spec: &EnsembleSpec,
    setup: &ExperimentSetup,
    speed: &SpeedFunction,
    rhos: &[f64],
) -> Result<TailReport> {
    speed.validate()?;
    let prep = prepare(spec, setup, Experiment::MdpTail)?;
    let stats = map_paths(spec.n_paths, spec.workers, |i| {
        let noises = path_noises(spec, setup, i)?;
        spec.eps_list
            .iter()
            .enumerate()
            .map(|(e, &eps)| {
                let out = perturbation(
                    &prep,
                    setup,
                    noise_at(&noises, e),
                    speed.deviation_scale(eps),
                    speed.noise_scale(eps),
                    false,
                );
                Ok(PathStat {
                    rejected: abort_status(&out)?,
                    value: out.trajectory.sup_norm(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let samples: Vec<TailSample> = spec
        .eps_list
        .iter()
        .enumerate()
        .map(|(e, &eps)| TailSample {
            eps,
            sup_norms: stats.iter().filter(|s| !s[e].rejected).map(|s| s[e].value).collect(),
            n_rejected: stats.iter().filter(|s| s[e].rejected).count(),
        })
        .collect();
    mdp_tail_estimate(&samples, rhos)
}

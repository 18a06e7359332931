use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;

use sgbh_core::deviation::{rate_function_endpoint, SpeedFunction};
use sgbh_core::montecarlo::{
    run_clt, run_heat_oracle, run_mdp_tail, run_prop31, EnsembleSpec, Experiment,
};
use sgbh_core::noise::{ControlPath, NoiseRealization};
use sgbh_core::solvers::{SolverContext, Trajectory};
use sgbh_core::spectral::{heat_kernel, validate_kernel_estimates, EstimateFit, Field, Grid1D, KernelMethod};

use crate::config::RunConfig;
use crate::error::CliError;

/// Result of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    fn from_flag(pass: Option<bool>) -> Self {
        if pass == Some(false) {
            Verdict::Fail
        } else {
            Verdict::Pass
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Deterministic,
    Spde,
    Clt,
    Mdp,
    Controlled,
    Skeleton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    Prop31,
    Clt,
    HeatOracle,
    MdpTail,
}

impl ExperimentKind {
    fn file_stem(self) -> &'static str {
        match self {
            ExperimentKind::Prop31 => "prop31",
            ExperimentKind::Clt => "clt",
            ExperimentKind::HeatOracle => "heat_oracle",
            ExperimentKind::MdpTail => "mdp_tail",
        }
    }
}

fn prepare_out(cfg: &RunConfig) -> Result<&Path, CliError> {
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("config.toml"), cfg.to_toml())?;
    Ok(&cfg.out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(sgbh_core::Error::from)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn csv_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn speed(cfg: &RunConfig) -> Result<SpeedFunction, CliError> {
    Ok(SpeedFunction::from_theta(cfg.experiment.theta)?)
}

fn first_eps(cfg: &RunConfig) -> Result<f64, CliError> {
    cfg.experiment
        .eps_list
        .first()
        .copied()
        .ok_or_else(|| CliError::Config("experiment.eps_list is empty".into()))
}

pub fn simulate(cfg: &RunConfig, solver: SolverKind, control: Option<&Path>) -> Result<Verdict, CliError> {
    let setup = cfg.setup()?;
    let ctx = SolverContext::new(&setup.params, &setup.noise, &setup.solver)?;
    let n_steps = ctx.n_steps();
    let sample = || NoiseRealization::sample(setup.noise.n_modes, setup.solver.dt, n_steps, cfg.seed);
    let load_control = || -> Result<ControlPath, CliError> {
        let path = control.ok_or_else(|| CliError::Usage("this solver needs --control".into()))?;
        Ok(ControlPath::load(path)?)
    };
    let needs_reference = !matches!(solver, SolverKind::Deterministic | SolverKind::Spde);
    let reference = if needs_reference {
        Some(ctx.reference(&ctx.solve_deterministic(&setup.initial)?)?)
    } else {
        None
    };
    let reference = || reference.as_ref().expect("reference built");

    let out = prepare_out(cfg)?;
    let mut noise_used = None;
    let traj: Trajectory = match solver {
        SolverKind::Deterministic => ctx.solve_deterministic(&setup.initial)?,
        SolverKind::Spde => {
            let noise = sample()?;
            let t = ctx.solve_spde(&setup.initial, &setup.g, first_eps(cfg)?, &noise);
            noise_used = Some(noise);
            t?
        }
        SolverKind::Clt => {
            let noise = sample()?;
            let t = ctx.solve_clt_limit(reference(), &setup.g, &noise);
            noise_used = Some(noise);
            t?
        }
        SolverKind::Mdp => {
            let noise = sample()?;
            let t = ctx.solve_mdp_process(reference(), &setup.g, first_eps(cfg)?, &speed(cfg)?, &noise);
            noise_used = Some(noise);
            t?
        }
        SolverKind::Controlled => {
            let h = load_control()?;
            let noise = sample()?;
            let t = ctx.solve_controlled(reference(), &setup.g, first_eps(cfg)?, &speed(cfg)?, &noise, &h);
            noise_used = Some(noise);
            t?
        }
        SolverKind::Skeleton => ctx.solve_skeleton(reference(), &setup.g, &load_control()?)?,
    };
    if let Some(noise) = noise_used {
        noise.save(&out.join("noise.bin"))?;
    }
    traj.save_binary(&out.join("trajectory.bin"))?;
    traj.write_norms_csv(csv_file(&out.join("norms.csv"))?)?;
    Ok(Verdict::Pass)
}

pub fn experiment(cfg: &RunConfig, kind: ExperimentKind) -> Result<Verdict, CliError> {
    let setup = cfg.setup()?;
    let e = &cfg.experiment;
    let mut spec = EnsembleSpec {
        n_paths: e.n_paths,
        base_seed: cfg.seed,
        eps_list: e.eps_list.clone(),
        coupled: e.coupled,
        experiment: Experiment::Prop31,
        workers: cfg.worker_count(),
    };
    let out = prepare_out(cfg)?;
    let stem = kind.file_stem();
    let json = out.join(format!("{stem}.json"));
    let csv = out.join(format!("{stem}.csv"));
    let pass = match kind {
        ExperimentKind::Prop31 | ExperimentKind::Clt => {
            let report = if kind == ExperimentKind::Prop31 {
                run_prop31(&spec, &setup)?
            } else {
                spec.experiment = Experiment::Clt;
                run_clt(&spec, &setup)?
            };
            report.write_csv(csv_file(&csv)?)?;
            write_json(&json, &report)?;
            report.pass
        }
        ExperimentKind::HeatOracle => {
            spec.experiment = Experiment::HeatOracle;
            let report = run_heat_oracle(&spec, &setup)?;
            report.write_csv(csv_file(&csv)?)?;
            write_json(&json, &report)?;
            Some(report.pass)
        }
        ExperimentKind::MdpTail => {
            spec.experiment = Experiment::MdpTail;
            let report = run_mdp_tail(&spec, &setup, &speed(cfg)?, &e.rhos)?;
            report.write_csv(csv_file(&csv)?)?;
            write_json(&json, &report)?;
            Some(report.monotone_in_rho)
        }
    };
    Ok(Verdict::from_flag(pass))
}

/// Reads a JSON `Field` or the endpoint of a binary trajectory.
fn load_target(path: &Path) -> Result<Field, CliError> {
    if path.extension().is_some_and(|e| e == "bin") {
        let traj = Trajectory::load_binary(path)?;
        return Ok(Field::Spectral(traj.final_coeffs().to_vec()));
    }
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: not a field: {e}", path.display())))
}

pub fn rate(cfg: &RunConfig, target: &Path) -> Result<Verdict, CliError> {
    let setup = cfg.setup()?;
    let target = load_target(target)?;
    let ctx = SolverContext::new(&setup.params, &setup.noise, &setup.solver)?;
    let reference = ctx.reference(&ctx.solve_deterministic(&setup.initial)?)?;
    let mut result = rate_function_endpoint(&target, &ctx, &reference, &setup.g, cfg.experiment.rate_tolerance)?;
    let out = prepare_out(cfg)?;
    result.control.save(&out.join("control.bin"))?;
    result.control_file = Some("control.bin".into());
    write_json(&out.join("rate.json"), &result)?;
    Ok(if result.converged { Verdict::Pass } else { Verdict::Fail })
}

#[derive(Serialize)]
struct KernelSummary {
    times: Vec<f64>,
    images_vs_eigen_max_diff: f64,
    fits: Vec<EstimateFit>,
    pass: bool,
}

pub fn validate_kernel(cfg: &RunConfig) -> Result<Verdict, CliError> {
    let times: Vec<f64> = (0..12).map(|k| 0.01 * 50f64.powf(k as f64 / 11.0)).collect();
    let grid = Grid1D::new(cfg.solver.n_points.min(127))?;
    let mut max_diff: f64 = 0.0;
    for &t in &times {
        let a = heat_kernel(t, &grid, KernelMethod::Images, 10)?;
        let b = heat_kernel(t, &grid, KernelMethod::Eigen, 200)?;
        max_diff = max_diff.max(a.max_abs_diff(&b));
    }
    let report = validate_kernel_estimates(&times, &grid);
    let pass = report.all_pass() && max_diff < 1e-8;
    let out = prepare_out(cfg)?;
    write_json(
        &out.join("kernel_estimates.json"),
        &KernelSummary {
            times,
            images_vs_eigen_max_diff: max_diff,
            fits: report.fits,
            pass,
        },
    )?;
    Ok(if pass { Verdict::Pass } else { Verdict::Fail })
}

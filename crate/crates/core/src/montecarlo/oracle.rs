use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::solvers::{EngineForcing, EngineProblem, Recording, SolverContext};

use super::{map_paths, mean_stderr, EnsembleSpec, Experiment, ExperimentSetup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCheck {
    /// 1-based mode index.
    pub mode: usize,
    pub expected_variance: f64,
    pub variance: f64,
    pub z: f64,
    pub mean: f64,
    pub mean_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub eps: f64,
    pub t_end: f64,
    pub n_paths: usize,
    pub n_rejected: usize,
    pub modes: Vec<ModeCheck>,
    /// Fraction of modes with `|z| ≤ 3`.
    pub fraction_within_3: f64,
    pub means_within_3se: bool,
    pub pass: bool,
}

impl OracleReport {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "mode,expected_variance,variance,z,mean,mean_stderr")?;
        for m in &self.modes {
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e},{:e}",
                m.mode, m.expected_variance, m.variance, m.z, m.mean, m.mean_stderr
            )?;
        }
        Ok(())
    }
}

/// Endpoint variance of the additive linear problem started from 0 against
/// `ε κ₀² q_j² (1 − e^{−2νλ_j T}) / (2νλ_j)`, with `ε = eps_list[0]`.
///
/// The variance estimator is the mean of `c_j²` (the mean is known to be 0)
/// and its standard error is `sd(c_j²)/√M`.
pub fn run_heat_oracle(spec: &EnsembleSpec, setup: &ExperimentSetup) -> Result<OracleReport> {
    spec.validate()?;
    if spec.experiment != Experiment::HeatOracle {
        return Err(invalid("ensemble is not configured for the heat oracle"));
    }
    let params = &setup.params;
    if params.alpha != 0.0 || params.beta != 0.0 {
        return Err(invalid("the heat oracle needs alpha = beta = 0"));
    }
    if !setup.g.is_state_independent() {
        return Err(invalid("the heat oracle needs a constant noise coefficient"));
    }
    let eps = spec.eps_list[0];
    let ctx = SolverContext::new(params, &setup.noise, &setup.solver)?;
    let n_modes = ctx.basis().n_modes();
    let j_noise = setup.noise.n_modes;

    let endpoints = map_paths(spec.n_paths, spec.workers, |i| {
        let noise = setup.noise_for(spec.path_seed(0, i))?;
        let out = ctx.integrate_outcome(
            vec![0.0; n_modes],
            EngineProblem::Full,
            EngineForcing::noise(setup.g, &noise, eps.sqrt()),
            Recording::ENDPOINT,
        );
        if out.abort.is_some() {
            return Ok(None);
        }
        Ok(Some(out.trajectory.final_coeffs()[..j_noise].to_vec()))
    })?;
    let accepted: Vec<&Vec<f64>> = endpoints.iter().flatten().collect();
    let n_rejected = endpoints.len() - accepted.len();

    let t_end = setup.solver.n_steps() as f64 * setup.solver.dt;
    let k0 = setup.g.kappa0;
    let q = ctx.weights();
    let lam = ctx.basis().eigenvalues();
    let modes: Vec<ModeCheck> = (0..j_noise)
        .map(|j| {
            let a = 2.0 * params.nu * lam[j];
            let expected = eps * k0 * k0 * q[j] * q[j] * (-(-a * t_end).exp_m1()) / a;
            let values: Vec<f64> = accepted.iter().map(|c| c[j]).collect();
            let squares: Vec<f64> = values.iter().map(|c| c * c).collect();
            let (variance, var_se) = mean_stderr(&squares);
            let (mean, mean_se) = mean_stderr(&values);
            ModeCheck {
                mode: j + 1,
                expected_variance: expected,
                variance,
                z: (variance - expected) / var_se,
                mean,
                mean_stderr: mean_se,
            }
        })
        .collect();
    let within = modes.iter().filter(|m| m.z.abs() <= 3.0).count();
    let fraction_within_3 = within as f64 / modes.len() as f64;
    let means_within_3se = modes.iter().all(|m| m.mean.abs() <= 3.0 * m.mean_stderr);
    Ok(OracleReport {
        eps,
        t_end,
        n_paths: spec.n_paths,
        n_rejected,
        modes,
        fraction_within_3,
        means_within_3se,
        pass: fraction_within_3 >= 0.95 && n_rejected == 0,
    })
}

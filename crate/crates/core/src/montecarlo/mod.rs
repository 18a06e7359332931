//! Ensembles of coupled paths, convergence statistics and log-log rate fits.
//!
//! Path `i` always draws its noise from `mix_seed(base_seed, i)`, and results
//! are reduced in path order, so reports do not depend on the worker count.

mod experiments;
mod oracle;

pub use experiments::{run_clt, run_mdp_tail, run_prop31};
pub use oracle::{run_heat_oracle, ModeCheck, OracleReport};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{ModelParams, NoiseCoefficient};
use crate::noise::{mix_seed, NoiseRealization, NoiseSpec};
use crate::solvers::SolverConfig;
use crate::spectral::Field;

/// Largest tolerated fraction of guard-rejected paths.
pub const MAX_REJECTION_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Prop31,
    Clt,
    MdpTail,
    HeatOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_paths: usize,
    pub base_seed: u64,
    pub eps_list: Vec<f64>,
    /// One noise realization per path shared by every `ε`.
    pub coupled: bool,
    pub experiment: Experiment,
    /// Worker threads; `None` uses the available parallelism.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(invalid("ensemble needs at least one path"));
        }
        if self.eps_list.is_empty() {
            return Err(invalid("eps_list is empty"));
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(invalid("every eps must lie in (0, 1]"));
        }
        if self.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(invalid("eps_list must be strictly decreasing"));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers must be at least 1"));
        }
        Ok(())
    }

    /// Seed of the realization used by `path` at the `e`-th `ε`.
    pub fn path_seed(&self, e: usize, path: usize) -> u64 {
        if self.coupled {
            mix_seed(self.base_seed, path as u64)
        } else {
            mix_seed(mix_seed(self.base_seed, (e as u64 + 1) << 32), path as u64)
        }
    }
}

/// Everything an experiment shares across paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSetup {
    pub params: ModelParams,
    pub noise: NoiseSpec,
    pub solver: SolverConfig,
    pub g: NoiseCoefficient,
    pub initial: Field,
}

impl Default for ExperimentSetup {
    fn default() -> Self {
        let mut initial = vec![0.0; 32];
        initial[0] = 0.6;
        Self {
            params: ModelParams::default(),
            noise: NoiseSpec::default(),
            solver: SolverConfig::default(),
            g: NoiseCoefficient::affine(1.0, 0.5),
            initial: Field::Spectral(initial),
        }
    }
}

impl ExperimentSetup {
    pub(crate) fn noise_for(&self, seed: u64) -> Result<NoiseRealization> {
        NoiseRealization::sample(self.noise.n_modes, self.solver.dt, self.solver.n_steps(), seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least squares of `log statistic` on `log ε`.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 3 {
        return Err(invalid(format!("log-log fit needs >= 3 points, got {}", points.len())));
    }
    if points.iter().any(|&(e, s)| !(e > 0.0) || !(s > 0.0) || !s.is_finite()) {
        return Err(invalid("log-log fit needs positive abscissae and statistics"));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("log-log fit needs distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LogLogFit {
        slope,
        intercept,
        r2,
    })
}

/// One row per `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    /// Mean over accepted paths of the full-horizon statistic.
    pub mean: f64,
    pub stderr: f64,
    pub n_accepted: usize,
    pub n_rejected: usize,
    /// Mean over all paths with the supremum taken up to the guard trip time.
    pub censored_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCheck {
    pub name: String,
    /// `None` when the ensemble is too small to decide.
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub experiment: Experiment,
    pub statistic: String,
    pub rows: Vec<ConvergenceRow>,
    pub fit: Option<LogLogFit>,
    pub target_slope: f64,
    pub checks: Vec<NamedCheck>,
    /// Conjunction of the decidable checks; `None` if none could be decided.
    pub pass: Option<bool>,
}

impl ConvergenceReport {
    pub(crate) fn finish(
        experiment: Experiment,
        statistic: &str,
        rows: Vec<ConvergenceRow>,
        target_slope: f64,
        mut checks: Vec<NamedCheck>,
    ) -> Self {
        let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, r.mean)).collect();
        let fit = fit_loglog(&points).ok();
        let within_budget = rows.iter().all(|r| {
            let total = r.n_accepted + r.n_rejected;
            (r.n_rejected as f64) <= MAX_REJECTION_FRACTION * total as f64
        });
        checks.push(NamedCheck {
            name: "rejection_rate".into(),
            pass: Some(within_budget),
        });
        let scientific_decided = checks
            .iter()
            .any(|c| c.name != "rejection_rate" && c.pass.is_some());
        let pass = if !within_budget {
            Some(false)
        } else if scientific_decided {
            Some(checks.iter().filter_map(|c| c.pass).all(|p| p))
        } else {
            None
        };
        Self {
            experiment,
            statistic: statistic.to_string(),
            rows,
            fit,
            target_slope,
            checks,
            pass,
        }
    }

    pub fn check(&self, name: &str) -> Option<bool> {
        self.checks.iter().find(|c| c.name == name).and_then(|c| c.pass)
    }

    /// CSV with columns `eps,mean,stderr,n_rejected`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "eps,mean,stderr,n_rejected")?;
        for r in &self.rows {
            writeln!(w, "{:e},{:e},{:e},{}", r.eps, r.mean, r.stderr, r.n_rejected)?;
        }
        Ok(())
    }
}

/// Mean and standard error of the mean.
pub(crate) fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Runs `f` on every path index and returns results in index order.
pub(crate) fn map_paths<T, F>(n_paths: usize, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let threads = workers.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
        if threads > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
            return pool.install(|| (0..n_paths).into_par_iter().map(&f).collect());
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    (0..n_paths).map(f).collect()
}

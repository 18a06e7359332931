use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sgbh_core::model::{ModelParams, NoiseCoefficient};
use sgbh_core::montecarlo::ExperimentSetup;
use sgbh_core::noise::NoiseSpec;
use sgbh_core::solvers::SolverConfig;
use sgbh_core::spectral::Field;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelBlock {
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: u32,
    pub p_norm: u32,
}

impl Default for ModelBlock {
    fn default() -> Self {
        let p = ModelParams::default();
        Self {
            nu: p.nu,
            alpha: p.alpha,
            beta: p.beta,
            gamma: p.gamma,
            delta: p.delta,
            p_norm: p.p_norm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientKind {
    Constant,
    Affine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseBlock {
    /// Number of driven modes.
    pub n_modes: usize,
    /// Decay exponent of the mode weights.
    pub eta: f64,
    pub coefficient: CoefficientKind,
    pub kappa0: f64,
    pub kappa1: f64,
}

impl Default for NoiseBlock {
    fn default() -> Self {
        let spec = NoiseSpec::default();
        Self {
            n_modes: spec.n_modes,
            eta: spec.eta,
            coefficient: CoefficientKind::Affine,
            kappa0: 1.0,
            kappa1: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub dt: f64,
    pub t_end: f64,
    pub n_modes: usize,
    pub n_points: usize,
    pub blowup_threshold: f64,
    /// Leading sine coefficients of the initial datum, zero-padded.
    pub initial: Vec<f64>,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let cfg = SolverConfig::default();
        Self {
            dt: cfg.dt,
            t_end: cfg.t_end,
            n_modes: cfg.n_modes,
            n_points: cfg.n_points,
            blowup_threshold: cfg.blowup_threshold,
            initial: vec![0.6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentBlock {
    pub n_paths: usize,
    pub eps_list: Vec<f64>,
    pub coupled: bool,
    /// Speed exponent; 0 selects the unit speed.
    pub theta: f64,
    pub rhos: Vec<f64>,
    pub rate_tolerance: f64,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        Self {
            n_paths: 500,
            eps_list: vec![1e-2, 1e-3, 1e-4],
            coupled: true,
            theta: 0.25,
            rhos: vec![0.0, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 1e6],
            rate_tolerance: sgbh_core::deviation::DEFAULT_RATE_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 uses all available cores.
    pub workers: usize,
    pub model: ModelBlock,
    pub noise: NoiseBlock,
    pub solver: SolverBlock,
    pub experiment: ExperimentBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out: PathBuf::from("out"),
            workers: 0,
            model: ModelBlock::default(),
            noise: NoiseBlock::default(),
            solver: SolverBlock::default(),
            experiment: ExperimentBlock::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn params(&self) -> ModelParams {
        let m = &self.model;
        ModelParams {
            nu: m.nu,
            alpha: m.alpha,
            beta: m.beta,
            gamma: m.gamma,
            delta: m.delta,
            p_norm: m.p_norm,
        }
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec {
            n_modes: self.noise.n_modes,
            eta: self.noise.eta,
        }
    }

    pub fn coefficient(&self) -> NoiseCoefficient {
        match self.noise.coefficient {
            CoefficientKind::Constant => NoiseCoefficient::constant(self.noise.kappa0),
            CoefficientKind::Affine => NoiseCoefficient::affine(self.noise.kappa0, self.noise.kappa1),
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            dt: s.dt,
            t_end: s.t_end,
            n_modes: s.n_modes,
            n_points: s.n_points,
            blowup_threshold: s.blowup_threshold,
        }
    }

    pub fn initial(&self) -> Result<Field, CliError> {
        let n = self.solver.n_modes;
        if self.solver.initial.len() > n {
            return Err(CliError::Config(format!(
                "solver.initial has {} coefficients but solver.n_modes = {n}",
                self.solver.initial.len()
            )));
        }
        let mut c = self.solver.initial.clone();
        c.resize(n, 0.0);
        Ok(Field::Spectral(c))
    }

    pub fn setup(&self) -> Result<ExperimentSetup, CliError> {
        Ok(ExperimentSetup {
            params: self.params(),
            noise: self.noise_spec(),
            solver: self.solver_config(),
            g: self.coefficient(),
            initial: self.initial()?,
        })
    }

    pub fn worker_count(&self) -> Option<usize> {
        (self.workers > 0).then_some(self.workers)
    }
}

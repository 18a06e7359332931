//! Exponential Euler integrators for the deterministic, stochastic, linearized,
//! rescaled, controlled and skeleton problems.
//!
//! Every problem is stepped in the sine basis as
//!
//! ```text
//! y_j(t+dt) = e^{−a_j} y_j + (1 − e^{−a_j})/(νλ_j) · F_j(y) + κ_j · N_j(y, ΔB),   a_j = νλ_j dt
//! ```
//!
//! where `F_j` collects the reaction term `β (c, φ_j)`, the advective term in
//! divergence form `α/(δ+1) (p, φ_j')` and any control forcing, all frozen at
//! the left endpoint, and `N_j` is the projection of the Itô noise increment
//! `g(u) Σ_k q_k φ_k ΔB_k`. The factor `κ_j = √((1 − e^{−2a_j})/(2a_j))`
//! makes the per-step stochastic convolution variance exact, so the additive
//! linear problem reproduces the Ornstein–Uhlenbeck variance at any `dt`.
//!
//! The perturbation problems (`Z_ε`, `Z_{ε,h}`, `v`, `Z_h`) are written
//! around a stored reference path `u₀` with scale `s`: nonlinear terms enter
//! as `[f(u₀ + s z) − f(u₀)] / s`, expanded binomially, which is exact at
//! `s = 0` (the linearization) and cancellation-free for small `s`.

mod engine;
mod trajectory;

pub use trajectory::{BlowupGuard, Trajectory};

use serde::{Deserialize, Serialize};

use crate::deviation::SpeedFunction;
use crate::error::{invalid, Error, Result};
use crate::model::{ModelParams, NoiseCoefficient};
use crate::noise::{ControlPath, NoiseRealization, NoiseSpec};
use crate::spectral::{Field, Grid1D, SpectralBasis};

use engine::{Forcing, Problem, StepFactors};

/// Default `M` in the blow-up stopping rule.
pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub n_modes: usize,
    pub n_points: usize,
    pub blowup_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 0.25,
            n_modes: 32,
            n_points: 256,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
        }
    }
}

impl SolverConfig {
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0) {
            return Err(invalid(format!("t_end must be positive, got {}", self.t_end)));
        }
        let ratio = self.t_end / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(invalid(format!(
                "t_end / dt = {ratio} is not an integer number of steps"
            )));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err(invalid("blowup_threshold must be positive"));
        }
        Ok(())
    }
}

/// Grid samples of a reference trajectory at every step, shared by the perturbation solvers.
#[derive(Debug, Clone)]
pub struct ReferencePath {
    n_points: usize,
    dt: f64,
    values: Vec<f64>,
}

impl ReferencePath {
    pub fn n_levels(&self) -> usize {
        self.values.len() / self.n_points
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.n_points..(k + 1) * self.n_points]
    }
}

/// Basis, model and per-mode step factors, built once and shared read-only.
#[derive(Debug, Clone)]
pub struct SolverContext {
    params: ModelParams,
    cfg: SolverConfig,
    basis: SpectralBasis,
    weights: Vec<f64>,
    factors: StepFactors,
}

impl SolverContext {
    pub fn new(params: &ModelParams, noise: &NoiseSpec, cfg: &SolverConfig) -> Result<Self> {
        params.validate()?;
        noise.validate()?;
        cfg.validate()?;
        if noise.n_modes > cfg.n_modes {
            return Err(invalid(format!(
                "noise drives {} modes but the solver keeps only {}",
                noise.n_modes, cfg.n_modes
            )));
        }
        let basis = SpectralBasis::new(cfg.n_modes, Grid1D::new(cfg.n_points)?)?;
        let factors = StepFactors::new(basis.eigenvalues(), params.nu, cfg.dt);
        Ok(Self {
            params: params.clone(),
            cfg: cfg.clone(),
            basis,
            weights: noise.weights(),
            factors,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    /// Noise weights `q_j`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_steps(&self) -> usize {
        self.cfg.n_steps()
    }

    /// Products of degree `2δ+1` need `n_points ≥ 2(2δ+1) J` to avoid aliasing.
    fn check_dealiasing(&self, g: &NoiseCoefficient) -> Result<()> {
        let nonlinear = self.params.is_nonlinear() || !g.is_state_independent();
        let needed = 2 * (2 * self.params.delta as usize + 1) * self.cfg.n_modes;
        if nonlinear && self.cfg.n_points < needed {
            return Err(invalid(format!(
                "grid of {} points aliases degree-{} products of {} modes (need >= {needed})",
                self.cfg.n_points,
                2 * self.params.delta + 1,
                self.cfg.n_modes
            )));
        }
        Ok(())
    }

    fn initial_coeffs(&self, u0: &Field) -> Result<Vec<f64>> {
        match u0 {
            Field::Spectral(c) if c.len() <= self.cfg.n_modes => {
                let mut out = c.clone();
                out.resize(self.cfg.n_modes, 0.0);
                Ok(out)
            }
            Field::Spectral(c) => Err(Error::DimensionMismatch {
                expected: self.cfg.n_modes,
                got: c.len(),
            }),
            Field::Grid(_) => self.basis.coefficients(u0),
        }
    }

    fn check_noise(&self, noise: &NoiseRealization) -> Result<()> {
        self.check_time_grid(noise.dt, noise.n_steps, "noise")?;
        if noise.n_modes > self.weights.len() {
            return Err(Error::GridMismatch(format!(
                "noise realization has {} modes, weights exist for {}",
                noise.n_modes,
                self.weights.len()
            )));
        }
        Ok(())
    }

    fn check_control(&self, h: &ControlPath) -> Result<()> {
        self.check_time_grid(h.dt, h.n_steps, "control")?;
        if h.n_modes > self.weights.len() {
            return Err(Error::GridMismatch(format!(
                "control actuates {} modes, weights exist for {}",
                h.n_modes,
                self.weights.len()
            )));
        }
        Ok(())
    }

    fn check_time_grid(&self, dt: f64, n_steps: usize, what: &str) -> Result<()> {
        if (dt - self.cfg.dt).abs() > 1e-12 * self.cfg.dt || n_steps != self.n_steps() {
            return Err(Error::GridMismatch(format!(
                "{what} grid (dt={dt}, steps={n_steps}) differs from solver (dt={}, steps={})",
                self.cfg.dt,
                self.n_steps()
            )));
        }
        Ok(())
    }

    /// Grid values of `u₀` at every step, for the perturbation solvers.
    pub fn reference(&self, u0_traj: &Trajectory) -> Result<ReferencePath> {
        self.check_time_grid(u0_traj.dt, u0_traj.n_steps(), "reference trajectory")?;
        if u0_traj.n_modes != self.cfg.n_modes {
            return Err(Error::GridMismatch(format!(
                "reference has {} modes, solver {}",
                u0_traj.n_modes, self.cfg.n_modes
            )));
        }
        let n = self.basis.n_points();
        let mut values = vec![0.0; n * u0_traj.len()];
        for (k, chunk) in values.chunks_mut(n).enumerate() {
            self.basis.synthesize(u0_traj.coeffs_at(k), chunk);
        }
        Ok(ReferencePath {
            n_points: n,
            dt: u0_traj.dt,
            values,
        })
    }

    fn run(&self, y0: Vec<f64>, problem: Problem<'_>, forcing: Forcing<'_>) -> Result<Trajectory> {
        let outcome = engine::integrate(self, y0, &problem, &forcing, Recording::FULL);
        match outcome.abort {
            Some(e) => Err(e),
            None => Ok(outcome.trajectory),
        }
    }

    /// Deterministic problem (`ε = 0`).
    pub fn solve_deterministic(&self, u0: &Field) -> Result<Trajectory> {
        let g = NoiseCoefficient::constant(0.0);
        self.check_dealiasing(&g)?;
        let y0 = self.initial_coeffs(u0)?;
        self.run(y0, Problem::Full, Forcing::none(g))
    }

    /// Stochastic problem driven by `√ε g(u) dW^Q`.
    pub fn solve_spde(
        &self,
        u0: &Field,
        g: &NoiseCoefficient,
        eps: f64,
        noise: &NoiseRealization,
    ) -> Result<Trajectory> {
        check_eps(eps)?;
        self.check_dealiasing(g)?;
        self.check_noise(noise)?;
        let y0 = self.initial_coeffs(u0)?;
        self.run(y0, Problem::Full, Forcing::noise(*g, noise, eps.sqrt()))
    }

    /// Linearized limit `v` with additive noise `g(u₀) dW^Q`, `v(0) = 0`.
    pub fn solve_clt_limit(
        &self,
        reference: &ReferencePath,
        g: &NoiseCoefficient,
        noise: &NoiseRealization,
    ) -> Result<Trajectory> {
        self.check_dealiasing(g)?;
        self.check_noise(noise)?;
        self.check_reference(reference)?;
        self.run(
            vec![0.0; self.cfg.n_modes],
            Problem::around(reference, 0.0),
            Forcing::noise(*g, noise, 1.0),
        )
    }

    /// `Z_ε = (u_ε − u₀)/(√ε λ(ε))` integrated from its own mild form.
    pub fn solve_mdp_process(
        &self,
        reference: &ReferencePath,
        g: &NoiseCoefficient,
        eps: f64,
        speed: &SpeedFunction,
        noise: &NoiseRealization,
    ) -> Result<Trajectory> {
        check_eps(eps)?;
        if eps == 0.0 {
            return Err(invalid("the rescaled process needs eps > 0"));
        }
        self.check_dealiasing(g)?;
        self.check_noise(noise)?;
        self.check_reference(reference)?;
        self.run(
            vec![0.0; self.cfg.n_modes],
            Problem::around(reference, speed.deviation_scale(eps)),
            Forcing::noise(*g, noise, speed.noise_scale(eps)),
        )
    }

    /// Controlled rescaled process `Z_{ε,h}`. At `eps = 0` the noise drops out and
    /// the coefficients freeze at `u₀`.
    pub fn solve_controlled(
        &self,
        reference: &ReferencePath,
        g: &NoiseCoefficient,
        eps: f64,
        speed: &SpeedFunction,
        noise: &NoiseRealization,
        h: &ControlPath,
    ) -> Result<Trajectory> {
        check_eps(eps)?;
        self.check_dealiasing(g)?;
        self.check_noise(noise)?;
        self.check_control(h)?;
        self.check_reference(reference)?;
        let mut forcing = Forcing::noise(*g, noise, speed.noise_scale(eps));
        forcing.control = Some(h);
        self.run(
            vec![0.0; self.cfg.n_modes],
            Problem::around(reference, speed.deviation_scale(eps)),
            forcing,
        )
    }

    /// Skeleton equation: linearized dynamics forced by `Σ_j q_j g(u₀) φ_j ḣ_j`.
    pub fn solve_skeleton(
        &self,
        reference: &ReferencePath,
        g: &NoiseCoefficient,
        h: &ControlPath,
    ) -> Result<Trajectory> {
        self.check_dealiasing(g)?;
        self.check_control(h)?;
        self.check_reference(reference)?;
        let mut forcing = Forcing::none(*g);
        forcing.control = Some(h);
        self.run(vec![0.0; self.cfg.n_modes], Problem::around(reference, 0.0), forcing)
    }

    /// Endpoint `Z_h(T)` of the skeleton equation, without storing the path.
    pub(crate) fn skeleton_endpoint(
        &self,
        reference: &ReferencePath,
        g: &NoiseCoefficient,
        h: &ControlPath,
    ) -> Vec<f64> {
        let mut forcing = Forcing::none(*g);
        forcing.control = Some(h);
        let out = engine::integrate(
            self,
            vec![0.0; self.cfg.n_modes],
            &Problem::around(reference, 0.0),
            &forcing,
            Recording::BARE,
        );
        out.trajectory.final_coeffs().to_vec()
    }

    pub(crate) fn step_factors(&self) -> &StepFactors {
        &self.factors
    }

    fn check_reference(&self, reference: &ReferencePath) -> Result<()> {
        if reference.n_points != self.basis.n_points()
            || reference.n_levels() != self.n_steps() + 1
            || (reference.dt - self.cfg.dt).abs() > 1e-12 * self.cfg.dt
        {
            return Err(Error::GridMismatch(
                "reference path does not match the solver grid".into(),
            ));
        }
        Ok(())
    }

    /// Ensemble entry point: runs without raising on blow-up and reports the
    /// abort alongside the (possibly truncated) path.
    pub(crate) fn integrate_outcome(
        &self,
        y0: Vec<f64>,
        problem: Problem<'_>,
        forcing: Forcing<'_>,
        rec: Recording,
    ) -> engine::Outcome {
        engine::integrate(self, y0, &problem, &forcing, rec)
    }

    pub(crate) fn check_forcing(&self, g: &NoiseCoefficient) -> Result<()> {
        self.check_dealiasing(g)
    }
}

pub(crate) use engine::{Forcing as EngineForcing, Outcome, Problem as EngineProblem, Recording};

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(invalid(format!("eps must lie in [0, 1], got {eps}")));
    }
    Ok(())
}

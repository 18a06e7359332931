use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::{advective_derivative, reaction_derivative, NoiseCoefficient};
use crate::noise::ControlPath;
use crate::solvers::{ReferencePath, SolverContext};
use crate::spectral::{dot, Field};

/// Relative residual at which conjugate gradients stops.
pub const DEFAULT_RATE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct RateFunctionResult {
    /// `I(ψ) = ½ ∫ ‖ḣ‖² dt` at the computed control.
    pub value: f64,
    /// `‖Z_h(T) − ψ‖_{L²}`.
    pub endpoint_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub control_file: Option<String>,
    #[serde(skip)]
    pub control: ControlPath,
}

/// The discrete control-to-endpoint map `Φ h = Z_h(T)` of the skeleton
/// equation and its exact adjoint with respect to `⟨h, k⟩ = Σ_j Σ_k ḣ k̇ dt`.
pub struct SkeletonMap<'a> {
    ctx: &'a SolverContext,
    reference: &'a ReferencePath,
    g: NoiseCoefficient,
}

impl<'a> SkeletonMap<'a> {
    pub fn new(ctx: &'a SolverContext, reference: &'a ReferencePath, g: &NoiseCoefficient) -> Result<Self> {
        if reference.n_levels() != ctx.n_steps() + 1 || reference.at(0).len() != ctx.basis().n_points() {
            return Err(Error::GridMismatch("reference path does not match the solver grid".into()));
        }
        Ok(Self {
            ctx,
            reference,
            g: *g,
        })
    }

    /// Number of actuated modes.
    pub fn n_controls(&self) -> usize {
        self.ctx.weights().len()
    }

    pub fn n_states(&self) -> usize {
        self.ctx.basis().n_modes()
    }

    pub fn zero_control(&self) -> ControlPath {
        ControlPath::zeros(self.n_controls(), self.ctx.config().dt, self.ctx.n_steps())
    }

    pub fn forward(&self, h: &ControlPath) -> Result<Vec<f64>> {
        if h.n_modes != self.n_controls() || h.n_steps != self.ctx.n_steps() {
            return Err(Error::GridMismatch("control does not match the skeleton map".into()));
        }
        Ok(self.ctx.skeleton_endpoint(self.reference, &self.g, h))
    }

    /// `Φ* w`, integrating the transposed step backward from `w` at `T`.
    pub fn adjoint(&self, w: &[f64]) -> ControlPath {
        let ctx = self.ctx;
        let basis = ctx.basis();
        let params = ctx.params();
        let f = ctx.step_factors();
        let q = ctx.weights();
        let dt = ctx.config().dt;
        let n_steps = ctx.n_steps();
        let n_modes = basis.n_modes();
        let n_ctrl = self.n_controls();
        let h = basis.grid().spacing();
        let adv = params.alpha / (params.delta as f64 + 1.0);
        let (beta, gamma, delta) = (params.beta, params.gamma, params.delta);
        let state_dependent = !self.g.is_state_independent();

        let mut out = self.zero_control();
        if self.g.is_zero() {
            return out;
        }
        let n = basis.n_points();
        let mut lam = w.to_vec();
        lam.resize(n_modes, 0.0);
        let mut mu = vec![0.0; n_modes];
        let mut grid = vec![0.0; n];
        let mut work = vec![0.0; n];
        let mut tmp = vec![0.0; n_modes];
        let mut next = vec![0.0; n_modes];

        for k in (0..n_steps).rev() {
            let r = self.reference.at(k);
            for j in 0..n_modes {
                mu[j] = f.etd[j] * lam[j];
            }
            // control sensitivity Bᵀ μ / dt
            let hv = out.values_mut();
            if state_dependent {
                basis.synthesize(&mu, &mut grid);
                for ((v, &ri), &gi) in work.iter_mut().zip(r).zip(&grid) {
                    *v = self.g.at(ri) * gi;
                }
                basis.project(&work, &mut tmp);
                for j in 0..n_ctrl {
                    hv[j * n_steps + k] = q[j] * tmp[j] / dt;
                }
            } else {
                for j in 0..n_ctrl {
                    hv[j * n_steps + k] = self.g.kappa0 * q[j] * mu[j] / dt;
                }
            }
            if k == 0 {
                break;
            }
            // λ_k = E λ_{k+1} + L_kᵀ μ
            for j in 0..n_modes {
                next[j] = f.decay[j] * lam[j];
            }
            if params.is_nonlinear() {
                work.iter_mut().for_each(|v| *v = 0.0);
                if beta != 0.0 {
                    basis.synthesize(&mu, &mut grid);
                    for ((v, &ri), &gi) in work.iter_mut().zip(r).zip(&grid) {
                        *v += beta * reaction_derivative(ri, gamma, delta) * gi;
                    }
                }
                if adv != 0.0 {
                    basis.project_derivative_adjoint(&mu, &mut grid);
                    for ((v, &ri), &gi) in work.iter_mut().zip(r).zip(&grid) {
                        // project() multiplies by h once more; undo it for this term
                        *v += adv * advective_derivative(ri, delta) * gi / h;
                    }
                }
                basis.project(&work, &mut tmp);
                for j in 0..n_modes {
                    next[j] += tmp[j];
                }
            }
            std::mem::swap(&mut lam, &mut next);
        }
        out
    }

    /// `Φ Φ* w`.
    pub fn gram_apply(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.forward(&self.adjoint(w))
    }
}

/// Minimum-energy control steering the skeleton equation from 0 to `target` at `T`.
///
/// Solves `Φ Φ* y = ψ` by conjugate gradients and returns `h = Φ* y`.
pub fn rate_function_endpoint(
    target: &Field,
    ctx: &SolverContext,
    reference: &ReferencePath,
    g: &NoiseCoefficient,
    tol: f64,
) -> Result<RateFunctionResult> {
    if !(tol > 0.0) {
        return Err(invalid("rate-function tolerance must be positive"));
    }
    let map = SkeletonMap::new(ctx, reference, g)?;
    let psi = match target {
        Field::Spectral(c) if c.len() <= map.n_states() => {
            let mut v = c.clone();
            v.resize(map.n_states(), 0.0);
            v
        }
        _ => ctx.basis().coefficients(target)?,
    };
    if psi.iter().any(|v| !v.is_finite()) {
        return Err(invalid("target has non-finite coefficients"));
    }
    let psi_norm = dot(&psi, &psi).sqrt();
    if psi_norm == 0.0 {
        return Ok(RateFunctionResult {
            value: 0.0,
            endpoint_residual: 0.0,
            iterations: 0,
            converged: true,
            control_file: None,
            control: map.zero_control(),
        });
    }

    let n = psi.len();
    let max_iter = 10 * map.n_controls() * ctx.n_steps();
    let stall_window = 2 * n + 10;
    let goal = tol * psi_norm;

    let mut x = vec![0.0; n];
    let mut iterations = 0;
    let mut best = (f64::INFINITY, x.clone());
    // restarts recover from drift between the recursive and true residuals
    'restart: for _ in 0..4 {
        let gx = map.gram_apply(&x)?;
        let mut r: Vec<f64> = psi.iter().zip(&gx).map(|(a, b)| a - b).collect();
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        let mut since_best = 0;
        while iterations < max_iter {
            if rr.sqrt() <= goal {
                break;
            }
            let ap = map.gram_apply(&p)?;
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                break 'restart;
            }
            let step = rr / pap;
            for i in 0..n {
                x[i] += step * p[i];
                r[i] -= step * ap[i];
            }
            iterations += 1;
            let rr_new = dot(&r, &r);
            if rr_new.sqrt() < best.0 {
                best = (rr_new.sqrt(), x.clone());
                since_best = 0;
            } else {
                since_best += 1;
                if since_best > stall_window {
                    break 'restart;
                }
            }
            let b = rr_new / rr;
            for i in 0..n {
                p[i] = r[i] + b * p[i];
            }
            rr = rr_new;
        }
        let gx = map.gram_apply(&x)?;
        let true_res = psi.iter().zip(&gx).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if true_res <= goal || iterations >= max_iter {
            best = (true_res, x.clone());
            break;
        }
    }

    let control = map.adjoint(&best.1);
    let endpoint = map.forward(&control)?;
    let endpoint_residual = endpoint
        .iter()
        .zip(&psi)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(RateFunctionResult {
        value: control.action(),
        endpoint_residual,
        iterations,
        converged: endpoint_residual <= goal,
        control_file: None,
        control,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deviation::{controllability_gramian, pseudoinverse_value};
    use crate::model::ModelParams;
    use crate::noise::{NoiseRealization, NoiseSpec};
    use crate::solvers::SolverConfig;

    fn setup() -> (SolverContext, ReferencePath) {
        let cfg = SolverConfig {
            dt: 2e-3,
            t_end: 0.1,
            n_modes: 8,
            n_points: 64,
            blowup_threshold: 1e3,
        };
        let ctx = SolverContext::new(&ModelParams::default(), &NoiseSpec::new(8, 0.3).unwrap(), &cfg).unwrap();
        let mut c = vec![0.0; 8];
        c[0] = 0.6;
        c[2] = 0.2;
        let u0 = ctx.solve_deterministic(&Field::Spectral(c)).unwrap();
        let r = ctx.reference(&u0).unwrap();
        (ctx, r)
    }

    fn random_control(seed: u64) -> ControlPath {
        let n = NoiseRealization::sample(8, 1.0, 50, seed).unwrap();
        ControlPath::new(8, 2e-3, 50, n.increments().to_vec()).unwrap()
    }

    #[test]
    fn zero_target_is_free() {
        let (ctx, r) = setup();
        let g = NoiseCoefficient::affine(1.0, 0.5);
        let res = rate_function_endpoint(&Field::zeros_spectral(8), &ctx, &r, &g, 1e-8).unwrap();
        assert_eq!(res.value, 0.0);
        assert!(res.converged && res.control.values().iter().all(|&v| v == 0.0));
        let json = serde_json::to_value(&res).unwrap();
        for key in ["value", "endpoint_residual", "iterations", "converged", "control_file"] {
            assert!(json.get(key).is_some());
        }
    }

    #[test]
    fn adjoint_passes_inner_product_test() {
        let (ctx, r) = setup();
        for g in [NoiseCoefficient::affine(1.0, 0.5), NoiseCoefficient::constant(0.7)] {
            let map = SkeletonMap::new(&ctx, &r, &g).unwrap();
            let h = random_control(1);
            let w: Vec<f64> = NoiseRealization::sample(8, 1.0, 1, 2).unwrap().increments().to_vec();
            let lhs = dot(&map.forward(&h).unwrap(), &w);
            let star = map.adjoint(&w);
            let rhs = 2e-3 * dot(h.values(), star.values());
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn cg_value_matches_dense_gramian() {
        let (ctx, r) = setup();
        let g = NoiseCoefficient::affine(1.0, 0.5);
        let target = vec![0.05, -0.02, 0.01, 0.004, 0.0, 0.001, -0.0005, 0.0002];
        let res = rate_function_endpoint(&Field::Spectral(target.clone()), &ctx, &r, &g, 1e-8).unwrap();
        assert!(res.converged, "{res:?}");
        let gram = controllability_gramian(&ctx, &r, &g, 8).unwrap();
        let oracle = pseudoinverse_value(&gram, &target).unwrap();
        assert!((res.value - oracle).abs() <= 1e-8 * oracle, "{} vs {oracle}", res.value);
        assert!((res.value - res.control.action()).abs() <= 1e-12 * res.value);
    }

    #[test]
    fn generating_control_is_feasible_and_value_is_quadratic() {
        let (ctx, r) = setup();
        let g = NoiseCoefficient::affine(1.0, 0.5);
        let map = SkeletonMap::new(&ctx, &r, &g).unwrap();
        let h = random_control(9).scaled(0.3);
        let psi = map.forward(&h).unwrap();
        let res = rate_function_endpoint(&Field::Spectral(psi.clone()), &ctx, &r, &g, 1e-8).unwrap();
        assert!(res.value <= h.action() + 1e-8);
        assert!(res.endpoint_residual <= 1e-8 * dot(&psi, &psi).sqrt());
        let doubled: Vec<f64> = psi.iter().map(|v| 2.0 * v).collect();
        let res2 = rate_function_endpoint(&Field::Spectral(doubled), &ctx, &r, &g, 1e-8).unwrap();
        assert!((res2.value - 4.0 * res.value).abs() <= 1e-6 * res2.value);
    }
}

use crate::error::Error;
use crate::model::{advective_difference_quotient, reaction_difference_quotient, NoiseCoefficient};
use crate::noise::{ControlPath, NoiseRealization};
use crate::spectral::lp_norm_with_spacing;

use super::{BlowupGuard, ReferencePath, SolverContext, Trajectory};

/// Per-mode factors of the exponential Euler step.
#[derive(Debug, Clone)]
pub(crate) struct StepFactors {
    /// `e^{−νλ_j dt}`
    pub decay: Vec<f64>,
    /// `(1 − e^{−νλ_j dt}) / (νλ_j)`
    pub etd: Vec<f64>,
    /// `√((1 − e^{−2νλ_j dt}) / (2νλ_j dt))`
    pub kappa: Vec<f64>,
}

impl StepFactors {
    pub fn new(eigenvalues: &[f64], nu: f64, dt: f64) -> Self {
        let mut decay = Vec::with_capacity(eigenvalues.len());
        let mut etd = Vec::with_capacity(eigenvalues.len());
        let mut kappa = Vec::with_capacity(eigenvalues.len());
        for &lam in eigenvalues {
            let a = nu * lam * dt;
            decay.push((-a).exp());
            etd.push(-(-a).exp_m1() / (nu * lam));
            kappa.push((-(-2.0 * a).exp_m1() / (2.0 * a)).sqrt());
        }
        Self { decay, etd, kappa }
    }
}

/// What is being integrated: the full equation, or a perturbation `y` of a
/// stored reference `r` with the state `r + s y`.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Problem<'a> {
    Full,
    Around {
        reference: &'a ReferencePath,
        scale: f64,
    },
}

impl<'a> Problem<'a> {
    pub fn around(reference: &'a ReferencePath, scale: f64) -> Self {
        Problem::Around { reference, scale }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Forcing<'a> {
    pub g: NoiseCoefficient,
    pub noise: Option<&'a NoiseRealization>,
    pub noise_scale: f64,
    pub control: Option<&'a ControlPath>,
}

impl<'a> Forcing<'a> {
    pub fn none(g: NoiseCoefficient) -> Self {
        Self {
            g,
            noise: None,
            noise_scale: 0.0,
            control: None,
        }
    }

    pub fn noise(g: NoiseCoefficient, noise: &'a NoiseRealization, scale: f64) -> Self {
        Self {
            g,
            noise: Some(noise),
            noise_scale: scale,
            control: None,
        }
    }
}

/// Storage options for one integration.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Recording {
    /// Keep every time level (otherwise only the last).
    pub path: bool,
    /// Compute `‖y(t_k)‖_{L^p}` at every level.
    pub norms: bool,
    /// Apply the blow-up stopping rule.
    pub guard: bool,
}

impl Recording {
    pub const FULL: Self = Self {
        path: true,
        norms: true,
        guard: true,
    };
    pub const ENDPOINT: Self = Self {
        path: false,
        norms: false,
        guard: true,
    };
    /// Final state only, no stopping rule (for the linear skeleton map).
    pub const BARE: Self = Self {
        path: false,
        norms: false,
        guard: false,
    };
}

/// Result of an integration that may have stopped early.
#[derive(Debug)]
pub(crate) struct Outcome {
    pub trajectory: Trajectory,
    pub abort: Option<Error>,
}

pub(crate) fn integrate(
    ctx: &SolverContext,
    mut y: Vec<f64>,
    problem: &Problem<'_>,
    forcing: &Forcing<'_>,
    rec: Recording,
) -> Outcome {
    let basis = ctx.basis();
    let params = ctx.params();
    let cfg = ctx.config();
    let f = ctx.step_factors();
    let q = ctx.weights();
    let n_modes = basis.n_modes();
    let n = basis.n_points();
    let h = basis.grid().spacing();
    let p = params.p();
    let dt = cfg.dt;
    let n_steps = cfg.n_steps();

    let g = forcing.g;
    let noise = forcing.noise.filter(|_| forcing.noise_scale != 0.0 && !g.is_zero());
    let control = forcing.control.filter(|_| !g.is_zero());
    let (reference, scale) = match *problem {
        Problem::Full => (None, 1.0),
        Problem::Around { reference, scale } => (Some(reference), scale),
    };
    let guard_on = rec.guard && cfg.blowup_threshold.is_finite();
    let state_dependent_g = !g.is_state_independent() && (noise.is_some() || control.is_some());
    let nonlinear = params.is_nonlinear();
    let need_grid = nonlinear || state_dependent_g || rec.norms || guard_on;
    // Reference-only problems (s = 0) still need r for g, but never r + s y.
    let monitor_shifted = reference.is_some() && scale != 0.0;

    let adv = params.alpha / (params.delta as f64 + 1.0);
    let (beta, gamma, delta) = (params.beta, params.gamma, params.delta);

    let mut guard = BlowupGuard::new(cfg.blowup_threshold);
    let mut stored = Vec::with_capacity(if rec.path { (n_steps + 1) * n_modes } else { n_modes });
    let mut norms = Vec::with_capacity(if rec.norms { n_steps + 1 } else { 0 });
    let mut abort = None;

    let mut yg = vec![0.0; n];
    let mut wg = vec![0.0; n];
    let mut work = vec![0.0; n];
    let mut spatial = vec![0.0; n];
    let mut drift = vec![0.0; n_modes];
    let mut tmp = vec![0.0; n_modes];
    let mut stoch = vec![0.0; n_modes];
    let mut weighted = vec![0.0; n_modes];

    for k in 0..=n_steps {
        let t = k as f64 * dt;
        if y.iter().any(|v| !v.is_finite()) {
            abort = Some(Error::NonFinite { time: t });
            break;
        }
        if rec.path || k == n_steps {
            stored.extend_from_slice(&y);
        }
        let r = reference.map(|rp| rp.at(k));

        if need_grid {
            basis.synthesize(&y, &mut yg);
            // state r + s y, or y itself when there is no shift
            match r {
                Some(r) if monitor_shifted => {
                    for ((w, &ri), &yi) in wg.iter_mut().zip(r).zip(&yg) {
                        *w = ri + scale * yi;
                    }
                }
                _ => wg.copy_from_slice(&yg),
            }
            let own = if rec.norms || (guard_on && !monitor_shifted) {
                lp_norm_with_spacing(h, &yg, p)
            } else {
                0.0
            };
            if rec.norms {
                norms.push(own);
            }
            if guard_on {
                let monitored = if monitor_shifted {
                    lp_norm_with_spacing(h, &wg, p)
                } else {
                    own
                };
                if !monitored.is_finite() {
                    abort = Some(Error::NonFinite { time: t });
                    break;
                }
                if guard.check(t, monitored) {
                    if !rec.path && k != n_steps {
                        stored.extend_from_slice(&y);
                    }
                    abort = Some(Error::Blowup {
                        time: t,
                        norm: monitored,
                        threshold: cfg.blowup_threshold,
                    });
                    break;
                }
            }
        }
        if k == n_steps {
            break;
        }

        drift.iter_mut().for_each(|d| *d = 0.0);
        if nonlinear {
            if beta != 0.0 {
                match r {
                    None => {
                        for (o, &u) in work.iter_mut().zip(&yg) {
                            *o = crate::model::reaction(u, gamma, delta);
                        }
                    }
                    Some(r) => {
                        for ((o, &ri), &z) in work.iter_mut().zip(r).zip(&yg) {
                            *o = reaction_difference_quotient(ri, scale, z, gamma, delta);
                        }
                    }
                }
                basis.project(&work, &mut tmp);
                for (d, &c) in drift.iter_mut().zip(&tmp) {
                    *d += beta * c;
                }
            }
            if adv != 0.0 {
                match r {
                    None => {
                        for (o, &u) in work.iter_mut().zip(&yg) {
                            *o = crate::model::advective(u, delta);
                        }
                    }
                    Some(r) => {
                        for ((o, &ri), &z) in work.iter_mut().zip(r).zip(&yg) {
                            *o = advective_difference_quotient(ri, scale, z, delta);
                        }
                    }
                }
                basis.project_derivative(&work, &mut tmp);
                for (d, &c) in drift.iter_mut().zip(&tmp) {
                    *d += adv * c;
                }
            }
        }

        // g evaluated at the full state: r + s y, or r when s = 0, or y for the full problem
        let g_grid: &[f64] = match r {
            Some(r) if !monitor_shifted => r,
            _ => &wg,
        };

        if let Some(h_path) = control {
            weighted.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..h_path.n_modes {
                weighted[j] = q[j] * h_path.get(j, k);
            }
            apply_g(&g, g_grid, &weighted[..h_path.n_modes], basis, &mut spatial, &mut tmp, state_dependent_g);
            for (d, &c) in drift.iter_mut().zip(&tmp) {
                *d += c;
            }
        }

        stoch.iter_mut().for_each(|v| *v = 0.0);
        if let Some(nz) = noise {
            for j in 0..nz.n_modes {
                weighted[j] = forcing.noise_scale * q[j] * nz.get(j, k);
            }
            apply_g(&g, g_grid, &weighted[..nz.n_modes], basis, &mut spatial, &mut stoch, state_dependent_g);
        }

        for j in 0..n_modes {
            y[j] = f.decay[j] * y[j] + f.etd[j] * drift[j] + f.kappa[j] * stoch[j];
        }
    }

    let trajectory = Trajectory::from_parts(
        dt,
        n_modes,
        n,
        p,
        stored,
        norms,
        guard,
    );
    Outcome { trajectory, abort }
}

/// Coefficients of `g(w) Σ_k c_k φ_k`.
fn apply_g(
    g: &NoiseCoefficient,
    w: &[f64],
    c: &[f64],
    basis: &crate::spectral::SpectralBasis,
    spatial: &mut [f64],
    out: &mut [f64],
    state_dependent: bool,
) {
    if !state_dependent {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (o, &ck) in out.iter_mut().zip(c) {
            *o = g.kappa0 * ck;
        }
        return;
    }
    basis.synthesize(c, spatial);
    for (s, &wi) in spatial.iter_mut().zip(w) {
        *s *= g.at(wi);
    }
    basis.project(spatial, out);
}

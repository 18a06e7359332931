use wasm_bindgen::prelude::*;

use sgbh_core::deviation::rate_function_endpoint;
use sgbh_core::model::{ModelParams, NoiseCoefficient};
use sgbh_core::noise::{NoiseRealization, NoiseSpec};
use sgbh_core::solvers::{SolverConfig, SolverContext};
use sgbh_core::spectral::{heat_kernel_point, Field, Grid1D, KernelMethod};

/// Heat kernel `G(t, x, ·)` on `n` interior points by both methods:
/// the image sum first, then the eigen expansion.
#[wasm_bindgen]
pub fn kernel_slice(t: f64, x: f64, n: usize) -> Result<Vec<f64>, String> {
    if t.is_nan() || t <= 0.0 || !(0.0..=1.0).contains(&x) {
        return Err(format!("need t > 0 and x in [0, 1], got t = {t}, x = {x}"));
    }
    let grid = Grid1D::new(n).map_err(|e| e.to_string())?;
    let ys = grid.nodes();
    let mut out: Vec<f64> = ys
        .iter()
        .map(|&y| heat_kernel_point(t, x, y, KernelMethod::Images, 10))
        .collect();
    out.extend(ys.iter().map(|&y| heat_kernel_point(t, x, y, KernelMethod::Eigen, 200)));
    Ok(out)
}

#[wasm_bindgen]
pub struct PathView {
    x: Vec<f64>,
    noisy: Vec<f64>,
    clean: Vec<f64>,
    times: Vec<f64>,
    noisy_norm: Vec<f64>,
    clean_norm: Vec<f64>,
}

#[wasm_bindgen]
impl PathView {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    /// `u_ε(T)` on the grid.
    #[wasm_bindgen(getter)]
    pub fn noisy(&self) -> Vec<f64> {
        self.noisy.clone()
    }

    /// `u₀(T)` on the grid.
    #[wasm_bindgen(getter)]
    pub fn clean(&self) -> Vec<f64> {
        self.clean.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn noisy_norm(&self) -> Vec<f64> {
        self.noisy_norm.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn clean_norm(&self) -> Vec<f64> {
        self.clean_norm.clone()
    }
}

const MODES: usize = 16;

fn context(alpha: f64, beta: f64, n_modes: usize, n_points: usize) -> Result<SolverContext, String> {
    let params = ModelParams {
        alpha,
        beta,
        ..Default::default()
    };
    let cfg = SolverConfig {
        dt: 1e-3,
        t_end: 0.25,
        n_modes,
        n_points,
        blowup_threshold: 1e3,
    };
    let noise = NoiseSpec::new(n_modes, 0.3).map_err(|e| e.to_string())?;
    SolverContext::new(&params, &noise, &cfg).map_err(|e| e.to_string())
}

fn bump(n_modes: usize, amplitude: f64, mode: usize) -> Field {
    let mut c = vec![0.0; n_modes];
    c[mode - 1] = amplitude;
    Field::Spectral(c)
}

/// One noisy path next to the deterministic solution, both from `0.6 φ₁`.
#[wasm_bindgen]
pub fn simulate_path(eps: f64, alpha: f64, beta: f64, seed: u64) -> Result<PathView, String> {
    let ctx = context(alpha, beta, MODES, 128)?;
    let g = NoiseCoefficient::affine(1.0, 0.5);
    let u0 = bump(MODES, 0.6, 1);
    let noise = NoiseRealization::sample(MODES, 1e-3, ctx.n_steps(), seed).map_err(|e| e.to_string())?;
    let clean = ctx.solve_deterministic(&u0).map_err(|e| e.to_string())?;
    let noisy = ctx.solve_spde(&u0, &g, eps, &noise).map_err(|e| e.to_string())?;
    let basis = ctx.basis();
    let on_grid = |c: &[f64]| basis.to_grid(&Field::Spectral(c.to_vec())).map_err(|e| e.to_string());
    Ok(PathView {
        x: basis.grid().nodes(),
        noisy: on_grid(noisy.final_coeffs())?,
        clean: on_grid(clean.final_coeffs())?,
        times: noisy.times(),
        noisy_norm: noisy.l2_norms(),
        clean_norm: clean.l2_norms(),
    })
}

/// Minimum control energy to push the linearized deviation to `amplitude · φ_mode` at the final time.
#[wasm_bindgen]
pub fn rate_of_bump(amplitude: f64, mode: usize) -> Result<f64, String> {
    const N: usize = 8;
    if !(1..=N).contains(&mode) {
        return Err(format!("mode must lie in 1..={N}"));
    }
    let ctx = context(1.0, 1.0, N, 64)?;
    let u0 = ctx.solve_deterministic(&bump(N, 0.6, 1)).map_err(|e| e.to_string())?;
    let reference = ctx.reference(&u0).map_err(|e| e.to_string())?;
    let g = NoiseCoefficient::affine(1.0, 0.5);
    let res = rate_function_endpoint(&bump(N, amplitude, mode), &ctx, &reference, &g, 1e-10)
        .map_err(|e| e.to_string())?;
    Ok(res.value)
}

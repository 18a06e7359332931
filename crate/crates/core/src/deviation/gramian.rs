use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Result};
use crate::model::{advective_derivative, reaction_derivative, NoiseCoefficient};
use crate::solvers::{ReferencePath, SolverContext};

/// Largest block assembled densely.
pub const MAX_GRAMIAN_MODES: usize = 16;

/// Leading `mode_cap × mode_cap` block of `Φ Φ*`, assembled by the discrete
/// Lyapunov recursion `P ← A_k P A_kᵀ + dt⁻¹ (D B_k)(D B_k)ᵀ`.
pub fn controllability_gramian(
    ctx: &SolverContext,
    reference: &ReferencePath,
    g: &NoiseCoefficient,
    mode_cap: usize,
) -> Result<DMatrix<f64>> {
    let basis = ctx.basis();
    let j_modes = basis.n_modes();
    if mode_cap == 0 || mode_cap > MAX_GRAMIAN_MODES || mode_cap > j_modes {
        return Err(invalid(format!(
            "mode_cap = {mode_cap} must lie in 1..={}",
            MAX_GRAMIAN_MODES.min(j_modes)
        )));
    }
    if reference.n_levels() != ctx.n_steps() + 1 {
        return Err(invalid("reference path does not match the solver grid"));
    }
    let params = ctx.params();
    let f = ctx.step_factors();
    let q = ctx.weights();
    let n_ctrl = q.len();
    let dt = ctx.config().dt;
    let n = basis.n_points();
    let h = basis.grid().spacing();
    let adv = params.alpha / (params.delta as f64 + 1.0);

    let phi = DMatrix::from_fn(n, j_modes, |i, j| basis.mode(j)[i]);
    let dphi = DMatrix::from_fn(n, j_modes, |i, j| basis.mode_derivative(j)[i]);
    let decay = DMatrix::from_diagonal(&DVector::from_column_slice(&f.decay));
    let etd = DMatrix::from_diagonal(&DVector::from_column_slice(&f.etd));

    let mut p = DMatrix::<f64>::zeros(j_modes, j_modes);
    if g.is_zero() {
        return Ok(p.view((0, 0), (mode_cap, mode_cap)).into_owned());
    }
    let weighted_cols = |w: &dyn Fn(usize) -> f64| {
        // h Φᵀ diag(w) Φ
        let mut scaled = phi.clone();
        for i in 0..n {
            let wi = h * w(i);
            scaled.row_mut(i).scale_mut(wi);
        }
        scaled
    };

    for k in 0..ctx.n_steps() {
        let r = reference.at(k);
        let mut a = decay.clone();
        if params.is_nonlinear() {
            let mut l = DMatrix::<f64>::zeros(j_modes, j_modes);
            if params.beta != 0.0 {
                let s = weighted_cols(&|i| params.beta * reaction_derivative(r[i], params.gamma, params.delta));
                l += phi.transpose() * s;
            }
            if adv != 0.0 {
                let s = weighted_cols(&|i| adv * advective_derivative(r[i], params.delta));
                l += dphi.transpose() * s;
            }
            a += &etd * l;
        }
        let b = if g.is_state_independent() {
            DMatrix::from_fn(j_modes, n_ctrl, |i, j| if i == j { g.kappa0 * q[j] } else { 0.0 })
        } else {
            let s = weighted_cols(&|i| g.at(r[i]));
            let mut b = phi.transpose() * s.columns(0, n_ctrl);
            for (j, mut col) in b.column_iter_mut().enumerate() {
                col.scale_mut(q[j]);
            }
            b
        };
        let db = &etd * b;
        p = &a * p * a.transpose() + (&db * db.transpose()) / dt;
    }
    let p = (&p + p.transpose()) * 0.5;
    Ok(p.view((0, 0), (mode_cap, mode_cap)).into_owned())
}

/// `½ ψᵀ G⁺ ψ`, dropping eigenvalues below `1e-12 · λ_max`.
pub fn pseudoinverse_value(gramian: &DMatrix<f64>, target: &[f64]) -> Result<f64> {
    if gramian.nrows() != target.len() || !gramian.is_square() {
        return Err(invalid("Gramian and target sizes differ"));
    }
    let eig = SymmetricEigen::new(gramian.clone());
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let cutoff = 1e-12 * lmax;
    let psi = DVector::from_column_slice(target);
    let mut value = 0.0;
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > cutoff {
            let c = eig.eigenvectors.column(i).dot(&psi);
            value += c * c / lam;
        }
    }
    Ok(0.5 * value)
}

//! Model parameters, polynomial nonlinearities and the noise coefficient.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Viscosity `ν > 0`.
    pub nu: f64,
    /// Advection coefficient `α ≥ 0`.
    pub alpha: f64,
    /// Reaction coefficient `β ≥ 0`.
    pub beta: f64,
    /// Reaction threshold `γ ∈ (0, 1)`.
    pub gamma: f64,
    /// Polynomial degree `δ ≥ 1`.
    pub delta: u32,
    /// Even integer `p` used for `L^p` diagnostics.
    pub p_norm: u32,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            nu: 0.1,
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.5,
            delta: 1,
            p_norm: 8,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(invalid(format!("nu must be positive, got {}", self.nu)));
        }
        if !(self.alpha >= 0.0) || !(self.beta >= 0.0) {
            return Err(invalid("alpha and beta must be non-negative"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid(format!("gamma must lie in (0,1), got {}", self.gamma)));
        }
        if self.delta == 0 {
            return Err(invalid("delta must be >= 1"));
        }
        if self.p_norm < 2 || !self.p_norm.is_multiple_of(2) {
            return Err(invalid(format!("p_norm must be an even integer >= 2, got {}", self.p_norm)));
        }
        Ok(())
    }

    /// The integrability condition `p > max(6, 2δ+1)` required for the limit theorems.
    pub fn validate_for_limit_theorems(&self) -> Result<()> {
        self.validate()?;
        let floor = 6.max(2 * self.delta + 1);
        if self.p_norm <= floor {
            return Err(invalid(format!(
                "p_norm = {} must exceed max(6, 2*delta+1) = {floor}",
                self.p_norm
            )));
        }
        Ok(())
    }

    pub fn p(&self) -> f64 {
        self.p_norm as f64
    }

    /// True when the advection or reaction terms are present.
    pub fn is_nonlinear(&self) -> bool {
        self.alpha != 0.0 || self.beta != 0.0
    }
}

/// `p(u) = u^{δ+1}`.
#[inline]
pub fn advective(u: f64, delta: u32) -> f64 {
    u.powi(delta as i32 + 1)
}

/// `p'(u) = (δ+1) u^δ`.
#[inline]
pub fn advective_derivative(u: f64, delta: u32) -> f64 {
    (delta as f64 + 1.0) * u.powi(delta as i32)
}

/// `c(u) = u (1 − u^δ)(u^δ − γ)`.
#[inline]
pub fn reaction(u: f64, gamma: f64, delta: u32) -> f64 {
    let ud = u.powi(delta as i32);
    u * (1.0 - ud) * (ud - gamma)
}

/// `c'(u) = −γ + (1+γ)(1+δ) u^δ − (2δ+1) u^{2δ}`.
#[inline]
pub fn reaction_derivative(u: f64, gamma: f64, delta: u32) -> f64 {
    let d = delta as f64;
    let ud = u.powi(delta as i32);
    -gamma + (1.0 + gamma) * (1.0 + d) * ud - (2.0 * d + 1.0) * ud * ud
}

/// `c''(u) = (1+γ) δ (1+δ) u^{δ−1} − 2δ(2δ+1) u^{2δ−1}`.
#[inline]
pub fn reaction_second_derivative(u: f64, gamma: f64, delta: u32) -> f64 {
    let d = delta as f64;
    let k = delta as i32;
    (1.0 + gamma) * d * (1.0 + d) * u.powi(k - 1) - 2.0 * d * (2.0 * d + 1.0) * u.powi(2 * k - 1)
}

/// Pointwise `p(u)` over grid samples.
pub fn advective_nonlinearity(u: &[f64], delta: u32) -> Vec<f64> {
    u.iter().map(|&v| advective(v, delta)).collect()
}

/// Pointwise `c(u)` over grid samples.
pub fn reaction_nonlinearity(u: &[f64], gamma: f64, delta: u32) -> Vec<f64> {
    u.iter().map(|&v| reaction(v, gamma, delta)).collect()
}

pub fn advective_nonlinearity_derivative(u0: &[f64], delta: u32) -> Vec<f64> {
    u0.iter().map(|&v| advective_derivative(v, delta)).collect()
}

pub fn reaction_nonlinearity_derivative(u0: &[f64], gamma: f64, delta: u32) -> Vec<f64> {
    u0.iter().map(|&v| reaction_derivative(v, gamma, delta)).collect()
}

pub fn reaction_nonlinearity_second_derivative(u0: &[f64], gamma: f64, delta: u32) -> Vec<f64> {
    u0.iter()
        .map(|&v| reaction_second_derivative(v, gamma, delta))
        .collect()
}

/// `(r + s z)^m − r^m` divided by `s`, expanded binomially so that small `s`
/// loses no precision. At `s = 0` this is exactly `m r^{m−1} z`.
#[inline]
pub(crate) fn power_difference_quotient(r: f64, s: f64, z: f64, m: u32) -> f64 {
    // Σ_{k=1}^{m} C(m,k) r^{m−k} s^{k−1} z^k, Horner in (s z) from k = m down
    let sz = s * z;
    let mut acc = 0.0;
    let mut binom = 1.0;
    let mut r_pow = 1.0;
    for k in (1..=m).rev() {
        acc = acc * sz + binom * r_pow;
        binom = binom * k as f64 / (m - k + 1) as f64;
        r_pow *= r;
    }
    acc * z
}

/// `[p(r + s z) − p(r)] / s`.
#[inline]
pub(crate) fn advective_difference_quotient(r: f64, s: f64, z: f64, delta: u32) -> f64 {
    power_difference_quotient(r, s, z, delta + 1)
}

/// `[c(r + s z) − c(r)] / s`, using `c(u) = −γu + (1+γ)u^{δ+1} − u^{2δ+1}`.
#[inline]
pub(crate) fn reaction_difference_quotient(r: f64, s: f64, z: f64, gamma: f64, delta: u32) -> f64 {
    -gamma * z + (1.0 + gamma) * power_difference_quotient(r, s, z, delta + 1)
        - power_difference_quotient(r, s, z, 2 * delta + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Constant,
    Affine,
}

/// `g(t, x, r) = κ₀ + κ₁ r` (with `κ₁ = 0` for the constant kind).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCoefficient {
    pub kind: NoiseKind,
    pub kappa0: f64,
    pub kappa1: f64,
}

impl NoiseCoefficient {
    pub fn constant(kappa0: f64) -> Self {
        Self {
            kind: NoiseKind::Constant,
            kappa0,
            kappa1: 0.0,
        }
    }

    pub fn affine(kappa0: f64, kappa1: f64) -> Self {
        Self {
            kind: NoiseKind::Affine,
            kappa0,
            kappa1,
        }
    }

    #[inline]
    pub fn eval(&self, _t: f64, _x: f64, r: f64) -> f64 {
        match self.kind {
            NoiseKind::Constant => self.kappa0,
            NoiseKind::Affine => self.kappa0 + self.kappa1 * r,
        }
    }

    #[inline]
    pub(crate) fn at(&self, r: f64) -> f64 {
        self.eval(0.0, 0.0, r)
    }

    /// True when `g` does not depend on the solution.
    pub fn is_state_independent(&self) -> bool {
        self.kind == NoiseKind::Constant || self.kappa1 == 0.0
    }

    pub fn is_zero(&self) -> bool {
        self.kappa0 == 0.0 && self.is_state_independent()
    }

    /// Linear-growth constant `K` with `|g| ≤ K(1 + |r|)`.
    pub fn growth_bound(&self) -> f64 {
        self.kappa0.abs() + self.lipschitz_bound()
    }

    /// Lipschitz constant `L` in `r`.
    pub fn lipschitz_bound(&self) -> f64 {
        match self.kind {
            NoiseKind::Constant => 0.0,
            NoiseKind::Affine => self.kappa1.abs(),
        }
    }
}

/// Evaluates `g(t, x, r)`.
pub fn noise_coefficient_eval(g: &NoiseCoefficient, t: f64, x: f64, r: f64) -> f64 {
    g.eval(t, x, r)
}

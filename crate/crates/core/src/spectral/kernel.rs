//! Dirichlet heat kernel on (0, 1) by the method of images and by eigen-expansion.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{eigenfunction, eigenvalue, Field, Grid1D, SpectralBasis};
use crate::error::{invalid, Result};

/// Number of image pairs, `|m| <= 10`.
pub const DEFAULT_IMAGE_TRUNCATION: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMethod {
    Images,
    Eigen,
}

/// `G(t, x_i, y_k)` over all pairs of interior grid nodes.
#[derive(Debug, Clone)]
pub struct HeatKernelEval {
    pub t: f64,
    pub method: KernelMethod,
    pub truncation: usize,
    /// Set when the truncation leaves a tail above double precision.
    pub warning: Option<String>,
    n: usize,
    values: Vec<f64>,
}

impl HeatKernelEval {
    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.n + k]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn max_abs_diff(&self, other: &HeatKernelEval) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Point evaluation of `G(t, x, y)`.
///
/// For [`KernelMethod::Images`] the truncation is the number of image pairs
/// (`m ∈ [−truncation, truncation]`); for [`KernelMethod::Eigen`] it is the
/// number of eigenmodes.
pub fn heat_kernel_point(t: f64, x: f64, y: f64, method: KernelMethod, truncation: usize) -> f64 {
    match method {
        KernelMethod::Images => {
            let m_max = truncation as i64;
            let four_t = 4.0 * t;
            let mut sum = 0.0;
            for m in -m_max..=m_max {
                let shift = 2.0 * m as f64;
                let a = y - x - shift;
                let b = y + x - shift;
                sum += (-a * a / four_t).exp() - (-b * b / four_t).exp();
            }
            sum / (PI * four_t).sqrt()
        }
        KernelMethod::Eigen => (1..=truncation)
            .map(|j| (-eigenvalue(j) * t).exp() * eigenfunction(j, x) * eigenfunction(j, y))
            .sum(),
    }
}

/// `∂G/∂y` from term-wise differentiation of the image sum.
pub fn heat_kernel_dy(t: f64, x: f64, y: f64, truncation: usize) -> f64 {
    let m_max = truncation as i64;
    let four_t = 4.0 * t;
    let mut sum = 0.0;
    for m in -m_max..=m_max {
        let shift = 2.0 * m as f64;
        let a = y - x - shift;
        let b = y + x - shift;
        sum += -a / (2.0 * t) * (-a * a / four_t).exp() + b / (2.0 * t) * (-b * b / four_t).exp();
    }
    sum / (PI * four_t).sqrt()
}

/// Evaluates the kernel on all pairs of grid nodes.
pub fn heat_kernel(
    t: f64,
    grid: &Grid1D,
    method: KernelMethod,
    truncation: usize,
) -> Result<HeatKernelEval> {
    if !(t > 0.0) {
        return Err(invalid(format!("heat kernel needs t > 0, got {t}")));
    }
    if truncation == 0 {
        return Err(invalid("kernel truncation must be >= 1"));
    }
    let warning = truncation_warning(t, method, truncation);
    let nodes = grid.nodes();
    let n = nodes.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for k in i..n {
            let g = heat_kernel_point(t, nodes[i], nodes[k], method, truncation);
            values[i * n + k] = g;
            values[k * n + i] = g;
        }
    }
    Ok(HeatKernelEval {
        t,
        method,
        truncation,
        warning,
        n,
        values,
    })
}

/// Describes the neglected tail when it is above double precision.
fn truncation_warning(t: f64, method: KernelMethod, truncation: usize) -> Option<String> {
    let tail = match method {
        // first neglected term e^{-λ_{J+1} t}
        KernelMethod::Eigen => (-eigenvalue(truncation + 1) * t).exp(),
        // nearest neglected image sits at distance >= 2|m| - 1
        KernelMethod::Images => {
            let gap = 2.0 * truncation as f64 + 1.0;
            (-gap * gap / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
        }
    };
    (tail > 1e-16).then(|| {
        format!("{method:?} kernel truncated at {truncation} leaves a tail of {tail:.1e} at t = {t}")
    })
}

/// Multiplies spectral coefficient `j` by `e^{−λ_j νt}`.
pub fn apply_semigroup(field: &Field, nu_t: f64, basis: &SpectralBasis) -> Result<Field> {
    if nu_t < 0.0 || !nu_t.is_finite() {
        return Err(invalid(format!("semigroup time must be >= 0, got {nu_t}")));
    }
    let mut coeffs = basis.coefficients(field)?;
    if nu_t > 0.0 {
        for (c, lam) in coeffs.iter_mut().zip(basis.eigenvalues()) {
            *c *= (-lam * nu_t).exp();
        }
    }
    Ok(Field::Spectral(coeffs))
}

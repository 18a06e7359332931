//! Sine spectral basis of the Dirichlet Laplacian on (0, 1).
//!
//! Fields live primarily as coefficients against `φ_j(x) = √2 sin(jπx)`;
//! grid samples exist for evaluating pointwise nonlinearities and norms.
//! Inner products use the composite trapezoid rule on the uniform grid with
//! the boundary zeros included, which makes the discrete sine functions
//! exactly orthonormal for `j < n_points + 1`.

mod estimates;
mod kernel;

pub use estimates::{validate_kernel_estimates, EstimateFit, EstimateFitReport};
pub use kernel::{
    apply_semigroup, heat_kernel, heat_kernel_dy, heat_kernel_point, HeatKernelEval,
    KernelMethod, DEFAULT_IMAGE_TRUNCATION,
};

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Uniform grid of interior points on (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    n_points: usize,
    spacing: f64,
}

impl Grid1D {
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points == 0 {
            return Err(invalid("grid needs at least one interior point"));
        }
        Ok(Self {
            n_points,
            spacing: 1.0 / (n_points as f64 + 1.0),
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Interior node `i` (0-based), i.e. `x = (i + 1) h`.
    pub fn node(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.spacing
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.node(i)).collect()
    }

    /// Trapezoid integral of a function that vanishes at both endpoints.
    pub fn integrate(&self, interior: &[f64]) -> f64 {
        self.spacing * interior.iter().sum::<f64>()
    }

    /// Trapezoid integral including explicit endpoint values.
    pub fn integrate_with_ends(&self, left: f64, interior: &[f64], right: f64) -> f64 {
        self.spacing * (0.5 * (left + right) + interior.iter().sum::<f64>())
    }

    /// Discrete `L^p` norm of grid samples (Dirichlet zeros at the ends).
    pub fn lp_norm(&self, values: &[f64], p: f64) -> f64 {
        lp_norm_with_spacing(self.spacing, values, p)
    }
}

pub(crate) fn lp_norm_with_spacing(h: f64, values: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        return (h * values.iter().map(|v| v * v).sum::<f64>()).sqrt();
    }
    if p.fract() == 0.0 && p <= 64.0 {
        let k = p as i32;
        return (h * values.iter().map(|v| v.abs().powi(k)).sum::<f64>()).powf(1.0 / p);
    }
    (h * values.iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
}

/// Eigenpairs `λ_j = j²π²`, `φ_j = √2 sin(jπx)` sampled on a grid.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    grid: Grid1D,
    n_modes: usize,
    eigenvalues: Vec<f64>,
    // row-major n_modes × n_points
    sines: Vec<f64>,
    // φ_j'(x_i), same layout
    cosines: Vec<f64>,
}

/// Builds the sine basis. The grid must carry at least four points per mode.
pub fn build_basis(n_modes: usize, grid: &Grid1D) -> Result<SpectralBasis> {
    SpectralBasis::new(n_modes, grid.clone())
}

impl SpectralBasis {
    pub fn new(n_modes: usize, grid: Grid1D) -> Result<Self> {
        if n_modes == 0 {
            return Err(invalid("n_modes must be positive"));
        }
        if grid.n_points() < 4 * n_modes {
            return Err(invalid(format!(
                "grid of {} points is too coarse for {} modes (need >= {})",
                grid.n_points(),
                n_modes,
                4 * n_modes
            )));
        }
        let n = grid.n_points();
        let mut sines = Vec::with_capacity(n_modes * n);
        let mut cosines = Vec::with_capacity(n_modes * n);
        for j in 1..=n_modes {
            let k = j as f64 * PI;
            for i in 0..n {
                let x = grid.node(i);
                sines.push(SQRT_2 * (k * x).sin());
                cosines.push(SQRT_2 * k * (k * x).cos());
            }
        }
        let eigenvalues = (1..=n_modes).map(eigenvalue).collect();
        Ok(Self {
            grid,
            n_modes,
            eigenvalues,
            sines,
            cosines,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_points(&self) -> usize {
        self.grid.n_points()
    }

    /// `λ_j` for `j = 1..=n_modes` (0-based storage).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Samples of `φ_{j+1}` on the grid.
    pub fn mode(&self, j: usize) -> &[f64] {
        let n = self.n_points();
        &self.sines[j * n..(j + 1) * n]
    }

    /// Samples of `φ_{j+1}'` on the grid.
    pub fn mode_derivative(&self, j: usize) -> &[f64] {
        let n = self.n_points();
        &self.cosines[j * n..(j + 1) * n]
    }

    /// Synthesizes grid values from (up to `n_modes`) leading coefficients.
    pub fn synthesize(&self, coeffs: &[f64], out: &mut [f64]) {
        debug_assert!(coeffs.len() <= self.n_modes);
        debug_assert_eq!(out.len(), self.n_points());
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (o, &s) in out.iter_mut().zip(self.mode(j)) {
                *o += c * s;
            }
        }
    }

    /// Quadrature `(f, φ_j)` for every mode.
    pub fn project(&self, values: &[f64], out: &mut [f64]) {
        debug_assert_eq!(values.len(), self.n_points());
        let h = self.grid.spacing();
        for (j, o) in out.iter_mut().enumerate().take(self.n_modes) {
            *o = h * dot(values, self.mode(j));
        }
    }

    /// Quadrature `(f, φ_j')`, the adjoint of `−∂_x` applied to `f` when `f` vanishes at the ends.
    pub fn project_derivative(&self, values: &[f64], out: &mut [f64]) {
        debug_assert_eq!(values.len(), self.n_points());
        let h = self.grid.spacing();
        for (j, o) in out.iter_mut().enumerate().take(self.n_modes) {
            *o = h * dot(values, self.mode_derivative(j));
        }
    }

    /// Adjoint of [`project_derivative`](Self::project_derivative): grid values `h Σ_j c_j φ_j'(x_i)`.
    pub(crate) fn project_derivative_adjoint(&self, coeffs: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let h = self.grid.spacing();
        for (j, &c) in coeffs.iter().enumerate() {
            for (o, &d) in out.iter_mut().zip(self.mode_derivative(j)) {
                *o += h * c * d;
            }
        }
    }

    pub fn to_grid(&self, field: &Field) -> Result<Vec<f64>> {
        match field {
            Field::Grid(v) => {
                check_len(self.n_points(), v.len())?;
                Ok(v.clone())
            }
            Field::Spectral(c) => {
                if c.len() > self.n_modes {
                    return Err(Error::DimensionMismatch {
                        expected: self.n_modes,
                        got: c.len(),
                    });
                }
                let mut out = vec![0.0; self.n_points()];
                self.synthesize(c, &mut out);
                Ok(out)
            }
        }
    }

    pub fn coefficients(&self, field: &Field) -> Result<Vec<f64>> {
        match field {
            Field::Spectral(c) => {
                check_len(self.n_modes, c.len())?;
                Ok(c.clone())
            }
            Field::Grid(v) => {
                check_len(self.n_points(), v.len())?;
                let mut out = vec![0.0; self.n_modes];
                self.project(v, &mut out);
                Ok(out)
            }
        }
    }

    /// Discrete `L^p` norm of a field given by its coefficients.
    pub fn lp_norm_of_coeffs(&self, coeffs: &[f64], p: f64, scratch: &mut [f64]) -> f64 {
        self.synthesize(coeffs, scratch);
        self.grid.lp_norm(scratch, p)
    }
}

/// `j²π²`, 1-based.
pub fn eigenvalue(j: usize) -> f64 {
    let k = j as f64 * PI;
    k * k
}

/// `φ_j(x) = √2 sin(jπx)`, 1-based.
pub fn eigenfunction(j: usize, x: f64) -> f64 {
    SQRT_2 * (j as f64 * PI * x).sin()
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A spatial field in one of its two representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Field {
    Grid(Vec<f64>),
    Spectral(Vec<f64>),
}

/// Projects grid samples onto the basis.
pub fn to_spectral(field: &Field, basis: &SpectralBasis) -> Result<Field> {
    Ok(Field::Spectral(basis.coefficients(field)?))
}

impl Field {
    pub fn zeros_spectral(n_modes: usize) -> Self {
        Field::Spectral(vec![0.0; n_modes])
    }

    pub fn values(&self) -> &[f64] {
        match self {
            Field::Grid(v) | Field::Spectral(v) => v,
        }
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self, Field::Spectral(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes_are_interior_and_increasing() {
        let g = Grid1D::new(63).unwrap();
        assert!((g.spacing() * 64.0 - 1.0).abs() < 1e-15);
        let nodes = g.nodes();
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        assert!(nodes[0] > 0.0 && *nodes.last().unwrap() < 1.0);
    }

    #[test]
    fn first_modes_match_closed_form() {
        let g = Grid1D::new(7).unwrap();
        let b = build_basis(1, &g).unwrap();
        assert!((b.eigenvalues()[0] - 9.869604401089358).abs() < 1e-12);
        // node 3 is x = 0.5
        assert!((b.mode(0)[3] - SQRT_2).abs() < 1e-15);
        let b2 = build_basis(2, &Grid1D::new(15).unwrap()).unwrap();
        assert!(b2.mode(1)[7].abs() < 1e-15);
    }

    #[test]
    fn gram_matrix_is_identity() {
        let b = build_basis(8, &Grid1D::new(64).unwrap()).unwrap();
        let h = b.grid().spacing();
        for i in 0..8 {
            for j in 0..8 {
                let g = h * dot(b.mode(i), b.mode(j));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-10, "({i},{j}) -> {g}");
            }
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid1D::new(0).is_err());
        let g = Grid1D::new(31).unwrap();
        assert!(build_basis(0, &g).is_err());
        assert!(build_basis(8, &g).is_err());
        let b = build_basis(4, &g).unwrap();
        assert!(matches!(
            b.coefficients(&Field::Grid(vec![0.0; 5])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn projects_single_mode_and_zero() {
        let b = build_basis(8, &Grid1D::new(64).unwrap()).unwrap();
        let c = b.coefficients(&Field::Grid(b.mode(2).to_vec())).unwrap();
        for (j, v) in c.iter().enumerate() {
            let expect = if j == 2 { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-10);
        }
        let z = b.coefficients(&Field::Grid(vec![0.0; 64])).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parabola_coefficients_match_closed_form() {
        // (x(1-x), φ_j) = 2√2 (1 - (-1)^j) / (jπ)^3
        let g = Grid1D::new(2047).unwrap();
        let b = build_basis(8, &g).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|x| x * (1.0 - x)).collect();
        let c = b.coefficients(&Field::Grid(f)).unwrap();
        for (idx, v) in c.iter().enumerate() {
            let j = (idx + 1) as f64;
            let sign = if (idx + 1) % 2 == 0 { 1.0 } else { -1.0 };
            let exact = 2.0 * SQRT_2 * (1.0 - sign) / (j * PI).powi(3);
            assert!((v - exact).abs() < 1e-7, "mode {j}: {v} vs {exact}");
        }
    }

    #[test]
    fn parseval_and_round_trip() {
        let b = build_basis(8, &Grid1D::new(40).unwrap()).unwrap();
        let coeffs = vec![0.3, -1.2, 0.0, 0.5, 0.25, -0.7, 0.1, 2.0];
        let grid = b.to_grid(&Field::Spectral(coeffs.clone())).unwrap();
        let l2 = b.grid().lp_norm(&grid, 2.0);
        let euclid = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!((l2 - euclid).abs() < 1e-10);
        let back = b.coefficients(&Field::Grid(grid)).unwrap();
        for (a, c) in back.iter().zip(&coeffs) {
            assert!((a - c).abs() < 1e-10);
        }
    }
}

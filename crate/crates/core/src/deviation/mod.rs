//! Moderate-deviation utilities: speed functions, the endpoint rate function
//! as a minimum-energy control problem, its dense Gramian oracle, and
//! empirical tail probabilities of the rescaled process.

mod gramian;
mod rate;
mod tail;

pub use gramian::{controllability_gramian, pseudoinverse_value, MAX_GRAMIAN_MODES};
pub use rate::{rate_function_endpoint, RateFunctionResult, SkeletonMap, DEFAULT_RATE_TOLERANCE};
pub use tail::{mdp_tail_estimate, wilson_interval, TailReport, TailRow, TailSample};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Speed `λ(ε)`: either `λ ≡ 1` (the central-limit scale) or `λ(ε) = ε^{−θ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpeedFunction {
    Unit,
    PowerLaw { theta: f64 },
}

impl SpeedFunction {
    /// `ε^{−θ}` with `θ ∈ (0, 1/2)`.
    pub fn power_law(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 0.5) {
            return Err(invalid(format!("theta must lie in (0, 1/2), got {theta}")));
        }
        Ok(SpeedFunction::PowerLaw { theta })
    }

    /// `θ = 0` maps to [`SpeedFunction::Unit`].
    pub fn from_theta(theta: f64) -> Result<Self> {
        if theta == 0.0 {
            Ok(SpeedFunction::Unit)
        } else {
            Self::power_law(theta)
        }
    }

    pub fn theta(&self) -> f64 {
        match *self {
            SpeedFunction::Unit => 0.0,
            SpeedFunction::PowerLaw { theta } => theta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SpeedFunction::Unit => Ok(()),
            SpeedFunction::PowerLaw { theta } => Self::power_law(theta).map(|_| ()),
        }
    }

    /// `λ(ε)`.
    pub fn eval(&self, eps: f64) -> f64 {
        eps.powf(-self.theta())
    }

    /// `√ε λ(ε) = ε^{1/2 − θ}`, the factor between `Z_ε` and `u_ε − u₀`.
    pub fn deviation_scale(&self, eps: f64) -> f64 {
        eps.powf(0.5 - self.theta())
    }

    /// `1/λ(ε) = ε^θ`, the noise amplitude seen by `Z_ε`.
    pub fn noise_scale(&self, eps: f64) -> f64 {
        eps.powf(self.theta())
    }

    /// Along a strictly decreasing `ε` sequence, `λ` increases and `√ε λ` decreases.
    pub fn is_speed_on(&self, eps_decreasing: &[f64]) -> bool {
        if eps_decreasing.windows(2).any(|w| !(w[1] < w[0])) {
            return false;
        }
        let strict = self.theta() > 0.0;
        eps_decreasing.windows(2).all(|w| {
            let lam_ok = if strict {
                self.eval(w[1]) > self.eval(w[0])
            } else {
                self.eval(w[1]) >= self.eval(w[0])
            };
            lam_ok && self.deviation_scale(w[1]) < self.deviation_scale(w[0])
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_speed() {
        let s = SpeedFunction::power_law(0.25).unwrap();
        assert!((s.eval(1e-4) - 10.0).abs() < 1e-12);
        assert!((s.deviation_scale(1e-4) - 0.1).abs() < 1e-14);
        assert!((s.noise_scale(1e-4) - 0.1).abs() < 1e-14);
        assert!(s.is_speed_on(&[1.0, 1e-1, 1e-2, 1e-6]));
        assert!(!s.is_speed_on(&[1e-2, 1e-1]));
    }

    #[test]
    fn theta_range() {
        assert!(SpeedFunction::power_law(0.0).is_err());
        assert!(SpeedFunction::power_law(0.5).is_err());
        assert!(SpeedFunction::power_law(f64::NAN).is_err());
        assert_eq!(SpeedFunction::from_theta(0.0).unwrap(), SpeedFunction::Unit);
        let unit = SpeedFunction::Unit;
        assert_eq!(unit.eval(1e-3), 1.0);
        assert!((unit.deviation_scale(1e-4) - 1e-2).abs() < 1e-16);
        assert!(unit.is_speed_on(&[0.1, 0.01]));
    }
}

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Field, SpectralBasis};

/// Stopping rule `τ = inf{t : ‖u(t)‖_{L^p} > M}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupGuard {
    pub threshold: f64,
    pub tripped_at: Option<f64>,
}

impl BlowupGuard {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            tripped_at: None,
        }
    }

    /// Records the first crossing; returns true if this call tripped the guard.
    pub fn check(&mut self, t: f64, norm: f64) -> bool {
        if self.tripped_at.is_none() && norm > self.threshold {
            self.tripped_at = Some(t);
            return true;
        }
        false
    }

    pub fn is_tripped(&self) -> bool {
        self.tripped_at.is_some()
    }
}

/// Time-indexed spectral coefficients on a uniform grid `t_k = k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub n_modes: usize,
    pub n_points: usize,
    /// `L^p` exponent used for `norms`.
    pub p: f64,
    /// `‖field(t_k)‖_{L^p}` for every stored time.
    pub norms: Vec<f64>,
    pub guard: BlowupGuard,
    coeffs: Vec<f64>,
}

impl Trajectory {
    pub(crate) fn from_parts(
        dt: f64,
        n_modes: usize,
        n_points: usize,
        p: f64,
        coeffs: Vec<f64>,
        norms: Vec<f64>,
        guard: BlowupGuard,
    ) -> Self {
        debug_assert_eq!(coeffs.len() % n_modes, 0);
        Self {
            dt,
            n_modes,
            n_points,
            p,
            norms,
            guard,
            coeffs,
        }
    }

    /// Number of stored time levels (steps + 1).
    pub fn len(&self) -> usize {
        self.coeffs.len() / self.n_modes
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn n_steps(&self) -> usize {
        self.len().saturating_sub(1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| k as f64 * self.dt).collect()
    }

    pub fn t_end(&self) -> f64 {
        self.n_steps() as f64 * self.dt
    }

    pub fn coeffs_at(&self, k: usize) -> &[f64] {
        &self.coeffs[k * self.n_modes..(k + 1) * self.n_modes]
    }

    pub fn final_coeffs(&self) -> &[f64] {
        self.coeffs_at(self.len() - 1)
    }

    pub fn field_at(&self, k: usize) -> Field {
        Field::Spectral(self.coeffs_at(k).to_vec())
    }

    pub fn all_coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `sup_k ‖field(t_k)‖_{L^p}` over stored times.
    pub fn sup_norm(&self) -> f64 {
        self.norms.iter().copied().fold(0.0, f64::max)
    }

    /// `L²` norm per stored time (Parseval on the coefficients).
    pub fn l2_norms(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| self.coeffs_at(k).iter().map(|c| c * c).sum::<f64>().sqrt())
            .collect()
    }

    /// Max over times and modes of the coefficient difference.
    pub fn max_abs_diff(&self, other: &Trajectory) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Recomputes `norms` for another `p`.
    pub fn lp_norms(&self, basis: &SpectralBasis, p: f64) -> Vec<f64> {
        let mut scratch = vec![0.0; basis.n_points()];
        (0..self.len())
            .map(|k| basis.lp_norm_of_coeffs(self.coeffs_at(k), p, &mut scratch))
            .collect()
    }

    /// Binary layout, little-endian: `n_points, n_modes` (u64), `dt` (f64),
    /// `n_steps` (u64), then `n_steps + 1` rows of `n_modes` f64 coefficients.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.n_points as u64).to_le_bytes())?;
        w.write_all(&(self.n_modes as u64).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&(self.n_steps() as u64).to_le_bytes())?;
        for c in &self.coeffs {
            w.write_all(&c.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the binary layout back. `norms` are not stored and come back empty.
    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 32 {
            return Err(Error::Format("trajectory header is truncated".into()));
        }
        let word = |i: usize| -> [u8; 8] { bytes[8 * i..8 * i + 8].try_into().expect("8 bytes") };
        let n_points = u64::from_le_bytes(word(0)) as usize;
        let n_modes = u64::from_le_bytes(word(1)) as usize;
        let dt = f64::from_le_bytes(word(2));
        let n_steps = u64::from_le_bytes(word(3)) as usize;
        let payload = &bytes[32..];
        let expected = (n_steps + 1)
            .checked_mul(n_modes)
            .and_then(|v| v.checked_mul(8))
            .ok_or_else(|| Error::Format("trajectory header overflows".into()))?;
        if n_modes == 0 || payload.len() != expected {
            return Err(Error::Format(format!(
                "trajectory payload has {} bytes, header implies {expected}",
                payload.len()
            )));
        }
        let coeffs = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Self {
            dt,
            n_modes,
            n_points,
            p: f64::NAN,
            norms: Vec::new(),
            guard: BlowupGuard::new(f64::INFINITY),
            coeffs,
        })
    }

    pub fn save_binary(&self, path: &Path) -> Result<()> {
        self.write_binary(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load_binary(path: &Path) -> Result<Self> {
        Self::read_binary(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// CSV with columns `time,l2_norm,lp_norm`.
    pub fn write_norms_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time,l2_norm,lp_norm")?;
        let l2 = self.l2_norms();
        for k in 0..self.len() {
            let lp = self.norms.get(k).copied().unwrap_or(f64::NAN);
            writeln!(w, "{},{:e},{:e}", k as f64 * self.dt, l2[k], lp)?;
        }
        w.flush()?;
        Ok(())
    }
}

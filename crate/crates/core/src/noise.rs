//! Q-Wiener noise: Brownian mode increments, bridge refinement and Cameron–Martin controls.
//!
//! The noise is `W^Q(t, x) = Σ_j q_j φ_j(x) B_j(t)` with independent standard
//! Brownian motions `B_j`. A realization stores the increments
//! `ΔB_{j,k} = B_j(t_{k+1}) − B_j(t_k)`; the spatial weights `q_j φ_j` are
//! applied by the solvers.
//!
//! Random numbers come from ChaCha8 keyed by a per-path seed, with one
//! stream per mode, so any `(seed, path, mode, step)` triple always maps to
//! the same variate no matter how paths are scheduled across workers.

use std::io::{Read, Write};
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::eigenvalue;

/// Stream tag separating bridge refinements from the base increments.
const REFINE_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub n_modes: usize,
    pub eta: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            n_modes: 32,
            eta: 0.3,
        }
    }
}

impl NoiseSpec {
    pub fn new(n_modes: usize, eta: f64) -> Result<Self> {
        let spec = Self { n_modes, eta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(invalid("noise needs at least one mode"));
        }
        if !(self.eta > 0.25) {
            return Err(invalid(format!(
                "eta = {} does not give trace-class noise (need eta > 1/4)",
                self.eta
            )));
        }
        Ok(())
    }

    /// `q_j = λ_j^{−η}` for `j = 1..=n_modes`.
    pub fn weights(&self) -> Vec<f64> {
        (1..=self.n_modes)
            .map(|j| eigenvalue(j).powf(-self.eta))
            .collect()
    }

    /// `Σ_{j ≤ J} q_j²`.
    pub fn trace(&self) -> f64 {
        self.weights().iter().map(|q| q * q).sum()
    }
}

/// SplitMix64 finalizer, used to derive independent per-path keys from one base seed.
pub fn mix_seed(base: u64, path: u64) -> u64 {
    let mut z = base ^ path.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mode_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Brownian increments `ΔB_{j,k}`, each `N(0, dt)`, stored mode-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    pub dt: f64,
    pub n_steps: usize,
    pub n_modes: usize,
    pub seed: u64,
    increments: Vec<f64>,
}

/// Samples the realization for path 0 of `seed`.
pub fn sample_noise(spec: &NoiseSpec, dt: f64, n_steps: usize, seed: u64) -> Result<NoiseRealization> {
    NoiseRealization::sample(spec.n_modes, dt, n_steps, seed)
}

/// Samples the realization of ensemble path `path` under `base_seed`.
pub fn sample_noise_path(
    spec: &NoiseSpec,
    dt: f64,
    n_steps: usize,
    base_seed: u64,
    path: u64,
) -> Result<NoiseRealization> {
    NoiseRealization::sample(spec.n_modes, dt, n_steps, mix_seed(base_seed, path))
}

impl NoiseRealization {
    pub fn sample(n_modes: usize, dt: f64, n_steps: usize, seed: u64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid(format!("noise time step must be positive, got {dt}")));
        }
        let sd = dt.sqrt();
        let mut increments = Vec::with_capacity(n_modes * n_steps);
        for j in 0..n_modes {
            let mut rng = mode_stream(seed, j as u64);
            increments.extend((0..n_steps).map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            }));
        }
        Ok(Self {
            dt,
            n_steps,
            n_modes,
            seed,
            increments,
        })
    }

    pub fn zeros(n_modes: usize, dt: f64, n_steps: usize) -> Self {
        Self {
            dt,
            n_steps,
            n_modes,
            seed: 0,
            increments: vec![0.0; n_modes * n_steps],
        }
    }

    pub fn from_increments(n_modes: usize, dt: f64, n_steps: usize, seed: u64, increments: Vec<f64>) -> Result<Self> {
        if increments.len() != n_modes * n_steps {
            return Err(Error::DimensionMismatch {
                expected: n_modes * n_steps,
                got: increments.len(),
            });
        }
        Ok(Self {
            dt,
            n_steps,
            n_modes,
            seed,
            increments,
        })
    }

    /// Increment of mode `j` (0-based) over step `k`.
    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.increments[j * self.n_steps + k]
    }

    pub fn mode(&self, j: usize) -> &[f64] {
        &self.increments[j * self.n_steps..(j + 1) * self.n_steps]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Every increment multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.increments.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Elementwise sum of two realizations on the same grid.
    pub fn added(&self, other: &Self) -> Result<Self> {
        if self.n_modes != other.n_modes || self.n_steps != other.n_steps {
            return Err(Error::GridMismatch("noise realizations differ in shape".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.increments.iter_mut().zip(&other.increments) {
            *a += b;
        }
        Ok(out)
    }

    /// Splits each step into `factor` sub-steps by Brownian-bridge sampling.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        refine_noise(self, factor)
    }

    /// Sums consecutive groups of `factor` increments.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.n_steps.is_multiple_of(factor) {
            return Err(invalid(format!(
                "cannot coarsen {} steps by a factor of {factor}",
                self.n_steps
            )));
        }
        let n_steps = self.n_steps / factor;
        let mut increments = Vec::with_capacity(self.n_modes * n_steps);
        for j in 0..self.n_modes {
            increments.extend(self.mode(j).chunks(factor).map(|c| c.iter().sum::<f64>()));
        }
        Ok(Self {
            dt: self.dt * factor as f64,
            n_steps,
            n_modes: self.n_modes,
            seed: self.seed,
            increments,
        })
    }

    /// Writes the flat little-endian format: `J, n_steps` (u64), `dt` (f64), `seed` (u64), increments.
    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        write_flat(w, self.n_modes, self.n_steps, self.dt, self.seed, &self.increments)
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let (n_modes, n_steps, dt, seed, increments) = read_flat(r)?;
        Self::from_increments(n_modes, dt, n_steps, seed, increments)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Brownian-bridge refinement: each coarse increment `ΔB` over `dt` becomes
/// `factor` increments with the exact conditional law given their sum.
pub fn refine_noise(r: &NoiseRealization, factor: usize) -> Result<NoiseRealization> {
    if factor < 2 {
        return Err(invalid(format!("refinement factor must be >= 2, got {factor}")));
    }
    let fine_dt = r.dt / factor as f64;
    let sd = fine_dt.sqrt();
    let n_steps = r.n_steps * factor;
    let mut increments = Vec::with_capacity(r.n_modes * n_steps);
    let mut z = vec![0.0; factor];
    for j in 0..r.n_modes {
        let mut rng = mode_stream(r.seed, REFINE_STREAM + ((factor as u64) << 20) + j as u64);
        for &coarse in r.mode(j) {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let mean = z.iter().sum::<f64>() / factor as f64;
            let share = coarse / factor as f64;
            let start = increments.len();
            increments.extend(z.iter().map(|v| share + sd * (v - mean)));
            // pin the group sum to the coarse increment
            let partial: f64 = increments[start..start + factor - 1].iter().sum();
            increments[start + factor - 1] = coarse - partial;
        }
    }
    Ok(NoiseRealization {
        dt: fine_dt,
        n_steps,
        n_modes: r.n_modes,
        seed: r.seed,
        increments,
    })
}

/// Piecewise-constant control `ḣ_{j,k}` on the solver time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath {
    pub dt: f64,
    pub n_steps: usize,
    pub n_modes: usize,
    hdot: Vec<f64>,
}

impl ControlPath {
    pub fn zeros(n_modes: usize, dt: f64, n_steps: usize) -> Self {
        Self {
            dt,
            n_steps,
            n_modes,
            hdot: vec![0.0; n_modes * n_steps],
        }
    }

    /// `hdot` is mode-major: entry `j * n_steps + k`.
    pub fn new(n_modes: usize, dt: f64, n_steps: usize, hdot: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid("control time step must be positive"));
        }
        if hdot.len() != n_modes * n_steps {
            return Err(Error::DimensionMismatch {
                expected: n_modes * n_steps,
                got: hdot.len(),
            });
        }
        Ok(Self {
            dt,
            n_steps,
            n_modes,
            hdot,
        })
    }

    /// Constant-in-time control `ḣ_j ≡ values[j]`.
    pub fn constant(values: &[f64], dt: f64, n_steps: usize) -> Self {
        let hdot = values
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, n_steps))
            .collect();
        Self {
            dt,
            n_steps,
            n_modes: values.len(),
            hdot,
        }
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.hdot[j * self.n_steps + k]
    }

    pub fn values(&self) -> &[f64] {
        &self.hdot
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.hdot
    }

    /// `½ Σ_j Σ_k ḣ_{j,k}² dt`.
    pub fn action(&self) -> f64 {
        0.5 * self.dt * self.hdot.iter().map(|v| v * v).sum::<f64>()
    }

    /// Membership in `U^N = {Σ_j ∫ |ḣ_j|² ≤ N}`.
    pub fn in_ball(&self, radius_sq: f64) -> bool {
        2.0 * self.action() <= radius_sq
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.hdot.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn added(&self, other: &Self) -> Result<Self> {
        if self.n_modes != other.n_modes || self.n_steps != other.n_steps {
            return Err(Error::GridMismatch("controls differ in shape".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.hdot.iter_mut().zip(&other.hdot) {
            *a += b;
        }
        Ok(out)
    }

    /// Same flat binary layout as [`NoiseRealization`], with the seed slot set to 0.
    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        write_flat(w, self.n_modes, self.n_steps, self.dt, 0, &self.hdot)
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let (n_modes, n_steps, dt, _, hdot) = read_flat(r)?;
        Self::new(n_modes, dt, n_steps, hdot)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Cameron–Martin action `½ ∫ ‖ḣ‖²_{ℓ²} dt`.
pub fn action(h: &ControlPath) -> f64 {
    h.action()
}

fn write_flat<W: Write>(mut w: W, rows: usize, cols: usize, dt: f64, seed: u64, data: &[f64]) -> Result<()> {
    w.write_all(&(rows as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    w.write_all(&dt.to_le_bytes())?;
    w.write_all(&seed.to_le_bytes())?;
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

type Flat = (usize, usize, f64, u64, Vec<f64>);

fn read_flat<R: Read>(mut r: R) -> Result<Flat> {
    let mut word = [0u8; 8];
    let mut next = |r: &mut R| -> Result<[u8; 8]> {
        r.read_exact(&mut word)
            .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
        Ok(word)
    };
    let rows = u64::from_le_bytes(next(&mut r)?) as usize;
    let cols = u64::from_le_bytes(next(&mut r)?) as usize;
    let dt = f64::from_le_bytes(next(&mut r)?);
    let seed = u64::from_le_bytes(next(&mut r)?);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Format("header dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} payload bytes for {rows}x{cols}, found {}",
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((rows, cols, dt, seed, data))
}

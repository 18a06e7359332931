use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Sup-in-time norms `sup_t ‖Z_ε(t)‖_{L^p}` of an ensemble at one `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSample {
    pub eps: f64,
    pub sup_norms: Vec<f64>,
    /// Paths dropped by the blow-up guard.
    pub n_rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub eps: f64,
    pub rho: f64,
    pub exceed: usize,
    pub n: usize,
    pub probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub rows: Vec<TailRow>,
    /// `max_ε P(sup ‖Z_ε‖ > ρ)` for each `ρ`.
    pub sup_over_eps: Vec<(f64, f64)>,
    /// Estimates are non-increasing in `ρ` for every `ε`.
    pub monotone_in_rho: bool,
}

impl TailReport {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "eps,rho,exceed,n,probability,ci_low,ci_high")?;
        for r in &self.rows {
            writeln!(
                w,
                "{:e},{:e},{},{},{:e},{:e},{:e}",
                r.eps, r.rho, r.exceed, r.n, r.probability, r.ci_low, r.ci_high
            )?;
        }
        Ok(())
    }
}

/// Wilson score interval at `z` standard deviations.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Empirical `P(sup_t ‖Z_ε(t)‖_{L^p} > ρ)` with 95% Wilson intervals.
pub fn mdp_tail_estimate(ensemble: &[TailSample], rhos: &[f64]) -> Result<TailReport> {
    if ensemble.is_empty() || ensemble.iter().all(|s| s.sup_norms.is_empty()) {
        return Err(invalid("tail estimate needs a non-empty ensemble"));
    }
    if rhos.is_empty() || rhos.iter().any(|r| !(*r >= 0.0)) {
        return Err(invalid("thresholds must be non-negative"));
    }
    let mut sorted_rhos = rhos.to_vec();
    sorted_rhos.sort_by(f64::total_cmp);

    let mut rows = Vec::new();
    let mut monotone = true;
    for sample in ensemble {
        let n = sample.sup_norms.len();
        let mut previous = f64::INFINITY;
        for &rho in &sorted_rhos {
            let exceed = sample.sup_norms.iter().filter(|&&v| v > rho).count();
            let probability = if n == 0 { 0.0 } else { exceed as f64 / n as f64 };
            if probability > previous {
                monotone = false;
            }
            previous = probability;
            let (ci_low, ci_high) = wilson_interval(exceed, n, 1.96);
            rows.push(TailRow {
                eps: sample.eps,
                rho,
                exceed,
                n,
                probability,
                ci_low,
                ci_high,
            });
        }
    }
    let sup_over_eps = sorted_rhos
        .iter()
        .map(|&rho| {
            let worst = rows
                .iter()
                .filter(|r| r.rho == rho)
                .map(|r| r.probability)
                .fold(0.0, f64::max);
            (rho, worst)
        })
        .collect();
    Ok(TailReport {
        rows,
        sup_over_eps,
        monotone_in_rho: monotone,
    })
}

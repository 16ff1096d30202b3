//! Reweighting of inter-observation spacings under `Σ_i w(Δt_i) = T`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::spacing_classes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WeightFamily {
    #[default]
    Identity,
    Constant,
    #[serde(alias = "log")]
    LogParametric,
    #[serde(alias = "per-dt")]
    PerDeltaT,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightScheme {
    /// `w(Δt) = Δt`.
    #[default]
    Identity,
    /// `w(Δt) = T/N`.
    Constant,
    /// `w(Δt) = γ log Δt + c(γ)`, `c(γ) = (T - γ Σ log Δt_i)/N`.
    LogParametric { gamma: f64 },
    /// `w(d_k) ∝ d_k e^{u_k}` for the distinct spacings `d_1 < ... < d_K`,
    /// scaled so the weights sum to `T`. `log_factors` holds `u_1..u_K`.
    PerDeltaT { log_factors: Vec<f64> },
}

impl WeightScheme {
    pub fn family(&self) -> WeightFamily {
        match self {
            WeightScheme::Identity => WeightFamily::Identity,
            WeightScheme::Constant => WeightFamily::Constant,
            WeightScheme::LogParametric { .. } => WeightFamily::LogParametric,
            WeightScheme::PerDeltaT { .. } => WeightFamily::PerDeltaT,
        }
    }

    /// Weight of each spacing class, given the classes' spacings and counts
    /// and the horizon `T = Σ counts·spacings`.
    pub fn class_weights(&self, dts: &[f64], counts: &[usize], horizon: f64) -> Result<Vec<f64>> {
        let n: usize = counts.iter().sum();
        let w = match self {
            WeightScheme::Identity => dts.to_vec(),
            WeightScheme::Constant => vec![horizon / n as f64; dts.len()],
            WeightScheme::LogParametric { gamma } => {
                let c = log_intercept(*gamma, dts, counts, horizon);
                dts.iter().map(|d| gamma * d.ln() + c).collect()
            }
            WeightScheme::PerDeltaT { log_factors } => {
                if log_factors.len() != dts.len() {
                    return Err(Error::validation(format!(
                        "{} per-Δt factors for {} distinct spacings",
                        log_factors.len(),
                        dts.len()
                    )));
                }
                let raw: Vec<f64> = dts
                    .iter()
                    .zip(log_factors)
                    .map(|(d, u)| d * u.exp())
                    .collect();
                let total: f64 = raw.iter().zip(counts).map(|(r, &k)| r * k as f64).sum();
                raw.iter().map(|r| r * horizon / total).collect()
            }
        };
        if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::validation("weight positivity violated"));
        }
        Ok(w)
    }
}

/// `c(γ) = (T - γ Σ_i log Δt_i) / N` over classes.
pub fn log_intercept(gamma: f64, dts: &[f64], counts: &[usize], horizon: f64) -> f64 {
    let n: usize = counts.iter().sum();
    let log_sum: f64 = dts
        .iter()
        .zip(counts)
        .map(|(d, &k)| k as f64 * d.ln())
        .sum();
    (horizon - gamma * log_sum) / n as f64
}

/// Weighted spacings `w(Δt_i)`.
pub fn weight_apply(scheme: &WeightScheme, spacings: &[f64]) -> Result<Vec<f64>> {
    if spacings.is_empty() {
        return Err(Error::validation("no spacings"));
    }
    let (dts, class_of) = spacing_classes(spacings);
    let mut counts = vec![0; dts.len()];
    for &c in &class_of {
        counts[c] += 1;
    }
    let horizon: f64 = spacings.iter().sum();
    let w = scheme.class_weights(&dts, &counts, horizon)?;
    Ok(class_of.iter().map(|&c| w[c]).collect())
}

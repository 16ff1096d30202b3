use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::returns::ReturnsSeries;
use super::weights::WeightScheme;
use crate::cogarch::CogarchParams;
use crate::error::{Error, Result};
use crate::grid::spacing_classes;

/// How the conditional variance `ρ_i²` of a return is computed from
/// `σ²(t_{i-1})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RhoMode {
    /// `(σ² - β/(η-φ)) (e^{(η-φ)Δt} - 1)/(η-φ) + βΔt/(η-φ)`.
    Exact,
    /// `σ² Δt`.
    #[default]
    FirstOrder,
}

fn exact_rho2(sigma2_prev: f64, dt: f64, params: &CogarchParams) -> f64 {
    let a = params.eta - params.phi;
    let level = params.beta / a;
    (sigma2_prev - level) * ((a * dt).exp_m1() / a) + level * dt
}

/// `ρ² = E(Y² | F_{t_{i-1}})` given `σ²(t_{i-1})`.
pub fn conditional_variance(
    sigma2_prev: f64,
    dt: f64,
    params: &CogarchParams,
    mode: RhoMode,
) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::validation("Δt must be positive"));
    }
    match mode {
        RhoMode::FirstOrder => Ok(sigma2_prev * dt),
        RhoMode::Exact if params.eta == params.phi => Err(Error::validation(
            "exact conditional variance is undefined for η = φ",
        )),
        RhoMode::Exact => Ok(exact_rho2(sigma2_prev, dt, params)),
    }
}

/// `σ²_i = βΔt + e^{-ηΔt} σ²_{i-1} + φ e^{-ηΔt} Y²`.
pub fn volatility_recursion(sigma2_prev: f64, dt: f64, y: f64, params: &CogarchParams) -> f64 {
    let k = (-params.eta * dt).exp();
    params.beta * dt + k * (sigma2_prev + params.phi * y * y)
}

/// Returns and squared returns with the spacing classes the likelihood is
/// evaluated on. Weight schemes act per class, so every per-`Δt` quantity is
/// computed once per class.
#[derive(Debug, Clone)]
pub struct LikelihoodData {
    pub y2: Vec<f64>,
    pub class_of: Vec<usize>,
    pub class_dt: Vec<f64>,
    pub class_counts: Vec<usize>,
    pub horizon: f64,
}

impl LikelihoodData {
    pub fn new(series: &ReturnsSeries) -> Self {
        Self::from_parts(series.returns(), &series.spacings())
    }

    pub fn from_parts(returns: &[f64], spacings: &[f64]) -> Self {
        let (class_dt, class_of) = spacing_classes(spacings);
        let mut class_counts = vec![0; class_dt.len()];
        for &c in &class_of {
            class_counts[c] += 1;
        }
        LikelihoodData {
            y2: returns.iter().map(|y| y * y).collect(),
            class_of,
            class_dt,
            class_counts,
            horizon: spacings.iter().sum(),
        }
    }

    pub fn len(&self) -> usize {
        self.y2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y2.is_empty()
    }

    /// `L_N` with spacing `class_w[c]` for every return in class `c`;
    /// `-∞` for `η <= φ` or any non-finite or non-positive intermediate.
    /// When `path` is given it receives `σ²_0..σ²_N`.
    pub fn evaluate(
        &self,
        params: &CogarchParams,
        mode: RhoMode,
        class_w: &[f64],
        mut path: Option<&mut Vec<f64>>,
    ) -> f64 {
        let (beta, eta, phi) = (params.beta, params.eta, params.phi);
        if !(eta > phi) {
            return f64::NEG_INFINITY;
        }
        let a = eta - phi;
        let level = beta / a;
        // Per class: (w, βw, e^{-ηw}, (e^{aw}-1)/a).
        let consts: Vec<[f64; 4]> = class_w
            .iter()
            .map(|&w| [w, beta * w, (-eta * w).exp(), (a * w).exp_m1() / a])
            .collect();
        let mut sigma2 = level;
        if let Some(p) = path.as_deref_mut() {
            p.clear();
            p.push(sigma2);
        }
        let mut sum = 0.0;
        for (&y2, &c) in self.y2.iter().zip(&self.class_of) {
            let [w, bw, k, growth] = consts[c];
            let rho2 = match mode {
                RhoMode::FirstOrder => sigma2 * w,
                RhoMode::Exact => (sigma2 - level) * growth + level * w,
            };
            if !(rho2 > 0.0) {
                return f64::NEG_INFINITY;
            }
            sum += y2 / rho2 + rho2.ln();
            sigma2 = bw + k * (sigma2 + phi * y2);
            if let Some(p) = path.as_deref_mut() {
                p.push(sigma2);
            }
        }
        let value = -0.5 * sum - 0.5 * self.len() as f64 * (2.0 * PI).ln();
        if value.is_finite() {
            value
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Pseudo-log-likelihood
/// `L_N = -½ Σ Y_i²/ρ_i² - ½ Σ log ρ_i² - (N/2) log 2π`,
/// with `σ²` from [`volatility_recursion`] started at `β/(η-φ)` and every
/// `Δt_i` replaced by its weight. Returns `-∞` where undefined.
pub fn pseudo_log_likelihood(
    series: &ReturnsSeries,
    params: &CogarchParams,
    mode: RhoMode,
    scheme: &WeightScheme,
) -> f64 {
    let data = LikelihoodData::new(series);
    match scheme.class_weights(&data.class_dt, &data.class_counts, data.horizon) {
        Ok(w) => data.evaluate(params, mode, &w, None),
        Err(_) => f64::NEG_INFINITY,
    }
}

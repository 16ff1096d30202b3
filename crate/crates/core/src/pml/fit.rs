//! Multi-start Nelder–Mead maximization of the pseudo-log-likelihood in
//! `(log β, log η, log φ)`, optionally jointly with weight-scheme parameters.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::likelihood::{LikelihoodData, RhoMode};
use super::nelder_mead::{axis_simplex, minimize, NmOptions, NmResult};
use super::returns::ReturnsSeries;
use super::weights::{WeightFamily, WeightScheme};
use crate::cogarch::CogarchParams;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// Lower bound for every parameter during optimization.
pub const PARAM_FLOOR: f64 = 1e-12;
/// Upper bound for every parameter during optimization.
pub const PARAM_CEILING: f64 = 1e12;
const ETA0: f64 = 0.1;
const PHI0: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub mode: RhoMode,
    pub restarts: usize,
    pub xtol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Edge length of each starting simplex in log-parameter space.
    pub simplex_step: f64,
    /// Spacing weights held fixed by [`fit`].
    pub weights: WeightScheme,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            mode: RhoMode::default(),
            restarts: 10,
            xtol: 1e-14,
            max_iter: 20_000,
            seed: 0,
            simplex_step: 0.5,
            weights: WeightScheme::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StdErrors {
    pub beta: f64,
    pub eta: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: CogarchParams,
    pub log_likelihood: f64,
    /// From the observed information; `None` unless the Hessian in
    /// `(β, η, φ)` is negative definite.
    pub std_errors: Option<StdErrors>,
    pub hessian: [[f64; 3]; 3],
    pub hessian_negative_definite: bool,
    pub restarts: usize,
    pub failed_restarts: usize,
    /// Iterations of the winning run.
    pub iterations: usize,
    pub converged: bool,
    pub simplex_diameter: f64,
    /// Some estimate ended within a factor 1000 of [`PARAM_FLOOR`] or
    /// [`PARAM_CEILING`].
    pub hit_bound: bool,
    pub stationary: bool,
    pub mode: RhoMode,
    pub weights: WeightScheme,
    /// `σ²_0..σ²_N` from the likelihood recursion at the estimates.
    pub sigma2: Vec<f64>,
}

/// How the weight scheme depends on the free parameters beyond the first
/// three.
#[derive(Debug, Clone)]
enum FreeScheme {
    Fixed(WeightScheme),
    Log,
    PerDeltaT,
}

impl FreeScheme {
    fn scheme(&self, extra: &[f64]) -> WeightScheme {
        match self {
            FreeScheme::Fixed(s) => s.clone(),
            FreeScheme::Log => WeightScheme::LogParametric { gamma: extra[0] },
            FreeScheme::PerDeltaT => {
                let mut log_factors = vec![0.0];
                log_factors.extend_from_slice(extra);
                WeightScheme::PerDeltaT { log_factors }
            }
        }
    }
}

fn params_from_logs(x: &[f64]) -> Option<CogarchParams> {
    let (beta, eta, phi) = (x[0].exp(), x[1].exp(), x[2].exp());
    let ok = |v: f64| (PARAM_FLOOR..=PARAM_CEILING).contains(&v);
    (ok(beta) && ok(eta) && ok(phi)).then_some(CogarchParams { beta, eta, phi })
}

struct Problem<'a> {
    data: &'a LikelihoodData,
    mode: RhoMode,
    free: FreeScheme,
    fixed_weights: Option<Vec<f64>>,
}

impl Problem<'_> {
    fn new(data: &LikelihoodData, mode: RhoMode, free: FreeScheme) -> Result<Problem<'_>> {
        let fixed_weights = match &free {
            FreeScheme::Fixed(s) => {
                Some(s.class_weights(&data.class_dt, &data.class_counts, data.horizon)?)
            }
            _ => None,
        };
        Ok(Problem {
            data,
            mode,
            free,
            fixed_weights,
        })
    }

    fn log_likelihood(&self, x: &[f64], path: Option<&mut Vec<f64>>) -> f64 {
        let Some(params) = params_from_logs(x) else {
            return f64::NEG_INFINITY;
        };
        match &self.fixed_weights {
            Some(w) => self.data.evaluate(&params, self.mode, w, path),
            None => {
                let scheme = self.free.scheme(&x[3..]);
                match scheme.class_weights(
                    &self.data.class_dt,
                    &self.data.class_counts,
                    self.data.horizon,
                ) {
                    Ok(w) => self.data.evaluate(&params, self.mode, &w, path),
                    Err(_) => f64::NEG_INFINITY,
                }
            }
        }
    }

    fn run(&self, starts: &[Vec<f64>], config: &FitConfig) -> Result<(NmResult, usize)> {
        let opts = NmOptions {
            xtol: config.xtol,
            max_iter: config.max_iter,
        };
        let runs: Vec<Result<NmResult>> = starts
            .par_iter()
            .map(|x0| {
                minimize(
                    |x| -self.log_likelihood(x, None),
                    axis_simplex(x0, config.simplex_step),
                    &opts,
                )
            })
            .collect();
        let mut best: Option<NmResult> = None;
        let mut failed = 0;
        for run in runs {
            match run {
                Ok(r) if r.value.is_finite() => {
                    if best.as_ref().is_none_or(|b| r.value < b.value) {
                        best = Some(r);
                    }
                }
                _ => failed += 1,
            }
        }
        best.map(|b| (b, failed)).ok_or_else(|| {
            Error::numerical(format!(
                "all {} restarts failed to reach a finite likelihood",
                starts.len()
            ))
        })
    }

    fn result(&self, best: NmResult, failed: usize, config: &FitConfig) -> FitResult {
        let x = &best.x;
        let params = params_from_logs(x).expect("finite optimum lies inside the bounds");
        let mut sigma2 = Vec::new();
        let log_likelihood = self.log_likelihood(x, Some(&mut sigma2));
        let hessian = self.natural_hessian(x);
        let covariance = negate(&hessian).and_then(|m| inverse_spd(&m));
        let std_errors = covariance.map(|c| StdErrors {
            beta: c[0][0].sqrt(),
            eta: c[1][1].sqrt(),
            phi: c[2][2].sqrt(),
        });
        let near = |v: f64| !(PARAM_FLOOR * 1e3..=PARAM_CEILING / 1e3).contains(&v);
        FitResult {
            log_likelihood,
            std_errors,
            hessian,
            hessian_negative_definite: covariance.is_some(),
            restarts: config.restarts.max(1),
            failed_restarts: failed,
            iterations: best.iterations,
            converged: best.converged,
            simplex_diameter: best.diameter,
            hit_bound: near(params.beta) || near(params.eta) || near(params.phi),
            stationary: params.eta > params.phi,
            mode: self.mode,
            weights: self.free.scheme(&x[3..]),
            sigma2,
            params,
        }
    }

    /// Central-difference Hessian of `L` in `(log β, log η, log φ)` with
    /// step `1e-5 (1 + |x|)`, mapped to `(β, η, φ)`.
    fn natural_hessian(&self, x: &[f64]) -> [[f64; 3]; 3] {
        let h: Vec<f64> = x[..3].iter().map(|v| 1e-5 * (1.0 + v.abs())).collect();
        let f = |dx: &[(usize, f64)]| {
            let mut y = x.to_vec();
            for &(i, d) in dx {
                y[i] += d;
            }
            self.log_likelihood(&y, None)
        };
        let f0 = f(&[]);
        let pairs: Vec<(usize, usize)> = (0..3).flat_map(|i| (i..3).map(move |j| (i, j))).collect();
        let entries: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| {
                if i == j {
                    (f(&[(i, h[i])]) - 2.0 * f0 + f(&[(i, -h[i])])) / (h[i] * h[i])
                } else {
                    (f(&[(i, h[i]), (j, h[j])])
                        - f(&[(i, h[i]), (j, -h[j])])
                        - f(&[(i, -h[i]), (j, h[j])])
                        + f(&[(i, -h[i]), (j, -h[j])]))
                        / (4.0 * h[i] * h[j])
                }
            })
            .collect();
        let grad: Vec<f64> = (0..3)
            .map(|i| (f(&[(i, h[i])]) - f(&[(i, -h[i])])) / (2.0 * h[i]))
            .collect();
        let theta: Vec<f64> = x[..3].iter().map(|v| v.exp()).collect();
        let mut out = [[0.0; 3]; 3];
        for (&(i, j), &hij) in pairs.iter().zip(&entries) {
            // ∂²L/∂θ_i∂θ_j = (∂²L/∂x_i∂x_j - δ_ij ∂L/∂x_i) / (θ_i θ_j).
            let d = if i == j { grad[i] } else { 0.0 };
            out[i][j] = (hij - d) / (theta[i] * theta[j]);
            out[j][i] = out[i][j];
        }
        out
    }
}

fn negate(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return None;
    }
    Some(m.map(|row| row.map(|v| -v)))
}

/// Inverse of a symmetric positive-definite 3×3 matrix via Cholesky, or
/// `None` if it is not positive definite.
fn inverse_spd(a: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    let mut inv = [[0.0; 3]; 3];
    for col in 0..3 {
        // Solve L y = e_col, then Lᵀ x = y.
        let mut y = [0.0; 3];
        for i in 0..3 {
            let e = if i == col { 1.0 } else { 0.0 };
            y[i] = (e - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
        }
        let mut x = [0.0; 3];
        for i in (0..3).rev() {
            x[i] = (y[i] - (i + 1..3).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
        }
        for i in 0..3 {
            inv[i][col] = x[i];
        }
    }
    Some(inv)
}

/// `(log β_0, log η_0, log φ_0)` with `η_0 = 0.1`, `φ_0 = 0.05` and `β_0`
/// matching the stationary mean to the average squared return per unit
/// time.
fn base_point(data: &LikelihoodData) -> [f64; 3] {
    let v = data.y2.iter().sum::<f64>() / data.horizon;
    let beta = (v * (ETA0 - PHI0)).max(1e-10);
    [beta.ln(), ETA0.ln(), PHI0.ln()]
}

/// `starts[0]` as given, the rest by perturbing it: log parameters by
/// `U(-1, 1)`, scheme parameters by `U(-½, ½)`; `η > φ` is kept.
fn dispersed_starts(first: Vec<f64>, total: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut starts = vec![first.clone()];
    for r in 1..total {
        let mut rng = rng_from_seed(derive_seed(seed, r as u64));
        let mut x = first.clone();
        for (j, v) in x.iter_mut().enumerate() {
            let spread = if j < 3 { 1.0 } else { 0.5 };
            *v += spread * rng.random_range(-1.0..1.0);
        }
        if x[1] <= x[2] {
            x.swap(1, 2);
        }
        starts.push(x);
    }
    starts
}

/// Maximizes the pseudo-log-likelihood with the spacing weights in
/// `config.weights` held fixed.
pub fn fit(series: &ReturnsSeries, config: &FitConfig) -> Result<FitResult> {
    let data = LikelihoodData::new(series);
    fit_data(&data, config)
}

fn fit_data(data: &LikelihoodData, config: &FitConfig) -> Result<FitResult> {
    let problem = Problem::new(data, config.mode, FreeScheme::Fixed(config.weights.clone()))?;
    let starts = dispersed_starts(
        base_point(data).to_vec(),
        config.restarts.max(1),
        config.seed,
    );
    let (best, failed) = problem.run(&starts, config)?;
    Ok(problem.result(best, failed, config))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedFit {
    pub fit: FitResult,
    /// Optimized likelihoods of the fits used as warm starts, for
    /// comparison with `fit.log_likelihood`.
    pub nested: Vec<(WeightFamily, f64)>,
}

/// Least-squares slope of `Δt` on `log Δt` over all returns.
fn log_slope(data: &LikelihoodData) -> f64 {
    let n = data.len() as f64;
    let (mut sl, mut sd, mut sll, mut sld) = (0.0, 0.0, 0.0, 0.0);
    for (&d, &k) in data.class_dt.iter().zip(&data.class_counts) {
        let (l, k) = (d.ln(), k as f64);
        sl += k * l;
        sd += k * d;
        sll += k * l * l;
        sld += k * l * d;
    }
    let var = sll / n - (sl / n).powi(2);
    if var > 1e-12 {
        (sld / n - sl * sd / (n * n)) / var
    } else {
        0.0
    }
}

fn log_params(p: &CogarchParams) -> Vec<f64> {
    vec![p.beta.ln(), p.eta.ln(), p.phi.ln()]
}

/// Fits `(β, η, φ)` jointly with the parameters of a weight family.
///
/// `LogParametric` is started from the identity-weight optimum (with the
/// least-squares `γ` and with `γ = 0`); `PerDeltaT` from the log-weight
/// optimum and from the identity optimum, so its result is never below
/// either.
pub fn fit_weighted(
    series: &ReturnsSeries,
    family: WeightFamily,
    config: &FitConfig,
) -> Result<WeightedFit> {
    let data = LikelihoodData::new(series);
    let fixed = |scheme: WeightScheme| {
        fit_data(
            &data,
            &FitConfig {
                weights: scheme,
                ..config.clone()
            },
        )
    };
    match family {
        WeightFamily::Identity => Ok(WeightedFit {
            fit: fixed(WeightScheme::Identity)?,
            nested: vec![],
        }),
        WeightFamily::Constant => Ok(WeightedFit {
            fit: fixed(WeightScheme::Constant)?,
            nested: vec![],
        }),
        WeightFamily::LogParametric => {
            let identity = fixed(WeightScheme::Identity)?;
            let log = fit_log(&data, &identity, config)?;
            Ok(WeightedFit {
                fit: log,
                nested: vec![(WeightFamily::Identity, identity.log_likelihood)],
            })
        }
        WeightFamily::PerDeltaT => {
            let identity = fixed(WeightScheme::Identity)?;
            let k = data.class_dt.len();
            if k == 1 {
                return Ok(WeightedFit {
                    nested: vec![(WeightFamily::Identity, identity.log_likelihood)],
                    fit: FitResult {
                        weights: WeightScheme::PerDeltaT {
                            log_factors: vec![0.0],
                        },
                        ..identity
                    },
                });
            }
            let log = fit_log(&data, &identity, config)?;
            let log_w =
                log.weights
                    .class_weights(&data.class_dt, &data.class_counts, data.horizon)?;
            let u = |w: &[f64]| -> Vec<f64> {
                let base = (w[0] / data.class_dt[0]).ln();
                (1..k)
                    .map(|c| (w[c] / data.class_dt[c]).ln() - base)
                    .collect()
            };
            let mut from_log = log_params(&log.params);
            from_log.extend(u(&log_w));
            let mut from_identity = log_params(&identity.params);
            from_identity.extend(vec![0.0; k - 1]);
            let mut starts = dispersed_starts(from_log, config.restarts.max(2) - 1, config.seed);
            starts.insert(1, from_identity);
            let problem = Problem::new(&data, config.mode, FreeScheme::PerDeltaT)?;
            let (best, failed) = problem.run(&starts, config)?;
            Ok(WeightedFit {
                fit: problem.result(best, failed, config),
                nested: vec![
                    (WeightFamily::Identity, identity.log_likelihood),
                    (WeightFamily::LogParametric, log.log_likelihood),
                ],
            })
        }
    }
}

fn fit_log(data: &LikelihoodData, identity: &FitResult, config: &FitConfig) -> Result<FitResult> {
    let mut with_slope = log_params(&identity.params);
    with_slope.push(log_slope(data));
    let mut with_zero = log_params(&identity.params);
    with_zero.push(0.0);
    let mut starts = dispersed_starts(with_slope, config.restarts.max(2) - 1, config.seed);
    starts.insert(1, with_zero);
    let problem = Problem::new(data, config.mode, FreeScheme::Log)?;
    let (best, failed) = problem.run(&starts, config)?;
    Ok(problem.result(best, failed, config))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_inverse() {
        let a = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let inv = inverse_spd(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a[i][k] * inv[k][j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        assert!(inverse_spd(&[[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).is_none());
    }

    #[test]
    fn slope_of_log_spacings() {
        let data = LikelihoodData::from_parts(&[0.1; 4], &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(log_slope(&data), 0.0);
        let e = std::f64::consts::E;
        let data = LikelihoodData::from_parts(&[0.1; 2], &[1.0, e]);
        assert!((log_slope(&data) - (e - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn starts_are_deterministic_and_stationary() {
        let a = dispersed_starts(vec![0.0, -2.0, -3.0], 10, 7);
        let b = dispersed_starts(vec![0.0, -2.0, -3.0], 10, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        assert!(a.iter().all(|x| x[1] > x[2]));
    }
}

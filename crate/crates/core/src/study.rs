//! Monte Carlo studies of the PML estimator: simulate, fit, aggregate.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cogarch::{simulate_exact_at, stationary_sigma0, CogarchParams};
use crate::error::{Error, Result};
use crate::grid::interleaved_spacings;
use crate::levy::{simulate_levy_path, LevySpec};
use crate::pml::{fit, FitConfig, ReturnsSeries};
use crate::rng::{derive_seed, rng_from_seed};

/// Time simulated and discarded before the first observation.
pub const DEFAULT_BURN_IN: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GridTemplate {
    EquallySpaced {
        cells: usize,
        dt: f64,
    },
    /// `(Δt, count)` rows, laid out by [`interleaved_spacings`]; with
    /// `shuffle` every replication gets its own random order.
    FrequencyTable {
        table: Vec<(f64, usize)>,
        #[serde(default)]
        shuffle: bool,
    },
}

impl GridTemplate {
    /// Spacing sequence for a replication seeded with `seed`.
    pub fn spacings(&self, seed: u64) -> Result<Vec<f64>> {
        match self {
            GridTemplate::EquallySpaced { cells, dt } => {
                if *cells == 0 || !(*dt > 0.0) {
                    return Err(Error::validation(
                        "equally spaced grid needs cells > 0 and Δt > 0",
                    ));
                }
                Ok(vec![*dt; *cells])
            }
            GridTemplate::FrequencyTable { table, shuffle } => {
                let mut s = interleaved_spacings(table)?;
                if *shuffle {
                    s.shuffle(&mut rng_from_seed(seed));
                }
                Ok(s)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyDesign {
    pub truth: CogarchParams,
    pub driver: LevySpec,
    pub grid: GridTemplate,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
}

fn default_burn_in() -> f64 {
    DEFAULT_BURN_IN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub index: usize,
    pub seed: u64,
    pub estimate: Option<CogarchParams>,
    pub log_likelihood: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub mae: f64,
    pub rmse: f64,
    pub rel_rmse: f64,
    /// Standard error of `mean` across replications.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub design: StudyDesign,
    pub beta: ParamSummary,
    pub phi: ParamSummary,
    pub eta: ParamSummary,
    pub successes: usize,
    pub failures: usize,
    pub replications: Vec<Replication>,
}

/// Mean, bias, MAE, RMSE and relative RMSE of `estimates` around `truth`.
pub fn aggregate(estimates: &[f64], truth: f64) -> Result<ParamSummary> {
    if estimates.is_empty() {
        return Err(Error::validation("no estimates to aggregate"));
    }
    let r = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / r;
    let mae = estimates.iter().map(|e| (e - truth).abs()).sum::<f64>() / r;
    let rmse = (estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / r).sqrt();
    let std_error = if estimates.len() > 1 {
        let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (r - 1.0);
        (var / r).sqrt()
    } else {
        0.0
    };
    Ok(ParamSummary {
        truth,
        mean,
        bias: mean - truth,
        mae,
        rmse,
        rel_rmse: rmse / truth.abs(),
        std_error,
    })
}

/// Returns of the exact COGARCH observed with `spacings` after `burn_in`.
pub fn simulate_returns(
    driver: &LevySpec,
    truth: &CogarchParams,
    spacings: &[f64],
    burn_in: f64,
    seed: u64,
) -> Result<ReturnsSeries> {
    if !(burn_in >= 0.0) {
        return Err(Error::validation("burn-in must be non-negative"));
    }
    let sigma0 = stationary_sigma0(truth)?;
    let mut times = Vec::with_capacity(spacings.len() + 1);
    let mut t = burn_in;
    times.push(t);
    for &dt in spacings {
        t += dt;
        times.push(t);
    }
    let path = simulate_levy_path(driver, t, seed)?;
    let exact = simulate_exact_at(&path, truth, sigma0, &times)?;
    let g: Vec<f64> = times
        .iter()
        .map(|&s| exact.at(s).map(|v| v.0).unwrap_or(0.0))
        .collect();
    let returns = g.windows(2).map(|w| w[1] - w[0]).collect();
    ReturnsSeries::from_spacings(spacings, returns)
}

fn replicate(design: &StudyDesign, index: usize) -> Replication {
    let seed = derive_seed(design.master_seed, index as u64);
    let outcome = design
        .grid
        .spacings(seed)
        .and_then(|s| simulate_returns(&design.driver, &design.truth, &s, design.burn_in, seed))
        .and_then(|series| fit(&series, &design.fit));
    let (estimate, log_likelihood, failure) = match outcome {
        Ok(f) if f.hit_bound => (None, None, Some("estimate at parameter bound".to_string())),
        Ok(f) => (Some(f.params), Some(f.log_likelihood), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    Replication {
        index,
        seed,
        estimate,
        log_likelihood,
        failure,
    }
}

/// Simulates and fits `design.replications` series in parallel; failed fits
/// are counted and left out of the summaries.
pub fn run_study(design: &StudyDesign) -> Result<StudyReport> {
    if design.replications == 0 {
        return Err(Error::validation("need at least one replication"));
    }
    if !design.truth.is_stationary() {
        return Err(Error::validation("stationarity requires η > φ"));
    }
    let replications: Vec<Replication> = (0..design.replications)
        .into_par_iter()
        .map(|i| replicate(design, i))
        .collect();
    let ok: Vec<CogarchParams> = replications.iter().filter_map(|r| r.estimate).collect();
    if ok.is_empty() {
        let reason = replications
            .iter()
            .find_map(|r| r.failure.clone())
            .unwrap_or_default();
        return Err(Error::numerical(format!(
            "every replication failed ({reason})"
        )));
    }
    let column = |f: fn(&CogarchParams) -> f64| ok.iter().map(f).collect::<Vec<_>>();
    let t = &design.truth;
    Ok(StudyReport {
        beta: aggregate(&column(|p| p.beta), t.beta)?,
        phi: aggregate(&column(|p| p.phi), t.phi)?,
        eta: aggregate(&column(|p| p.eta), t.eta)?,
        successes: ok.len(),
        failures: replications.len() - ok.len(),
        design: design.clone(),
        replications,
    })
}

impl StudyReport {
    /// Plain-text table with columns β, φ, η.
    pub fn table(&self) -> String {
        let cols = [&self.beta, &self.phi, &self.eta];
        let mut s = String::new();
        let _ = writeln!(s, "{:<10}{:>12}{:>12}{:>12}", "", "beta", "phi", "eta");
        type Row = (&'static str, fn(&ParamSummary) -> f64);
        let rows: [Row; 7] = [
            ("true", |p| p.truth),
            ("mean", |p| p.mean),
            ("bias", |p| p.bias),
            ("MAE", |p| p.mae),
            ("RMSE", |p| p.rmse),
            ("rel RMSE", |p| p.rel_rmse),
            ("s.e.", |p| p.std_error),
        ];
        for (name, f) in rows {
            let _ = write!(s, "{name:<10}");
            for c in cols {
                let _ = write!(s, "{:>12.4}", f(c));
            }
            s.push('\n');
        }
        let _ = writeln!(
            s,
            "replications: {} ok, {} failed",
            self.successes, self.failures
        );
        s
    }
}

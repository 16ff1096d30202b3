//! CSV ingestion and output, run configuration and the synthetic
//! index-like dataset.
//!
//! Series files are CSV with a `time,value` header. Lines starting with `#`
//! are comments; outputs start with `# config_hash=<hex> seed=<u64>`. Floats
//! are written with 17 significant digits so they read back bit-identically.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cogarch::{BivariatePath, CogarchParams, Sigma0Policy};
use crate::embedding::{ConvergenceReport, EmbeddedSeries};
use crate::error::{Error, Result};
use crate::grid::{interleaved_spacings, spacing_classes, ASX_FREQUENCIES};
use crate::levy::{JumpDist, LevyPath, LevySpec};
use crate::pml::FitConfig;
use crate::pml::{beta_from_annualized, ReturnsSeries, DAYS_PER_YEAR};
use crate::study::{simulate_returns, GridTemplate, StudyReport, DEFAULT_BURN_IN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum IngestMode {
    /// Prices or index levels; returns are differences of logs.
    #[default]
    Prices,
    /// Values are the returns themselves; the first row's value is ignored.
    Returns,
    /// Values are levels of the integrated process; returns are differences.
    Levels,
}

/// `{:.16e}`: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Reproducibility stamp written at the top of every output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputHeader {
    pub config_hash: String,
    pub seed: u64,
}

impl OutputHeader {
    pub fn write_comment<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# config_hash={} seed={}", self.config_hash, self.seed)?;
        Ok(())
    }
}

/// Reads a `time,value` series.
pub fn read_series(path: &Path, mode: IngestMode) -> Result<ReturnsSeries> {
    parse_series(File::open(path)?, mode)
}

pub fn parse_series<R: Read>(reader: R, mode: IngestMode) -> Result<ReturnsSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() {
        return Err(Error::validation("empty series file"));
    }
    if header != vec!["time", "value"] {
        let line = header.position().map_or(1, |p| p.line() as usize);
        return Err(Error::Parse {
            line,
            message: format!(
                "expected header `time,value`, found `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut times: Vec<f64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parse_err = |message: String| Error::Parse { line, message };
        if record.len() != 2 {
            return Err(parse_err(format!(
                "expected 2 fields, found {}",
                record.len()
            )));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            let v: f64 = s
                .parse()
                .map_err(|_| parse_err(format!("{what} `{s}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(format!("{what} `{s}` is not finite")));
            }
            Ok(v)
        };
        let t = num(&record[0], "time")?;
        let v = num(&record[1], "value")?;
        if let Some(&prev) = times.last() {
            if t == prev {
                return Err(parse_err(format!("duplicate time {t}")));
            }
            if t < prev {
                return Err(parse_err(format!(
                    "time {t} is before the previous time {prev}"
                )));
            }
        }
        if mode == IngestMode::Prices && !(v > 0.0) {
            return Err(parse_err(format!("price {v} must be positive")));
        }
        times.push(t);
        values.push(v);
    }
    if times.len() < 4 {
        return Err(Error::validation(format!(
            "need at least 4 rows, found {}",
            times.len()
        )));
    }
    let returns = match mode {
        IngestMode::Prices => values.windows(2).map(|w| w[1].ln() - w[0].ln()).collect(),
        IngestMode::Levels => values.windows(2).map(|w| w[1] - w[0]).collect(),
        IngestMode::Returns => values[1..].to_vec(),
    };
    ReturnsSeries::new(times, returns)
}

/// Writes `series` as `time,value` in returns mode (first value 0).
pub fn write_returns<W: Write>(
    w: &mut W,
    series: &ReturnsSeries,
    header: &OutputHeader,
) -> Result<()> {
    header.write_comment(w)?;
    writeln!(w, "time,value")?;
    let origin = series.origin();
    writeln!(
        w,
        "{},{}",
        fmt_f64(series.times()[0] + origin),
        fmt_f64(0.0)
    )?;
    for (t, y) in series.times()[1..].iter().zip(series.returns()) {
        writeln!(w, "{},{}", fmt_f64(t + origin), fmt_f64(*y))?;
    }
    Ok(())
}

/// Distinct spacings (matched within a relative `1e-9`) with their counts,
/// ascending.
pub fn frequency_table(series: &ReturnsSeries) -> Vec<(f64, usize)> {
    let (values, classes) = spacing_classes(&series.spacings());
    let mut counts = vec![0; values.len()];
    for c in classes {
        counts[c] += 1;
    }
    values.into_iter().zip(counts).collect()
}

pub fn write_path<W: Write>(w: &mut W, path: &BivariatePath, header: &OutputHeader) -> Result<()> {
    header.write_comment(w)?;
    writeln!(w, "time,G,sigma2,flavor")?;
    for i in 0..path.len() {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(path.times[i]),
            fmt_f64(path.g[i]),
            fmt_f64(path.sigma2[i]),
            path.flavor.as_str()
        )?;
    }
    Ok(())
}

pub fn write_jumps<W: Write>(w: &mut W, path: &LevyPath, header: &OutputHeader) -> Result<()> {
    header.write_comment(w)?;
    writeln!(w, "time,jump_size")?;
    for j in &path.jumps {
        writeln!(w, "{},{}", fmt_f64(j.time), fmt_f64(j.size))?;
    }
    Ok(())
}

pub fn write_embedded<W: Write>(
    w: &mut W,
    series: &EmbeddedSeries,
    header: &OutputHeader,
) -> Result<()> {
    header.write_comment(w)?;
    writeln!(w, "index,time,tau,epsilon,G,sigma2")?;
    let rows = series
        .grid()
        .times()
        .iter()
        .zip(&series.g)
        .zip(&series.sigma2);
    for (i, ((t, g), s)) in rows.enumerate() {
        let (tau, eps) = match i.checked_sub(1).map(|c| &series.innovations.cells[c]) {
            Some(cell) => (
                cell.tau.map(fmt_f64).unwrap_or_default(),
                fmt_f64(cell.epsilon),
            ),
            None => (String::new(), String::new()),
        };
        writeln!(
            w,
            "{i},{},{tau},{eps},{},{}",
            fmt_f64(*t),
            fmt_f64(*g),
            fmt_f64(*s)
        )?;
    }
    Ok(())
}

pub fn write_convergence<W: Write>(
    w: &mut W,
    report: &ConvergenceReport,
    header: &OutputHeader,
) -> Result<()> {
    header.write_comment(w)?;
    writeln!(w, "resolution,supG_median,supSigma_median,bound_median")?;
    for l in &report.levels {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(l.mesh),
            fmt_f64(l.median_sup_g),
            fmt_f64(l.median_sup_sigma2),
            fmt_f64(l.median_bound)
        )?;
    }
    Ok(())
}

/// `t, sigma2_hat, annualized_vol` with `annualized_vol = √(365 σ̂²)`.
pub fn write_filtered<W: Write>(
    w: &mut W,
    series: &ReturnsSeries,
    sigma2: &[f64],
    header: &OutputHeader,
) -> Result<()> {
    if sigma2.len() != series.times().len() {
        return Err(Error::validation(
            "one filtered variance per observation time expected",
        ));
    }
    header.write_comment(w)?;
    writeln!(w, "t,sigma2_hat,annualized_vol")?;
    for (t, s) in series.times().iter().zip(sigma2) {
        writeln!(
            w,
            "{},{},{}",
            fmt_f64(t + series.origin()),
            fmt_f64(*s),
            fmt_f64((DAYS_PER_YEAR * s).sqrt())
        )?;
    }
    Ok(())
}

/// Per-replication estimates of a study.
pub fn write_study_estimates<W: Write>(
    w: &mut W,
    report: &StudyReport,
    header: &OutputHeader,
) -> Result<()> {
    header.write_comment(w)?;
    writeln!(w, "replication,seed,beta,phi,eta,log_likelihood,failure")?;
    for r in &report.replications {
        let (b, p, e) = match &r.estimate {
            Some(est) => (fmt_f64(est.beta), fmt_f64(est.phi), fmt_f64(est.eta)),
            None => Default::default(),
        };
        let ll = r.log_likelihood.map(fmt_f64).unwrap_or_default();
        let failure = r.failure.as_deref().unwrap_or("").replace(',', ";");
        writeln!(w, "{},{},{b},{p},{e},{ll},{failure}", r.index, r.seed)?;
    }
    Ok(())
}

/// Observation grid of `simulate`/`embed` runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub horizon: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    pub horizon: f64,
    pub ladder: Vec<usize>,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub grid: GridTemplate,
    pub replications: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
}

fn default_burn_in() -> f64 {
    DEFAULT_BURN_IN
}

/// Everything a run may need; each subcommand reads its own sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub driver: Option<LevySpec>,
    pub params: Option<CogarchParams>,
    pub sigma0: Option<Sigma0Policy>,
    pub grid: Option<GridConfig>,
    pub euler_step: Option<f64>,
    pub converge: Option<ConvergeConfig>,
    pub fit: Option<FitConfig>,
    pub study: Option<StudyConfig>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 (hex) of the canonical JSON form.
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&json)))
    }
}

/// Published estimates for the daily index series: `√(365β) = 0.0237`,
/// `η = 0.0847`, `φ = 0.0685`.
pub fn asx_estimates() -> CogarchParams {
    CogarchParams {
        beta: beta_from_annualized(0.0237),
        eta: 0.0847,
        phi: 0.0685,
    }
}

/// Jump diffusion with `ς = 0.5` and unit jump rate, so that no simulated
/// return is exactly zero.
pub fn asx_driver() -> LevySpec {
    LevySpec::jump_diffusion(0.5, 1.0, JumpDist::StandardNormal).expect("valid driver")
}

/// A synthetic daily series with the index's spacing frequencies, simulated
/// from [`asx_estimates`] with [`asx_driver`].
pub fn synthetic_asx(seed: u64) -> Result<ReturnsSeries> {
    let spacings = interleaved_spacings(&ASX_FREQUENCIES)?;
    simulate_returns(
        &asx_driver(),
        &asx_estimates(),
        &spacings,
        DEFAULT_BURN_IN,
        seed,
    )
}

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cogarch::cogarch::{euler_oracle, simulate_exact};
use cogarch::embedding::{convergence_study, embed, lift, skorokhod_bound, ConvergenceConfig};
use cogarch::io::{self, GridConfig, IngestMode, OutputHeader, RunConfig};
use cogarch::levy::{
    choose_threshold, extract_innovations, simulate_levy_path, JumpDist, ThresholdChoice,
};
use cogarch::pml::{
    filter_volatility, fit_weighted, long_run_volatility, transform_to_garch, FilterVariant,
    GarchTransform, RhoMode, WeightFamily,
};
use cogarch::study::{run_study, StudyDesign};
use cogarch::{CogarchParams, Error, FitResult, Grid, LevySpec, ReturnsSeries};

/// Simulate, embed and estimate COGARCH(1,1) processes.
#[derive(Parser)]
#[command(name = "cogarch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration file.
    #[arg(long, env = "COGARCH_SEED")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a driver path and the exact COGARCH on a uniform grid.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Exact path (every event time) as `time,G,sigma2,flavor`.
        #[arg(long)]
        out: PathBuf,
        /// Grid returns as a `time,value` file readable by `fit --mode returns`.
        #[arg(long)]
        returns_out: Option<PathBuf>,
        /// Euler oracle sampled on the grid; step from `euler_step`.
        #[arg(long)]
        euler_out: Option<PathBuf>,
        /// Jump times and sizes of the driver.
        #[arg(long)]
        jumps_out: Option<PathBuf>,
    },
    /// Build the GARCH embedding of a simulated path and bound its distance
    /// to the exact process.
    Embed {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Lifted piecewise-constant path.
        #[arg(long)]
        lift_out: Option<PathBuf>,
        /// Jump threshold; chosen from the grid by default.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Median distance bounds across seeds along a ladder of grids.
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Full report including per-seed bounds.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Fit a series by pseudo-maximum likelihood.
    Fit {
        #[command(flatten)]
        common: Common,
        /// `time,value` CSV.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "prices")]
        mode: Mode,
        #[arg(long, value_enum)]
        rho: Option<Rho>,
        #[arg(long, value_enum, default_value = "identity")]
        weights: Weights,
        /// Estimates, standard errors and GARCH transforms as JSON.
        #[arg(long)]
        out: PathBuf,
        /// Filtered variances and annualized volatility.
        #[arg(long)]
        filtered: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "unit-step")]
        filter: Filter,
    },
    /// Monte Carlo study of the estimator.
    McStudy {
        #[command(flatten)]
        common: Common,
        /// Summary as JSON.
        #[arg(long)]
        out: PathBuf,
        /// One row per replication.
        #[arg(long)]
        estimates: Option<PathBuf>,
        /// Overrides `study.replications`.
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Write a synthetic daily series with the index's spacing frequencies.
    GenerateAsx {
        #[arg(long, env = "COGARCH_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Prices,
    Returns,
    Levels,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rho {
    Exact,
    FirstOrder,
}

#[derive(Clone, Copy, ValueEnum)]
enum Weights {
    Identity,
    Constant,
    Log,
    PerDt,
}

#[derive(Clone, Copy, ValueEnum)]
enum Filter {
    UnitStep,
    Spacing,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e
                .chain()
                .any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::Numerical(_))));
            ExitCode::from(if numerical { 2 } else { 1 })
        }
    }
}

fn load(common: &Common) -> Result<(RunConfig, OutputHeader)> {
    let mut config = match &common.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = Some(seed);
    }
    let seed = *config.seed.get_or_insert(0);
    let header = OutputHeader {
        config_hash: config.hash()?,
        seed,
    };
    Ok((config, header))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn driver(config: &RunConfig) -> Result<LevySpec> {
    match &config.driver {
        Some(d) => Ok(*d),
        None => Ok(LevySpec::compound_poisson(1.0, JumpDist::StandardNormal)?),
    }
}

fn params(config: &RunConfig) -> Result<CogarchParams> {
    match config.params {
        Some(p) => Ok(p),
        None => Ok(CogarchParams::new(1.0, 0.06, 0.0425)?),
    }
}

fn grid(config: &RunConfig) -> Result<Grid> {
    let g = config.grid.clone().unwrap_or(GridConfig {
        horizon: 100.0,
        cells: 100,
    });
    Ok(Grid::uniform(g.horizon, g.cells)?)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            common,
            out,
            returns_out,
            euler_out,
            jumps_out,
        } => {
            let (config, header) = load(&common)?;
            let (spec, params, grid) = (driver(&config)?, params(&config)?, grid(&config)?);
            let sigma0 = config.sigma0.unwrap_or_default().resolve(&params)?;
            let path = simulate_levy_path(&spec, grid.horizon(), header.seed)?;
            let exact = simulate_exact(&path, &params, &grid, sigma0)?;
            let mut w = create(&out)?;
            io::write_path(&mut w, &exact, &header)?;
            w.flush()?;
            if let Some(p) = returns_out {
                let g: Vec<f64> = grid
                    .times()
                    .iter()
                    .map(|&t| exact.at(t).map_or(0.0, |v| v.0))
                    .collect();
                let returns = g.windows(2).map(|w| w[1] - w[0]).collect();
                let series = ReturnsSeries::new(grid.times().to_vec(), returns)?;
                let mut w = create(&p)?;
                io::write_returns(&mut w, &series, &header)?;
                w.flush()?;
            }
            if let Some(p) = euler_out {
                let step = config.euler_step.unwrap_or(1e-3);
                let euler = euler_oracle(&path, &params, sigma0, step, grid.times())?;
                let mut w = create(&p)?;
                io::write_path(&mut w, &euler, &header)?;
                w.flush()?;
            }
            if let Some(p) = jumps_out {
                let mut w = create(&p)?;
                io::write_jumps(&mut w, &path, &header)?;
                w.flush()?;
            }
            eprintln!(
                "simulated {} jumps on [0, {}], sigma2(0) = {sigma0}",
                path.jumps.len(),
                grid.horizon()
            );
        }
        Command::Embed {
            common,
            out,
            lift_out,
            threshold,
        } => {
            let (config, header) = load(&common)?;
            let (spec, params, grid) = (driver(&config)?, params(&config)?, grid(&config)?);
            let sigma0 = config.sigma0.unwrap_or_default().resolve(&params)?;
            let choice = match threshold {
                Some(m) => ThresholdChoice {
                    cutoff: m,
                    rate_condition_met: true,
                    warning: None,
                },
                None => choose_threshold(&grid, &spec),
            };
            if let Some(w) = &choice.warning {
                eprintln!("warning: {w}");
            }
            let path = simulate_levy_path(&spec, grid.horizon(), header.seed)?;
            let innovations = extract_innovations(&path, &grid, choice.cutoff, &spec)?;
            let series = embed(&innovations, &params, sigma0)?;
            let exact = simulate_exact(&path, &params, &grid, sigma0)?;
            let bound = skorokhod_bound(&series, &exact)?;
            let mut w = create(&out)?;
            io::write_embedded(&mut w, &series, &header)?;
            w.flush()?;
            if let Some(p) = lift_out {
                let mut w = create(&p)?;
                io::write_path(&mut w, &lift(&series), &header)?;
                w.flush()?;
            }
            println!("{}", serde_json::to_string_pretty(&bound)?);
        }
        Command::Converge { common, out, json } => {
            let (config, header) = load(&common)?;
            let section = config
                .converge
                .clone()
                .context("configuration needs a [converge] section")?;
            let report = convergence_study(&ConvergenceConfig {
                driver: driver(&config)?,
                params: params(&config)?,
                horizon: section.horizon,
                ladder: section.ladder,
                seeds: section.seeds,
                master_seed: header.seed,
                sigma0: config.sigma0.unwrap_or_default(),
            })?;
            let mut w = create(&out)?;
            io::write_convergence(&mut w, &report, &header)?;
            w.flush()?;
            if let Some(p) = json {
                write_json(&p, &report)?;
            }
            if !report.monotone {
                eprintln!("warning: median bound is not strictly decreasing along the ladder");
            }
        }
        Command::Fit {
            common,
            input,
            mode,
            rho,
            weights,
            out,
            filtered,
            filter,
        } => {
            let (config, header) = load(&common)?;
            let mode = match mode {
                Mode::Prices => IngestMode::Prices,
                Mode::Returns => IngestMode::Returns,
                Mode::Levels => IngestMode::Levels,
            };
            let series = io::read_series(&input, mode)
                .with_context(|| format!("reading {}", input.display()))?;
            let mut fit_config = config.fit.clone().unwrap_or_default();
            fit_config.seed = header.seed;
            if let Some(r) = rho {
                fit_config.mode = match r {
                    Rho::Exact => RhoMode::Exact,
                    Rho::FirstOrder => RhoMode::FirstOrder,
                };
            }
            let family = match weights {
                Weights::Identity => WeightFamily::Identity,
                Weights::Constant => WeightFamily::Constant,
                Weights::Log => WeightFamily::LogParametric,
                Weights::PerDt => WeightFamily::PerDeltaT,
            };
            if family != WeightFamily::Identity && series.returns().contains(&0.0) {
                eprintln!(
                    "warning: zero returns present; a weighted likelihood can grow without bound as a spacing's weight goes to zero"
                );
            }
            let weighted = fit_weighted(&series, family, &fit_config)?;
            let fit = &weighted.fit;
            if !fit.converged {
                eprintln!("warning: optimizer stopped at the iteration cap");
            }
            if !fit.hessian_negative_definite {
                eprintln!("warning: Hessian is not negative definite; no standard errors");
            }
            if !fit.stationary {
                eprintln!("warning: estimates violate η > φ");
            }
            let frequencies = io::frequency_table(&series);
            let transforms = frequencies
                .iter()
                .map(|&(dt, _)| transform_to_garch(&fit.params, dt))
                .collect::<cogarch::Result<Vec<GarchTransform>>>()?;
            let report = FitReport {
                header: &header,
                observations: series.len(),
                frequencies: &frequencies,
                fit,
                nested: &weighted.nested,
                long_run_volatility: long_run_volatility(&fit.params).ok(),
                garch: &transforms,
            };
            write_json(&out, &report)?;
            if let Some(p) = filtered {
                let variant = match filter {
                    Filter::UnitStep => FilterVariant::UnitStep,
                    Filter::Spacing => FilterVariant::Spacing,
                };
                let sigma2 = filter_volatility(&series, &fit.params, variant)?;
                let mut w = create(&p)?;
                io::write_filtered(&mut w, &series, &sigma2, &header)?;
                w.flush()?;
            }
            let p = fit.params;
            println!(
                "beta = {:.6e}  eta = {:.6}  phi = {:.6}  log-likelihood = {:.4}",
                p.beta, p.eta, p.phi, fit.log_likelihood
            );
        }
        Command::McStudy {
            common,
            out,
            estimates,
            replications,
        } => {
            let (config, header) = load(&common)?;
            let section = config
                .study
                .clone()
                .context("configuration needs a [study] section")?;
            let design = StudyDesign {
                truth: params(&config)?,
                driver: driver(&config)?,
                grid: section.grid,
                replications: replications.unwrap_or(section.replications),
                master_seed: header.seed,
                fit: config.fit.clone().unwrap_or_default(),
                burn_in: section.burn_in,
            };
            let report = run_study(&design)?;
            write_json(
                &out,
                &StudySummary {
                    header: &header,
                    design: &report.design,
                    beta: &report.beta,
                    phi: &report.phi,
                    eta: &report.eta,
                    successes: report.successes,
                    failures: report.failures,
                },
            )?;
            if let Some(p) = estimates {
                let mut w = create(&p)?;
                io::write_study_estimates(&mut w, &report, &header)?;
                w.flush()?;
            }
            print!("{}", report.table());
        }
        Command::GenerateAsx { seed, out } => {
            let series = io::synthetic_asx(seed)?;
            let header = OutputHeader {
                config_hash: RunConfig {
                    seed: Some(seed),
                    driver: Some(io::asx_driver()),
                    params: Some(io::asx_estimates()),
                    ..RunConfig::default()
                }
                .hash()?,
                seed,
            };
            let mut w = create(&out)?;
            io::write_returns(&mut w, &series, &header)?;
            w.flush()?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct FitReport<'a> {
    header: &'a OutputHeader,
    observations: usize,
    frequencies: &'a [(f64, usize)],
    fit: &'a FitResult,
    nested: &'a [(WeightFamily, f64)],
    long_run_volatility: Option<f64>,
    garch: &'a [GarchTransform],
}

#[derive(Serialize)]
struct StudySummary<'a> {
    header: &'a OutputHeader,
    design: &'a StudyDesign,
    beta: &'a cogarch::study::ParamSummary,
    phi: &'a cogarch::study::ParamSummary,
    eta: &'a cogarch::study::ParamSummary,
    successes: usize,
    failures: usize,
}

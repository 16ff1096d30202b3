//! Discrete GARCH embedding of a COGARCH on a (possibly irregular) grid and
//! pathwise distance diagnostics against the exact process.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cogarch::{simulate_exact, BivariatePath, CogarchParams, PathFlavor, Sigma0Policy};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::levy::{
    choose_threshold, extract_innovations, simulate_levy_path, InnovationSet, LevySpec,
};
use crate::rng::derive_seed;

/// `(G_i, σ²_i)`, `i = 0..N`, driven by an innovation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedSeries {
    pub innovations: InnovationSet,
    pub params: CogarchParams,
    pub g: Vec<f64>,
    pub sigma2: Vec<f64>,
}

impl EmbeddedSeries {
    pub fn grid(&self) -> &Grid {
        &self.innovations.grid
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma2[0]
    }
}

/// Runs
/// `G_i = G_{i-1} + σ_{i-1} √Δt_i ε_i` and
/// `σ²_i = βΔt_i + (1 + φΔt_i ε_i²) e^{-ηΔt_i} σ²_{i-1}`.
pub fn embed(
    innovations: &InnovationSet,
    params: &CogarchParams,
    sigma0: f64,
) -> Result<EmbeddedSeries> {
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(Error::validation("σ²(0) must be positive"));
    }
    let n = innovations.cells.len();
    let mut g = Vec::with_capacity(n + 1);
    let mut sigma2 = Vec::with_capacity(n + 1);
    g.push(0.0);
    sigma2.push(sigma0);
    for (i, cell) in innovations.cells.iter().enumerate() {
        let dt = innovations.grid.spacing(i);
        let (g_prev, s_prev) = (g[i], sigma2[i]);
        let eps = cell.epsilon;
        g.push(g_prev + (s_prev * dt).sqrt() * eps);
        sigma2.push(
            params.beta * dt
                + (1.0 + params.phi * dt * eps * eps) * (-params.eta * dt).exp() * s_prev,
        );
    }
    Ok(EmbeddedSeries {
        innovations: innovations.clone(),
        params: *params,
        g,
        sigma2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplicitCheck {
    pub max_abs: f64,
    pub max_rel: f64,
}

/// Recomputes every `σ²_i` from the product form
/// `σ²_i = β Σ_j Δt_j Π_{k=j+1..i} f_k + σ²_0 Π_{k=1..i} f_k`,
/// `f_k = e^{-ηΔt_k}(1 + φΔt_k ε_k²)`, and compares with the recursion.
/// Quadratic in `N`.
pub fn explicit_sigma_check(series: &EmbeddedSeries) -> ExplicitCheck {
    let p = &series.params;
    let grid = series.grid();
    let n = series.sigma2.len() - 1;
    let factors: Vec<f64> = (0..n)
        .map(|k| {
            let dt = grid.spacing(k);
            let e = series.innovations.cells[k].epsilon;
            (-p.eta * dt).exp() * (1.0 + p.phi * dt * e * e)
        })
        .collect();
    let mut check = ExplicitCheck {
        max_abs: 0.0,
        max_rel: 0.0,
    };
    for i in 1..=n {
        let mut sum = 0.0;
        let mut tail = 1.0;
        for j in (1..=i).rev() {
            sum += grid.spacing(j - 1) * tail;
            tail *= factors[j - 1];
        }
        let explicit = p.beta * sum + series.sigma2[0] * tail;
        let dev = (series.sigma2[i] - explicit).abs();
        check.max_abs = check.max_abs.max(dev);
        check.max_rel = check.max_rel.max(dev / explicit.abs());
    }
    check
}

/// Textbook GARCH(1,1) coefficients for returns over a cell of length `dt`:
/// `h_{i+1} = ω + α r_i² + β_g h_i` with `h_i = σ²_{i-1} Δt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Garch11 {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Garch11 {
    /// `ω = β Δt²`, `α = φ Δt e^{-ηΔt}`, `β_g = e^{-ηΔt}`.
    pub fn from_cogarch(params: &CogarchParams, dt: f64) -> Self {
        let kappa = (-params.eta * dt).exp();
        Garch11 {
            omega: params.beta * dt * dt,
            alpha: params.phi * dt * kappa,
            beta: kappa,
        }
    }
}

/// Piecewise-constant path on the grid: value `i` on `[t_i, t_{i+1})`, value
/// `N` at `T`.
pub fn lift(series: &EmbeddedSeries) -> BivariatePath {
    let times = series.grid().times().to_vec();
    step_path(times, &series.g, &series.sigma2)
}

fn step_path(times: Vec<f64>, g: &[f64], sigma2: &[f64]) -> BivariatePath {
    let n = times.len();
    let shifted = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| v[i.saturating_sub(1)]).collect() };
    BivariatePath {
        flavor: PathFlavor::EmbeddedPiecewiseConstant,
        g_left: shifted(g),
        sigma2_left: shifted(sigma2),
        times,
        g: g.to_vec(),
        sigma2: sigma2.to_vec(),
    }
}

/// Piecewise-linear `λ_n` with `λ_n(t_i) = τ*_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeChange {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeChange {
    pub fn new(innovations: &InnovationSet) -> Result<Self> {
        let knots = innovations.grid.times().to_vec();
        let mut values = Vec::with_capacity(knots.len());
        values.push(0.0);
        values.extend(innovations.stopped_times());
        let last = values.len() - 1;
        values[last] = knots[last];
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::numerical(
                "time change is not strictly increasing (jump at a cell boundary)",
            ));
        }
        Ok(TimeChange { knots, values })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.knots.len();
        if t <= self.knots[0] {
            return self.values[0];
        }
        if t >= self.knots[n - 1] {
            return self.values[n - 1];
        }
        let i = self.knots.partition_point(|&k| k <= t) - 1;
        let w = (t - self.knots[i]) / (self.knots[i + 1] - self.knots[i]);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    /// `sup_t |λ_n(t) - t|`, attained at a knot.
    pub fn sup_deviation(&self) -> f64 {
        self.knots
            .iter()
            .zip(&self.values)
            .map(|(t, l)| (l - t).abs())
            .fold(0.0, f64::max)
    }
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// `(sup |G_a - G_b|, sup |σ²_a - σ²_b|)` over `[0, T]`.
///
/// Both paths must be constant or monotone between the union of their knots
/// (true for step functions and for the exact variance between jumps), so
/// the suprema are attained at knot values or left limits.
pub fn sup_distance(a: &BivariatePath, b: &BivariatePath) -> (f64, f64) {
    let mut union: Vec<f64> = a.times.iter().chain(&b.times).copied().collect();
    union.sort_by(f64::total_cmp);
    union.dedup_by(|x, y| same_time(*x, *y));
    // (G, σ², G-, σ²-) at u: knot values if u is a knot, else held values.
    let probe = |p: &BivariatePath, k: &mut usize, u: f64| -> Option<[f64; 4]> {
        while *k + 1 < p.times.len() && (p.times[*k + 1] <= u || same_time(p.times[*k + 1], u)) {
            *k += 1;
        }
        if p.times[*k] > u && !same_time(p.times[*k], u) {
            return None;
        }
        let i = *k;
        Some(if same_time(p.times[i], u) {
            [p.g[i], p.sigma2[i], p.g_left[i], p.sigma2_left[i]]
        } else {
            [p.g[i], p.sigma2[i], p.g[i], p.sigma2[i]]
        })
    };
    let (mut ka, mut kb) = (0, 0);
    let (mut sup_g, mut sup_s) = (0.0f64, 0.0f64);
    for u in union {
        let (Some(va), Some(vb)) = (probe(a, &mut ka, u), probe(b, &mut kb, u)) else {
            continue;
        };
        sup_g = sup_g.max((va[0] - vb[0]).abs()).max((va[2] - vb[2]).abs());
        sup_s = sup_s.max((va[1] - vb[1]).abs()).max((va[3] - vb[3]).abs());
    }
    (sup_g, sup_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkorokhodBound {
    pub sup_g: f64,
    pub sup_sigma2: f64,
    /// `Δt(n)`, the bound on `sup |λ_n(t) - t|`.
    pub mesh: f64,
    /// Attained `sup |λ_n(t) - t|`.
    pub time_change_sup: f64,
    pub bound: f64,
    /// A qualifying jump fell in the last cell and was ignored.
    pub last_cell_jump: bool,
}

/// Upper bound `sup|G̃_n - G| + sup|σ̃²_n - σ²| + Δt(n)` on the Skorokhod
/// distance between the lifted embedding and the exact path.
///
/// `exact` must be recorded at every grid point and every jump time of the
/// driver (as [`simulate_exact`] does).
pub fn skorokhod_bound(series: &EmbeddedSeries, exact: &BivariatePath) -> Result<SkorokhodBound> {
    let grid = series.grid();
    if !same_time(exact.horizon(), grid.horizon()) {
        return Err(Error::validation(format!(
            "exact path ends at {} but the grid at {}",
            exact.horizon(),
            grid.horizon()
        )));
    }
    let lambda = TimeChange::new(&series.innovations)?;
    for &tau in &lambda.values {
        let k = exact.knot_index(tau * (1.0 + 1e-13));
        if !k.is_some_and(|k| same_time(exact.times[k], tau)) {
            return Err(Error::validation(format!(
                "exact path is not recorded at time {tau}"
            )));
        }
    }
    let tilde = step_path(lambda.values.clone(), &series.g, &series.sigma2);
    let (sup_g, sup_sigma2) = sup_distance(&tilde, exact);
    let mesh = grid.max_spacing();
    Ok(SkorokhodBound {
        sup_g,
        sup_sigma2,
        mesh,
        time_change_sup: lambda.sup_deviation(),
        bound: sup_g + sup_sigma2 + mesh,
        last_cell_jump: series.innovations.jump_in_last_cell(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub driver: LevySpec,
    pub params: CogarchParams,
    pub horizon: f64,
    /// Cells per level; each level must refine the previous one.
    pub ladder: Vec<usize>,
    pub seeds: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub sigma0: Sigma0Policy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub cells: usize,
    pub mesh: f64,
    pub median_sup_g: f64,
    pub median_sup_sigma2: f64,
    pub median_bound: f64,
    /// Seeds where a qualifying jump fell in the last cell.
    pub last_cell_jumps: usize,
    /// Sample variance of `σ²_N` across seeds.
    pub terminal_sigma2_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub levels: Vec<LevelSummary>,
    /// Median bound strictly decreasing along the ladder.
    pub monotone: bool,
    /// Share of seeds whose own bound is strictly decreasing.
    pub seed_monotone_fraction: f64,
    pub seeds: usize,
    pub master_seed: u64,
    /// `bounds[seed][level]`.
    pub bounds: Vec<Vec<SkorokhodBound>>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Embeds one simulated path per seed at every ladder level and bounds its
/// distance to the exact process.
pub fn convergence_study(config: &ConvergenceConfig) -> Result<ConvergenceReport> {
    if config.ladder.is_empty() || config.seeds == 0 {
        return Err(Error::validation("need at least one level and one seed"));
    }
    let grids = config
        .ladder
        .iter()
        .map(|&n| Grid::uniform(config.horizon, n))
        .collect::<Result<Vec<_>>>()?;
    if grids
        .windows(2)
        .any(|w| w[0].cells() >= w[1].cells() || !w[1].refines(&w[0]))
    {
        return Err(Error::validation("ladder must be strictly refining"));
    }
    let sigma0 = config.sigma0.resolve(&config.params)?;
    let finest = grids.last().unwrap();
    let per_seed = (0..config.seeds)
        .into_par_iter()
        .map(|s| -> Result<Vec<(SkorokhodBound, f64)>> {
            let seed = derive_seed(config.master_seed, s as u64);
            let path = simulate_levy_path(&config.driver, config.horizon, seed)?;
            let exact = simulate_exact(&path, &config.params, finest, sigma0)?;
            grids
                .iter()
                .map(|grid| {
                    let m = choose_threshold(grid, &config.driver).cutoff;
                    let innov = extract_innovations(&path, grid, m, &config.driver)?;
                    let series = embed(&innov, &config.params, sigma0)?;
                    let b = skorokhod_bound(&series, &exact)?;
                    Ok((b, *series.sigma2.last().unwrap()))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let levels: Vec<LevelSummary> = grids
        .iter()
        .enumerate()
        .map(|(l, grid)| {
            let col = |f: &dyn Fn(&SkorokhodBound) -> f64| -> Vec<f64> {
                per_seed.iter().map(|r| f(&r[l].0)).collect()
            };
            let terminal: Vec<f64> = per_seed.iter().map(|r| r[l].1).collect();
            LevelSummary {
                cells: grid.cells(),
                mesh: grid.max_spacing(),
                median_sup_g: median(&col(&|b| b.sup_g)),
                median_sup_sigma2: median(&col(&|b| b.sup_sigma2)),
                median_bound: median(&col(&|b| b.bound)),
                last_cell_jumps: per_seed.iter().filter(|r| r[l].0.last_cell_jump).count(),
                terminal_sigma2_variance: sample_variance(&terminal),
            }
        })
        .collect();
    let medians: Vec<f64> = levels.iter().map(|l| l.median_bound).collect();
    let bounds: Vec<Vec<SkorokhodBound>> = per_seed
        .into_iter()
        .map(|r| r.into_iter().map(|(b, _)| b).collect())
        .collect();
    let seed_monotone = bounds
        .iter()
        .filter(|r| strictly_decreasing(&r.iter().map(|b| b.bound).collect::<Vec<_>>()))
        .count();
    Ok(ConvergenceReport {
        monotone: strictly_decreasing(&medians),
        seed_monotone_fraction: seed_monotone as f64 / config.seeds as f64,
        seeds: config.seeds,
        master_seed: config.master_seed,
        levels,
        bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cogarch::stationary_sigma0;
    use crate::levy::{Jump, JumpDist, LevyPath};

    fn table2() -> CogarchParams {
        CogarchParams::new(1.0, 0.06, 0.0425).unwrap()
    }

    fn cp() -> LevySpec {
        LevySpec::compound_poisson(1.0, JumpDist::StandardNormal).unwrap()
    }

    fn series_for(path: &LevyPath, grid: &Grid, sigma0: f64) -> EmbeddedSeries {
        let innov = extract_innovations(path, grid, 0.0, &cp()).unwrap();
        embed(&innov, &table2(), sigma0).unwrap()
    }

    #[test]
    fn noiseless_recursion_is_geometric() {
        let p = table2();
        let path = LevyPath::from_jumps(10.0, vec![]).unwrap();
        let grid = Grid::uniform(10.0, 20).unwrap();
        let s = series_for(&path, &grid, 30.0);
        let (dt, r) = (0.5, (-p.eta * 0.5f64).exp());
        for i in 0..=20 {
            let ri = r.powi(i as i32);
            let expected = p.beta * dt * (1.0 - ri) / (1.0 - r) + 30.0 * ri;
            assert!((s.sigma2[i] - expected).abs() < 1e-12 * expected);
            assert_eq!(s.g[i], 0.0);
        }
    }

    #[test]
    fn single_cell_by_hand() {
        let path = LevyPath::from_jumps(
            2.0,
            vec![Jump {
                time: 0.7,
                size: 1.3,
            }],
        )
        .unwrap();
        let grid = Grid::uniform(2.0, 1).unwrap();
        let s = series_for(&path, &grid, 40.0);
        let xi2 = 1.0 - (-2.0f64).exp();
        let eps = 1.3 / xi2.sqrt();
        assert!((s.g[1] - (40.0f64 * 2.0).sqrt() * eps).abs() < 1e-12);
        let expected = 2.0 + (1.0 + 0.0425 * 2.0 * eps * eps) * (-0.12f64).exp() * 40.0;
        assert!((s.sigma2[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn explicit_form_matches_recursion() {
        let path = simulate_levy_path(&cp(), 600.0, 8).unwrap();
        let grid = Grid::from_spacings(&[0.5, 1.0, 1.5].repeat(200)).unwrap();
        let s = series_for(&path, &grid, 57.0);
        assert!(explicit_sigma_check(&s).max_rel < 1e-10);
        let one = series_for(&path, &Grid::uniform(600.0, 1).unwrap(), 57.0);
        assert!(explicit_sigma_check(&one).max_abs < 1e-12);
    }

    #[test]
    fn lift_is_half_open() {
        let path = simulate_levy_path(&cp(), 4.0, 2).unwrap();
        let s = series_for(&path, &Grid::uniform(4.0, 4).unwrap(), 50.0);
        let l = lift(&s);
        assert_eq!(l.at(0.0), Some((0.0, 50.0)));
        assert_eq!(l.at(1.0), Some((s.g[1], s.sigma2[1])));
        assert_eq!(l.at(0.999), Some((s.g[0], s.sigma2[0])));
        let before_end = 4.0 - f64::EPSILON * 4.0;
        assert_eq!(l.at(before_end), Some((s.g[3], s.sigma2[3])));
        assert_eq!(l.at(4.0), Some((s.g[4], s.sigma2[4])));
    }

    #[test]
    fn time_change_is_valid() {
        let path = simulate_levy_path(&cp(), 50.0, 4).unwrap();
        let grid = Grid::uniform(50.0, 100).unwrap();
        let innov = extract_innovations(&path, &grid, 0.0, &cp()).unwrap();
        let lambda = TimeChange::new(&innov).unwrap();
        assert_eq!(lambda.eval(0.0), 0.0);
        assert_eq!(lambda.eval(50.0), 50.0);
        assert!(lambda.values.windows(2).all(|w| w[0] < w[1]));
        assert!(lambda.sup_deviation() <= grid.max_spacing());
    }

    #[test]
    fn identical_paths_have_zero_distance() {
        let path = simulate_levy_path(&cp(), 20.0, 6).unwrap();
        let s = series_for(&path, &Grid::uniform(20.0, 40).unwrap(), 50.0);
        let l = lift(&s);
        assert_eq!(sup_distance(&l, &l), (0.0, 0.0));
    }

    #[test]
    fn jump_free_bound_is_decay_error() {
        let p = table2();
        let path = LevyPath::from_jumps(10.0, vec![]).unwrap();
        let s0 = stationary_sigma0(&p).unwrap();
        let mut prev = f64::INFINITY;
        for cells in [10, 20, 40, 80] {
            let grid = Grid::uniform(10.0, cells).unwrap();
            let s = series_for(&path, &grid, s0);
            let exact = simulate_exact(&path, &p, &grid, s0).unwrap();
            let b = skorokhod_bound(&s, &exact).unwrap();
            assert_eq!(b.sup_g, 0.0);
            assert!(b.sup_sigma2 > 0.0);
            assert!(b.bound < prev);
            prev = b.bound;
        }
    }

    #[test]
    fn bound_needs_jump_times() {
        let p = table2();
        let path = LevyPath::from_jumps(
            4.0,
            vec![Jump {
                time: 1.5,
                size: 1.0,
            }],
        )
        .unwrap();
        let grid = Grid::uniform(4.0, 4).unwrap();
        let s = series_for(&path, &grid, 50.0);
        let empty = LevyPath::from_jumps(4.0, vec![]).unwrap();
        let wrong = simulate_exact(&empty, &p, &grid, 50.0).unwrap();
        assert!(skorokhod_bound(&s, &wrong).is_err());
        let exact = simulate_exact(&path, &p, &grid, 50.0).unwrap();
        let b = skorokhod_bound(&s, &exact).unwrap();
        // The re-timed embedding jumps at 1.5 like the exact G.
        assert!(b.sup_g < 0.5 * exact.g.last().unwrap().abs());
    }

    #[test]
    fn one_level_is_monotone() {
        let cfg = ConvergenceConfig {
            driver: cp(),
            params: table2(),
            horizon: 10.0,
            ladder: vec![10],
            seeds: 3,
            master_seed: 1,
            sigma0: Sigma0Policy::Stationary,
        };
        let r = convergence_study(&cfg).unwrap();
        assert!(r.monotone);
        assert_eq!(r.levels.len(), 1);
        let bad = ConvergenceConfig {
            ladder: vec![10, 15],
            ..cfg
        };
        assert!(convergence_study(&bad).is_err());
    }

    #[test]
    fn pure_diffusion_variance_collapses() {
        let cfg = ConvergenceConfig {
            driver: LevySpec::pure_diffusion(),
            params: table2(),
            horizon: 20.0,
            ladder: vec![20, 80, 320, 1280],
            seeds: 24,
            master_seed: 5,
            sigma0: Sigma0Policy::Stationary,
        };
        let r = convergence_study(&cfg).unwrap();
        let v: Vec<f64> = r
            .levels
            .iter()
            .map(|l| l.terminal_sigma2_variance)
            .collect();
        assert!(strictly_decreasing(&v), "{v:?}");
        assert!(v[3] < 0.1 * v[0]);
    }
}

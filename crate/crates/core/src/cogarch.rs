//! Exact simulation of the COGARCH pair `(G, σ²)` from a driver path, and an
//! explicit Euler scheme used as an independent check.
//!
//! Between jumps `σ²` solves `dσ² = (β - aσ²) dt` with `a = η - φς²`; at a
//! jump it is multiplied by `1 + φ(ΔL)²`. `G` accrues `σ(s-) ΔL(s)` at
//! jumps and `σ ς ΔB` on the Brownian mesh.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::levy::LevyPath;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct CogarchParams {
    pub beta: f64,
    pub eta: f64,
    pub phi: f64,
}

#[derive(Deserialize)]
struct RawParams {
    beta: f64,
    eta: f64,
    phi: f64,
}

impl TryFrom<RawParams> for CogarchParams {
    type Error = Error;

    fn try_from(r: RawParams) -> Result<Self> {
        CogarchParams::new(r.beta, r.eta, r.phi)
    }
}

impl CogarchParams {
    pub fn new(beta: f64, eta: f64, phi: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::validation("β must be positive"));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::validation("η must be positive"));
        }
        if !(phi >= 0.0 && phi.is_finite()) {
            return Err(Error::validation("φ must be non-negative"));
        }
        Ok(CogarchParams { beta, eta, phi })
    }

    pub fn is_stationary(&self) -> bool {
        self.eta > self.phi
    }
}

/// How `σ²(0)` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Sigma0Policy {
    /// The stationary mean `β / (η - φ)`.
    #[default]
    Stationary,
    Fixed(f64),
}

impl Sigma0Policy {
    pub fn resolve(&self, params: &CogarchParams) -> Result<f64> {
        match *self {
            Sigma0Policy::Stationary => stationary_sigma0(params),
            Sigma0Policy::Fixed(v) if v > 0.0 && v.is_finite() => Ok(v),
            Sigma0Policy::Fixed(_) => Err(Error::validation("σ²(0) must be positive")),
        }
    }
}

/// Stationary mean of the variance, `β / (η - φ)`.
pub fn stationary_sigma0(params: &CogarchParams) -> Result<f64> {
    if !params.is_stationary() {
        return Err(Error::validation("stationarity requires η > φ"));
    }
    Ok(params.beta / (params.eta - params.phi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathFlavor {
    ExactAtEvents,
    EmbeddedPiecewiseConstant,
    EulerOracle,
}

impl PathFlavor {
    pub fn as_str(&self) -> &'static str {
        match self {
            PathFlavor::ExactAtEvents => "exact",
            PathFlavor::EmbeddedPiecewiseConstant => "embedded",
            PathFlavor::EulerOracle => "euler",
        }
    }
}

/// `(G, σ²)` recorded at knots, with right values and left limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BivariatePath {
    pub flavor: PathFlavor,
    pub times: Vec<f64>,
    pub g: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub g_left: Vec<f64>,
    pub sigma2_left: Vec<f64>,
}

impl BivariatePath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Index of the last knot `<= t`.
    pub fn knot_index(&self, t: f64) -> Option<usize> {
        self.times.partition_point(|&s| s <= t).checked_sub(1)
    }

    /// `(G, σ²)` at the last knot `<= t`: exact at knots and for
    /// piecewise-constant paths, a sample-and-hold value otherwise.
    pub fn at(&self, t: f64) -> Option<(f64, f64)> {
        self.knot_index(t).map(|i| (self.g[i], self.sigma2[i]))
    }
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    sample: bool,
    jump: Option<f64>,
    mesh: Option<usize>,
}

/// Sample times, jump times and Brownian mesh points up to `end`, merged.
fn event_times(path: &LevyPath, sample_times: &[f64], end: f64) -> Vec<Event> {
    let mut events: Vec<Event> = sample_times
        .iter()
        .map(|&time| Event {
            time,
            sample: true,
            jump: None,
            mesh: None,
        })
        .collect();
    events.extend(path.jumps_until(end).iter().map(|j| Event {
        time: j.time,
        sample: false,
        jump: Some(j.size),
        mesh: None,
    }));
    if let Some(d) = &path.diffusion {
        let last = ((end / d.step) * (1.0 + 1e-12)).floor() as usize;
        events.extend((1..=last.min(d.increments.len())).map(|k| Event {
            time: k as f64 * d.step,
            sample: false,
            jump: None,
            mesh: Some(k),
        }));
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut merged: Vec<Event> = Vec::with_capacity(events.len());
    for e in events {
        match merged.last_mut() {
            Some(prev) if same_time(prev.time, e.time) => {
                if e.sample && !prev.sample {
                    prev.time = e.time;
                }
                prev.sample |= e.sample;
                prev.jump = prev.jump.or(e.jump);
                prev.mesh = prev.mesh.or(e.mesh);
            }
            _ => merged.push(e),
        }
    }
    merged
}

fn check_sample_times(path: &LevyPath, times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::validation("no sample times"));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation(
            "sample times must be strictly increasing",
        ));
    }
    if times[0] < 0.0 || times[times.len() - 1] > path.horizon * (1.0 + 1e-12) {
        return Err(Error::validation(format!(
            "sample times must lie in [0, {}]",
            path.horizon
        )));
    }
    Ok(())
}

/// Mean-reversion rate of `σ²` between jumps.
fn reversion_rate(path: &LevyPath, params: &CogarchParams) -> f64 {
    params.eta - params.phi * path.diffusion_scale.powi(2)
}

/// `(e^{-ah}, (1 - e^{-ah}) / a)` with the `a → 0` limit.
fn decay(a: f64, h: f64) -> (f64, f64) {
    let e = (-a * h).exp();
    let integral = if a == 0.0 { h } else { -(-a * h).exp_m1() / a };
    (e, integral)
}

/// Walks the events, advancing `σ²` between them with `advance` and applying
/// the jump and Brownian updates at them.
fn walk<F>(
    path: &LevyPath,
    params: &CogarchParams,
    sigma0: f64,
    sample_times: &[f64],
    flavor: PathFlavor,
    keep_all: bool,
    mut advance: F,
) -> BivariatePath
where
    F: FnMut(f64, f64, f64) -> f64,
{
    let end = sample_times[sample_times.len() - 1];
    let events = event_times(path, sample_times, end);
    let varsigma = path.diffusion_scale;
    let mut out = BivariatePath {
        flavor,
        times: Vec::with_capacity(events.len()),
        g: Vec::with_capacity(events.len()),
        sigma2: Vec::with_capacity(events.len()),
        g_left: Vec::with_capacity(events.len()),
        sigma2_left: Vec::with_capacity(events.len()),
    };
    let (mut now, mut sigma2, mut g) = (0.0, sigma0, 0.0);
    // σ at the left end of the current Brownian mesh cell.
    let mut sigma_mesh = sigma0.sqrt();
    for e in events {
        sigma2 = advance(sigma2, now, e.time);
        now = e.time;
        if let (Some(k), Some(d)) = (e.mesh, &path.diffusion) {
            g += sigma_mesh * varsigma * d.increments[k - 1];
        }
        let (g_left, sigma2_left) = (g, sigma2);
        if let Some(size) = e.jump {
            g += sigma2.sqrt() * size;
            sigma2 *= 1.0 + params.phi * size * size;
        }
        if e.mesh.is_some() {
            sigma_mesh = sigma2.sqrt();
        }
        if keep_all || e.sample {
            out.times.push(now);
            out.g.push(g);
            out.sigma2.push(sigma2);
            out.g_left.push(g_left);
            out.sigma2_left.push(sigma2_left);
        }
    }
    out
}

/// Exact `σ²(t) = (β ∫_0^t e^{X(s)} ds + σ²(0)) e^{-X(t)}`.
///
/// `X` is piecewise linear, so the integral is accumulated segment by
/// segment in closed form. Both factors are carried relative to `e^{X(t)}`
/// (`A = ∫ e^{X(s) - X(t)} ds`, `B = e^{-X(t)}`) to stay finite on long
/// horizons.
pub fn exact_variance(path: &LevyPath, params: &CogarchParams, t: f64, sigma0: f64) -> f64 {
    let a = reversion_rate(path, params);
    let (mut big_a, mut big_b, mut now) = (0.0, 1.0, 0.0);
    for j in path.jumps_until(t) {
        let (e, i) = decay(a, j.time - now);
        big_a = big_a * e + i;
        big_b *= e;
        let m = 1.0 + params.phi * j.size * j.size;
        big_a *= m;
        big_b *= m;
        now = j.time;
    }
    let (e, i) = decay(a, t - now);
    big_a = big_a * e + i;
    big_b *= e;
    params.beta * big_a + sigma0 * big_b
}

/// `∫_0^t σ²(s) ds`, exact per inter-jump segment.
pub fn integrated_variance(path: &LevyPath, params: &CogarchParams, t: f64, sigma0: f64) -> f64 {
    let a = reversion_rate(path, params);
    let beta = params.beta;
    let segment = |s2: f64, h: f64| -> (f64, f64) {
        let (e, i) = decay(a, h);
        let area = if a.abs() * h < 1e-8 {
            s2 * h + (beta - a * s2) * h * h / 2.0
        } else {
            s2 * i + beta * (h - i) / a
        };
        (s2 * e + beta * i, area)
    };
    let (mut s2, mut total, mut now) = (sigma0, 0.0, 0.0);
    for j in path.jumps_until(t) {
        let (next, area) = segment(s2, j.time - now);
        total += area;
        s2 = next * (1.0 + params.phi * j.size * j.size);
        now = j.time;
    }
    total + segment(s2, t - now).1
}

/// Exact `(G, σ²)` at `sample_times` and at every jump and Brownian mesh
/// point up to the last sample time.
pub fn simulate_exact_at(
    path: &LevyPath,
    params: &CogarchParams,
    sigma0: f64,
    sample_times: &[f64],
) -> Result<BivariatePath> {
    check_sample_times(path, sample_times)?;
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(Error::validation("σ²(0) must be positive"));
    }
    let a = reversion_rate(path, params);
    let beta = params.beta;
    Ok(walk(
        path,
        params,
        sigma0,
        sample_times,
        PathFlavor::ExactAtEvents,
        true,
        |s2, from, to| {
            let (e, i) = decay(a, to - from);
            s2 * e + beta * i
        },
    ))
}

/// [`simulate_exact_at`] on the points of `grid`.
pub fn simulate_exact(
    path: &LevyPath,
    params: &CogarchParams,
    grid: &Grid,
    sigma0: f64,
) -> Result<BivariatePath> {
    simulate_exact_at(path, params, sigma0, grid.times())
}

/// Explicit Euler scheme for `σ²` on the mesh `k·step`, with partial steps
/// to every jump, Brownian mesh point and sample time. Jumps update `σ²`
/// and `G` with the pre-jump `σ²`. Values are reported at `sample_times`.
pub fn euler_oracle(
    path: &LevyPath,
    params: &CogarchParams,
    sigma0: f64,
    step: f64,
    sample_times: &[f64],
) -> Result<BivariatePath> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::validation("step must be positive"));
    }
    check_sample_times(path, sample_times)?;
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(Error::validation("σ²(0) must be positive"));
    }
    let a = reversion_rate(path, params);
    let beta = params.beta;
    Ok(walk(
        path,
        params,
        sigma0,
        sample_times,
        PathFlavor::EulerOracle,
        false,
        |mut s2, from, to| {
            let mut t = from;
            while t < to {
                let mut next_mesh = ((t / step).floor() + 1.0) * step;
                if next_mesh <= t {
                    next_mesh += step;
                }
                let next = if next_mesh >= to || same_time(next_mesh, to) {
                    to
                } else {
                    next_mesh
                };
                s2 += (beta - a * s2) * (next - t);
                t = next;
            }
            s2
        },
    ))
}

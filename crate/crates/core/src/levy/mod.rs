//! Background driving Lévy processes.
//!
//! Drivers are centred and scaled so that `E L(1) = 0` and `E L(1)^2 = 1`.
//! Only finite-activity jump parts are simulated (compound Poisson, optionally
//! with a Brownian component); infinite-activity measures enter only through
//! [`TailMeasure`] for threshold selection.

mod innovations;
mod path;

pub use innovations::{
    choose_threshold, extract_innovations, innovation_moments, InnovationCell, InnovationSet,
    ThresholdChoice, THRESHOLD_LADDER, THRESHOLD_POLICY,
};
pub use path::{
    auxiliary_process, simulate_levy_path, simulate_levy_path_with_mesh, DiffusionIncrements, Jump,
    LevyPath, DEFAULT_DIFFUSION_CELLS_PER_UNIT,
};

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Jump-size law of the compound Poisson part. The scale is always reset by
/// [`LevySpec`] normalization; only the shape is chosen by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum JumpDist {
    StandardNormal,
    ScaledNormal {
        std: f64,
    },
    /// `±a` with probability one half each.
    TwoPoint {
        a: f64,
    },
}

impl JumpDist {
    fn scale(&self) -> f64 {
        match *self {
            JumpDist::StandardNormal => 1.0,
            JumpDist::ScaledNormal { std } => std,
            JumpDist::TwoPoint { a } => a,
        }
    }

    fn with_second_moment(&self, target: f64) -> JumpDist {
        let s = target.sqrt();
        match self {
            JumpDist::StandardNormal | JumpDist::ScaledNormal { .. } => {
                if s == 1.0 {
                    JumpDist::StandardNormal
                } else {
                    JumpDist::ScaledNormal { std: s }
                }
            }
            JumpDist::TwoPoint { .. } => JumpDist::TwoPoint { a: s },
        }
    }

    pub fn second_moment(&self) -> f64 {
        self.scale().powi(2)
    }

    /// `P(|J| > m)`.
    pub fn tail_probability(&self, m: f64) -> f64 {
        match *self {
            JumpDist::TwoPoint { a } => {
                if m < a {
                    1.0
                } else {
                    0.0
                }
            }
            _ => libm::erfc(m / self.scale() * FRAC_1_SQRT_2),
        }
    }

    /// `E[J 1{|J| > m}]`; zero for every supported law by symmetry.
    pub fn truncated_mean(&self, _m: f64) -> f64 {
        0.0
    }

    /// `E[J^2 1{|J| > m}]`.
    pub fn truncated_second_moment(&self, m: f64) -> f64 {
        match *self {
            JumpDist::TwoPoint { a } => {
                if m < a {
                    a * a
                } else {
                    0.0
                }
            }
            _ => {
                let s = self.scale();
                let z = m / s;
                let density = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
                s * s * (2.0 * z * density + libm::erfc(z * FRAC_1_SQRT_2))
            }
        }
    }

    pub(crate) fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpDist::TwoPoint { a } => {
                if rng.random::<bool>() {
                    a
                } else {
                    -a
                }
            }
            _ => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                self.scale() * z
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriverKind {
    CompoundPoisson,
    JumpDiffusion,
    /// Brownian motion only. Not a COGARCH driver in the pure-jump sense;
    /// allowed for the deterministic-volatility limit check.
    PureDiffusion,
}

/// A normalized driver. Construct through [`LevySpec::compound_poisson`],
/// [`LevySpec::jump_diffusion`] or [`LevySpec::pure_diffusion`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LevyConfig", into = "LevyConfig")]
pub struct LevySpec {
    kind: DriverKind,
    rate: f64,
    jumps: Option<JumpDist>,
    diffusion: f64,
}

impl LevySpec {
    /// Compound Poisson with intensity `rate`; jump sizes are rescaled so that
    /// `rate * E J^2 = 1`.
    pub fn compound_poisson(rate: f64, jumps: JumpDist) -> Result<Self> {
        check_rate(rate)?;
        check_shape(&jumps)?;
        Ok(LevySpec {
            kind: DriverKind::CompoundPoisson,
            rate,
            jumps: Some(jumps.with_second_moment(1.0 / rate)),
            diffusion: 0.0,
        })
    }

    /// `ς B + L` with `ς = diffusion`; the jump part is rescaled so that
    /// `ς^2 + rate * E J^2 = 1`.
    pub fn jump_diffusion(diffusion: f64, rate: f64, jumps: JumpDist) -> Result<Self> {
        check_rate(rate)?;
        check_shape(&jumps)?;
        if !(diffusion >= 0.0) || !diffusion.is_finite() {
            return Err(Error::validation("diffusion scale must be non-negative"));
        }
        let jump_variance = 1.0 - diffusion * diffusion;
        if jump_variance == 0.0 {
            return Err(Error::validation(
                "pure-diffusion driver requires jump part (use LevySpec::pure_diffusion)",
            ));
        }
        if jump_variance < 0.0 {
            return Err(Error::validation(format!(
                "cannot normalize: diffusion variance {} exceeds 1",
                diffusion * diffusion
            )));
        }
        Ok(LevySpec {
            kind: DriverKind::JumpDiffusion,
            rate,
            jumps: Some(jumps.with_second_moment(jump_variance / rate)),
            diffusion,
        })
    }

    /// Standard Brownian motion.
    pub fn pure_diffusion() -> Self {
        LevySpec {
            kind: DriverKind::PureDiffusion,
            rate: 0.0,
            jumps: None,
            diffusion: 1.0,
        }
    }

    pub fn kind(&self) -> DriverKind {
        self.kind
    }

    /// Jump intensity `Π(R \ {0})`; zero without a jump part.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn jumps(&self) -> Option<&JumpDist> {
        self.jumps.as_ref()
    }

    /// Brownian scale `ς`.
    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    /// `E L(1)`.
    pub fn mean(&self) -> f64 {
        self.jumps
            .map_or(0.0, |j| self.rate * j.truncated_mean(0.0))
    }

    /// `E L(1)^2 = ς^2 + ∫ x^2 Π(dx)`.
    pub fn second_moment(&self) -> f64 {
        self.diffusion * self.diffusion + self.jumps.map_or(0.0, |j| self.rate * j.second_moment())
    }

    /// `∫_{|x|>m} x Π(dx)`.
    pub fn truncated_jump_mean(&self, m: f64) -> f64 {
        self.jumps.map_or(0.0, |j| self.rate * j.truncated_mean(m))
    }

    /// `∫_{|x|>m} x^2 Π(dx)`.
    pub fn truncated_jump_second_moment(&self, m: f64) -> f64 {
        self.jumps
            .map_or(0.0, |j| self.rate * j.truncated_second_moment(m))
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::validation(format!(
            "jump rate must be positive, got {rate}"
        )));
    }
    Ok(())
}

fn check_shape(jumps: &JumpDist) -> Result<()> {
    let s = jumps.scale();
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::validation("jump scale must be positive"));
    }
    Ok(())
}

/// Tail `Π̄(m) = Π{|x| > m}` of a Lévy measure.
pub trait TailMeasure {
    fn tail(&self, m: f64) -> f64;

    /// `Π̄(0) < ∞`.
    fn finite_activity(&self) -> bool;
}

impl TailMeasure for LevySpec {
    fn tail(&self, m: f64) -> f64 {
        levy_tail(self, m)
    }

    fn finite_activity(&self) -> bool {
        true
    }
}

/// Stand-in for an infinite-activity measure: `Π̄(m) = scale * m^(-index)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTail {
    pub scale: f64,
    pub index: f64,
}

impl TailMeasure for PowerTail {
    fn tail(&self, m: f64) -> f64 {
        if m <= 0.0 {
            f64::INFINITY
        } else {
            self.scale * m.powf(-self.index)
        }
    }

    fn finite_activity(&self) -> bool {
        false
    }
}

/// `Π̄(m)`; for compound Poisson `λ (1 - F(m) + F(-m))`.
pub fn levy_tail(spec: &LevySpec, m: f64) -> f64 {
    spec.jumps
        .map_or(0.0, |j| spec.rate * j.tail_probability(m.max(0.0)))
}

/// Flat key-value form of a [`LevySpec`] used in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyConfig {
    pub kind: DriverKind,
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default)]
    pub jump_dist: Option<JumpDistName>,
    /// Scale for `scaled_normal` / `two_point`; informational only, the
    /// normalization overrides it.
    #[serde(default)]
    pub jump_scale: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpDistName {
    StandardNormal,
    ScaledNormal,
    TwoPoint,
}

impl TryFrom<LevyConfig> for LevySpec {
    type Error = Error;

    fn try_from(c: LevyConfig) -> Result<Self> {
        let dist = || -> Result<JumpDist> {
            let scale = c.jump_scale.unwrap_or(1.0);
            Ok(match c.jump_dist.unwrap_or(JumpDistName::StandardNormal) {
                JumpDistName::StandardNormal => JumpDist::StandardNormal,
                JumpDistName::ScaledNormal => JumpDist::ScaledNormal { std: scale },
                JumpDistName::TwoPoint => JumpDist::TwoPoint { a: scale },
            })
        };
        let rate = || {
            c.rate
                .ok_or_else(|| Error::Config("driver needs `rate`".into()))
        };
        match c.kind {
            DriverKind::CompoundPoisson => LevySpec::compound_poisson(rate()?, dist()?),
            DriverKind::JumpDiffusion => {
                let sigma = c
                    .sigma
                    .ok_or_else(|| Error::Config("jump-diffusion driver needs `sigma`".into()))?;
                LevySpec::jump_diffusion(sigma, rate()?, dist()?)
            }
            DriverKind::PureDiffusion => Ok(LevySpec::pure_diffusion()),
        }
    }
}

impl From<LevySpec> for LevyConfig {
    fn from(s: LevySpec) -> Self {
        let (jump_dist, jump_scale) = match s.jumps {
            None => (None, None),
            Some(JumpDist::StandardNormal) => (Some(JumpDistName::StandardNormal), None),
            Some(JumpDist::ScaledNormal { std }) => (Some(JumpDistName::ScaledNormal), Some(std)),
            Some(JumpDist::TwoPoint { a }) => (Some(JumpDistName::TwoPoint), Some(a)),
        };
        LevyConfig {
            kind: s.kind,
            rate: (s.rate > 0.0).then_some(s.rate),
            jump_dist,
            jump_scale,
            sigma: (s.kind != DriverKind::CompoundPoisson).then_some(s.diffusion),
        }
    }
}

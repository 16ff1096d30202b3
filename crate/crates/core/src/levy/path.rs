use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{DriverKind, LevySpec};
use crate::cogarch::CogarchParams;
use crate::error::{Error, Result};
use crate::grid::SPACING_TOLERANCE;
use crate::rng::rng_from_seed;

/// Brownian mesh density used by [`simulate_levy_path`]: 64 cells per unit
/// time, so dyadic grids down to spacing 1/64 line up with it when `T` is an
/// integer.
pub const DEFAULT_DIFFUSION_CELLS_PER_UNIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub size: f64,
}

/// Standard Brownian increments on a uniform mesh of `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionIncrements {
    pub step: f64,
    pub increments: Vec<f64>,
}

impl DiffusionIncrements {
    fn mesh_index(&self, t: f64) -> Result<usize> {
        let k = (t / self.step).round();
        if (k * self.step - t).abs() > SPACING_TOLERANCE * t.abs().max(1.0) {
            return Err(Error::validation(format!(
                "time {t} is not on the diffusion mesh (step {})",
                self.step
            )));
        }
        Ok(k as usize)
    }

    /// `B(b) - B(a)` for mesh points `a < b`.
    pub fn increment(&self, a: f64, b: f64) -> Result<f64> {
        let (i, j) = (self.mesh_index(a)?, self.mesh_index(b)?);
        if j > self.increments.len() {
            return Err(Error::validation("time beyond the diffusion mesh"));
        }
        Ok(self.increments[i..j].iter().sum())
    }
}

/// A realized driver on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyPath {
    pub horizon: f64,
    /// Strictly increasing times in `(0, T]`.
    pub jumps: Vec<Jump>,
    /// Present iff the driver has a Brownian part.
    pub diffusion: Option<DiffusionIncrements>,
    /// `ς` of the driver that produced the path.
    pub diffusion_scale: f64,
    pub seed: u64,
}

impl LevyPath {
    /// A jump-only path with the given marks, for tests and hand-built cases.
    pub fn from_jumps(horizon: f64, jumps: Vec<Jump>) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::validation("T must be positive"));
        }
        for (i, j) in jumps.iter().enumerate() {
            if !(j.time > 0.0 && j.time <= horizon) {
                return Err(Error::validation(format!("jump {i} outside (0, T]")));
            }
            if i > 0 && jumps[i - 1].time >= j.time {
                return Err(Error::validation("jump times must be strictly increasing"));
            }
        }
        Ok(LevyPath {
            horizon,
            jumps,
            diffusion: None,
            diffusion_scale: 0.0,
            seed: 0,
        })
    }

    /// Jumps with time `<= t`.
    pub fn jumps_until(&self, t: f64) -> &[Jump] {
        let n = self.jumps.partition_point(|j| j.time <= t);
        &self.jumps[..n]
    }
}

/// Simulates `spec` on `[0, horizon]` with the default Brownian mesh.
pub fn simulate_levy_path(spec: &LevySpec, horizon: f64, seed: u64) -> Result<LevyPath> {
    let cells = ((horizon * DEFAULT_DIFFUSION_CELLS_PER_UNIT as f64).ceil() as usize).max(1);
    simulate_levy_path_with_mesh(spec, horizon, seed, cells)
}

/// Simulates `spec` on `[0, horizon]`; a Brownian part, if any, is drawn on
/// `diffusion_cells` equal cells.
///
/// Jump count is `Poisson(λT)`, times are i.i.d. uniform on `(0, T]` and
/// sorted, sizes are i.i.d. from the normalized jump law. Coinciding times
/// and exactly-zero sizes are re-drawn.
pub fn simulate_levy_path_with_mesh(
    spec: &LevySpec,
    horizon: f64,
    seed: u64,
    diffusion_cells: usize,
) -> Result<LevyPath> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::validation("T must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    let mut jumps = Vec::new();
    if let Some(dist) = spec.jumps() {
        let mean = spec.rate() * horizon;
        let count = Poisson::new(mean)
            .map_err(|e| Error::validation(format!("jump count law: {e}")))?
            .sample(&mut rng) as usize;
        let mut times: Vec<f64> = (0..count)
            .map(|_| horizon * (1.0 - rand::Rng::random::<f64>(&mut rng)))
            .collect();
        loop {
            times.sort_by(f64::total_cmp);
            let mut tied = false;
            for i in 1..times.len() {
                if times[i] == times[i - 1] {
                    times[i] = horizon * (1.0 - rand::Rng::random::<f64>(&mut rng));
                    tied = true;
                }
            }
            if !tied {
                break;
            }
        }
        jumps = times
            .into_iter()
            .map(|time| {
                let mut size = dist.sample(&mut rng);
                while size == 0.0 {
                    size = dist.sample(&mut rng);
                }
                Jump { time, size }
            })
            .collect();
    }
    let diffusion = if spec.diffusion() > 0.0 {
        if diffusion_cells == 0 {
            return Err(Error::validation("diffusion mesh needs at least one cell"));
        }
        let step = horizon / diffusion_cells as f64;
        let sd = step.sqrt();
        let increments = (0..diffusion_cells)
            .map(|_| {
                let z: f64 = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
                sd * z
            })
            .collect();
        Some(DiffusionIncrements { step, increments })
    } else {
        None
    };
    debug_assert!(spec.kind() != DriverKind::PureDiffusion || jumps.is_empty());
    Ok(LevyPath {
        horizon,
        jumps,
        diffusion,
        diffusion_scale: spec.diffusion(),
        seed,
    })
}

/// `X(t) = (η - φς^2) t - Σ_{0<s<=t} log(1 + φ (ΔL(s))^2)`.
pub fn auxiliary_process(path: &LevyPath, params: &CogarchParams, t: f64) -> f64 {
    let drift = params.eta - params.phi * path.diffusion_scale.powi(2);
    let jumps: f64 = path
        .jumps_until(t)
        .iter()
        .map(|j| (params.phi * j.size * j.size).ln_1p())
        .sum();
    drift * t - jumps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::JumpDist;

    fn cp() -> LevySpec {
        LevySpec::compound_poisson(1.0, JumpDist::StandardNormal).unwrap()
    }

    #[test]
    fn zero_horizon_is_rejected() {
        let err = simulate_levy_path(&cp(), 0.0, 1).unwrap_err();
        assert!(err.to_string().contains("T must be positive"));
    }

    #[test]
    fn paths_are_deterministic_and_well_ordered() {
        let a = simulate_levy_path(&cp(), 500.0, 42).unwrap();
        let b = simulate_levy_path(&cp(), 500.0, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.jumps.windows(2).all(|w| w[0].time < w[1].time));
        assert!(a.jumps.iter().all(|j| j.time > 0.0 && j.time <= 500.0));
        assert!(a.diffusion.is_none());
        let c = simulate_levy_path(&cp(), 500.0, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn jump_count_within_poisson_bound() {
        // 4 sd of Poisson(5000) is 4 sqrt(5000) ~ 283.
        let bound = 4.0 * 5000f64.sqrt();
        for seed in 0..100 {
            let p = simulate_levy_path(&cp(), 5000.0, seed).unwrap();
            assert!(
                (p.jumps.len() as f64 - 5000.0).abs() <= bound,
                "seed {seed}: {}",
                p.jumps.len()
            );
        }
    }

    #[test]
    fn diffusion_mesh_increments() {
        let spec = LevySpec::jump_diffusion(0.5, 1.0, JumpDist::StandardNormal).unwrap();
        let p = simulate_levy_path_with_mesh(&spec, 2.0, 9, 8).unwrap();
        let d = p.diffusion.as_ref().unwrap();
        assert_eq!(d.increments.len(), 8);
        let total = d.increment(0.0, 2.0).unwrap();
        let halves = d.increment(0.0, 1.0).unwrap() + d.increment(1.0, 2.0).unwrap();
        assert!((total - halves).abs() < 1e-14);
        assert!(d.increment(0.0, 0.3).is_err());
    }

    #[test]
    fn auxiliary_process_examples() {
        let params = CogarchParams::new(1.0, 0.06, 0.0425).unwrap();
        let empty = LevyPath::from_jumps(5.0, vec![]).unwrap();
        assert!((auxiliary_process(&empty, &params, 2.0) - 0.12).abs() < 1e-15);
        assert_eq!(auxiliary_process(&empty, &params, 0.0), 0.0);
        let one = LevyPath::from_jumps(
            5.0,
            vec![Jump {
                time: 0.5,
                size: 1.0,
            }],
        )
        .unwrap();
        let x = auxiliary_process(&one, &params, 1.0);
        assert!((x - (0.06 - 1.0425f64.ln())).abs() < 1e-15);
        assert!((x - 0.018378).abs() < 5e-7);
        // Before the jump only the drift counts.
        assert!((auxiliary_process(&one, &params, 0.4) - 0.024).abs() < 1e-15);
    }
}

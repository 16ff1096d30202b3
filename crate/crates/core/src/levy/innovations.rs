//! First-jump approximation: per grid cell keep the first jump whose size
//! exceeds the cutoff `m` and standardize its mark into an innovation.

use serde::{Deserialize, Serialize};

use super::{LevyPath, LevySpec, TailMeasure};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Tolerance `θ` in the rate condition `Δt(n) Π̄(m)^2 <= θ`.
pub const THRESHOLD_POLICY: f64 = 0.01;

/// Candidate cutoffs `1, 1/2, 1/4, ..., 2^-30`.
pub const THRESHOLD_LADDER: [f64; 31] = {
    let mut ladder = [0.0; 31];
    let mut i = 0;
    let mut v = 1.0;
    while i < 31 {
        ladder[i] = v;
        v /= 2.0;
        i += 1;
    }
    ladder
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub cutoff: f64,
    /// Whether `Δt(n) Π̄(cutoff)^2 <= θ` holds.
    pub rate_condition_met: bool,
    pub warning: Option<String>,
}

/// Cutoff `m` for the first-jump approximation on `grid`.
///
/// Finite-activity measures always get `m = 0` (every jump is eligible); the
/// rate condition is only reported. For infinite activity the smallest ladder
/// value that satisfies the rate condition is returned.
pub fn choose_threshold(grid: &Grid, measure: &dyn TailMeasure) -> ThresholdChoice {
    let mesh = grid.max_spacing();
    let holds = |m: f64| {
        let tail = measure.tail(m);
        mesh * tail * tail <= THRESHOLD_POLICY * (1.0 + 1e-9)
    };
    if measure.finite_activity() {
        let met = holds(0.0);
        return ThresholdChoice {
            cutoff: 0.0,
            rate_condition_met: met,
            warning: (!met).then(|| {
                format!(
                    "rate condition not met at this resolution: Δt(n)·Π̄(0)² = {:.4} > {}",
                    mesh * measure.tail(0.0).powi(2),
                    THRESHOLD_POLICY
                )
            }),
        };
    }
    let mut chosen = None;
    for &m in THRESHOLD_LADDER.iter() {
        if holds(m) {
            chosen = Some(m);
        } else {
            break;
        }
    }
    match chosen {
        Some(cutoff) => ThresholdChoice {
            cutoff,
            rate_condition_met: true,
            warning: None,
        },
        None => ThresholdChoice {
            cutoff: THRESHOLD_LADDER[0],
            rate_condition_met: false,
            warning: Some("rate condition not met at this resolution even for m = 1".into()),
        },
    }
}

/// Mean `ν` and variance `ξ^2` of the first-jump mark over a cell of length
/// `dt`, plus `ς^2 dt` from a Brownian part:
///
/// `ν = p ∫_{|x|>m} x Π(dx)`, `ξ^2 = p ∫_{|x|>m} x^2 Π(dx) - ν^2`,
/// with `p = (1 - exp(-dt Π̄(m))) / Π̄(m)`.
pub fn innovation_moments(spec: &LevySpec, dt: f64, cutoff: f64) -> Result<(f64, f64)> {
    if !(dt > 0.0) {
        return Err(Error::validation("cell length must be positive"));
    }
    let (mut nu, mut xi2) = (0.0, 0.0);
    if spec.jumps().is_some() {
        let tail = spec.tail(cutoff);
        if !(tail > 0.0) {
            return Err(Error::validation("no jumps above threshold"));
        }
        let p = -(-dt * tail).exp_m1() / tail;
        nu = p * spec.truncated_jump_mean(cutoff);
        xi2 = p * spec.truncated_jump_second_moment(cutoff) - nu * nu;
    }
    xi2 += spec.diffusion().powi(2) * dt;
    if !(xi2 > 0.0) {
        return Err(Error::numerical(format!(
            "innovation variance not positive (dt={dt}, m={cutoff})"
        )));
    }
    Ok((nu, xi2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnovationCell {
    /// First qualifying jump time in the cell, if any.
    pub tau: Option<f64>,
    /// `1{τ<∞} ΔL(τ)`.
    pub jump_mark: f64,
    /// `ς (B(t_i) - B(t_{i-1}))`; zero for pure-jump drivers.
    pub diffusion_mark: f64,
    pub nu: f64,
    pub xi: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnovationSet {
    pub grid: Grid,
    pub cutoff: f64,
    pub cells: Vec<InnovationCell>,
}

impl InnovationSet {
    pub fn epsilons(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.epsilon).collect()
    }

    /// `τ*_i = τ_i ∧ t_i` for `i = 1..N`.
    pub fn stopped_times(&self) -> Vec<f64> {
        let t = self.grid.times();
        self.cells
            .iter()
            .enumerate()
            .map(|(i, c)| c.tau.unwrap_or(t[i + 1]))
            .collect()
    }

    /// A qualifying jump fell in the last cell.
    pub fn jump_in_last_cell(&self) -> bool {
        self.cells.last().is_some_and(|c| c.tau.is_some())
    }
}

/// Standardized first-jump innovations of `path` on `grid`.
///
/// Cell `i` is `[t_{i-1}, t_i)`; a jump qualifies when `|ΔL| > m` (with
/// `m = 0` every jump qualifies).
pub fn extract_innovations(
    path: &LevyPath,
    grid: &Grid,
    cutoff: f64,
    spec: &LevySpec,
) -> Result<InnovationSet> {
    let horizon = grid.horizon();
    if (path.horizon - horizon).abs() > 1e-12 * horizon.max(1.0) {
        return Err(Error::validation(format!(
            "grid horizon {horizon} does not match path horizon {}",
            path.horizon
        )));
    }
    if !(cutoff >= 0.0) {
        return Err(Error::validation("cutoff must be non-negative"));
    }
    let times = grid.times();
    let mut cells = Vec::with_capacity(grid.cells());
    let mut next = 0usize;
    for i in 0..grid.cells() {
        let (a, b) = (times[i], times[i + 1]);
        while next < path.jumps.len() && path.jumps[next].time < a {
            next += 1;
        }
        let mut tau = None;
        let mut jump_mark = 0.0;
        let mut k = next;
        while k < path.jumps.len() && path.jumps[k].time < b {
            let j = path.jumps[k];
            if j.size.abs() > cutoff {
                tau = Some(j.time);
                jump_mark = j.size;
                break;
            }
            k += 1;
        }
        let diffusion_mark = match &path.diffusion {
            Some(d) => path.diffusion_scale * d.increment(a, b)?,
            None => 0.0,
        };
        let (nu, xi2) = innovation_moments(spec, b - a, cutoff)?;
        let xi = xi2.sqrt();
        cells.push(InnovationCell {
            tau,
            jump_mark,
            diffusion_mark,
            nu,
            xi,
            epsilon: (jump_mark + diffusion_mark - nu) / xi,
        });
    }
    Ok(InnovationSet {
        grid: grid.clone(),
        cutoff,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{Jump, JumpDist, PowerTail};

    fn cp() -> LevySpec {
        LevySpec::compound_poisson(1.0, JumpDist::StandardNormal).unwrap()
    }

    #[test]
    fn threshold_for_compound_poisson() {
        let coarse = choose_threshold(&Grid::uniform(10.0, 10).unwrap(), &cp());
        assert_eq!(coarse.cutoff, 0.0);
        assert!(!coarse.rate_condition_met);
        assert!(coarse.warning.is_some());

        let fine = choose_threshold(&Grid::uniform(1e-3, 1000).unwrap(), &cp());
        assert_eq!(fine.cutoff, 0.0);
        assert!(fine.rate_condition_met);
        assert!(fine.warning.is_none());
    }

    #[test]
    fn threshold_for_power_tail() {
        // Π̄(m) = 1/m and Δt(n) = 0.01: 0.01/m^2 <= 0.01 iff m >= 1.
        let stub = PowerTail {
            scale: 1.0,
            index: 1.0,
        };
        let c = choose_threshold(&Grid::uniform(1.0, 100).unwrap(), &stub);
        assert_eq!(c.cutoff, 1.0);
        assert!(c.rate_condition_met);
        // Finer mesh admits smaller cutoffs: 1e-4/m^2 <= 0.01 iff m >= 0.1.
        let c = choose_threshold(&Grid::uniform(1.0, 10_000).unwrap(), &stub);
        assert_eq!(c.cutoff, 0.125);
        // Too coarse: nothing on the ladder works.
        let c = choose_threshold(&Grid::uniform(10.0, 1).unwrap(), &stub);
        assert!(!c.rate_condition_met);
    }

    #[test]
    fn moments_of_unit_cell() {
        let (nu, xi2) = innovation_moments(&cp(), 1.0, 0.0).unwrap();
        assert_eq!(nu, 0.0);
        assert!((xi2 - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((xi2 - 0.63212).abs() < 1e-5);
    }

    #[test]
    fn symmetric_laws_have_zero_mean_mark() {
        let specs = [
            cp(),
            LevySpec::compound_poisson(3.0, JumpDist::TwoPoint { a: 1.0 }).unwrap(),
        ];
        for s in specs {
            for &dt in &[0.01, 0.5, 3.0] {
                for &m in &[0.0, 0.1, 0.4] {
                    assert_eq!(innovation_moments(&s, dt, m).unwrap().0, 0.0);
                }
            }
        }
    }

    #[test]
    fn variance_ratio_tends_to_one() {
        let mut prev = f64::INFINITY;
        for &dt in &[1.0, 0.1, 0.01, 0.001] {
            let (_, xi2) = innovation_moments(&cp(), dt, 0.0).unwrap();
            let dev = (xi2 / dt - 1.0).abs();
            assert!(dev < prev);
            prev = dev;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn no_jumps_above_threshold() {
        let s = LevySpec::compound_poisson(1.0, JumpDist::TwoPoint { a: 1.0 }).unwrap();
        let err = innovation_moments(&s, 1.0, 2.0).unwrap_err();
        assert!(err.to_string().contains("no jumps above threshold"));
    }

    #[test]
    fn empty_path_gives_zero_innovations() {
        let path = LevyPath::from_jumps(4.0, vec![]).unwrap();
        let grid = Grid::uniform(4.0, 8).unwrap();
        let set = extract_innovations(&path, &grid, 0.0, &cp()).unwrap();
        assert!(set.epsilons().iter().all(|&e| e == 0.0));
        assert_eq!(set.stopped_times(), grid.times()[1..].to_vec());
    }

    #[test]
    fn single_jump_innovation() {
        let path = LevyPath::from_jumps(
            1.0,
            vec![Jump {
                time: 0.5,
                size: 2.0,
            }],
        )
        .unwrap();
        let grid = Grid::uniform(1.0, 1).unwrap();
        let set = extract_innovations(&path, &grid, 0.0, &cp()).unwrap();
        let expected = 2.0 / (1.0 - (-1.0f64).exp()).sqrt();
        assert!((set.cells[0].epsilon - expected).abs() < 1e-14);
        assert!((set.cells[0].epsilon - 2.5156).abs() < 1e-4);
        assert_eq!(set.cells[0].tau, Some(0.5));
        assert!(set.jump_in_last_cell());
    }

    #[test]
    fn only_first_qualifying_jump_counts() {
        let path = LevyPath::from_jumps(
            2.0,
            vec![
                Jump {
                    time: 0.2,
                    size: 0.05,
                },
                Jump {
                    time: 0.3,
                    size: -1.5,
                },
                Jump {
                    time: 0.9,
                    size: 3.0,
                },
                Jump {
                    time: 1.0,
                    size: 0.7,
                },
            ],
        )
        .unwrap();
        let grid = Grid::uniform(2.0, 2).unwrap();
        let set = extract_innovations(&path, &grid, 0.1, &cp()).unwrap();
        assert_eq!(set.cells[0].tau, Some(0.3));
        assert_eq!(set.cells[0].jump_mark, -1.5);
        // A jump exactly at t_1 belongs to the second cell.
        assert_eq!(set.cells[1].tau, Some(1.0));
        let tau_star = set.stopped_times();
        assert!(tau_star[0] >= 0.0 && tau_star[0] < 1.0);
    }

    #[test]
    fn horizon_mismatch_is_rejected() {
        let path = LevyPath::from_jumps(2.0, vec![]).unwrap();
        let grid = Grid::uniform(1.0, 4).unwrap();
        assert!(extract_innovations(&path, &grid, 0.0, &cp()).is_err());
    }
}

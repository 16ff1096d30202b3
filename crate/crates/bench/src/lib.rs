//! Shared inputs for the benchmarks.

use cogarch::grid::{interleaved_spacings, ASX_FREQUENCIES};
use cogarch::levy::JumpDist;
use cogarch::study::{simulate_returns, DEFAULT_BURN_IN};
use cogarch::{CogarchParams, LevySpec, ReturnsSeries};

pub fn truth() -> CogarchParams {
    CogarchParams::new(1.0, 0.06, 0.0425).expect("valid parameters")
}

pub fn driver() -> LevySpec {
    LevySpec::compound_poisson(1.0, JumpDist::StandardNormal).expect("valid driver")
}

/// Returns on the daily-index spacing pattern (2529 observations).
pub fn irregular_series(seed: u64) -> ReturnsSeries {
    let spacings = interleaved_spacings(&ASX_FREQUENCIES).expect("table is valid");
    simulate_returns(&driver(), &truth(), &spacings, DEFAULT_BURN_IN, seed).expect("simulation")
}

/// `n` unit-spaced returns.
pub fn regular_series(n: usize, seed: u64) -> ReturnsSeries {
    simulate_returns(&driver(), &truth(), &vec![1.0; n], DEFAULT_BURN_IN, seed).expect("simulation")
}

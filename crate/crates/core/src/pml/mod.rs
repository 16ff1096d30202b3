//! Pseudo-maximum-likelihood estimation of `(β, η, φ)` from irregularly
//! spaced returns.

mod filter;
mod fit;
mod likelihood;
pub mod nelder_mead;
mod returns;
mod weights;

pub use filter::{
    beta_from_annualized, filter_volatility, long_run_volatility, transform_to_garch,
    FilterVariant, GarchTransform, DAYS_PER_YEAR,
};
pub use fit::{
    fit, fit_weighted, FitConfig, FitResult, StdErrors, WeightedFit, PARAM_CEILING, PARAM_FLOOR,
};
pub use likelihood::{
    conditional_variance, pseudo_log_likelihood, volatility_recursion, LikelihoodData, RhoMode,
};
pub use returns::ReturnsSeries;
pub use weights::{log_intercept, weight_apply, WeightFamily, WeightScheme};

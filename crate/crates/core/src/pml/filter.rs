use serde::{Deserialize, Serialize};

use super::returns::ReturnsSeries;
use crate::cogarch::{stationary_sigma0, CogarchParams};
use crate::embedding::Garch11;
use crate::error::{Error, Result};

/// Days per year used for annualized display values.
pub const DAYS_PER_YEAR: f64 = 365.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FilterVariant {
    /// `σ̂²_i = β̂ + (1 - η̂) σ̂²_{i-1} + φ̂ Y_i²`, ignoring the spacing.
    #[default]
    UnitStep,
    /// `σ̂²_i = β̂Δt_i + e^{-η̂Δt_i} (σ̂²_{i-1} + φ̂ Y_i²)`.
    Spacing,
}

/// Filtered variances `σ̂²_0..σ̂²_N`, started at `β̂/(η̂ - φ̂)`.
pub fn filter_volatility(
    series: &ReturnsSeries,
    params: &CogarchParams,
    variant: FilterVariant,
) -> Result<Vec<f64>> {
    let start = stationary_sigma0(params)?;
    let (beta, eta, phi) = (params.beta, params.eta, params.phi);
    let mut out = Vec::with_capacity(series.len() + 1);
    out.push(start);
    match variant {
        FilterVariant::UnitStep => {
            if eta > 1.0 {
                return Err(Error::validation(
                    "unit-step filter needs η̂ <= 1 to keep variances positive",
                ));
            }
            for &y in series.returns() {
                let prev = out[out.len() - 1];
                out.push(beta + (1.0 - eta) * prev + phi * y * y);
            }
        }
        FilterVariant::Spacing => {
            for (&y, dt) in series.returns().iter().zip(series.spacings()) {
                let prev = out[out.len() - 1];
                out.push(beta * dt + (-eta * dt).exp() * (prev + phi * y * y));
            }
        }
    }
    Ok(out)
}

/// GARCH(1,1) parameters `(ω, ϑ, κ) = (βΔt², φe^{-ηΔt}Δt, e^{-ηΔt})` for
/// spacing `dt`, with `√(365 ω)` for display.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchTransform {
    pub dt: f64,
    pub omega: f64,
    pub annualized_omega: f64,
    pub vartheta: f64,
    pub kappa: f64,
}

pub fn transform_to_garch(params: &CogarchParams, dt: f64) -> Result<GarchTransform> {
    if !(dt > 0.0) {
        return Err(Error::validation("Δt must be positive"));
    }
    let g = Garch11::from_cogarch(params, dt);
    Ok(GarchTransform {
        dt,
        omega: g.omega,
        annualized_omega: (DAYS_PER_YEAR * g.omega).sqrt(),
        vartheta: g.alpha,
        kappa: g.beta,
    })
}

/// `√(365 β/(η - φ))`.
pub fn long_run_volatility(params: &CogarchParams) -> Result<f64> {
    Ok((DAYS_PER_YEAR * stationary_sigma0(params)?).sqrt())
}

/// `β` from its annualized volatility `√(365 β)`.
pub fn beta_from_annualized(vol: f64) -> f64 {
    vol * vol / DAYS_PER_YEAR
}

#[cfg(test)]
mod tests {
    use super::*;

    fn asx() -> CogarchParams {
        CogarchParams::new(beta_from_annualized(0.0237), 0.0847, 0.0685).unwrap()
    }

    #[test]
    fn quiet_series_decays_to_fixed_point() {
        let p = asx();
        let s = ReturnsSeries::from_spacings(&[1.0; 400], vec![0.0; 400]).unwrap();
        let f = filter_volatility(&s, &p, FilterVariant::UnitStep).unwrap();
        let target = p.beta / p.eta;
        assert!((f[400] - target).abs() < 1e-6 * target);
        assert!(f.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn first_filtered_value_by_hand() {
        let p = asx();
        let s = ReturnsSeries::from_spacings(&[1.0; 3], vec![0.01, 0.0, 0.0]).unwrap();
        let f = filter_volatility(&s, &p, FilterVariant::UnitStep).unwrap();
        let expected = p.beta + (1.0 - 0.0847) * p.beta / (0.0847 - 0.0685) + 0.0685 * 1e-4;
        assert!((f[1] - expected).abs() < 1e-15);
    }

    #[test]
    fn impulse_decays_geometrically() {
        let p = asx();
        let mut y = vec![0.0; 30];
        y[0] = 1.0;
        let s = ReturnsSeries::from_spacings(&[1.0; 30], y).unwrap();
        let f = filter_volatility(&s, &p, FilterVariant::UnitStep).unwrap();
        let fixed = p.beta / p.eta;
        let r = (f[10] - fixed) / (f[9] - fixed);
        assert!((r - (1.0 - p.eta)).abs() < 1e-9);
    }

    #[test]
    fn spacing_variant_matches_likelihood_recursion() {
        let p = asx();
        let s = ReturnsSeries::from_spacings(&[1.0, 3.0, 1.0], vec![0.01, -0.02, 0.005]).unwrap();
        let f = filter_volatility(&s, &p, FilterVariant::Spacing).unwrap();
        let mut v = p.beta / (p.eta - p.phi);
        for (y, dt) in [(0.01f64, 1.0f64), (-0.02, 3.0), (0.005, 1.0)] {
            v = p.beta * dt + (-p.eta * dt).exp() * v + p.phi * (-p.eta * dt).exp() * y * y;
        }
        assert!((f[3] - v).abs() < 1e-15);
    }

    #[test]
    fn transform_limits() {
        let t = transform_to_garch(&asx(), 1e-12).unwrap();
        assert!(t.annualized_omega < 1e-12 && t.vartheta < 1e-12);
        assert!((t.kappa - 1.0).abs() < 1e-12);
        assert!(transform_to_garch(&asx(), 0.0).is_err());
    }

    #[test]
    fn long_run_volatility_of_asx_estimates() {
        let v = long_run_volatility(&asx()).unwrap();
        assert!((v - 0.1862).abs() < 1e-3);
    }
}

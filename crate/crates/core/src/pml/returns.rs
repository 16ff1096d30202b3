use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Returns `Y_i = G(t_i) - G(t_{i-1})` on observation times shifted so that
/// `t_0 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnsSeries {
    times: Vec<f64>,
    returns: Vec<f64>,
    /// Original time of the first observation.
    origin: f64,
}

impl ReturnsSeries {
    /// `times` has one more entry than `returns`.
    pub fn new(times: Vec<f64>, returns: Vec<f64>) -> Result<Self> {
        if times.len() != returns.len() + 1 {
            return Err(Error::validation(format!(
                "{} times for {} returns; expected one more time than returns",
                times.len(),
                returns.len()
            )));
        }
        if returns.len() < 3 {
            return Err(Error::validation("need at least 3 returns"));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::validation(format!("time {i} is not finite")));
        }
        if let Some(i) = returns.iter().position(|y| !y.is_finite()) {
            return Err(Error::validation(format!("return {} is not finite", i + 1)));
        }
        if let Some(i) = times.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::validation(format!(
                "times must be strictly increasing (at index {})",
                i + 1
            )));
        }
        let origin = times[0];
        let times = times.into_iter().map(|t| t - origin).collect();
        Ok(ReturnsSeries {
            times,
            returns,
            origin,
        })
    }

    pub fn from_spacings(spacings: &[f64], returns: Vec<f64>) -> Result<Self> {
        let mut times = Vec::with_capacity(spacings.len() + 1);
        times.push(0.0);
        let mut t = 0.0;
        for &dt in spacings {
            t += dt;
            times.push(t);
        }
        ReturnsSeries::new(times, returns)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

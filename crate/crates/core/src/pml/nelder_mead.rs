//! Nelder–Mead simplex minimization with coefficients (1, 2, ½, ½).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmOptions {
    /// Stop once every vertex is within `xtol` (max-norm) of the best one.
    pub xtol: f64,
    pub max_iter: usize,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions {
            xtol: 1e-14,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Final max-norm distance from the best vertex to the others.
    pub diameter: f64,
    /// `false` when the iteration cap was hit first.
    pub converged: bool,
}

/// Axis-aligned simplex `x0, x0 + step·e_1, ..., x0 + step·e_n`.
pub fn axis_simplex(x0: &[f64], step: f64) -> Vec<Vec<f64>> {
    let mut s = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += step;
        s.push(v);
    }
    s
}

fn check_simplex(simplex: &[Vec<f64>]) -> Result<usize> {
    let n = simplex.first().map_or(0, Vec::len);
    if n == 0 || simplex.len() != n + 1 || simplex.iter().any(|v| v.len() != n) {
        return Err(Error::validation(
            "simplex needs n + 1 vertices of dimension n >= 1",
        ));
    }
    if simplex.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::validation("simplex has non-finite coordinates"));
    }
    // Rank of the edge matrix by Gaussian elimination with partial pivoting.
    let mut m: Vec<Vec<f64>> = simplex[1..]
        .iter()
        .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| a - b).collect())
        .collect();
    let scale = m.iter().flatten().fold(0.0f64, |s, x| s.max(x.abs()));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if !(m[pivot][col].abs() > 1e-12 * scale) {
            return Err(Error::validation("degenerate simplex"));
        }
        m.swap(col, pivot);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    Ok(n)
}

/// Minimizes `f` from `simplex`. NaN values count as `+∞`.
pub fn minimize<F>(mut f: F, simplex: Vec<Vec<f64>>, opts: &NmOptions) -> Result<NmResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = check_simplex(&simplex)?;
    let mut evals = 0usize;
    let mut eval = |x: &[f64]| {
        evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut pts: Vec<(Vec<f64>, f64)> = simplex
        .into_iter()
        .map(|x| {
            let v = eval(&x);
            (x, v)
        })
        .collect();
    let diameter = |pts: &[(Vec<f64>, f64)]| {
        pts[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&pts[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max)
    };
    let mut iterations = 0;
    loop {
        // Stable sort keeps earlier vertices first among ties.
        pts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let d = diameter(&pts);
        if d <= opts.xtol || iterations >= opts.max_iter {
            let converged = d <= opts.xtol;
            let (x, value) = pts.swap_remove(0);
            return Ok(NmResult {
                x,
                value,
                iterations,
                evaluations: evals,
                diameter: d,
                converged,
            });
        }
        iterations += 1;
        let mut centroid = vec![0.0; n];
        for (x, _) in &pts[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let along = |t: f64, from: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(from)
                .map(|(c, x)| c + t * (x - c))
                .collect()
        };
        let (f_best, f_second_worst, f_worst) = (pts[0].1, pts[n - 1].1, pts[n].1);
        let xr = along(-1.0, &pts[n].0);
        let fr = eval(&xr);
        if fr < f_best {
            let xe = along(-2.0, &pts[n].0);
            let fe = eval(&xe);
            pts[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < f_second_worst {
            pts[n] = (xr, fr);
            continue;
        }
        if fr < f_worst {
            let xc = along(-0.5, &pts[n].0);
            let fc = eval(&xc);
            if fc <= fr {
                pts[n] = (xc, fc);
                continue;
            }
        } else {
            let xcc = along(0.5, &pts[n].0);
            let fcc = eval(&xcc);
            if fcc < f_worst {
                pts[n] = (xcc, fcc);
                continue;
            }
        }
        let best = pts[0].0.clone();
        for (x, v) in pts.iter_mut().skip(1) {
            for (xi, bi) in x.iter_mut().zip(&best) {
                *xi = bi + 0.5 * (*xi - bi);
            }
            *v = eval(x);
        }
    }
}

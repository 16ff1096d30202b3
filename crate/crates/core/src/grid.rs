//! Deterministic partitions `0 = t_0 < t_1 < ... < t_N = T`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when grouping spacings into distinct values and
/// when checking that one grid refines another.
pub const SPACING_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    times: Vec<f64>,
}

impl Grid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::validation("grid needs at least one cell"));
        }
        if times[0] != 0.0 {
            return Err(Error::validation(format!(
                "grid must start at 0, got {}",
                times[0]
            )));
        }
        for (i, w) in times.windows(2).enumerate() {
            if !w[1].is_finite() || w[1] <= w[0] {
                return Err(Error::validation(format!(
                    "grid times must be strictly increasing (index {})",
                    i + 1
                )));
            }
        }
        Ok(Grid { times })
    }

    /// `cells` equal cells on `[0, horizon]`. The last point is exactly `horizon`.
    pub fn uniform(horizon: f64, cells: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::validation("T must be positive"));
        }
        if cells == 0 {
            return Err(Error::validation("grid needs at least one cell"));
        }
        let mut times: Vec<f64> = (0..=cells)
            .map(|i| horizon * i as f64 / cells as f64)
            .collect();
        times[cells] = horizon;
        Grid::new(times)
    }

    /// Grid whose consecutive spacings are `spacings`.
    pub fn from_spacings(spacings: &[f64]) -> Result<Self> {
        let mut times = Vec::with_capacity(spacings.len() + 1);
        let mut t = 0.0;
        times.push(t);
        for &dt in spacings {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::validation(format!("non-positive spacing {dt}")));
            }
            t += dt;
            times.push(t);
        }
        Grid::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("grid is non-empty")
    }

    /// Number of cells `N`.
    pub fn cells(&self) -> usize {
        self.times.len() - 1
    }

    pub fn spacing(&self, i: usize) -> f64 {
        self.times[i + 1] - self.times[i]
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `Δt(n)`, the mesh of the partition.
    pub fn max_spacing(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Index of the cell `[t_{i}, t_{i+1})` containing `t` (the last cell also
    /// owns `T`).
    pub fn cell_of(&self, t: f64) -> Option<usize> {
        if t < 0.0 || t > self.horizon() {
            return None;
        }
        let idx = self.times.partition_point(|&s| s <= t);
        Some((idx - 1).min(self.cells() - 1))
    }

    /// True when every point of `coarse` is (up to rounding) a point of `self`.
    pub fn refines(&self, coarse: &Grid) -> bool {
        let tol = SPACING_TOLERANCE * self.horizon().max(1.0);
        if (self.horizon() - coarse.horizon()).abs() > tol {
            return false;
        }
        coarse.times.iter().all(|&t| {
            let idx = self.times.partition_point(|&s| s < t - tol);
            idx < self.times.len() && (self.times[idx] - t).abs() <= tol
        })
    }
}

/// Distinct values of `spacings`, merged within [`SPACING_TOLERANCE`], sorted
/// ascending, together with the class index of every spacing.
pub fn spacing_classes(spacings: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut sorted: Vec<f64> = spacings.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut values: Vec<f64> = Vec::new();
    for s in sorted {
        match values.last() {
            Some(&v) if (s - v).abs() <= SPACING_TOLERANCE * v.abs().max(s.abs()) => {}
            _ => values.push(s),
        }
    }
    let classes = spacings.iter().map(|&s| class_index(&values, s)).collect();
    (values, classes)
}

fn class_index(values: &[f64], s: f64) -> usize {
    let idx = values.partition_point(|&v| v < s);
    let mut best = idx.min(values.len() - 1);
    if idx > 0 && (values[idx - 1] - s).abs() <= (values[best] - s).abs() {
        best = idx - 1;
    }
    best
}

/// The inter-observation frequency table of the daily index series studied
/// with this model: `(Δt in days, count)`; 2529 spacings summing to 3653.
pub const ASX_FREQUENCIES: [(f64, usize); 6] = [
    (1.0, 1991),
    (2.0, 13),
    (3.0, 483),
    (4.0, 24),
    (5.0, 17),
    (6.0, 1),
];

/// A calendar-like spacing sequence with exactly the counts of `table`.
///
/// Gaps longer than the shortest are spread evenly through the run of
/// shortest gaps (like weekends through trading days); their mutual order
/// cycles through the table so that long gaps are not bunched together.
pub fn interleaved_spacings(table: &[(f64, usize)]) -> Result<Vec<f64>> {
    if table.is_empty() || table.iter().all(|&(_, c)| c == 0) {
        return Err(Error::validation("empty frequency table"));
    }
    let mut rows: Vec<(f64, usize)> = table.iter().copied().filter(|&(_, c)| c > 0).collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    if rows.iter().any(|&(dt, _)| !(dt > 0.0)) {
        return Err(Error::validation(
            "frequency table spacings must be positive",
        ));
    }
    let (short, n_short) = rows[0];
    // Long gaps in a round-robin order over their values, weighted by count.
    let mut remaining: Vec<(f64, usize)> = rows[1..].to_vec();
    let n_long: usize = remaining.iter().map(|r| r.1).sum();
    let mut long = Vec::with_capacity(n_long);
    let mut credit = vec![0.0f64; remaining.len()];
    let total = n_long as f64;
    while long.len() < n_long {
        for (k, r) in remaining.iter().enumerate() {
            credit[k] += r.1 as f64 / total;
        }
        let pick = (0..remaining.len())
            .filter(|&k| remaining[k].1 > 0)
            .max_by(|&a, &b| credit[a].total_cmp(&credit[b]).then(b.cmp(&a)))
            .expect("some long gap remains");
        credit[pick] -= 1.0;
        remaining[pick].1 -= 1;
        long.push(remaining[pick].0);
    }
    // Long gap j goes to position floor((j + 1/2) n / n_long); the positions
    // are distinct because n / n_long >= 1.
    let n = n_short + n_long;
    let mut out = vec![short; n];
    for (j, &dt) in long.iter().enumerate() {
        let pos = ((j as f64 + 0.5) * n as f64 / n_long as f64).floor() as usize;
        out[pos.min(n - 1)] = dt;
    }
    Ok(out)
}

//! Regular Cartesian grids over an input box.
//!
//! Along a non-degenerate node with width `w` and step `s` the grid has
//! `floor(w / s) + 1` coordinates: `lower + k * s` for every index but the
//! last, which is pinned to `upper` so both endpoints are always sampled.
//! Degenerate nodes contribute the single coordinate `lower`. Points are
//! visited lexicographically with node 0 varying slowest.

use crate::error::{Error, Result};
use crate::network::InputBox;

// Absorbs representation error when `w / s` is meant to be an integer
// (e.g. 1.0 / 0.1).
const INTEGRAL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    step: Vec<f64>,
    counts: Vec<u64>,
    len: u64,
}

impl Grid {
    pub fn new(region: &InputBox, step: &[f64]) -> Result<Self> {
        region.validate()?;
        if step.len() != region.dim() {
            return Err(Error::dim("grid step", region.dim(), step.len()));
        }
        let mut counts = Vec::with_capacity(region.dim());
        let mut len: u64 = 1;
        for i in 0..region.dim() {
            let count = if region.is_degenerate(i) {
                1
            } else {
                let w = region.width(i);
                if !w.is_finite() {
                    return Err(Error::Config(format!("node {i} is unbounded; a grid needs a finite box")));
                }
                let s = step[i];
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::Config(format!("grid step for node {i} must be positive, got {s}")));
                }
                let q = w / s;
                let k = (q + INTEGRAL_SLACK * q.max(1.0)).floor();
                if k >= u64::MAX as f64 {
                    return Err(Error::Config(format!("grid along node {i} is too fine")));
                }
                k as u64 + 1
            };
            len = len
                .checked_mul(count)
                .ok_or_else(|| Error::Config("grid point count overflows u64".into()))?;
            counts.push(count);
        }
        Ok(Grid {
            lower: region.lower.clone(),
            upper: region.upper.clone(),
            step: step.to_vec(),
            counts,
            len,
        })
    }

    /// Number of grid points (the product of per-node counts).
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    /// The `k`-th coordinate along node `dim`.
    pub fn coordinate(&self, dim: usize, k: u64) -> f64 {
        let count = self.counts[dim];
        if count == 1 {
            self.lower[dim]
        } else if k + 1 == count {
            self.upper[dim]
        } else {
            self.lower[dim] + k as f64 * self.step[dim]
        }
    }

    /// Point with the given lexicographic rank.
    pub fn point(&self, mut rank: u64) -> Vec<f64> {
        let mut idx = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            idx[d] = rank % self.counts[d];
            rank /= self.counts[d];
        }
        idx.iter().enumerate().map(|(d, &k)| self.coordinate(d, k)).collect()
    }

    pub fn cursor(&self) -> GridCursor<'_> {
        GridCursor {
            grid: self,
            index: vec![0; self.dim()],
            point: (0..self.dim()).map(|d| self.coordinate(d, 0)).collect(),
            started: false,
            done: self.len == 0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        let mut cursor = self.cursor();
        std::iter::from_fn(move || cursor.next_point().map(<[f64]>::to_vec))
    }
}

/// Allocation-free walk over a [`Grid`].
pub struct GridCursor<'a> {
    grid: &'a Grid,
    index: Vec<u64>,
    point: Vec<f64>,
    started: bool,
    done: bool,
}

impl GridCursor<'_> {
    pub fn next_point(&mut self) -> Option<&[f64]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(&self.point);
        }
        // Odometer: last node fastest.
        let mut d = self.grid.dim();
        loop {
            if d == 0 {
                self.done = true;
                return None;
            }
            d -= 1;
            self.index[d] += 1;
            if self.index[d] < self.grid.counts[d] {
                self.point[d] = self.grid.coordinate(d, self.index[d]);
                break;
            }
            self.index[d] = 0;
            self.point[d] = self.grid.coordinate(d, 0);
        }
        Some(&self.point)
    }
}

/// Enumerate the discrete noise options inside `region`.
pub fn enumerate_noise_options(region: &InputBox, step: &[f64]) -> Result<(u64, Grid)> {
    let grid = Grid::new(region, step)?;
    Ok((grid.len(), grid))
}

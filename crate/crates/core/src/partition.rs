//! The (m, n)-Chebyshev grid over [-1,1]^n.
//!
//! Per axis the breakpoints are cos(πj/m), j = m..0. Cell `j` on an axis
//! (1-based) is [cos(πj/m), cos(π(j−1)/m)), so `j = 1` is the top cell and
//! also owns the endpoint 1. An interior breakpoint belongs to the cell on
//! its larger-coordinate side.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling measure on the cube.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Uniform,
    Chebyshev,
}

impl std::str::FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Distribution::Uniform),
            "chebyshev" => Ok(Distribution::Chebyshev),
            other => Err(Error::invalid("dist", format!("unknown distribution `{other}`"))),
        }
    }
}

/// Multi-index of a cell, each component in `1..=m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex(pub Vec<usize>);

impl CellIndex {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Axis-aligned box `[lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AaBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AaBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::invalid("box", "lower corner must not exceed upper corner"));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    pub fn contains_box(&self, other: &AaBox) -> bool {
        self.lo.iter().zip(&other.lo).all(|(a, b)| a <= b)
            && self.hi.iter().zip(&other.hi).all(|(a, b)| b <= a)
    }

    pub fn widths(&self) -> Vec<f64> {
        self.hi.iter().zip(&self.lo).map(|(h, l)| h - l).collect()
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn within_cube(&self) -> bool {
        self.lo.iter().all(|&v| v >= -1.0) && self.hi.iter().all(|&v| v <= 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChebPartition {
    m: usize,
    n: usize,
    edges: Vec<f64>,
}

impl ChebPartition {
    pub fn build(m: usize, n: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("m", "need at least one cell per axis"));
        }
        if n == 0 {
            return Err(Error::invalid("n", "dimension must be positive"));
        }
        let mut edges: Vec<f64> = (0..=m)
            .map(|k| (PI * (m - k) as f64 / m as f64).cos())
            .collect();
        // exact antisymmetry, endpoints and centre
        for k in 0..=m / 2 {
            let v = 0.5 * (edges[m - k] - edges[k]);
            edges[m - k] = v;
            edges[k] = -v;
        }
        edges[0] = -1.0;
        edges[m] = 1.0;
        if m % 2 == 0 {
            edges[m / 2] = 0.0;
        }
        Ok(Self { m, n, edges })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Ascending breakpoints, `edges[0] = -1`, `edges[m] = 1`.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn num_cells(&self) -> usize {
        self.m.pow(self.n as u32)
    }

    /// Interval of axis cell `j` (1-based).
    pub fn axis_interval(&self, j: usize) -> (f64, f64) {
        let k = self.m - j;
        (self.edges[k], self.edges[k + 1])
    }

    pub fn axis_width(&self, j: usize) -> f64 {
        let (a, b) = self.axis_interval(j);
        b - a
    }

    pub fn min_width(&self) -> f64 {
        (1..=self.m).map(|j| self.axis_width(j)).fold(f64::INFINITY, f64::min)
    }

    /// Axis cell of a coordinate; assumes `x ∈ [-1, 1]`.
    #[inline]
    pub fn axis_cell(&self, x: f64) -> usize {
        let k = self.edges.partition_point(|&e| e <= x).saturating_sub(1).min(self.m - 1);
        self.m - k
    }

    pub fn cell_of(&self, x: &[f64]) -> Result<CellIndex> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::OutOfCube { index: 0 });
        }
        Ok(CellIndex(x.iter().map(|&v| self.axis_cell(v)).collect()))
    }

    /// Row-major flat id of the cell containing `x` (no range check).
    #[inline]
    pub fn flat_cell_of(&self, x: &[f64]) -> usize {
        x.iter().fold(0, |acc, &v| acc * self.m + (self.axis_cell(v) - 1))
    }

    pub fn flat_id(&self, j: &CellIndex) -> usize {
        j.0.iter().fold(0, |acc, &v| acc * self.m + (v - 1))
    }

    pub fn index_of_flat(&self, mut flat: usize) -> CellIndex {
        let mut j = vec![0; self.n];
        for v in j.iter_mut().rev() {
            *v = flat % self.m + 1;
            flat /= self.m;
        }
        CellIndex(j)
    }

    fn check_index(&self, j: &CellIndex) -> Result<()> {
        if j.0.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: j.0.len(),
            });
        }
        if j.0.iter().any(|&v| v == 0 || v > self.m) {
            return Err(Error::invalid("cell", format!("index {:?} outside [1..{}]", j.0, self.m)));
        }
        Ok(())
    }

    pub fn cell_box(&self, j: &CellIndex) -> AaBox {
        let (lo, hi) = j.0.iter().map(|&v| self.axis_interval(v)).unzip();
        AaBox { lo, hi }
    }

    pub fn cell_center(&self, j: &CellIndex) -> Vec<f64> {
        self.cell_box(j).center()
    }

    pub fn cell_probability(&self, j: &CellIndex, dist: Distribution) -> Result<f64> {
        self.check_index(j)?;
        Ok(match dist {
            Distribution::Uniform => j.0.iter().map(|&v| self.axis_width(v) / 2.0).product(),
            Distribution::Chebyshev => (self.m as f64).powi(-(self.n as i32)),
        })
    }

    /// The cell shrunk by `band` on every face.
    pub fn interior_region(&self, j: &CellIndex, band: f64) -> Result<AaBox> {
        self.check_index(j)?;
        if !(band >= 0.0) {
            return Err(Error::invalid("band", "must be non-negative"));
        }
        let b = self.cell_box(j);
        for (axis, w) in b.widths().into_iter().enumerate() {
            if 2.0 * band >= w && band > 0.0 {
                return Err(Error::BandTooWide {
                    cell: j.0.clone(),
                    axis,
                    band,
                    width: w,
                });
            }
        }
        Ok(AaBox {
            lo: b.lo.iter().map(|v| v + band).collect(),
            hi: b.hi.iter().map(|v| v - band).collect(),
        })
    }

    /// The (3m, n) grid. Every third breakpoint is copied from this grid so
    /// refined cells nest exactly inside their parents.
    pub fn refine3(&self) -> ChebPartition {
        let mut fine = ChebPartition::build(3 * self.m, self.n).expect("valid refinement");
        for k in 0..=self.m {
            fine.edges[3 * k] = self.edges[k];
        }
        fine
    }

    /// Centre sub-cell (3j_i − 1 on every axis) of `j` in [`Self::refine3`].
    pub fn middle_subcell(&self, j: &CellIndex) -> CellIndex {
        CellIndex(j.0.iter().map(|&v| 3 * v - 1).collect())
    }

    /// Distance from `x` to its nearest breakpoint (including ±1).
    pub fn distance_to_breakpoint(&self, x: f64) -> f64 {
        let k = self.edges.partition_point(|&e| e <= x);
        let mut best = f64::INFINITY;
        if k > 0 {
            best = best.min((x - self.edges[k - 1]).abs());
        }
        if k < self.edges.len() {
            best = best.min((self.edges[k] - x).abs());
        }
        best
    }

    pub fn alpha_goodness(
        &self,
        points: &crate::sampling::Points,
        outlier: &[bool],
        alpha: f64,
        strict: bool,
    ) -> Result<AlphaReport> {
        if points.len() != outlier.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: outlier.len(),
            });
        }
        let mut counts = vec![0usize; self.num_cells()];
        let mut outliers = vec![0usize; self.num_cells()];
        for (x, &o) in points.iter().zip(outlier) {
            let c = self.flat_cell_of(x);
            counts[c] += 1;
            outliers[c] += o as usize;
        }
        let empty_cells = counts.iter().filter(|&&c| c == 0).count();
        let mut max_fraction: f64 = 0.0;
        let mut bad_cells = 0;
        for (c, o) in counts.iter().zip(&outliers) {
            if *c > 0 {
                let f = *o as f64 / *c as f64;
                max_fraction = max_fraction.max(f);
                if f >= alpha {
                    bad_cells += 1;
                }
            }
        }
        let good = bad_cells == 0 && (!strict || empty_cells == 0);
        Ok(AlphaReport {
            alpha,
            counts,
            outliers,
            empty_cells,
            bad_cells,
            max_fraction,
            good,
        })
    }
}

/// α used throughout for outlier rate ρ: (2ρ + 1) / 4.
pub fn alpha_for_rho(rho: f64) -> f64 {
    (2.0 * rho + 1.0) / 4.0
}

/// Per-cell outlier bookkeeping; arrays are indexed by flat cell id.
#[derive(Clone, Debug, Serialize)]
pub struct AlphaReport {
    pub alpha: f64,
    pub counts: Vec<usize>,
    pub outliers: Vec<usize>,
    pub empty_cells: usize,
    pub bad_cells: usize,
    pub max_fraction: f64,
    pub good: bool,
}

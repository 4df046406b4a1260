//! Polynomial fitting LPs. Both are solved through their duals, whose basis
//! has only (d+1)^n (+1) rows no matter how many points are fitted; the
//! coefficients are then read off the simplex multipliers.

use log::warn;
use serde::Serialize;

use super::{LinearProgram, Relation};
use crate::error::{Error, Result};
use crate::poly::{tensor_basis_values, MultiPoly};
use crate::sampling::Points;

#[derive(Clone, Debug, Serialize)]
pub struct LinfFit {
    pub poly: MultiPoly,
    /// Optimal value reported by the LP.
    pub objective: f64,
    /// max_j |poly(x_j) − y_j| recomputed at the returned coefficients.
    pub max_residual: f64,
    pub iterations: usize,
    pub rows: usize,
    pub cols: usize,
}

fn check_inputs(points: &Points, labels: &[f64]) -> Result<()> {
    if points.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: labels.len(),
        });
    }
    if let Some(i) = points.iter().position(|x| x.iter().any(|v| !(-1.0..=1.0).contains(v))) {
        return Err(Error::OutOfCube { index: i });
    }
    if labels.iter().any(|y| !y.is_finite()) {
        return Err(Error::invalid("labels", "must be finite"));
    }
    Ok(())
}

fn label_scale(labels: &[f64]) -> f64 {
    let s = labels.iter().fold(0.0f64, |a, y| a.max(y.abs()));
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Degree-`d` polynomial minimising max_j |q(x_j) − y_j|.
///
/// Solves min Σ y_j(u_j − v_j) s.t. Σ (u_j − v_j) φ(x_j) = 0,
/// Σ (u_j + v_j) = 1, u, v ≥ 0; the multipliers of the first block are the
/// coefficients and minus the last multiplier is the optimal deviation.
pub fn linf_fit(points: &Points, labels: &[f64], d: usize) -> Result<LinfFit> {
    check_inputs(points, labels)?;
    if points.is_empty() {
        return Err(Error::invalid("points", "need at least one point"));
    }
    let n = points.dim();
    let k = (d + 1).pow(n as u32);
    let count = points.len();
    let s = label_scale(labels);

    let mut lp = LinearProgram::new(Vec::with_capacity(2 * count));
    let mut rows = vec![vec![0.0; 2 * count]; k + 1];
    let mut phi = Vec::with_capacity(k);
    for (j, x) in points.iter().enumerate() {
        tensor_basis_values(d, x, &mut phi);
        for (a, v) in phi.iter().enumerate() {
            rows[a][2 * j] = *v;
            rows[a][2 * j + 1] = -*v;
        }
        rows[k][2 * j] = 1.0;
        rows[k][2 * j + 1] = 1.0;
        let y = labels[j] / s;
        lp.objective.push(y);
        lp.objective.push(-y);
    }
    lp.lower = vec![0.0; 2 * count];
    lp.upper = vec![f64::INFINITY; 2 * count];
    for (a, row) in rows.into_iter().enumerate() {
        let rhs = if a == k { 1.0 } else { 0.0 };
        lp.add_constraint(row, Relation::Eq, rhs);
    }
    let sol = lp.solve()?.require_optimal()?;
    let coeffs: Vec<f64> = sol.duals[..k].iter().map(|c| c * s).collect();
    let objective = -sol.duals[k] * s;
    let poly = MultiPoly::new(n, d, coeffs)?;
    let max_residual = points
        .iter()
        .zip(labels)
        .map(|(x, y)| (poly.eval_unchecked(x) - y).abs())
        .fold(0.0, f64::max);
    if (max_residual - objective).abs() > 1e-7 * s.max(1.0) {
        warn!("linf fit: LP optimum {objective:e} vs recomputed residual {max_residual:e}");
    }
    Ok(LinfFit {
        poly,
        objective,
        max_residual,
        iterations: sol.iterations,
        rows: k + 1,
        cols: 2 * count,
    })
}

/// Samples of one cell sharing a weight.
#[derive(Clone, Debug)]
pub struct WeightedGroup {
    pub points: Points,
    pub labels: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightedL1Fit {
    pub poly: MultiPoly,
    /// Σ_groups weight · Σ |poly(x) − y| at the returned coefficients.
    pub objective: f64,
    pub iterations: usize,
}

/// Degree-`d` polynomial minimising Σ_g w_g Σ_{β∈g} |q(x_β) − y_β|.
///
/// Solves the dual min −Σ y_β λ_β s.t. Σ λ_β φ(x_β) = 0, |λ_β| ≤ w_β; the
/// coefficients are the negated multipliers.
pub fn weighted_l1_fit(groups: &[WeightedGroup], n: usize, d: usize) -> Result<WeightedL1Fit> {
    if groups.is_empty() {
        return Err(Error::invalid("groups", "need at least one cell"));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.points.is_empty() {
            return Err(Error::EmptyCell { cell: vec![i] });
        }
        if g.points.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: g.points.dim(),
            });
        }
        if !(g.weight > 0.0) || !g.weight.is_finite() {
            return Err(Error::invalid("weight", "cell weights must be positive"));
        }
        check_inputs(&g.points, &g.labels)?;
    }
    let k = (d + 1).pow(n as u32);
    let s = groups.iter().map(|g| label_scale(&g.labels)).fold(0.0, f64::max);
    let wmax = groups.iter().map(|g| g.weight).fold(0.0, f64::max);
    let total: usize = groups.iter().map(|g| g.labels.len()).sum();

    let mut lp = LinearProgram::new(Vec::with_capacity(total));
    lp.lower.clear();
    lp.upper.clear();
    let mut rows = vec![vec![0.0; total]; k];
    let mut phi = Vec::with_capacity(k);
    let mut col = 0;
    for g in groups {
        let w = g.weight / wmax;
        for (x, y) in g.points.iter().zip(&g.labels) {
            tensor_basis_values(d, x, &mut phi);
            for (a, v) in phi.iter().enumerate() {
                rows[a][col] = *v;
            }
            lp.objective.push(-y / s);
            lp.lower.push(-w);
            lp.upper.push(w);
            col += 1;
        }
    }
    for row in rows {
        lp.add_constraint(row, Relation::Eq, 0.0);
    }
    let sol = lp.solve()?.require_optimal()?;
    let coeffs: Vec<f64> = sol.duals.iter().map(|c| -c * s).collect();
    let poly = MultiPoly::new(n, d, coeffs)?;
    let objective = groups
        .iter()
        .map(|g| {
            g.weight
                * g.points
                    .iter()
                    .zip(&g.labels)
                    .map(|(x, y)| (poly.eval_unchecked(x) - y).abs())
                    .sum::<f64>()
        })
        .sum();
    Ok(WeightedL1Fit {
        poly,
        objective,
        iterations: sol.iterations,
    })
}

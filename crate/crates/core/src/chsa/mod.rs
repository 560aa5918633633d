//! Convex hull stratification.
//!
//! Every point is written as an affine combination of its `N` nearest
//! neighbours, with ridge and lasso penalties on the coefficients. A hull
//! vertex lies outside the hull of the remaining points, so its best
//! representation needs a negative coefficient; points whose coefficient
//! vector has a component below `-negativity_threshold` are flagged, and the
//! ℓ2-norm of the coefficient vector orders the flagged points by how far
//! they sit out on the boundary.

mod solver;

use faer::{Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use solver::WeightProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChsaParams {
    /// Neighbourhood size `N`.
    pub neighbors: usize,
    /// ℓ2 penalty `γ`.
    pub gamma: f64,
    /// ℓ1 penalty `λ`.
    pub lambda: f64,
    /// KKT residual tolerance of the weight solver, relative to `max(1, ‖D‖²)`.
    pub solver_tolerance: f64,
    /// A weight counts as negative only below `-negativity_threshold`.
    pub negativity_threshold: f64,
}

impl Default for ChsaParams {
    fn default() -> Self {
        Self {
            neighbors: 7,
            gamma: 1e-10,
            lambda: 1e-5,
            solver_tolerance: 1e-9,
            negativity_threshold: 1e-7,
        }
    }
}

impl ChsaParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if self.neighbors == 0 {
            return bad("neighbors must be at least 1");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be finite and nonnegative");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and nonnegative");
        }
        if !(self.solver_tolerance > 0.0 && self.solver_tolerance.is_finite()) {
            return bad("solver_tolerance must be positive");
        }
        if !(self.negativity_threshold >= 0.0 && self.negativity_threshold.is_finite()) {
            return bad("negativity_threshold must be finite and nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub neighbor_indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub weight_norm: f64,
    pub min_weight: f64,
    pub is_flagged: bool,
    /// `‖x − Σ w_j y_j‖₂`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratificationResult {
    pub params: ChsaParams,
    pub records: Vec<PointRecord>,
    /// Flagged indices, largest `weight_norm` first (ties by index).
    pub vertex_indices: Vec<usize>,
}

impl StratificationResult {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Position of point `i` in the weight-norm ranking of flagged points.
    pub fn vertex_rank(&self, i: usize) -> Option<usize> {
        self.vertex_indices.iter().position(|&v| v == i)
    }
}

/// How many flagged points [`top_vertices`] returns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    /// The `n` flagged points with the largest weight norm.
    Count(usize),
    /// Every flagged point with weight norm at least this value.
    Threshold(f64),
}

fn row_major(points: MatRef<'_, f64>) -> Vec<f64> {
    crate::linalg::to_row_major(points)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn neighbors_in(rows: &[f64], q: usize, i: usize, count: usize) -> Vec<usize> {
    let p = rows.len() / q.max(1);
    let x = &rows[i * q..(i + 1) * q];
    let mut cand: Vec<(f64, usize)> =
        (0..p).filter(|&j| j != i).map(|j| (sq_dist(x, &rows[j * q..(j + 1) * q]), j)).collect();
    let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if count < cand.len() {
        cand.select_nth_unstable_by(count, order);
        cand.truncate(count);
    }
    cand.sort_by(order);
    cand.into_iter().map(|(_, j)| j).collect()
}

/// The `count` points nearest to point `i` (rows of `points`), excluding `i`,
/// closest first; equal distances are ordered by index.
pub fn nearest_neighbors(points: MatRef<'_, f64>, i: usize, count: usize) -> Result<Vec<usize>> {
    let p = points.nrows();
    if count >= p {
        return Err(Error::TooFewPoints { points: p, neighbors: count });
    }
    if i >= p {
        return Err(Error::InvalidParameter(format!(
            "point index {i} out of range for {p} points"
        )));
    }
    Ok(neighbors_in(&row_major(points), points.ncols(), i, count))
}

/// Weights `w` (one per row of `neighbors`) minimizing the penalized affine
/// reconstruction error of `x`.
pub fn solve_weights(
    x: &[f64],
    neighbors: MatRef<'_, f64>,
    params: &ChsaParams,
) -> Result<Vec<f64>> {
    params.validate()?;
    if neighbors.nrows() == 0 {
        return Err(Error::InvalidParameter("at least one neighbor is required".into()));
    }
    if neighbors.ncols() != x.len() {
        return Err(Error::SizeMismatch { expected: x.len(), found: neighbors.ncols() });
    }
    let rows = row_major(neighbors);
    solve_rows(x, &rows, neighbors.nrows(), params).map(|s| s.weights)
}

fn solve_rows(
    x: &[f64],
    rows: &[f64],
    count: usize,
    params: &ChsaParams,
) -> Result<solver::Solution> {
    let q = x.len();
    let diffs = Mat::from_fn(q, count, |c, j| rows[j * q + c] - x[c]);
    WeightProblem::new(diffs.as_ref(), params.gamma, params.lambda, params.solver_tolerance).solve()
}

fn record_for(rows: &[f64], q: usize, i: usize, params: &ChsaParams) -> Result<PointRecord> {
    let neighbor_indices = neighbors_in(rows, q, i, params.neighbors);
    let nbr_rows: Vec<f64> =
        neighbor_indices.iter().flat_map(|&j| rows[j * q..(j + 1) * q].iter().copied()).collect();
    let x = &rows[i * q..(i + 1) * q];
    let weights = solve_rows(x, &nbr_rows, neighbor_indices.len(), params)?.weights;

    let mut recon = vec![0.0; q];
    for (w, j) in weights.iter().zip(&neighbor_indices) {
        for (r, y) in recon.iter_mut().zip(&rows[j * q..(j + 1) * q]) {
            *r += w * y;
        }
    }
    let residual = sq_dist(x, &recon).sqrt();
    let weight_norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    let min_weight = weights.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PointRecord {
        neighbor_indices,
        is_flagged: min_weight < -params.negativity_threshold,
        weights,
        weight_norm,
        min_weight,
        residual,
    })
}

/// Runs the neighbour regression for every row of `points`.
pub fn stratify(points: MatRef<'_, f64>, params: &ChsaParams) -> Result<StratificationResult> {
    params.validate()?;
    let (p, q) = (points.nrows(), points.ncols());
    if p <= params.neighbors {
        return Err(Error::TooFewPoints { points: p, neighbors: params.neighbors });
    }
    if q == 0 {
        return Err(Error::InvalidParameter("points have zero coordinates".into()));
    }
    let rows = row_major(points);
    if let Some(index) = rows.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue { index });
    }
    let records = (0..p)
        .into_par_iter()
        .map(|i| record_for(&rows, q, i, params))
        .collect::<Result<Vec<_>>>()?;
    let mut vertex_indices: Vec<usize> =
        records.iter().enumerate().filter(|(_, r)| r.is_flagged).map(|(i, _)| i).collect();
    vertex_indices.sort_by(|&a, &b| {
        records[b].weight_norm.total_cmp(&records[a].weight_norm).then(a.cmp(&b))
    });
    Ok(StratificationResult { params: *params, records, vertex_indices })
}

/// Flagged indices chosen by count or weight-norm threshold, in ranking order.
pub fn top_vertices(result: &StratificationResult, selection: Selection) -> Vec<usize> {
    match selection {
        Selection::Count(n) => result.vertex_indices.iter().take(n).copied().collect(),
        Selection::Threshold(t) => result
            .vertex_indices
            .iter()
            .copied()
            .filter(|&i| result.records[i].weight_norm >= t)
            .collect(),
    }
}

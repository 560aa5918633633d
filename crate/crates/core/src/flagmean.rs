//! Weighted flag mean of subspaces.
//!
//! For bases `Y_1, …, Y_r` with weights `a_i > 0` the flag mean is read off the
//! thin SVD of `[√a_1·Y_1 | … | √a_r·Y_r]`: its left singular vectors
//! `u_1, …, u_l` (up to the numerical rank `l`) define the nested subspaces
//! `V_j = span{u_1, …, u_j}`. For equal-dimension inputs, `V_k` behaves like a
//! convex combination of the inputs on Gr(k, n), which is what
//! [`random_convex_sample`] exploits.

use faer::{Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{col, fix_column_signs};
use crate::subspace::{common_shape, Subspace};

/// Relative singular-value cutoff for the length of the flag.
pub const FLAG_RANK_TOLERANCE: f64 = 1e-10;

/// Consecutive singular values closer than this (relative) are reported as ties.
pub const TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct FlagMean {
    directions: Mat<f64>,
    singular_values: Vec<f64>,
    ties: Vec<usize>,
}

impl FlagMean {
    /// `n × l` matrix whose columns are `u_1, …, u_l`.
    pub fn directions(&self) -> MatRef<'_, f64> {
        self.directions.as_ref()
    }

    /// Nonincreasing, one per direction.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Length of the flag (dimension of the span of all inputs).
    pub fn len(&self) -> usize {
        self.directions.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Positions `i` where `σ_i` and `σ_{i+1}` coincide to [`TIE_TOLERANCE`];
    /// `V_{i+1}` is then not uniquely determined.
    pub fn ties(&self) -> &[usize] {
        &self.ties
    }

    pub fn has_ties(&self) -> bool {
        !self.ties.is_empty()
    }
}

/// Weighted flag mean of `inputs` (any dimensions, shared ambient space).
pub fn weighted_flag_mean(inputs: &[Subspace], weights: &[f64]) -> Result<FlagMean> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::InvalidParameter("flag mean of an empty set".into()))?;
    if weights.len() != inputs.len() {
        return Err(Error::WeightMismatch { inputs: inputs.len(), weights: weights.len() });
    }
    if let Some((index, &value)) =
        weights.iter().enumerate().find(|(_, w)| !(**w > 0.0 && w.is_finite()))
    {
        return Err(Error::NonpositiveWeight { index, value });
    }
    let n = first.n();
    if let Some(bad) = inputs.iter().find(|s| s.n() != n) {
        return Err(Error::AmbientMismatch { left: n, right: bad.n() });
    }

    let total: usize = inputs.iter().map(Subspace::k).sum();
    let mut stacked = Mat::<f64>::zeros(n, total);
    let mut offset = 0;
    for (sub, &w) in inputs.iter().zip(weights) {
        let scale = w.sqrt();
        for j in 0..sub.k() {
            for (i, v) in col(sub.basis(), j).iter().enumerate() {
                stacked[(i, offset + j)] = scale * v;
            }
        }
        offset += sub.k();
    }

    let svd = stacked
        .thin_svd()
        .map_err(|_| Error::DecompositionFailed { context: "weighted_flag_mean" })?;
    let s = svd.S().column_vector();
    let largest = s[0];
    let len = s.iter().take_while(|&&v| v > FLAG_RANK_TOLERANCE * largest).count();
    let singular_values: Vec<f64> = s.iter().take(len).copied().collect();
    let ties = singular_values
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] - w[1] < TIE_TOLERANCE * w[0])
        .map(|(i, _)| i)
        .collect();
    let mut directions = svd.U().subcols(0, len).to_owned();
    fix_column_signs(&mut directions);
    Ok(FlagMean { directions, singular_values, ties })
}

/// `V_k = span{u_1, …, u_k}`.
pub fn flag_component(mean: &FlagMean, k: usize) -> Result<Subspace> {
    if k == 0 || k > mean.len() {
        return Err(Error::ComponentTooLarge { requested: k, available: mean.len() });
    }
    Ok(Subspace::from_basis_unchecked(mean.directions.as_ref().subcols(0, k).to_owned()))
}

/// Random point of the probability simplex: i.i.d. uniform(0, 1] variates,
/// normalized to sum to one.
pub fn simplex_weights<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..len).map(|_| 1.0 - rng.random::<f64>()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// `count` random "convex combinations" of the generators: the k-dimensional
/// flag component of a weighted flag mean with simplex weights.
///
/// Sample `i` uses ChaCha stream `i` of `seed`, so output is bit-identical
/// regardless of how the work is scheduled.
pub fn random_convex_sample(
    generators: &[Subspace],
    count: usize,
    seed: u64,
) -> Result<Vec<Subspace>> {
    let (_, k) = common_shape(generators)?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let weights = simplex_weights(generators.len(), &mut rng);
            flag_component(&weighted_flag_mean(generators, &weights)?, k)
        })
        .collect()
}

//! Active-set solver for the per-point weight problem
//!
//! ```text
//! min_w  γ‖w‖₂² + λ‖w‖₁ + ‖x − Σ_j w_j y_j‖₂²   s.t.  Σ_j w_j = 1
//! ```
//!
//! With `d_j = y_j − x` the data term is `‖D w‖²` because the weights sum to
//! one, and a thin QR `D = Q R` reduces it to `‖R w‖²` with `R` at most
//! `N × N`. The ℓ1 term is removed by splitting `w = p − m` with `p, m ≥ 0`:
//!
//! ```text
//! min_z  ‖[R, −R] z‖² + γ‖z‖² + λ 1ᵀz   s.t.  [1, −1]ᵀ z = 1,  z ≥ 0
//! ```
//!
//! At a minimizer no pair `p_j, m_j` is positive at once (shrinking both
//! lowers the objective), so `‖z‖² = ‖w‖²` there and the split problem has
//! the same solution as the original. For `γ > 0` it is strictly convex.
//!
//! Each equality-constrained subproblem on the free set is solved as a
//! least-squares problem in the null space of the constraint, using the
//! stacked form `‖[R̃_F; √γ I] z − [0; −λ/(2√γ) 1]‖²`, which avoids forming
//! the (badly conditioned for tiny γ) normal equations.

use faer::linalg::solvers::SolveLstsq;
use faer::{Mat, MatRef};

use crate::error::{Error, Result};

/// Smallest ridge used inside the solver, relative to `max(1, ‖R‖_F²)`.
/// Only matters when the caller asks for `γ = 0`.
const MIN_RIDGE: f64 = 1e-14;

/// Multipliers below `-ADD_TOLERANCE · scale · max(1, ‖z‖∞)` release their
/// bound. Much tighter than the acceptance tolerance so that effects at the
/// scale of a tiny γ are still resolved.
const ADD_TOLERANCE: f64 = 1e-12;

pub(crate) struct Solution {
    pub weights: Vec<f64>,
}

pub(crate) struct WeightProblem {
    /// `m × N` triangular factor of the difference matrix.
    r: Mat<f64>,
    gamma: f64,
    lambda: f64,
    scale: f64,
    tolerance: f64,
}

impl WeightProblem {
    /// `diffs` is `q × N` with columns `y_j − x`.
    pub fn new(diffs: MatRef<'_, f64>, gamma: f64, lambda: f64, solver_tolerance: f64) -> Self {
        let qr = diffs.qr();
        let r = qr.thin_R().to_owned();
        let scale = r.norm_l2().powi(2).max(1.0);
        Self {
            r,
            gamma: gamma.max(MIN_RIDGE * scale),
            lambda,
            scale,
            tolerance: solver_tolerance * scale,
        }
    }

    fn n(&self) -> usize {
        self.r.ncols()
    }

    /// Column `i` of the split matrix `[R, −R]`, entry `row`.
    #[inline]
    fn split(&self, row: usize, i: usize) -> f64 {
        let n = self.n();
        if i < n {
            self.r[(row, i)]
        } else {
            -self.r[(row, i - n)]
        }
    }

    #[inline]
    fn sign(&self, i: usize) -> f64 {
        if i < self.n() {
            1.0
        } else {
            -1.0
        }
    }

    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let m = self.r.nrows();
        let rz: Vec<f64> =
            (0..m).map(|row| (0..z.len()).map(|i| self.split(row, i) * z[i]).sum()).collect();
        (0..z.len())
            .map(|i| {
                let data: f64 = (0..m).map(|row| self.split(row, i) * rz[row]).sum();
                2.0 * data + 2.0 * self.gamma * z[i] + self.lambda
            })
            .collect()
    }

    /// Minimizer over the free variables `free` (sorted) with the others at 0.
    fn solve_subproblem(&self, free: &[usize]) -> Vec<f64> {
        let f = free.len();
        let a: Vec<f64> = free.iter().map(|&i| self.sign(i)).collect();
        // minimum-norm point on the constraint plane
        let z0: Vec<f64> = a.iter().map(|s| s / f as f64).collect();
        if f == 1 {
            return z0;
        }

        // Householder reflector whose first column is a/‖a‖; the remaining
        // columns are an orthonormal basis of the constraint's null space.
        let norm = (f as f64).sqrt();
        let mut u: Vec<f64> = a.iter().map(|s| s / norm).collect();
        let lead = u[0];
        u[0] += if lead >= 0.0 { 1.0 } else { -1.0 };
        let uu: f64 = u.iter().map(|v| v * v).sum();
        let null = Mat::from_fn(f, f - 1, |i, j| {
            let delta = if i == j + 1 { 1.0 } else { 0.0 };
            delta - 2.0 * u[i] * u[j + 1] / uu
        });

        let m = self.r.nrows();
        let root = self.gamma.sqrt();
        let stacked = Mat::from_fn(m + f, f, |row, c| {
            if row < m {
                self.split(row, free[c])
            } else if row - m == c {
                root
            } else {
                0.0
            }
        });
        let shift = -self.lambda / (2.0 * root);
        let z0m = Mat::from_fn(f, 1, |i, _| z0[i]);
        let residual0 = &stacked * &z0m;
        let rhs = Mat::from_fn(m + f, 1, |row, _| {
            let target = if row < m { 0.0 } else { shift };
            target - residual0[(row, 0)]
        });
        let reduced = &stacked * &null;
        let y = reduced.qr().solve_lstsq(&rhs);
        let step = &null * &y;
        (0..f).map(|i| z0[i] + step[(i, 0)]).collect()
    }

    pub fn solve(&self) -> Result<Solution> {
        let n = self.n();
        let total = 2 * n;
        let cap = 10 * total * total;
        let mut z = vec![0.0; total];
        z[0] = 1.0;
        let mut free = vec![0usize];
        let mut last_added: Option<usize> = None;

        for iteration in 1..=cap {
            let target = self.solve_subproblem(&free);

            // ratio test against variables that would turn negative
            let mut blocking: Option<(f64, usize)> = None;
            for (pos, &i) in free.iter().enumerate() {
                if target[pos] < 0.0 {
                    let alpha = z[i] / (z[i] - target[pos]);
                    if blocking.is_none_or(|(best, _)| alpha < best) {
                        blocking = Some((alpha, pos));
                    }
                }
            }
            if let Some((alpha, pos)) = blocking {
                let idx = free[pos];
                if alpha <= 0.0 && last_added == Some(idx) {
                    // The released bound cannot move: its multiplier was noise.
                    return self.finish(z, &free, iteration);
                }
                for (p, &i) in free.iter().enumerate() {
                    z[i] += alpha * (target[p] - z[i]);
                }
                z[idx] = 0.0;
                free.remove(pos);
                last_added = None;
                continue;
            }

            for (p, &i) in free.iter().enumerate() {
                z[i] = target[p];
            }
            let grad = self.gradient(&z);
            let mu = free.iter().map(|&i| self.sign(i) * grad[i]).sum::<f64>() / free.len() as f64;
            let mut worst: Option<(f64, usize)> = None;
            for i in 0..total {
                if free.binary_search(&i).is_ok() {
                    continue;
                }
                let nu = grad[i] - mu * self.sign(i);
                if worst.is_none_or(|(best, _)| nu < best) {
                    worst = Some((nu, i));
                }
            }
            let zmax = z.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let add_tol = (ADD_TOLERANCE * self.scale * zmax).min(self.tolerance);
            match worst {
                Some((nu, i)) if nu < -add_tol => {
                    let at = free.binary_search(&i).unwrap_err();
                    free.insert(at, i);
                    last_added = Some(i);
                }
                _ => return self.finish(z, &free, iteration),
            }
        }
        Err(Error::SolverDivergence { iterations: cap, residual: self.kkt_residual(&z, &free) })
    }

    fn kkt_residual(&self, z: &[f64], free: &[usize]) -> f64 {
        let grad = self.gradient(z);
        let mu = free.iter().map(|&i| self.sign(i) * grad[i]).sum::<f64>() / free.len() as f64;
        let mut res =
            (z.iter().enumerate().map(|(i, v)| self.sign(i) * v).sum::<f64>() - 1.0).abs();
        for (i, g) in grad.iter().enumerate() {
            let nu = g - mu * self.sign(i);
            if free.binary_search(&i).is_ok() {
                res = res.max(nu.abs());
            } else {
                res = res.max(-nu);
            }
        }
        res
    }

    fn finish(&self, z: Vec<f64>, free: &[usize], iterations: usize) -> Result<Solution> {
        let n = self.n();
        let kkt_residual = self.kkt_residual(&z, free);
        if kkt_residual > self.tolerance {
            return Err(Error::SolverDivergence { iterations, residual: kkt_residual });
        }
        let weights = (0..n).map(|j| z[j] - z[n + j]).collect();
        Ok(Solution { weights })
    }
}

//! Points on the Grassmannian Gr(k, n), principal angles and chordal distance.
//!
//! A [`Subspace`] stores an `n × k` basis with orthonormal columns. Two bases
//! related by a `k × k` orthogonal factor represent the same point, and every
//! quantity computed here depends only on the spanned subspace.
//!
//! The chordal distance is
//!
//! ```text
//! d(S, T) = sqrt(sum_m sin^2 theta_m) = sqrt(k - ||S^T T||_F^2)
//! ```
//!
//! where `theta_m` are the principal angles between the two subspaces.

use std::cmp::Ordering;

use faer::{Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{col, dot, fix_column_signs, orthonormality_defect};

/// Relative singular-value cutoff used when forming a basis from raw vectors.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-8;

/// Maximum deviation of `basisᵀ·basis` from `I_k` accepted for a stored basis.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-10;

/// Below this value of `k - ||SᵀT||²` the radicand is recomputed from the
/// projection residual, which keeps full relative accuracy near zero.
const RESIDUAL_FORM_THRESHOLD: f64 = 1e-3;

/// A point on Gr(k, n), held as an orthonormal `n × k` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: Mat<f64>,
}

impl Subspace {
    /// Wraps a basis that is already orthonormal, checking it to
    /// [`ORTHONORMALITY_TOLERANCE`]. The basis is stored unchanged.
    pub fn from_orthonormal(basis: Mat<f64>) -> Result<Self> {
        if basis.ncols() == 0 || basis.nrows() < basis.ncols() {
            return Err(Error::InvalidParameter(format!(
                "basis shape {}x{} needs 1 <= k <= n",
                basis.nrows(),
                basis.ncols()
            )));
        }
        if basis.col_iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidParameter("basis has non-finite entries".into()));
        }
        let deviation = orthonormality_defect(basis.as_ref());
        if deviation > ORTHONORMALITY_TOLERANCE {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(Self { basis })
    }

    /// Span of the columns of `vectors` with the default rank tolerance.
    pub fn span(vectors: MatRef<'_, f64>) -> Result<Self> {
        orthonormalize(vectors, DEFAULT_RANK_TOLERANCE)
    }

    pub fn basis(&self) -> MatRef<'_, f64> {
        self.basis.as_ref()
    }

    pub fn into_basis(self) -> Mat<f64> {
        self.basis
    }

    /// Ambient dimension.
    pub fn n(&self) -> usize {
        self.basis.nrows()
    }

    /// Subspace dimension.
    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    /// Caller guarantees orthonormal columns (e.g. singular vectors).
    pub(crate) fn from_basis_unchecked(basis: Mat<f64>) -> Self {
        debug_assert!(orthonormality_defect(basis.as_ref()) < 1e-8);
        Self { basis }
    }

    fn column(&self, j: usize) -> &[f64] {
        col(self.basis.as_ref(), j)
    }

    /// Lexicographic order on the raw basis entries. Only used to fix the
    /// argument order of symmetric computations.
    fn raw_cmp(&self, other: &Self) -> Ordering {
        (0..self.k())
            .map(|j| {
                self.column(j)
                    .iter()
                    .zip(other.column(j))
                    .map(|(a, b)| a.total_cmp(b))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
            })
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

/// Orthonormal basis for the column space of `vectors` via a thin SVD.
///
/// The dimension of the result is the numerical rank: the number of singular
/// values above `rank_tolerance` times the largest one. Basis columns are the
/// leading left singular vectors, each signed so its largest-magnitude entry
/// is positive.
pub fn orthonormalize(vectors: MatRef<'_, f64>, rank_tolerance: f64) -> Result<Subspace> {
    let (n, m) = (vectors.nrows(), vectors.ncols());
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter(format!(
            "cannot orthonormalize an empty {n}x{m} matrix"
        )));
    }
    if !(rank_tolerance > 0.0 && rank_tolerance < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rank tolerance must lie in (0, 1), got {rank_tolerance}"
        )));
    }
    if vectors.col_iter().any(|c| c.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidParameter("input has non-finite entries".into()));
    }
    let svd =
        vectors.thin_svd().map_err(|_| Error::DecompositionFailed { context: "orthonormalize" })?;
    let s = svd.S().column_vector();
    let largest = s[0];
    if !(largest >= f64::MIN_POSITIVE) {
        return Err(Error::AllZeroInput);
    }
    let rank = s.iter().take_while(|&&v| v > rank_tolerance * largest).count();
    let mut basis = svd.U().subcols(0, rank).to_owned();
    fix_column_signs(&mut basis);
    Ok(Subspace { basis })
}

/// Principal angles `θ₁ ≤ θ₂ ≤ …` in `[0, π/2]`, one per singular value of
/// `aᵀb` (so `min(k_a, k_b)` of them).
///
/// Angles above π/4 come from the cosines (singular values of `aᵀb`), the
/// rest from the sines (singular values of the part of the smaller basis
/// orthogonal to the larger subspace), so small angles keep full accuracy.
pub fn principal_angles(a: &Subspace, b: &Subspace) -> Result<Vec<f64>> {
    if a.n() != b.n() {
        return Err(Error::AmbientMismatch { left: a.n(), right: b.n() });
    }
    let (s, t) = if a.k() >= b.k() { (a, b) } else { (b, a) };
    let fail = |_| Error::DecompositionFailed { context: "principal_angles" };
    let cross = s.basis().transpose() * t.basis();
    let cosines = cross.singular_values().map_err(fail)?;
    let resid = t.basis() - s.basis() * &cross;
    let mut sines = resid.singular_values().map_err(fail)?;
    sines.sort_by(f64::total_cmp);
    Ok(cosines
        .iter()
        .zip(&sines)
        .map(|(&c, &si)| {
            let c = c.clamp(0.0, 1.0);
            if c * c < 0.5 {
                c.acos()
            } else {
                si.clamp(0.0, 1.0).asin()
            }
        })
        .collect())
}

/// Chordal distance `sqrt(k - ||aᵀb||_F²)` between two points of Gr(k, n).
///
/// The radicand is clamped to `[0, k]`. When it is small the same quantity is
/// evaluated as `||b - a·(aᵀb)||_F²`, which is algebraically identical but does
/// not lose the leading digits to cancellation. Arguments are put in a fixed
/// order first, so `d(a, b)` and `d(b, a)` are bitwise equal.
pub fn chordal_distance(a: &Subspace, b: &Subspace) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::AmbientMismatch { left: a.n(), right: b.n() });
    }
    if a.k() != b.k() {
        return Err(Error::DimensionMismatch { left: a.k(), right: b.k() });
    }
    let (s, t) = match a.raw_cmp(b) {
        Ordering::Equal => return Ok(0.0),
        Ordering::Less => (a, b),
        Ordering::Greater => (b, a),
    };
    Ok(chordal_ordered(s, t))
}

fn chordal_ordered(s: &Subspace, t: &Subspace) -> f64 {
    let k = s.k();
    let mut cross = vec![0.0; k * k];
    let mut frob = 0.0;
    for j in 0..k {
        let tj = t.column(j);
        for i in 0..k {
            let v = dot(s.column(i), tj);
            cross[j * k + i] = v;
            frob += v * v;
        }
    }
    let kf = k as f64;
    let mut radicand = kf - frob;
    if radicand < RESIDUAL_FORM_THRESHOLD {
        let n = s.n();
        let mut resid = vec![0.0; n];
        radicand = 0.0;
        for j in 0..k {
            resid.copy_from_slice(t.column(j));
            for i in 0..k {
                let c = cross[j * k + i];
                for (r, si) in resid.iter_mut().zip(s.column(i)) {
                    *r -= c * si;
                }
            }
            radicand += dot(&resid, &resid);
        }
    }
    radicand.clamp(0.0, kf).sqrt()
}

/// Dense symmetric matrix of pairwise distances, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    p: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates and wraps a row-major `p × p` matrix: finite, nonnegative,
    /// exactly symmetric, zero diagonal.
    pub fn new(p: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != p * p {
            return Err(Error::SizeMismatch { expected: p * p, found: entries.len() });
        }
        for i in 0..p {
            if entries[i * p + i] != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "distance matrix diagonal entry {i} is nonzero"
                )));
            }
            for j in 0..p {
                let v = entries[i * p + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "distance ({i},{j}) = {v} is not a finite nonnegative value"
                    )));
                }
                if v.to_bits() != entries[j * p + i].to_bits() {
                    return Err(Error::InvalidParameter(format!(
                        "distance matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { p, entries })
    }

    pub fn len(&self) -> usize {
        self.p
    }

    pub fn is_empty(&self) -> bool {
        self.p == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.p + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.p..(i + 1) * self.p]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }
}

/// Checks that all points live in the same Gr(k, n) and returns `(n, k)`.
pub fn common_shape(points: &[Subspace]) -> Result<(usize, usize)> {
    let first =
        points.first().ok_or_else(|| Error::InvalidParameter("empty subspace set".into()))?;
    let (n, k) = (first.n(), first.k());
    for (index, pt) in points.iter().enumerate() {
        if pt.n() != n || pt.k() != k {
            return Err(Error::HeterogeneousSet {
                index,
                n: pt.n(),
                k: pt.k(),
                expected_n: n,
                expected_k: k,
            });
        }
    }
    Ok((n, k))
}

/// Pairwise chordal distances. Each unordered pair is evaluated exactly once
/// (rows in parallel), so the result does not depend on scheduling.
pub fn distance_matrix(points: &[Subspace]) -> Result<DistanceMatrix> {
    let p = points.len();
    if p < 2 {
        return Err(Error::TooFewPoints { points: p, neighbors: 1 });
    }
    common_shape(points)?;
    let upper: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|i| {
            let a = &points[i];
            points[i + 1..]
                .iter()
                .map(|b| match a.raw_cmp(b) {
                    Ordering::Equal => 0.0,
                    Ordering::Less => chordal_ordered(a, b),
                    Ordering::Greater => chordal_ordered(b, a),
                })
                .collect()
        })
        .collect();
    let mut entries = vec![0.0; p * p];
    for (i, row) in upper.into_iter().enumerate() {
        for (offset, d) in row.into_iter().enumerate() {
            let j = i + 1 + offset;
            entries[i * p + j] = d;
            entries[j * p + i] = d;
        }
    }
    Ok(DistanceMatrix { p, entries })
}

/// A random point of Gr(k, n): the span of `k` standard normal vectors.
pub fn random_subspace<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Subspace> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    loop {
        let raw = Mat::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sub = orthonormalize(raw.as_ref(), DEFAULT_RANK_TOLERANCE)?;
        if sub.k() == k {
            return Ok(sub);
        }
    }
}

/// `count` independent random points of Gr(k, n). Point `i` is drawn from its
/// own ChaCha stream of `seed`, so the set is reproducible and any prefix is
/// stable when `count` grows.
pub fn random_subspaces(count: usize, n: usize, k: usize, seed: u64) -> Result<Vec<Subspace>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            random_subspace(n, k, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    use super::*;
    use crate::linalg::from_row_major;

    fn coord(n: usize, axes: &[usize]) -> Subspace {
        let m = Mat::from_fn(n, axes.len(), |i, j| if i == axes[j] { 1.0 } else { 0.0 });
        Subspace::from_orthonormal(m).unwrap()
    }

    #[test]
    fn identity_is_already_orthonormal() {
        let s = orthonormalize(Mat::<f64>::identity(3, 3).as_ref(), 1e-8).unwrap();
        assert_eq!(s.k(), 3);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((s.basis()[(i, j)].abs() - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn duplicate_columns_collapse() {
        let m = from_row_major(3, 2, &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let s = orthonormalize(m.as_ref(), 1e-8).unwrap();
        assert_eq!(s.k(), 1);
        assert!((s.basis()[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn all_zero_input_is_rejected() {
        let m = Mat::<f64>::zeros(4, 2);
        assert!(matches!(orthonormalize(m.as_ref(), 1e-8), Err(Error::AllZeroInput)));
    }

    #[test]
    fn non_orthonormal_basis_rejected() {
        let m = from_row_major(2, 1, &[1.0, 1.0]);
        assert!(matches!(Subspace::from_orthonormal(m), Err(Error::NotOrthonormal { .. })));
    }

    #[test]
    fn angles_of_identical_and_diagonal_lines() {
        let a = coord(4, &[0, 1]);
        let th = principal_angles(&a, &a).unwrap();
        assert_eq!(th.len(), 2);
        assert!(th.iter().all(|t| t.abs() < 1e-7));

        let e1 = coord(2, &[0]);
        let mid = Subspace::from_orthonormal(from_row_major(2, 1, &[FRAC_1_SQRT_2, FRAC_1_SQRT_2]))
            .unwrap();
        let th = principal_angles(&e1, &mid).unwrap();
        assert!((th[0] - FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn angles_need_common_ambient_space() {
        let a = coord(3, &[0]);
        let b = coord(4, &[0]);
        assert!(matches!(principal_angles(&a, &b), Err(Error::AmbientMismatch { .. })));
        assert!(matches!(chordal_distance(&a, &b), Err(Error::AmbientMismatch { .. })));
    }

    #[test]
    fn chordal_examples() {
        let e1 = coord(2, &[0]);
        let e2 = coord(2, &[1]);
        assert_eq!(chordal_distance(&e1, &e2).unwrap(), 1.0);
        assert_eq!(chordal_distance(&e1, &e1).unwrap(), 0.0);

        let a = coord(4, &[0, 1]);
        let b = coord(4, &[0, 2]);
        let d = chordal_distance(&a, &b).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        let th = principal_angles(&a, &b).unwrap();
        assert!((th[0]).abs() < 1e-12 && (th[1] - FRAC_PI_2).abs() < 1e-12);
        let via_angles = th.iter().map(|t| t.sin().powi(2)).sum::<f64>().sqrt();
        assert!((via_angles - d).abs() < 1e-12);
    }

    #[test]
    fn chordal_requires_equal_k() {
        let a = coord(4, &[0]);
        let b = coord(4, &[0, 1]);
        assert!(matches!(chordal_distance(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn orthogonal_coordinate_subspaces_are_maximally_far() {
        let a = coord(6, &[0, 1, 2]);
        let b = coord(6, &[3, 4, 5]);
        assert_eq!(chordal_distance(&a, &b).unwrap(), 3f64.sqrt());
        let c = coord(6, &[2, 3, 4]);
        assert!(chordal_distance(&a, &c).unwrap() < 3f64.sqrt());
    }

    #[test]
    fn matrix_of_lines_in_the_plane() {
        let pts = vec![
            coord(2, &[0]),
            coord(2, &[1]),
            Subspace::from_orthonormal(from_row_major(2, 1, &[FRAC_1_SQRT_2, FRAC_1_SQRT_2]))
                .unwrap(),
        ];
        let d = distance_matrix(&pts).unwrap();
        // oracle: evaluate each pair independently
        for i in 0..3 {
            assert_eq!(d.get(i, i), 0.0);
            for j in 0..3 {
                assert_eq!(d.get(i, j), d.get(j, i));
                if i != j {
                    assert_eq!(d.get(i, j), chordal_distance(&pts[i], &pts[j]).unwrap());
                }
            }
        }
        assert_eq!(d.get(0, 1), 1.0);
        assert!((d.get(0, 2) - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((d.get(1, 2) - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn identical_pair_gives_zero_matrix() {
        let a = coord(3, &[1]);
        let d = distance_matrix(&[a.clone(), a]).unwrap();
        assert_eq!(d.as_slice(), &[0.0; 4]);
    }

    #[test]
    fn heterogeneous_sets_rejected() {
        let pts = vec![coord(4, &[0]), coord(4, &[0, 1])];
        assert!(matches!(distance_matrix(&pts), Err(Error::HeterogeneousSet { index: 1, .. })));
    }

    #[test]
    fn random_subspace_is_orthonormal() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let s = random_subspace(10, 9, &mut rng).unwrap();
        assert_eq!((s.n(), s.k()), (10, 9));
        assert!(orthonormality_defect(s.basis()) < 1e-12);
    }

    #[test]
    fn distance_matrix_validation() {
        assert!(DistanceMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0]).is_ok());
        assert!(DistanceMatrix::new(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(DistanceMatrix::new(2, vec![1.0, 1.0, 1.0, 0.0]).is_err());
        assert!(DistanceMatrix::new(2, vec![0.0, -1.0, -1.0, 0.0]).is_err());
        assert!(matches!(DistanceMatrix::new(2, vec![0.0; 3]), Err(Error::SizeMismatch { .. })));
    }
}

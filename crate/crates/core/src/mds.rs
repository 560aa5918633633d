//! Classical multidimensional scaling.
//!
//! From a distance matrix `D` form `A_ij = -½ D_ij²`, double-center it to
//! `B = H A H` with `H = I - (1/p) 11ᵀ`, and embed point `i` as row `i` of
//! `[√λ_1 v_1 | … | √λ_q v_q]` for the leading positive eigenpairs of `B`.
//! When `D` is Euclidean (as chordal distances are), `B` is positive
//! semidefinite and the embedding reproduces `D` exactly at full rank.

use faer::{Mat, MatRef, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::fix_column_signs;
use crate::subspace::DistanceMatrix;

/// Eigenvalues above this fraction of the largest count as positive.
pub const AUTO_DIMENSION_THRESHOLD: f64 = 1e-9;

/// If the largest eigenvalue is below this fraction of `max D²` the
/// configuration is treated as a single point.
const DEGENERATE_THRESHOLD: f64 = 1e-12;

/// Requested embedding dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MdsDim {
    /// Every eigenvalue above [`AUTO_DIMENSION_THRESHOLD`]` × λ_max`.
    Auto,
    Fixed(usize),
}

impl std::fmt::Display for MdsDim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MdsDim::Auto => f.write_str("auto"),
            MdsDim::Fixed(q) => write!(f, "{q}"),
        }
    }
}

impl std::str::FromStr for MdsDim {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(MdsDim::Auto);
        }
        match s.parse::<usize>() {
            Ok(q) if q >= 1 => Ok(MdsDim::Fixed(q)),
            _ => Err(format!("expected `auto` or a positive integer, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    coordinates: Mat<f64>,
    eigenvalues: Vec<f64>,
    requested: MdsDim,
    negative_mass: f64,
}

impl Embedding {
    /// Reassembles an embedding from stored parts (e.g. a CSV plus sidecar).
    pub fn from_parts(
        coordinates: Mat<f64>,
        eigenvalues: Vec<f64>,
        requested: MdsDim,
        negative_mass: f64,
    ) -> Result<Self> {
        if coordinates.ncols() > coordinates.nrows() {
            return Err(Error::InvalidParameter(format!(
                "embedding dimension {} exceeds point count {}",
                coordinates.ncols(),
                coordinates.nrows()
            )));
        }
        Ok(Self { coordinates, eigenvalues, requested, negative_mass })
    }

    /// `p × q`; row `i` is the image of point `i`.
    pub fn coordinates(&self) -> MatRef<'_, f64> {
        self.coordinates.as_ref()
    }

    pub fn into_coordinates(self) -> Mat<f64> {
        self.coordinates
    }

    /// Full spectrum of `B`, nonincreasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.coordinates.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dimension actually used.
    pub fn dim(&self) -> usize {
        self.coordinates.ncols()
    }

    pub fn requested(&self) -> MdsDim {
        self.requested
    }

    /// True when a fixed request exceeded the number of positive eigenvalues.
    pub fn dim_reduced(&self) -> bool {
        matches!(self.requested, MdsDim::Fixed(q) if q > self.dim())
    }

    /// `Σ|λ⁻| / Σ|λ|`; zero for Euclidean distance matrices.
    pub fn negative_mass(&self) -> f64 {
        self.negative_mass
    }
}

/// `B = H A H` with `A_ij = -½ d_ij²`. Exactly symmetric.
pub fn double_center(d: &DistanceMatrix) -> Mat<f64> {
    let p = d.len();
    let pf = p as f64;
    let a = |i: usize, j: usize| -0.5 * d.get(i, j) * d.get(i, j);
    let row_mean: Vec<f64> = (0..p).map(|i| (0..p).map(|j| a(i, j)).sum::<f64>() / pf).collect();
    let grand = row_mean.iter().sum::<f64>() / pf;
    let mut b = Mat::<f64>::zeros(p, p);
    for j in 0..p {
        for i in j..p {
            let v = a(i, j) - row_mean[i] - row_mean[j] + grand;
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    b
}

/// Classical MDS of `d` into `dim` dimensions.
pub fn embed(d: &DistanceMatrix, dim: MdsDim) -> Result<Embedding> {
    let p = d.len();
    if p < 2 {
        return Err(Error::TooFewPoints { points: p, neighbors: 1 });
    }
    if let MdsDim::Fixed(q) = dim {
        if q == 0 || q > p {
            return Err(Error::InvalidParameter(format!(
                "embedding dimension {q} must lie in 1..={p}"
            )));
        }
    }
    let b = double_center(d);
    let evd = b
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::DecompositionFailed { context: "mds eigendecomposition" })?;
    // faer returns ascending order
    let ascending = evd.S().column_vector();
    let eigenvalues: Vec<f64> = ascending.iter().rev().copied().collect();
    let largest = eigenvalues[0];
    let max_sq = d.max_entry().powi(2);
    if max_sq == 0.0 || !(largest > DEGENERATE_THRESHOLD * max_sq) {
        return Err(Error::NoPositiveEigenvalues);
    }
    let positive =
        eigenvalues.iter().take_while(|&&l| l > AUTO_DIMENSION_THRESHOLD * largest).count();
    let q = match dim {
        MdsDim::Auto => positive,
        MdsDim::Fixed(q) => q.min(positive),
    };

    let total: f64 = eigenvalues.iter().map(|l| l.abs()).sum();
    let negative: f64 = eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();
    let negative_mass = negative / total;

    let u = evd.U();
    let mut vectors = Mat::from_fn(p, q, |i, j| u[(i, p - 1 - j)]);
    fix_column_signs(&mut vectors);
    let coordinates = Mat::from_fn(p, q, |i, j| eigenvalues[j].sqrt() * vectors[(i, j)]);
    Ok(Embedding { coordinates, eigenvalues, requested: dim, negative_mass })
}

/// `max_{i<j} | ‖e_i − e_j‖ − d_ij |`.
pub fn reconstruction_error(e: &Embedding, d: &DistanceMatrix) -> Result<f64> {
    reconstruction_error_of(e.coordinates(), d)
}

pub(crate) fn reconstruction_error_of(x: MatRef<'_, f64>, d: &DistanceMatrix) -> Result<f64> {
    let p = d.len();
    if x.nrows() != p {
        return Err(Error::SizeMismatch { expected: p, found: x.nrows() });
    }
    let mut worst = 0.0f64;
    for i in 0..p {
        for j in i + 1..p {
            let dist = (0..x.ncols()).map(|c| (x[(i, c)] - x[(j, c)]).powi(2)).sum::<f64>().sqrt();
            worst = worst.max((dist - d.get(i, j)).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dm(p: usize, v: &[f64]) -> DistanceMatrix {
        DistanceMatrix::new(p, v.to_vec()).unwrap()
    }

    fn planar(points: &[(f64, f64)]) -> DistanceMatrix {
        let p = points.len();
        let mut v = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    let (a, b) = (points[i], points[j]);
                    v[i * p + j] = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
                }
            }
        }
        dm(p, &v)
    }

    #[test]
    fn double_center_two_points() {
        // A = [[0,-2],[-2,0]], H A H = [[1,-1],[-1,1]]
        let b = double_center(&dm(2, &[0.0, 2.0, 2.0, 0.0]));
        assert_eq!(b[(0, 0)], 1.0);
        assert_eq!(b[(0, 1)], -1.0);
        assert_eq!(b[(1, 0)], -1.0);
        assert_eq!(b[(1, 1)], 1.0);
    }

    #[test]
    fn double_center_zero_matrix() {
        let b = double_center(&dm(3, &[0.0; 9]));
        assert!(b.col_iter().all(|c| c.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn double_center_rows_sum_to_zero() {
        let d = planar(&[(0.0, 0.0), (3.0, 1.0), (-2.0, 5.0), (1.0, 1.0), (7.0, -4.0)]);
        let b = double_center(&d);
        for i in 0..5 {
            let s: f64 = (0..5).map(|j| b[(i, j)]).sum();
            assert!(s.abs() < 1e-10);
            for j in 0..5 {
                assert_eq!(b[(i, j)], b[(j, i)]);
            }
        }
    }

    #[test]
    fn two_points_on_a_line() {
        let d = dm(2, &[0.0, 2.0, 2.0, 0.0]);
        let e = embed(&d, MdsDim::Fixed(1)).unwrap();
        assert_eq!(e.dim(), 1);
        let x = e.coordinates();
        assert!((x[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((x[(0, 0)] + x[(1, 0)]).abs() < 1e-12);
        assert!(reconstruction_error(&e, &d).unwrap() < 1e-12);
        assert!((e.eigenvalues()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn equilateral_triangle_auto() {
        let d = dm(3, &[0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        let e = embed(&d, MdsDim::Auto).unwrap();
        assert_eq!(e.dim(), 2);
        // B = H(-½ J + ½ I)H = ½ H, eigenvalues ½, ½, 0
        assert!((e.eigenvalues()[0] - 0.5).abs() < 1e-12);
        assert!((e.eigenvalues()[1] - 0.5).abs() < 1e-12);
        assert!(reconstruction_error(&e, &d).unwrap() < 1e-10);
    }

    #[test]
    fn coincident_points_have_no_embedding() {
        assert!(matches!(
            embed(&dm(3, &[0.0; 9]), MdsDim::Auto),
            Err(Error::NoPositiveEigenvalues)
        ));
    }

    #[test]
    fn fixed_dimension_is_reduced_to_positive_spectrum() {
        let d = planar(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
        let e = embed(&d, MdsDim::Fixed(4)).unwrap();
        assert_eq!(e.dim(), 2);
        assert!(e.dim_reduced());
        assert_eq!(e.eigenvalues().len(), 4);
        assert!(embed(&d, MdsDim::Fixed(5)).is_err());
    }

    #[test]
    fn truncated_embedding_error_matches_brute_force() {
        let pts = [(0.0, 0.0), (4.0, 0.0), (0.0, 1.0), (4.0, 1.0), (2.0, 0.5)];
        let d = planar(&pts);
        let e = embed(&d, MdsDim::Fixed(1)).unwrap();
        // Centered configuration has principal axes x (variance 6.4) and y,
        // so the 1-D embedding is the centered x coordinate up to sign.
        let cx = pts.iter().map(|p| p.0).sum::<f64>() / 5.0;
        let mut oracle = 0.0f64;
        for i in 0..5 {
            assert!(((pts[i].0 - cx).abs() - e.coordinates()[(i, 0)].abs()).abs() < 1e-10);
            for j in i + 1..5 {
                let projected = (pts[i].0 - pts[j].0).abs();
                oracle = oracle.max((projected - d.get(i, j)).abs());
            }
        }
        assert!((reconstruction_error(&e, &d).unwrap() - oracle).abs() < 1e-10);
    }

    #[test]
    fn size_mismatch_detected() {
        let d = planar(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        let e = embed(&d, MdsDim::Auto).unwrap();
        let d2 = planar(&[(0.0, 0.0), (1.0, 0.0)]);
        assert!(matches!(reconstruction_error(&e, &d2), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn dim_parsing() {
        assert_eq!("auto".parse::<MdsDim>().unwrap(), MdsDim::Auto);
        assert_eq!("3".parse::<MdsDim>().unwrap(), MdsDim::Fixed(3));
        assert!("0".parse::<MdsDim>().is_err());
        assert!("x".parse::<MdsDim>().is_err());
    }
}

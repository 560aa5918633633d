//! Small dense helpers shared by the numerical modules.

use faer::{Mat, MatRef};

/// Dot product with four independent accumulators.
///
/// The summation order is fixed, so the result is a deterministic function of
/// the two slices and is symmetric in its arguments.
#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = [0.0f64; 4];
    let xs = x.chunks_exact(4);
    let ys = y.chunks_exact(4);
    let (xr, yr) = (xs.remainder(), ys.remainder());
    for (a, b) in xs.zip(ys) {
        acc[0] += a[0] * b[0];
        acc[1] += a[1] * b[1];
        acc[2] += a[2] * b[2];
        acc[3] += a[3] * b[3];
    }
    let mut tail = 0.0;
    for (a, b) in xr.iter().zip(yr) {
        tail += a * b;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Column `j` of a column-major matrix as a contiguous slice.
#[inline]
pub(crate) fn col(m: MatRef<'_, f64>, j: usize) -> &[f64] {
    m.col(j).try_as_col_major().expect("owned faer matrices store columns contiguously").as_slice()
}

/// Flip each column so its largest-magnitude entry is positive (first such
/// entry on ties). Pins down the sign ambiguity of singular and eigen vectors.
pub(crate) fn fix_column_signs(m: &mut Mat<f64>) {
    for j in 0..m.ncols() {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for i in 0..m.nrows() {
            let v = m[(i, j)].abs();
            if v > best_abs {
                best_abs = v;
                best = i;
            }
        }
        if m.nrows() > 0 && m[(best, j)] < 0.0 {
            for i in 0..m.nrows() {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
}

/// Max-abs deviation of `mᵀm` from the identity.
pub(crate) fn orthonormality_defect(m: MatRef<'_, f64>) -> f64 {
    let k = m.ncols();
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in i..k {
            let g = dot(col(m, i), col(m, j));
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    worst
}

/// Build a matrix from row-major values.
pub(crate) fn from_row_major(rows: usize, cols: usize, values: &[f64]) -> Mat<f64> {
    debug_assert_eq!(values.len(), rows * cols);
    Mat::from_fn(rows, cols, |i, j| values[i * cols + j])
}

pub(crate) fn to_row_major(m: MatRef<'_, f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

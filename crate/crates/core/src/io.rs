//! File formats.
//!
//! Paths ending in `.csv` use text forms; anything else is binary.
//!
//! * Subspace set, binary: `p, n, k` as little-endian `u64`, then `p`
//!   row-major `n × k` blocks of little-endian `f64`.
//! * Subspace set, CSV: one basis per block of `n` lines with `k` values,
//!   blocks separated by a blank line.
//! * Distance matrix, binary: `p` as `u64`, then `p²` `f64` row-major.
//! * Distance matrix / embedding, CSV: one row per line, comma separated.
//! * Class map: CSV of non-negative integers, one image row per line.
//!
//! Text floats are written with 17 significant digits, so reading them back
//! gives the same bits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::chsa::StratificationResult;
use crate::error::{Error, Result};
use crate::linalg::{from_row_major, to_row_major};
use crate::mds::{Embedding, MdsDim};
use crate::pipeline::ClassMap;
use crate::subspace::{common_shape, DistanceMatrix, Subspace};

pub fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Lossless text form of a float.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_u64(path: &Path, r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s(path: &Path, r: &mut impl Read, count: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut b = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}

fn expect_eof(path: &Path, r: &mut impl Read) -> Result<()> {
    let mut b = [0u8; 1];
    match r.read(&mut b).map_err(|e| Error::io(path, e))? {
        0 => Ok(()),
        _ => Err(Error::parse(path, "trailing bytes after the declared payload")),
    }
}

fn to_usize(path: &Path, v: u64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::parse(path, format!("size {v} does not fit")))
}

fn parse_row(path: &Path, line_no: usize, line: &str) -> Result<Vec<f64>> {
    line.split(',')
        .map(|f| {
            f.trim().parse::<f64>().map_err(|e| {
                Error::parse(path, format!("line {}: {e} in {:?}", line_no + 1, f.trim()))
            })
        })
        .collect()
}

fn write_row(w: &mut impl Write, values: impl Iterator<Item = f64>) -> std::io::Result<()> {
    let mut first = true;
    for v in values {
        if !first {
            w.write_all(b",")?;
        }
        first = false;
        w.write_all(format_f64(v).as_bytes())?;
    }
    w.write_all(b"\n")
}

pub fn write_subspaces(path: impl AsRef<Path>, points: &[Subspace]) -> Result<()> {
    let path = path.as_ref();
    let (n, k) = if points.is_empty() { (0, 0) } else { common_shape(points)? };
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    if is_csv(path) {
        for (i, s) in points.iter().enumerate() {
            if i > 0 {
                w.write_all(b"\n").map_err(io)?;
            }
            let b = s.basis();
            for r in 0..n {
                write_row(&mut w, (0..k).map(|c| b[(r, c)])).map_err(io)?;
            }
        }
    } else {
        for v in [points.len(), n, k] {
            w.write_all(&(v as u64).to_le_bytes()).map_err(io)?;
        }
        for s in points {
            let b = s.basis();
            for r in 0..n {
                for c in 0..k {
                    w.write_all(&b[(r, c)].to_le_bytes()).map_err(io)?;
                }
            }
        }
    }
    finish(path, w)
}

/// Reads a subspace set; every basis is checked for orthonormality.
pub fn read_subspaces(path: impl AsRef<Path>) -> Result<Vec<Subspace>> {
    let path = path.as_ref();
    let mut r = open(path)?;
    let points = if is_csv(path) {
        let mut blocks: Vec<Vec<Vec<f64>>> = vec![Vec::new()];
        for (no, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                if !blocks.last().unwrap().is_empty() {
                    blocks.push(Vec::new());
                }
                continue;
            }
            blocks.last_mut().unwrap().push(parse_row(path, no, &line)?);
        }
        if blocks.last().is_some_and(Vec::is_empty) {
            blocks.pop();
        }
        blocks
            .into_iter()
            .enumerate()
            .map(|(i, rows)| {
                let k = rows[0].len();
                if rows.iter().any(|r| r.len() != k) {
                    return Err(Error::parse(path, format!("block {i} has ragged rows")));
                }
                Subspace::from_orthonormal(Mat::from_fn(rows.len(), k, |a, b| rows[a][b]))
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        let p = to_usize(path, read_u64(path, &mut r)?)?;
        let n = to_usize(path, read_u64(path, &mut r)?)?;
        let k = to_usize(path, read_u64(path, &mut r)?)?;
        let mut points = Vec::with_capacity(p);
        for _ in 0..p {
            let v = read_f64s(path, &mut r, n * k)?;
            points.push(Subspace::from_orthonormal(from_row_major(n, k, &v))?);
        }
        expect_eof(path, &mut r)?;
        points
    };
    if !points.is_empty() {
        common_shape(&points)?;
    }
    Ok(points)
}

pub fn write_distance_matrix(path: impl AsRef<Path>, d: &DistanceMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    if is_csv(path) {
        for i in 0..d.len() {
            write_row(&mut w, d.row(i).iter().copied()).map_err(io)?;
        }
    } else {
        w.write_all(&(d.len() as u64).to_le_bytes()).map_err(io)?;
        for v in d.as_slice() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    finish(path, w)
}

pub fn read_distance_matrix(path: impl AsRef<Path>) -> Result<DistanceMatrix> {
    let path = path.as_ref();
    if is_csv(path) {
        let m = read_matrix_csv(path)?;
        if m.nrows() != m.ncols() {
            return Err(Error::parse(
                path,
                format!("distance matrix is {}x{}", m.nrows(), m.ncols()),
            ));
        }
        DistanceMatrix::new(m.nrows(), to_row_major(m.as_ref()))
    } else {
        let mut r = open(path)?;
        let p = to_usize(path, read_u64(path, &mut r)?)?;
        let entries = read_f64s(path, &mut r, p * p)?;
        expect_eof(path, &mut r)?;
        DistanceMatrix::new(p, entries)
    }
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: MatRef<'_, f64>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for i in 0..m.nrows() {
        write_row(&mut w, (0..m.ncols()).map(|j| m[(i, j)])).map_err(|e| Error::io(path, e))?;
    }
    finish(path, w)
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Mat<f64>> {
    let path = path.as_ref();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (no, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_row(path, no, &line)?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(
                    path,
                    format!("line {} has {} fields, expected {}", no + 1, row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    Ok(Mat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// JSON sidecar stored next to an embedding CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    #[serde(default)]
    pub version: String,
    pub eigenvalues: Vec<f64>,
    pub q: usize,
    pub requested: MdsDim,
    pub negative_mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl EmbeddingMeta {
    pub fn of(e: &Embedding, config: Option<serde_json::Value>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            eigenvalues: e.eigenvalues().to_vec(),
            q: e.dim(),
            requested: e.requested(),
            negative_mass: e.negative_mass(),
            config,
        }
    }
}

pub fn write_embedding(
    csv_path: impl AsRef<Path>,
    sidecar_path: impl AsRef<Path>,
    e: &Embedding,
    config: Option<serde_json::Value>,
) -> Result<()> {
    write_matrix_csv(csv_path, e.coordinates())?;
    write_json(sidecar_path, &EmbeddingMeta::of(e, config))
}

pub fn read_embedding(
    csv_path: impl AsRef<Path>,
    sidecar_path: impl AsRef<Path>,
) -> Result<Embedding> {
    let coords = read_matrix_csv(csv_path.as_ref())?;
    let meta: EmbeddingMeta = read_json(sidecar_path)?;
    if meta.q != coords.ncols() {
        return Err(Error::SizeMismatch { expected: meta.q, found: coords.ncols() });
    }
    Embedding::from_parts(coords, meta.eigenvalues, meta.requested, meta.negative_mass)
}

pub fn read_class_map(path: impl AsRef<Path>) -> Result<ClassMap> {
    let path = path.as_ref();
    let mut labels = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (no, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let before = labels.len();
        for f in line.split(',') {
            labels.push(f.trim().parse::<u32>().map_err(|e| {
                Error::parse(path, format!("line {}: {e} in {:?}", no + 1, f.trim()))
            })?);
        }
        let width = labels.len() - before;
        if *cols.get_or_insert(width) != width {
            return Err(Error::parse(path, format!("line {} has {width} labels", no + 1)));
        }
        rows += 1;
    }
    ClassMap::new(rows, cols.unwrap_or(0), labels)
}

pub fn write_class_map(path: impl AsRef<Path>, map: &ClassMap) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for r in 0..map.rows() {
        let line: Vec<String> = (0..map.cols()).map(|c| map.get(r, c).to_string()).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
    }
    finish(path, w)
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes to JSON");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_json_string(value)).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn write_stratification(path: impl AsRef<Path>, s: &StratificationResult) -> Result<()> {
    write_json(path, s)
}

pub fn read_stratification(path: impl AsRef<Path>) -> Result<StratificationResult> {
    read_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::{distance_matrix, random_subspaces};

    #[test]
    fn float_text_is_lossless() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 123456789.12345679, f64::MIN_POSITIVE, 0.0] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn subspace_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let pts = random_subspaces(4, 7, 3, 2).unwrap();
        for name in ["s.bin", "s.csv"] {
            let p = dir.path().join(name);
            write_subspaces(&p, &pts).unwrap();
            assert_eq!(read_subspaces(&p).unwrap(), pts, "{name}");
        }
    }

    #[test]
    fn distance_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let d = distance_matrix(&random_subspaces(5, 6, 2, 1).unwrap()).unwrap();
        for name in ["d.bin", "d.csv"] {
            let p = dir.path().join(name);
            write_distance_matrix(&p, &d).unwrap();
            assert_eq!(read_distance_matrix(&p).unwrap(), d, "{name}");
        }
    }

    #[test]
    fn truncated_binary_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bin");
        write_subspaces(&p, &random_subspaces(2, 4, 2, 0).unwrap()).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_subspaces(&p), Err(Error::Io { .. })));
    }

    #[test]
    fn class_map_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let map = ClassMap::new(2, 3, vec![0, 1, 2, 16, 0, 3]).unwrap();
        let p = dir.path().join("gt.csv");
        write_class_map(&p, &map).unwrap();
        assert_eq!(read_class_map(&p).unwrap(), map);
        std::fs::write(&p, "1,2\n3\n").unwrap();
        assert!(matches!(read_class_map(&p), Err(Error::Parse { .. })));
    }
}

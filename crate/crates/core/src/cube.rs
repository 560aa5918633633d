//! Hyperspectral cubes stored as a JSON header plus a raw binary payload.
//!
//! ```json
//! {"rows": 145, "cols": 145, "bands": 220, "interleave": "BSQ",
//!  "dtype": "int16", "payload": "scene.raw", "band_mask": [0, 1, 2]}
//! ```
//!
//! `payload` is resolved relative to the header's directory. The optional
//! `byte_order` field (`"little"` by default, or `"big"`) covers payloads
//! written on big-endian systems such as ENVI exports with `byte order = 1`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Interleave {
    /// Band sequential: `[band][row][col]`.
    Bsq,
    /// Band interleaved by line: `[row][band][col]`.
    Bil,
    /// Band interleaved by pixel: `[row][col][band]`.
    Bip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    Float32,
    Float64,
    Int16,
}

impl Dtype {
    pub fn width(self) -> usize {
        match self {
            Dtype::Float32 => 4,
            Dtype::Float64 => 8,
            Dtype::Int16 => 2,
        }
    }

    fn parse(name: &str) -> Result<Self> {
        match name {
            "float32" => Ok(Dtype::Float32),
            "float64" => Ok(Dtype::Float64),
            "int16" => Ok(Dtype::Int16),
            other => Err(Error::UnsupportedDtype(other.to_string())),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Dtype::Float32 => "float32",
            Dtype::Float64 => "float64",
            Dtype::Int16 => "int16",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ByteOrder {
    #[default]
    Little,
    Big,
}

/// On-disk header. `dtype` stays a string so that unknown types surface as
/// [`Error::UnsupportedDtype`] rather than a generic parse failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeHeader {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub interleave: Interleave,
    pub dtype: String,
    pub payload: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_mask: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub byte_order: Option<ByteOrder>,
}

impl CubeHeader {
    fn check(&self) -> Result<Dtype> {
        if self.rows == 0 || self.cols == 0 || self.bands == 0 {
            return Err(Error::MalformedHeader(format!(
                "dimensions must be positive, got {}x{}x{}",
                self.rows, self.cols, self.bands
            )));
        }
        let dtype = Dtype::parse(&self.dtype)?;
        if let Some(mask) = &self.band_mask {
            if mask.is_empty() {
                return Err(Error::MalformedHeader("band_mask is empty".into()));
            }
            let mut seen = vec![false; self.bands];
            for &b in mask {
                if b >= self.bands {
                    return Err(Error::MalformedHeader(format!(
                        "band_mask entry {b} out of range for {} bands",
                        self.bands
                    )));
                }
                if std::mem::replace(&mut seen[b], true) {
                    return Err(Error::MalformedHeader(format!("band_mask repeats band {b}")));
                }
            }
        }
        Ok(dtype)
    }

    fn payload_bytes(&self, dtype: Dtype) -> u64 {
        (self.rows as u64) * (self.cols as u64) * (self.bands as u64) * dtype.width() as u64
    }
}

/// Radiance cube held in band-interleaved-by-pixel order, so each pixel's
/// spectrum is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperspectralCube {
    rows: usize,
    cols: usize,
    bands: usize,
    values: Vec<f64>,
    band_mask: Option<Vec<usize>>,
}

impl HyperspectralCube {
    /// `values` in `(row, col, band)` order.
    pub fn new(rows: usize, cols: usize, bands: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || bands == 0 {
            return Err(Error::InvalidParameter(format!(
                "cube dimensions must be positive, got {rows}x{cols}x{bands}"
            )));
        }
        let expected = rows * cols * bands;
        if values.len() != expected {
            return Err(Error::SizeMismatch { expected, found: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        Ok(Self { rows, cols, bands, values, band_mask: None })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    /// Original band indices kept by the header's mask, if any.
    pub fn band_mask(&self) -> Option<&[usize]> {
        self.band_mask.as_deref()
    }

    pub fn spectrum(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.cols + col) * self.bands;
        &self.values[start..start + self.bands]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Keeps only the listed bands, in the listed order.
    pub fn select_bands(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() || keep.iter().any(|&b| b >= self.bands) {
            return Err(Error::InvalidParameter("band selection out of range".into()));
        }
        let mut values = Vec::with_capacity(self.rows * self.cols * keep.len());
        for px in self.values.chunks_exact(self.bands) {
            values.extend(keep.iter().map(|&b| px[b]));
        }
        let band_mask = Some(match &self.band_mask {
            Some(prev) => keep.iter().map(|&b| prev[b]).collect(),
            None => keep.to_vec(),
        });
        Ok(Self { rows: self.rows, cols: self.cols, bands: keep.len(), values, band_mask })
    }
}

fn decode(bytes: &[u8], dtype: Dtype, order: ByteOrder) -> f64 {
    macro_rules! conv {
        ($t:ty, $n:expr) => {{
            let mut buf = [0u8; $n];
            buf.copy_from_slice(bytes);
            match order {
                ByteOrder::Little => <$t>::from_le_bytes(buf) as f64,
                ByteOrder::Big => <$t>::from_be_bytes(buf) as f64,
            }
        }};
    }
    match dtype {
        Dtype::Float32 => conv!(f32, 4),
        Dtype::Float64 => conv!(f64, 8),
        Dtype::Int16 => conv!(i16, 2),
    }
}

/// Position of sample `index` (in file order) within a BIP buffer.
fn bip_offset(h: &CubeHeader, index: usize) -> usize {
    let (rows, cols, bands) = (h.rows, h.cols, h.bands);
    let (row, col, band) = match h.interleave {
        Interleave::Bsq => {
            let band = index / (rows * cols);
            let rest = index % (rows * cols);
            (rest / cols, rest % cols, band)
        }
        Interleave::Bil => {
            let row = index / (bands * cols);
            let rest = index % (bands * cols);
            (row, rest % cols, rest / cols)
        }
        Interleave::Bip => {
            let pixel = index / bands;
            (pixel / cols, pixel % cols, index % bands)
        }
    };
    (row * cols + col) * bands + band
}

pub fn read_header(header_path: &Path) -> Result<CubeHeader> {
    let text = std::fs::read_to_string(header_path).map_err(|e| Error::io(header_path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedHeader(e.to_string()))
}

/// Reads a cube described by a JSON header, applying its band mask.
pub fn load_cube(header_path: impl AsRef<Path>) -> Result<HyperspectralCube> {
    let header_path = header_path.as_ref();
    let header = read_header(header_path)?;
    let dtype = header.check()?;
    let order = header.byte_order.unwrap_or_default();
    let payload = payload_path(header_path, &header);

    let file = File::open(&payload).map_err(|e| Error::io(&payload, e))?;
    let found = file.metadata().map_err(|e| Error::io(&payload, e))?.len();
    let expected = header.payload_bytes(dtype);
    if found != expected {
        return Err(Error::PayloadSizeMismatch { expected, found });
    }

    let total = header.rows * header.cols * header.bands;
    let mut values = vec![0.0; total];
    let mut reader = BufReader::with_capacity(1 << 16, file);
    let width = dtype.width();
    let mut buf = [0u8; 8];
    for index in 0..total {
        reader.read_exact(&mut buf[..width]).map_err(|e| Error::io(&payload, e))?;
        let v = decode(&buf[..width], dtype, order);
        let at = bip_offset(&header, index);
        if !v.is_finite() {
            return Err(Error::NonFiniteValue { index: at });
        }
        values[at] = v;
    }

    let cube = HyperspectralCube {
        rows: header.rows,
        cols: header.cols,
        bands: header.bands,
        values,
        band_mask: None,
    };
    match &header.band_mask {
        Some(mask) => cube.select_bands(mask),
        None => Ok(cube),
    }
}

fn payload_path(header_path: &Path, header: &CubeHeader) -> PathBuf {
    let rel = Path::new(&header.payload);
    match header_path.parent() {
        Some(dir) if rel.is_relative() => dir.join(rel),
        _ => rel.to_path_buf(),
    }
}

/// Writes `cube` as a header plus payload with the given layout. Values are
/// converted to `dtype` (int16 rounds to nearest).
pub fn write_cube(
    header_path: impl AsRef<Path>,
    cube: &HyperspectralCube,
    interleave: Interleave,
    dtype: Dtype,
    band_mask: Option<Vec<usize>>,
) -> Result<()> {
    let header_path = header_path.as_ref();
    let stem = header_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "cube".into());
    let header = CubeHeader {
        rows: cube.rows,
        cols: cube.cols,
        bands: cube.bands,
        interleave,
        dtype: dtype.name().to_string(),
        payload: format!("{stem}.raw"),
        band_mask,
        byte_order: None,
    };
    header.check()?;
    let payload = payload_path(header_path, &header);
    let file = File::create(&payload).map_err(|e| Error::io(&payload, e))?;
    let mut w = BufWriter::new(file);
    let total = cube.values.len();
    for index in 0..total {
        let v = cube.values[bip_offset(&header, index)];
        let res = match dtype {
            Dtype::Float32 => w.write_all(&(v as f32).to_le_bytes()),
            Dtype::Float64 => w.write_all(&v.to_le_bytes()),
            Dtype::Int16 => w.write_all(&(v.round() as i16).to_le_bytes()),
        };
        res.map_err(|e| Error::io(&payload, e))?;
    }
    w.flush().map_err(|e| Error::io(&payload, e))?;
    let text = serde_json::to_string_pretty(&header).expect("header serializes");
    std::fs::write(header_path, text).map_err(|e| Error::io(header_path, e))
}

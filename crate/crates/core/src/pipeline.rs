//! Building point sets and running the full extraction.

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chsa::{stratify, ChsaParams, StratificationResult};
use crate::cube::HyperspectralCube;
use crate::error::{Error, Result};
use crate::flagmean::random_convex_sample;
use crate::mds::{embed, Embedding, MdsDim};
use crate::subspace::{
    common_shape, distance_matrix, orthonormalize, random_subspaces, Subspace,
    DEFAULT_RANK_TOLERANCE,
};

/// Where a point came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Origin {
    /// Top-left pixel of an image patch.
    Pixel { row: usize, col: usize },
    /// Generator of a synthetic set.
    Generator { index: usize },
    /// Random combination of the generators.
    Sample { index: usize },
    /// Class draw.
    Class { label: u32, draw: usize },
    /// Position in an input file, when nothing more is known.
    Index { index: usize },
}

#[derive(Debug, Clone)]
pub struct PatchSet {
    pub points: Vec<Subspace>,
    /// Top-left `(row, col)` of each kept patch, row-major.
    pub origins: Vec<(usize, usize)>,
    pub patch_size: usize,
    pub stride: usize,
    /// Patches dropped for having rank below `patch_size²`.
    pub excluded: Vec<(usize, usize)>,
    /// Trailing rows and columns no patch touches.
    pub uncovered_rows: usize,
    pub uncovered_cols: usize,
}

impl PatchSet {
    /// Number of window positions before rank exclusion.
    pub fn grid_len(&self) -> usize {
        self.origins.len() + self.excluded.len()
    }

    pub fn point_origins(&self) -> Vec<Origin> {
        self.origins.iter().map(|&(row, col)| Origin::Pixel { row, col }).collect()
    }
}

/// Tiles the image with `patch_size × patch_size` windows whose top-left
/// corners sit on multiples of `stride`, and spans each window's spectra.
pub fn extract_patches(
    cube: &HyperspectralCube,
    patch_size: usize,
    stride: usize,
    rank_tolerance: f64,
) -> Result<PatchSet> {
    if patch_size == 0 || stride == 0 {
        return Err(Error::InvalidParameter(format!(
            "patch size and stride must be positive, got {patch_size} and {stride}"
        )));
    }
    let (rows, cols, bands) = (cube.rows(), cube.cols(), cube.bands());
    if patch_size > rows || patch_size > cols {
        return Err(Error::PatchLargerThanImage { patch: patch_size, rows, cols });
    }
    let vectors = patch_size * patch_size;
    if vectors > bands {
        return Err(Error::RankExceedsAmbient { vectors, bands });
    }

    let row_starts: Vec<usize> = (0..=rows - patch_size).step_by(stride).collect();
    let col_starts: Vec<usize> = (0..=cols - patch_size).step_by(stride).collect();
    let grid: Vec<(usize, usize)> =
        row_starts.iter().flat_map(|&r| col_starts.iter().map(move |&c| (r, c))).collect();

    let spans: Vec<Option<Subspace>> = grid
        .par_iter()
        .map(|&(r0, c0)| {
            let m = Mat::from_fn(bands, vectors, |b, v| {
                cube.spectrum(r0 + v / patch_size, c0 + v % patch_size)[b]
            });
            match orthonormalize(m.as_ref(), rank_tolerance) {
                Ok(s) if s.k() == vectors => Ok(Some(s)),
                Ok(_) | Err(Error::AllZeroInput) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let mut out = PatchSet {
        points: Vec::new(),
        origins: Vec::new(),
        patch_size,
        stride,
        excluded: Vec::new(),
        uncovered_rows: rows - (row_starts[row_starts.len() - 1] + patch_size),
        uncovered_cols: cols - (col_starts[col_starts.len() - 1] + patch_size),
    };
    for (origin, span) in grid.into_iter().zip(spans) {
        match span {
            Some(s) => {
                out.points.push(s);
                out.origins.push(origin);
            }
            None => out.excluded.push(origin),
        }
    }
    Ok(out)
}

/// Per-pixel integer class labels; 0 means unlabelled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    rows: usize,
    cols: usize,
    labels: Vec<u32>,
}

impl ClassMap {
    /// `labels` in row-major order.
    pub fn new(rows: usize, cols: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != rows * cols {
            return Err(Error::SizeMismatch { expected: rows * cols, found: labels.len() });
        }
        Ok(Self { rows, cols, labels })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.cols + col]
    }

    /// Distinct nonzero labels, ascending.
    pub fn classes(&self) -> Vec<u32> {
        let mut c: Vec<u32> = self.labels.iter().copied().filter(|&l| l != 0).collect();
        c.sort_unstable();
        c.dedup();
        c
    }
}

#[derive(Debug, Clone)]
pub struct ClassSampleSet {
    pub points: Vec<Subspace>,
    pub labels: Vec<u32>,
    /// Draw number within the class, aligned with `points`.
    pub draws: Vec<usize>,
    pub draw_size: usize,
    /// `(label, draw)` pairs whose pixels spanned fewer than `draw_size` dimensions.
    pub excluded: Vec<(u32, usize)>,
}

impl ClassSampleSet {
    pub fn point_origins(&self) -> Vec<Origin> {
        self.labels
            .iter()
            .zip(&self.draws)
            .map(|(&label, &draw)| Origin::Class { label, draw })
            .collect()
    }
}

/// For every nonzero class, `draws_per_class` spans of `draw_size` distinct
/// pixels of that class. Draw `d` of class `l` uses ChaCha stream
/// `(l << 32) | d` of `seed`.
pub fn sample_classes(
    cube: &HyperspectralCube,
    class_map: &ClassMap,
    draw_size: usize,
    draws_per_class: usize,
    seed: u64,
) -> Result<ClassSampleSet> {
    if class_map.rows != cube.rows() || class_map.cols != cube.cols() {
        return Err(Error::InvalidParameter(format!(
            "class map is {}x{} but the cube is {}x{}",
            class_map.rows,
            class_map.cols,
            cube.rows(),
            cube.cols()
        )));
    }
    if draw_size == 0 || draws_per_class == 0 {
        return Err(Error::InvalidParameter("draw size and draw count must be positive".into()));
    }
    if draw_size > cube.bands() {
        return Err(Error::RankExceedsAmbient { vectors: draw_size, bands: cube.bands() });
    }

    let classes = class_map.classes();
    let mut pixels: Vec<Vec<usize>> = vec![Vec::new(); classes.len()];
    for (at, &l) in class_map.labels.iter().enumerate() {
        if let Ok(c) = classes.binary_search(&l) {
            pixels[c].push(at);
        }
    }
    for (&label, px) in classes.iter().zip(&pixels) {
        if px.len() < draw_size {
            return Err(Error::ClassTooSmall { label, available: px.len(), draw_size });
        }
    }

    let jobs: Vec<(usize, usize)> =
        (0..classes.len()).flat_map(|c| (0..draws_per_class).map(move |d| (c, d))).collect();
    let spans: Vec<Option<Subspace>> = jobs
        .par_iter()
        .map(|&(c, d)| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(((classes[c] as u64) << 32) | d as u64);
            let chosen = rand::seq::index::sample(&mut rng, pixels[c].len(), draw_size);
            let chosen: Vec<usize> = chosen.into_iter().map(|i| pixels[c][i]).collect();
            let m = Mat::from_fn(cube.bands(), draw_size, |b, v| {
                let at = chosen[v];
                cube.spectrum(at / cube.cols(), at % cube.cols())[b]
            });
            match orthonormalize(m.as_ref(), DEFAULT_RANK_TOLERANCE) {
                Ok(s) if s.k() == draw_size => Ok(Some(s)),
                Ok(_) | Err(Error::AllZeroInput) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let mut out = ClassSampleSet {
        points: Vec::new(),
        labels: Vec::new(),
        draws: Vec::new(),
        draw_size,
        excluded: Vec::new(),
    };
    for ((c, d), span) in jobs.into_iter().zip(spans) {
        match span {
            Some(s) => {
                out.points.push(s);
                out.labels.push(classes[c]);
                out.draws.push(d);
            }
            None => out.excluded.push((classes[c], d)),
        }
    }
    Ok(out)
}

/// Stream-separation constant so sample weights never reuse generator streams.
const SAMPLE_SEED_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

/// `generators` random points of Gr(k, n) followed by `count − generators`
/// random flag-mean combinations of them.
pub fn simplex_dataset(
    generators: usize,
    n: usize,
    k: usize,
    count: usize,
    seed: u64,
) -> Result<(Vec<Subspace>, Vec<Origin>)> {
    if generators == 0 || count < generators {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= generators <= count, got {generators} and {count}"
        )));
    }
    let mut points = random_subspaces(generators, n, k, seed)?;
    let samples = random_convex_sample(&points, count - generators, seed ^ SAMPLE_SEED_MIX)?;
    points.extend(samples);
    let origins = (0..generators)
        .map(|index| Origin::Generator { index })
        .chain((0..count - generators).map(|index| Origin::Sample { index }))
        .collect();
    Ok((points, origins))
}

#[derive(Debug, Clone)]
pub struct ExtractionReport {
    pub embedding: Embedding,
    pub stratification: StratificationResult,
    /// Origin of every input point.
    pub origins: Vec<Origin>,
    /// Origins of `stratification.vertex_indices`, in the same order.
    pub vertex_origins: Vec<Origin>,
}

/// Distances, embedding and stratification in one go; points are labelled by
/// their position.
pub fn extract_endmembers(
    points: &[Subspace],
    params: &ChsaParams,
    mds_dim: MdsDim,
) -> Result<ExtractionReport> {
    let origins = (0..points.len()).map(|index| Origin::Index { index }).collect();
    extract_endmembers_with_origins(points, origins, params, mds_dim)
}

pub fn extract_endmembers_with_origins(
    points: &[Subspace],
    origins: Vec<Origin>,
    params: &ChsaParams,
    mds_dim: MdsDim,
) -> Result<ExtractionReport> {
    params.validate()?;
    if origins.len() != points.len() {
        return Err(Error::SizeMismatch { expected: points.len(), found: origins.len() });
    }
    if points.len() <= params.neighbors {
        return Err(Error::TooFewPoints { points: points.len(), neighbors: params.neighbors });
    }
    common_shape(points)?;
    let d = distance_matrix(points)?;
    let embedding = embed(&d, mds_dim)?;
    let stratification = stratify(embedding.coordinates(), params)?;
    let vertex_origins = stratification.vertex_indices.iter().map(|&i| origins[i]).collect();
    Ok(ExtractionReport { embedding, stratification, origins, vertex_origins })
}

//! Endmember extraction on the Grassmannian.
//!
//! Points of Gr(k, n) are compared by chordal distance, embedded in Euclidean
//! space by classical MDS, and screened for convex hull vertices by a
//! nearest-neighbour affine regression.

pub mod chsa;
pub mod cube;
pub mod error;
pub mod flagmean;
pub mod io;
mod linalg;
pub mod mds;
pub mod pipeline;
pub mod subspace;

pub use chsa::{
    nearest_neighbors, solve_weights, stratify, top_vertices, ChsaParams, PointRecord, Selection,
    StratificationResult,
};
pub use cube::{load_cube, HyperspectralCube};
pub use error::{Error, ErrorClass, Result};
pub use flagmean::{flag_component, random_convex_sample, weighted_flag_mean, FlagMean};
pub use mds::{double_center, embed, reconstruction_error, Embedding, MdsDim};
pub use pipeline::{
    extract_endmembers, extract_endmembers_with_origins, extract_patches, sample_classes,
    simplex_dataset, ClassMap, ClassSampleSet, ExtractionReport, Origin, PatchSet,
};
pub use subspace::{
    chordal_distance, distance_matrix, orthonormalize, principal_angles, random_subspace,
    random_subspaces, DistanceMatrix, Subspace,
};

/// Re-exported so callers can build inputs without naming the dependency.
pub use faer;

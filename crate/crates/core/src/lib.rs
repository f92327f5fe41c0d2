//! Angular Embedding for joint image segmentation and figure/ground
//! organization.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`stencil`]: a pixel grid, a multiscale neighbor stencil and the
//!    per-offset relation maps `b` (boundary probability) and `f` (figural
//!    probability).
//! 2. [`affinity`]: relation maps become a sparse complex Hermitian affinity
//!    matrix `W` and its degree vector `D`.
//! 3. [`eigensolver`]: the generalized eigenproblem `(D - W) z = λ D z` is
//!    solved for the leading eigenvectors.
//! 4. [`decoder`]: the eigenvectors are read off as a per-pixel
//!    figure/ground rank (the angle of the first eigenvector), a soft boundary
//!    map (the spatial gradient of the remaining ones) and a watershed
//!    hierarchy.
//!
//! [`groundtruth`], [`metrics`] and [`synth`] provide ground-truth
//! globalization, the region-ordering benchmark and synthetic layered scenes.
//! [`io`] holds the binary file formats.

pub mod affinity;
pub mod decoder;
pub mod eigensolver;
mod error;
pub mod groundtruth;
pub mod io;
pub mod metrics;
pub mod sparse;
pub mod stencil;
pub mod synth;

pub use affinity::{assemble, pair_affinity, pair_energies, rescale_theta, AffinityParams};
pub use decoder::{
    cut_hierarchy, fg_order, spectral_boundaries, transfer_fg, watershed_hierarchy, BoundaryMap,
    RankMap, SegmentationHierarchy, SegmentationMap,
};
pub use eigensolver::{dense_oracle, embedding_error, solve, EmbeddingResult, SolverConfig};
pub use error::{Error, Result};
pub use groundtruth::{gt_affinity, globalize, make_targets, EdgeLabel, OwnershipLabels, TargetTensors};
pub use metrics::{adjacent_region_pairs, evaluate, BenchmarkReport};
pub use sparse::{DegreeVector, SparseHermitianMatrix};
pub use stencil::{boundary_prob, default_stencil, neighbor_of, GridDomain, Offset, RelationMap, Stencil};
pub use synth::{random_scene, render, SceneSpec};

pub use num_complex::Complex64;

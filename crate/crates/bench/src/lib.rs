//! Shared fixtures for the criterion benchmarks in `benches/`.

use fgembed_core::synth::{self, Scene};
use fgembed_core::{
    assemble, default_stencil, make_targets, random_scene, AffinityParams, DegreeVector, GridDomain, RelationMap,
    SparseHermitianMatrix,
};

/// A random layered scene of the given size.
pub fn scene(size: usize, shapes: usize, seed: u64) -> Scene {
    let spec = random_scene(GridDomain::new(size, size).unwrap(), shapes, seed);
    synth::render(&spec).unwrap()
}

/// Ground-truth relations of [`scene`] over the default stencil.
pub fn relations(size: usize) -> RelationMap {
    let s = scene(size, 4, 1);
    make_targets(&s.segmentation, &s.rank, &default_stencil()).unwrap().to_relation_map().unwrap()
}

pub fn operator(size: usize) -> (SparseHermitianMatrix, DegreeVector) {
    assemble(&relations(size), &AffinityParams::default()).unwrap()
}

//! Vietoris-Rips persistent homology over Z/2.

mod cloud;
mod diagram;
mod landmarks;
mod reduce;
mod rips;
mod threshold;

pub use cloud::{euclidean, PointCloud};
pub use diagram::{mean_std, BettiProfile, LifespanStats, PersistenceDiagram, PersistencePair};
pub use landmarks::{lattice_cover, maxmin_landmarks, Subsample};
pub use reduce::compute_persistence;
pub use rips::{
    build_rips, build_rips_with_budget, FilteredComplex, Simplex, DEFAULT_SIMPLEX_BUDGET,
    MAX_SIMPLEX_DIM,
};
pub use threshold::{threshold_features, threshold_features_detailed, Thresholded, ThresholdPolicy};

/// Rips construction followed by reduction.
pub fn rips_persistence(cloud: &PointCloud, eps_max: f64, max_dim: usize) -> crate::Result<PersistenceDiagram> {
    compute_persistence(&build_rips(cloud, eps_max, max_dim)?)
}

pub fn betti_at(diagram: &PersistenceDiagram, eps: f64, p: usize) -> usize {
    diagram.betti_at(eps, p)
}

pub fn lifespan_stats(diagram: &PersistenceDiagram, p: usize) -> crate::Result<LifespanStats> {
    diagram.lifespan_stats(p)
}

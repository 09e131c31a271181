//! Accessibility graphs over triangle-mesh scenes.
//!
//! A scene is a set of labeled meshes with a ray-cast index. From a start
//! point, a breadth-first expansion over a horizontal grid casts rays down
//! to find walkable nodes and classifies each connection as a plain walk,
//! a step up, a step down or a step over. Edges carry human-factor costs
//! (distance, gradient, cross-slope, walking energy) that feed least-cost
//! path search, viewshed attributes and heatmaps.

pub mod analysis;
pub mod builder;
pub mod costs;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod graph;

pub use builder::{build_graph, build_graph_with, BuildOptions, BuildReport, GraphParams};
pub use costs::{CostCoefficients, CostConfig};
pub use error::{Error, Result};
pub use geometry::{Scene, SurfaceTag, TriangleMesh};
pub use graph::{AccessGraph, ConnectionType, NodeKey, WeightVector};

/// Runs `f` on a dedicated pool of `threads` workers, or on the global
/// pool when `threads` is `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        None => f(),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
    }
}

//! Analyses over a built graph: viewshed attributes, least-cost paths and
//! heatmaps.

pub mod heatmap;
pub mod path;
pub mod viewshed;

pub use heatmap::{heatmap, Heatmap, Metric};
pub use path::{count_steps, nearest_vertex, path_score, shortest_path, shortest_path_by_key, PathResult};
pub use viewshed::{viewshed, ViewshedConfig};

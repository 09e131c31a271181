use crate::graph::NodeKey;
use nalgebra::Point3;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scene contains no meshes")]
    EmptyScene,

    #[error("scene has no walkable objects")]
    EmptyWalkableSet,

    #[error("mesh `{mesh}`: triangle {triangle} references vertex {index} but only {vertex_count} vertices exist")]
    InvalidIndex {
        mesh: String,
        triangle: usize,
        index: u32,
        vertex_count: usize,
    },

    #[error("mesh `{mesh}` contains a non-finite coordinate")]
    NonFiniteCoordinate { mesh: String },

    #[error("failed to parse {format} input: {message}")]
    Parse { format: &'static str, message: String },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("start point ({}, {}, {}) does not sit above walkable geometry", .tau.x, .tau.y, .tau.z)]
    InvalidStart { tau: Point3<f64> },

    #[error("edge {parent} -> {child} already exists")]
    DuplicateEdge { parent: usize, child: usize },

    #[error("unknown vertex {0}")]
    UnknownVertex(usize),

    #[error("unknown node key {0}")]
    UnknownKey(NodeKey),

    #[error("attribute `{0}` is missing")]
    MissingAttribute(String),

    #[error("vertex {0} has no outgoing edges")]
    ChildlessVertex(usize),

    #[error("edge {from} -> {to} has non-positive composed cost {cost}")]
    NonPositiveEdgeCost { from: NodeKey, to: NodeKey, cost: f64 },

    #[error("invalid cost configuration: {0}")]
    InvalidCostConfig(String),

    #[error("malformed graph file: {0}")]
    MalformedGraph(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name used by the CLI and HTTP layers.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyScene => "EmptyScene",
            Error::EmptyWalkableSet => "EmptyWalkableSet",
            Error::InvalidIndex { .. } => "InvalidIndex",
            Error::NonFiniteCoordinate { .. } => "NonFiniteCoordinate",
            Error::Parse { .. } => "Parse",
            Error::InvalidParams(_) => "InvalidParams",
            Error::InvalidStart { .. } => "InvalidStart",
            Error::DuplicateEdge { .. } => "DuplicateEdge",
            Error::UnknownVertex(_) => "UnknownVertex",
            Error::UnknownKey(_) => "UnknownKey",
            Error::MissingAttribute(_) => "MissingAttribute",
            Error::ChildlessVertex(_) => "ChildlessVertex",
            Error::NonPositiveEdgeCost { .. } => "NonPositiveEdgeCost",
            Error::InvalidCostConfig(_) => "InvalidCostConfig",
            Error::MalformedGraph(_) => "MalformedGraph",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

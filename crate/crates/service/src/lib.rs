//! Project store, shared operations, CLI and HTTP API for accessibility
//! graphs.

pub mod api;
pub mod cli;
pub mod error;
pub mod ops;
pub mod store;

pub use error::{ErrorBody, Result, ServiceError};
pub use store::ProjectStore;

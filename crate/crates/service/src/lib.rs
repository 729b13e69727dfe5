//! Local runtime for the personal data-flow engine: an append-only event log
//! replayed into engine state, a loopback HTTP API and the `privflow` CLI.
//!
//! Nothing here talks to remote hosts. The only listener is the API server,
//! which binds loopback unless told otherwise.

pub mod api;
pub mod engine;
pub mod error;
pub mod import;
pub mod ingest;
pub mod log;
pub mod store;

pub use engine::{report_bytes, state_hash, Engine, Report};
pub use error::{Result, ServiceError};
pub use store::Store;

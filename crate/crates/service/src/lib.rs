//! Review service for viewpoint-anchored design comments.
//!
//! Projects hold an uploaded glTF scene and its viewpoint index. Comments
//! carry sanitized HTML, an optional anchored viewpoint and the results of
//! modifier jobs. Index builds and modifier runs go through a FIFO job
//! queue served by worker threads; everything is persisted under the data
//! directory and recovered on start.
//!
//! The operations in [`ops`] are shared with the command line driver.

pub mod app;
pub mod config;
pub mod error;
pub mod http;
pub mod memo;
pub mod ops;
pub mod server;
pub mod store;

pub use app::{App, Service, SuggestRequest, SuggestResponse};
pub use config::{ConfigError, ServiceConfig};
pub use error::ServiceError;
pub use ops::{ModifierRequest, OpError};
pub use server::{serve, RunningServer};

//! HTTP front end for permission-aware search and chat.
//!
//! [`Service`] wires a repository, the vector table, background sync workers
//! and the agent together; [`routes`] exposes them as JSON endpoints behind
//! static bearer tokens. The server keeps no conversation state: clients send
//! the full chat history with every request.

mod app;
pub mod config;
pub mod routes;

pub use app::{serve, AppState, Models, Service, ServiceError};
pub use config::{ConfigError, SearchDefaults, ServiceConfig, UserEntry};

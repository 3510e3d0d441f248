//! HTTP facade over the elicitation session engine.

pub mod api;
pub mod store;

pub use api::router;
pub use store::{SessionStore, StoreError};

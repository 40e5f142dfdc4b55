//! Event-sourced platform service: durable log, replay, the command engine,
//! read models and the HTTP API.

pub mod api;
pub mod clock;
pub mod config;
pub mod engine;
pub mod export;
pub mod replay;
pub mod stats;
pub mod store;
pub mod views;

pub use clock::{Clock, StepClock, SystemClock};
pub use config::PlatformConfig;
pub use engine::{Alternative, Platform, PlatformError};
pub use store::{EventStore, FileStore, MemoryStore};

//! Domain core of the set-of-objectives platform: the hierarchical model,
//! elementary interactions, aggregation rules, stream generation, the event
//! vocabulary and the state fold.

pub mod aggregator;
pub mod catalog;
pub mod events;
pub mod model;
pub mod participants;
pub mod state;
pub mod stream;

pub use events::{Event, EventPayload};
pub use state::PlatformState;

//! Real-time session service: each websocket client gets its own trial
//! session with a physics loop, streams activations in and receives state
//! and event frames back.

pub mod config;
pub mod error;
pub mod server;
pub mod session;
pub mod wire;

pub use config::{Clock, ServiceConfig};
pub use error::{Result, ServiceError};
pub use server::{Service, SessionRecord};
pub use session::{Session, SessionSettings};

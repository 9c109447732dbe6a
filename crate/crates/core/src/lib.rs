//! Muscle-tendon driven intent estimation and variable impedance control for
//! a single-joint human-machine interface.

pub mod baseline;
pub mod error;
pub mod intent;
pub mod joint;
pub mod metrics;
pub mod mtu;
pub mod optimizer;
pub mod plant;
pub mod session;
pub mod sigproc;
pub mod telemetry;

pub use error::{Error, Result};

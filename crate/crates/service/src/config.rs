use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use myoimp::metrics::MetricOptions;

/// What drives a session's physics clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    /// Physics follows the wall clock, scaled by `speed`.
    Wall,
    /// Physics advances to the timestamp of each activation frame. Useful for
    /// replay bridges and reproducible tests.
    Client,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    pub clock: Clock,
    /// Session seconds per wall second under the wall clock.
    pub speed: f64,
    /// State frames buffered per client before the oldest is dropped.
    pub queue_capacity: usize,
    /// A running trial aborts after this long without activation input (s).
    pub underrun_timeout: f64,
    /// Largest single jump of a client-driven clock (s).
    pub max_advance: f64,
    pub seed: u64,
    /// Per-session batch directories are written here when set.
    pub record_dir: Option<PathBuf>,
    /// Calibration maxima applied to activation frames; empty means unit maxima.
    pub norm_max: Vec<f64>,
    pub metrics: MetricOptions,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1".into(),
            port: 8080,
            clock: Clock::Wall,
            speed: 1.0,
            queue_capacity: 64,
            underrun_timeout: 0.5,
            max_advance: 5.0,
            seed: 0,
            record_dir: None,
            norm_max: Vec::new(),
            metrics: MetricOptions::default(),
        }
    }
}

impl ServiceConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: String| Err(crate::ServiceError::Rejected(m));
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return bad(format!("speed must be positive, got {}", self.speed));
        }
        if self.queue_capacity == 0 {
            return bad("queue capacity must be at least 1".into());
        }
        if !(self.underrun_timeout > 0.0) || !(self.max_advance > 0.0) {
            return bad("underrun timeout and max advance must be positive".into());
        }
        if !self.norm_max.is_empty() && self.norm_max.iter().any(|&m| !(m > 0.0)) {
            return bad("calibration maxima must be positive".into());
        }
        Ok(())
    }
}

//! First-order excitation-to-activation dynamics.

use serde::{Deserialize, Serialize};

/// Activation time constants and floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActivationDynamics {
    /// Rise time constant (s).
    pub tau_act: f64,
    /// Decay time constant (s).
    pub tau_deact: f64,
    /// Smallest activation; keeps the eccentric branch well defined.
    pub floor: f64,
}

pub const DEFAULT_ACTIVATION_FLOOR: f64 = 1e-3;

impl Default for ActivationDynamics {
    fn default() -> Self {
        ActivationDynamics {
            tau_act: 0.015,
            tau_deact: 0.050,
            floor: DEFAULT_ACTIVATION_FLOOR,
        }
    }
}

impl ActivationDynamics {
    /// Advances activation by `dt` towards excitation `u`.
    ///
    /// The step is capped at the full distance, so `dt ≥ τ` converges in one
    /// step instead of overshooting.
    pub fn step(&self, u: f64, act_prev: f64, dt: f64) -> f64 {
        let u = if u.is_finite() {
            u.clamp(self.floor, 1.0)
        } else {
            self.floor
        };
        let tau = if u >= act_prev {
            self.tau_act
        } else {
            self.tau_deact
        };
        let alpha = (dt / tau).min(1.0);
        (act_prev + alpha * (u - act_prev)).clamp(self.floor, 1.0)
    }
}

/// [`ActivationDynamics::step`] with the default constants.
pub fn activation_step(u: f64, act_prev: f64, dt: f64) -> f64 {
    ActivationDynamics::default().step(u, act_prev, dt)
}

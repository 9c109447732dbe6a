//! Single rotational joint plant, the position-based variable impedance law,
//! the fixed-gain baseline law and the external force field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Baseline stiffness (N·m/rad).
pub const K_B: f64 = 100.0;

/// Baseline damping `sqrt(K_B / 4)` (N·m·s/rad).
pub fn baseline_damping(k_b: f64) -> f64 {
    (k_b / 4.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantParams {
    /// Joint-space inertia (kg·m²).
    pub m_inertia: f64,
    pub link_mass: f64,
    /// Distance from the joint axis to the link's center of mass (m).
    pub com: f64,
    /// Gravitational acceleration (m/s²); zero for a horizontal link.
    pub gravity: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Symmetric bound on the control torque (N·m), if any.
    pub torque_limit: Option<f64>,
}

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            m_inertia: 0.05,
            link_mass: 1.0,
            com: 0.15,
            gravity: 0.0,
            q_min: -1.4,
            q_max: 1.4,
            torque_limit: Some(60.0),
        }
    }
}

impl PlantParams {
    /// Gravity torque of the link at angle `q`.
    pub fn gravity_torque(&self, q: f64) -> f64 {
        self.link_mass * self.gravity * self.com * q.cos()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m_inertia > 0.0 && self.m_inertia.is_finite()) {
            return Err(Error::Spec(format!(
                "inertia must be positive, got {}",
                self.m_inertia
            )));
        }
        if !(self.q_min < self.q_max) {
            return Err(Error::Spec(format!(
                "joint limits [{}, {}] are empty",
                self.q_min, self.q_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantState {
    pub t: f64,
    pub q_f: f64,
    pub qd_f: f64,
    /// Control torque applied during the last step (N·m).
    pub tau_f: f64,
    /// External torque applied during the last step (N·m).
    pub tau_ext: f64,
}

impl PlantState {
    pub fn at_rest(q: f64) -> Self {
        PlantState {
            q_f: q,
            ..Default::default()
        }
    }
}

/// Reference kinematics `(q, q̇, q̈)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RefKinematics {
    pub q: f64,
    pub qd: f64,
    pub qdd: f64,
}

/// Advances the plant by `dt` with semi-implicit Euler; a joint limit stops
/// the link dead.
pub fn plant_step(
    s: &PlantState,
    tau_f: f64,
    tau_ext: f64,
    p: &PlantParams,
    dt: f64,
) -> Result<PlantState> {
    if !tau_f.is_finite() || !tau_ext.is_finite() {
        return Err(Error::PlantFault {
            t: s.t,
            reason: format!("non-finite torque (tau_f = {tau_f}, tau_ext = {tau_ext})"),
        });
    }
    let tau_f = match p.torque_limit {
        Some(limit) => tau_f.clamp(-limit, limit),
        None => tau_f,
    };
    let qdd = (tau_f + tau_ext - p.gravity_torque(s.q_f)) / p.m_inertia;
    let mut qd = s.qd_f + dt * qdd;
    let mut q = s.q_f + dt * qd;
    if q <= p.q_min || q >= p.q_max {
        q = q.clamp(p.q_min, p.q_max);
        qd = 0.0;
    }
    Ok(PlantState {
        t: s.t + dt,
        q_f: q,
        qd_f: qd,
        tau_f,
        tau_ext,
    })
}

/// Position-based variable impedance law.
pub fn impedance_law(r: &RefKinematics, s: &PlantState, k: f64, d: f64, p: &PlantParams) -> f64 {
    p.m_inertia * r.qdd + k * (r.q - s.q_f) + d * (r.qd - s.qd_f) + p.gravity_torque(r.q)
}

/// Fixed-gain baseline PD law with `K_B` and `D_B = sqrt(K_B/4)`.
pub fn baseline_pd_law(q_r: f64, s: &PlantState, p: &PlantParams) -> f64 {
    K_B * (q_r - s.q_f) - baseline_damping(K_B) * s.qd_f + p.gravity_torque(q_r)
}

/// Uniform torque field over an interval of joint positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceField {
    pub lo: f64,
    pub hi: f64,
    /// Torque magnitude (N·m).
    pub magnitude: f64,
    /// +1 or −1.
    pub direction: f64,
}

/// Default field width (rad) and magnitude (N·m).
pub const FIELD_WIDTH: f64 = 0.3;
pub const FIELD_MAGNITUDE: f64 = 20.0;

impl ForceField {
    /// A field of `width` centered midway between `start` and `target`,
    /// pushing away from the target.
    pub fn between(start: f64, target: f64, width: f64, magnitude: f64) -> Self {
        let center = 0.5 * (start + target);
        ForceField {
            lo: center - 0.5 * width,
            hi: center + 0.5 * width,
            magnitude: magnitude.max(0.0),
            direction: if target >= start { -1.0 } else { 1.0 },
        }
    }

    pub fn contains(&self, q: f64) -> bool {
        q >= self.lo && q <= self.hi
    }
}

/// External torque of `ff` on a link at `q_f`.
pub fn field_torque(q_f: f64, ff: &ForceField) -> f64 {
    if ff.contains(q_f) {
        ff.direction * ff.magnitude
    } else {
        0.0
    }
}

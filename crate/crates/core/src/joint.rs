//! Attachment geometry of the antagonist pair and the muscle-space to
//! joint-space mapping of torque, stiffness and damping.
//!
//! Positive joint angles are flexion. The flexor shortens as `q` grows, so its
//! moment arm `∂l_mtu/∂q` is negative and the extensor's is positive.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Lower bound on joint stiffness when the geometric term dominates (N·m/rad).
pub const K_MIN: f64 = 0.1;

/// Step for the moment-arm derivative (rad).
const DQ: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Flexor,
    Extensor,
}

impl Side {
    fn sigma(self) -> f64 {
        match self {
            Side::Flexor => 1.0,
            Side::Extensor => -1.0,
        }
    }
}

/// Virtual attachment of one MTU on the link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttachmentGeometry {
    /// Joint axis to link attachment (m).
    pub l_a: f64,
    /// Joint axis to fixed-base attachment (m).
    pub l_b: f64,
    pub side: Side,
    pub q_min: f64,
    pub q_max: f64,
}

/// Serialized form of one geometry block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryConfig {
    pub l_b: f64,
    /// Angle between the MTU and the base segment at q = 0 (rad).
    pub alpha0: f64,
    pub q_min: f64,
    pub q_max: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            l_b: 0.30,
            alpha0: 0.25,
            q_min: -1.4,
            q_max: 1.4,
        }
    }
}

impl GeometryConfig {
    pub fn build(&self, side: Side) -> Result<AttachmentGeometry> {
        if !(self.l_b > 0.0 && self.alpha0 > 0.0 && self.alpha0 < FRAC_PI_2) {
            return Err(Error::Geometry(format!(
                "need l_b > 0 and 0 < alpha0 < pi/2, got l_b = {}, alpha0 = {}",
                self.l_b, self.alpha0
            )));
        }
        if !(self.q_min < self.q_max) {
            return Err(Error::Geometry(format!(
                "empty joint range [{}, {}]",
                self.q_min, self.q_max
            )));
        }
        let l_mtu0 = self.l_b / self.alpha0.cos();
        Ok(AttachmentGeometry {
            l_a: l_mtu0 * self.alpha0.sin(),
            l_b: self.l_b,
            side,
            q_min: self.q_min,
            q_max: self.q_max,
        })
    }
}

impl AttachmentGeometry {
    /// Default extensor/flexor pair, in MTU order (extensor first).
    pub fn default_pair() -> [AttachmentGeometry; 2] {
        let cfg = GeometryConfig::default();
        [
            cfg.build(Side::Extensor)
                .expect("default geometry is valid"),
            cfg.build(Side::Flexor).expect("default geometry is valid"),
        ]
    }

    fn check(&self, q: f64) -> Result<()> {
        if !q.is_finite() || q < self.q_min || q > self.q_max {
            return Err(Error::OutOfRange {
                q,
                min: self.q_min,
                max: self.q_max,
            });
        }
        Ok(())
    }

    fn length_unchecked(&self, q: f64) -> f64 {
        let c = (FRAC_PI_2 - self.side.sigma() * q).cos();
        (self.l_a * self.l_a + self.l_b * self.l_b - 2.0 * self.l_a * self.l_b * c).sqrt()
    }

    fn arm_unchecked(&self, q: f64) -> Result<f64> {
        let l = self.length_unchecked(q);
        let arg = (-self.l_a * self.l_a + self.l_b * self.l_b + l * l) / (2.0 * l * self.l_b);
        if !arg.is_finite() || arg.abs() > 1.0 + 1e-9 {
            return Err(Error::Geometry(format!("acos argument {arg} at q = {q}")));
        }
        let alpha = arg.clamp(-1.0, 1.0).acos();
        Ok(-self.side.sigma() * self.l_b * alpha.sin())
    }

    /// MTU length at joint angle `q`.
    pub fn mtu_length(&self, q: f64) -> Result<f64> {
        self.check(q)?;
        Ok(self.length_unchecked(q))
    }

    /// Signed moment arm `∂l_mtu/∂q` (m/rad).
    pub fn moment_arm(&self, q: f64) -> Result<f64> {
        self.check(q)?;
        self.arm_unchecked(q)
    }

    /// Central-difference derivative of the moment arm (m/rad²).
    pub fn moment_arm_slope(&self, q: f64) -> Result<f64> {
        self.check(q)?;
        Ok((self.arm_unchecked(q + DQ)? - self.arm_unchecked(q - DQ)?) / (2.0 * DQ))
    }
}

/// Free-function form of [`AttachmentGeometry::mtu_length`].
pub fn mtu_length(q: f64, g: &AttachmentGeometry) -> Result<f64> {
    g.mtu_length(q)
}

/// Free-function form of [`AttachmentGeometry::moment_arm`].
pub fn moment_arm(q: f64, g: &AttachmentGeometry) -> Result<f64> {
    g.moment_arm(q)
}

/// Joint-space torque, stiffness and damping.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointImpedance {
    /// Joint stiffness (N·m/rad).
    pub k: f64,
    /// Joint damping (N·m·s/rad).
    pub d: f64,
    pub k_geom: f64,
    pub k_intrinsic: f64,
    /// Net muscle torque (N·m), positive in flexion.
    pub tau_r: f64,
    /// Set when `k` was raised to [`K_MIN`].
    pub floored: bool,
}

/// Maps per-MTU tendon forces `f` (N), stiffness `k` (N/m) and damping `d`
/// (N·s/m) at joint angle `q` to joint space.
///
/// Tension shortens an MTU, so the torque is `−Σ f·r` and the stiffness is
/// `−∂τ/∂q = Σ k·r² + Σ f·∂r/∂q` at frozen muscle state.
pub fn map_to_joint(
    f: &[f64],
    k: &[f64],
    d: &[f64],
    q: f64,
    geoms: &[AttachmentGeometry],
) -> Result<JointImpedance> {
    let n = geoms.len();
    if f.len() != n || k.len() != n || d.len() != n {
        return Err(Error::Spec(format!(
            "map_to_joint needs one force, stiffness and damping per MTU ({n})"
        )));
    }
    let mut out = JointImpedance::default();
    for i in 0..n {
        let r = geoms[i].moment_arm(q)?;
        let dr = geoms[i].moment_arm_slope(q)?;
        out.tau_r -= f[i] * r;
        out.k_intrinsic += k[i] * r * r;
        out.k_geom += f[i] * dr;
        out.d += d[i] * r * r;
    }
    out.k = out.k_intrinsic + out.k_geom;
    if !(out.k > K_MIN) {
        out.k = K_MIN;
        out.floored = true;
    }
    out.d = out.d.max(0.0);
    Ok(out)
}

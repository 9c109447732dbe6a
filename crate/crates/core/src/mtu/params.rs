//! Muscle-tendon parameter sets, their optimization vector and bounds.
//!
//! [`MtuParams`] holds the physical/normalized values used by the force
//! curves. [`ParamVector`] is the 18-entry vector explored by the optimizer,
//! where several entries are expressed relative to others (widths in
//! multiples of the `l_opt` entry, PEE rest length in multiples of `l_opt`,
//! forces in multiples of `F_max`, the linear tendon stretch as a fraction
//! of the nonlinear one).

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Number of optimized entries per muscle-tendon unit.
pub const PARAM_COUNT: usize = 18;

/// Table keys, in optimization-vector order.
pub const PARAM_NAMES: [&str; PARAM_COUNT] = [
    "F_max", "l_opt", "W_des", "W_asc", "v_des", "v_asc", "A_max", "B_max", "l_pee0", "v_pee",
    "F_pee0", "D", "R", "dU_nl", "dU_l", "dF_see0", "S", "F",
];

/// Tendon slack length as a fraction of the MTU length at q = 0.
pub const TENDON_SLACK_FRACTION: f64 = 2.0 / 3.0;

/// Maximum tendon extension as a fraction of the slack length.
pub const MAX_TENDON_EXTENSION: f64 = 0.10;

/// Parameters of one lumped Hill-type muscle-tendon unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtuParams {
    /// Maximum isometric force (N).
    #[serde(rename = "F_max")]
    pub f_max: f64,
    /// Optimal CE length as a fraction of the initial CE length.
    #[serde(rename = "l_opt")]
    pub l_opt_rel: f64,
    /// Descending force-length width, normalized by `l_opt`. The optimizer's
    /// third entry is this width divided by the `l_opt` entry.
    #[serde(rename = "W_des")]
    pub w_des: f64,
    /// Ascending force-length width, normalized by `l_opt`.
    #[serde(rename = "W_asc")]
    pub w_asc: f64,
    #[serde(rename = "v_des")]
    pub v_des: f64,
    #[serde(rename = "v_asc")]
    pub v_asc: f64,
    /// Hill relative-force constant.
    #[serde(rename = "A_max")]
    pub a_max: f64,
    /// Hill relative-velocity constant (1/s).
    #[serde(rename = "B_max")]
    pub b_max: f64,
    /// PEE rest length as a fraction of `l_opt`.
    #[serde(rename = "l_pee0")]
    pub l_pee0_rel: f64,
    #[serde(rename = "v_pee")]
    pub v_pee: f64,
    /// PEE force at `l_opt·(1 + W_des)` as a fraction of `F_max`.
    #[serde(rename = "F_pee0")]
    pub f_pee0_rel: f64,
    /// Damper scale factor.
    #[serde(rename = "D")]
    pub d_de: f64,
    /// Minimum damper coefficient as a fraction of the maximum.
    #[serde(rename = "R")]
    pub r_de: f64,
    /// Tendon slack length (m).
    #[serde(rename = "l_see0")]
    pub l_see0: f64,
    /// Relative tendon stretch at the nonlinear-to-linear transition.
    #[serde(rename = "dU_nl")]
    pub du_nl: f64,
    /// Relative tendon stretch of the linear region that adds `dF_see0`.
    #[serde(rename = "dU_l")]
    pub du_l: f64,
    /// Tendon force at the transition as a fraction of `F_max`.
    #[serde(rename = "dF_see0")]
    pub df_see0_rel: f64,
    /// Eccentric/concentric force-velocity slope ratio at zero velocity.
    #[serde(rename = "S")]
    pub s_ecc: f64,
    /// Factor by which eccentric force may exceed the isometric force.
    #[serde(rename = "F")]
    pub f_ecc: f64,
}

impl MtuParams {
    /// CE length at q = 0 with a slack tendon.
    pub fn l_ce_init(&self) -> f64 {
        self.l_see0 * (1.0 - TENDON_SLACK_FRACTION) / TENDON_SLACK_FRACTION
    }

    pub fn l_opt(&self) -> f64 {
        self.l_opt_rel * self.l_ce_init()
    }

    pub fn l_pee0(&self) -> f64 {
        self.l_pee0_rel * self.l_opt()
    }

    pub fn f_pee0(&self) -> f64 {
        self.f_pee0_rel * self.f_max
    }

    pub fn df_see0(&self) -> f64 {
        self.df_see0_rel * self.f_max
    }

    /// Upper bound of the damper coefficient (N·s/m).
    pub fn d_se_max(&self) -> f64 {
        self.d_de * self.f_max * self.a_max / (self.b_max * self.l_opt())
    }

    /// Longest admissible tendon (m).
    pub fn l_se_max(&self) -> f64 {
        self.l_see0 * (1.0 + MAX_TENDON_EXTENSION)
    }

    pub fn to_vector(&self) -> ParamVector {
        ParamVector([
            self.f_max,
            self.l_opt_rel,
            self.w_des / self.l_opt_rel,
            self.w_asc / self.l_opt_rel,
            self.v_des,
            self.v_asc,
            self.a_max,
            self.b_max,
            self.l_pee0_rel,
            self.v_pee,
            self.f_pee0_rel,
            self.d_de,
            self.r_de,
            self.du_nl,
            self.du_l / self.du_nl,
            self.df_see0_rel,
            self.s_ecc,
            self.f_ecc,
        ])
    }

    /// Checks bounds and the structural constraints of the parameter space.
    pub fn validate(&self, bounds: &ParamBounds) -> Result<()> {
        if !(self.l_see0.is_finite() && self.l_see0 > 0.0) {
            return Err(Error::Constraint(format!(
                "tendon slack length {} must be positive",
                self.l_see0
            )));
        }
        bounds.check(&self.to_vector())?;
        // W_des + W_asc < l_ce_init, on absolute widths.
        let width = (self.w_des + self.w_asc) * self.l_opt();
        if width >= self.l_ce_init() {
            return Err(Error::Constraint(format!(
                "W_des + W_asc = {:.4} m must be below l_ce_init = {:.4} m",
                width,
                self.l_ce_init()
            )));
        }
        Ok(())
    }

    /// Reference parameter set for an MTU whose length at q = 0 is `l_mtu0`.
    pub fn reference(l_mtu0: f64) -> Self {
        ParamVector::reference().to_params(l_mtu0)
    }
}

/// The 18 optimized variables of one MTU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamVector(pub [f64; PARAM_COUNT]);

impl ParamVector {
    /// Builds physical parameters; the tendon slack length is fixed by geometry.
    pub fn to_params(&self, l_mtu0: f64) -> MtuParams {
        let p = &self.0;
        MtuParams {
            f_max: p[0],
            l_opt_rel: p[1],
            w_des: p[2] * p[1],
            w_asc: p[3] * p[1],
            v_des: p[4],
            v_asc: p[5],
            a_max: p[6],
            b_max: p[7],
            l_pee0_rel: p[8],
            v_pee: p[9],
            f_pee0_rel: p[10],
            d_de: p[11],
            r_de: p[12],
            l_see0: TENDON_SLACK_FRACTION * l_mtu0,
            du_nl: p[13],
            du_l: p[13] * p[14],
            df_see0_rel: p[15],
            s_ecc: p[16],
            f_ecc: p[17],
        }
    }

    /// A feasible, well-conditioned interior point of the default bounds.
    pub fn reference() -> Self {
        ParamVector([
            1500.0, // F_max
            0.84,   // l_opt
            0.70,   // W_des
            0.70,   // W_asc
            1.5,    // v_des
            1.5,    // v_asc
            0.25,   // A_max
            3.0,    // B_max
            0.80,   // l_pee0
            1.5,    // v_pee
            0.5,    // F_pee0
            0.5,    // D
            0.3,    // R
            0.04,   // dU_nl
            0.5,    // dU_l
            0.3,    // dF_see0
            1.5,    // S
            0.8,    // F
        ])
    }
}

/// Lower/upper bounds on the optimization variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBounds {
    pub lower: [f64; PARAM_COUNT],
    pub upper: [f64; PARAM_COUNT],
}

impl Default for ParamBounds {
    /// Table bounds with the optimal-length range read as 0.5–0.85.
    fn default() -> Self {
        let mut b = Self::as_printed();
        b.lower[1] = 0.5;
        b.upper[1] = 0.85;
        b
    }
}

impl ParamBounds {
    /// Table bounds exactly as printed, including the 0.05–0.085 optimal length.
    pub fn as_printed() -> Self {
        ParamBounds {
            lower: [
                1000.0,
                0.05,
                0.7,
                0.7,
                1.2,
                1.2,
                0.1,
                1.1,
                0.7,
                1.1,
                0.5,
                0.001,
                0.0,
                0.02,
                1.0 / 3.0,
                0.3,
                1.2,
                0.5,
            ],
            upper: [
                6000.0,
                0.085,
                3.5,
                3.5,
                3.0,
                3.0,
                0.4,
                5.1,
                0.95,
                3.0,
                1.0,
                3.0,
                0.8,
                0.07,
                2.0 / 3.0,
                1.0,
                2.0,
                2.0,
            ],
        }
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn check(&self, v: &ParamVector) -> Result<()> {
        for (i, &x) in v.0.iter().enumerate() {
            // Relative slack absorbs the round trip through MtuParams.
            let slack = 1e-12 * self.width(i).abs().max(1.0);
            if !x.is_finite() || x < self.lower[i] - slack || x > self.upper[i] + slack {
                return Err(Error::Bounds {
                    name: PARAM_NAMES[i],
                    value: x,
                    lower: self.lower[i],
                    upper: self.upper[i],
                });
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..PARAM_COUNT {
            if !(self.lower[i].is_finite() && self.upper[i].is_finite())
                || self.lower[i] > self.upper[i]
            {
                return Err(Error::Spec(format!(
                    "bounds for {} are not ordered: [{}, {}]",
                    PARAM_NAMES[i], self.lower[i], self.upper[i]
                )));
            }
        }
        Ok(())
    }
}

impl Serialize for ParamVector {
    /// A map keyed by the table names, in vector order.
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(PARAM_COUNT))?;
        for (name, v) in PARAM_NAMES.iter().zip(self.0.iter()) {
            map.serialize_entry(name, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for ParamVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let entries = BTreeMap::<String, f64>::deserialize(d)?;
        let mut v = [f64::NAN; PARAM_COUNT];
        for (key, value) in entries {
            let i = PARAM_NAMES
                .iter()
                .position(|n| *n == key)
                .ok_or_else(|| serde::de::Error::custom(format!("unknown parameter {key}")))?;
            v[i] = value;
        }
        if let Some(i) = v.iter().position(|x| x.is_nan()) {
            return Err(serde::de::Error::custom(format!(
                "missing parameter {}",
                PARAM_NAMES[i]
            )));
        }
        Ok(ParamVector(v))
    }
}

#[derive(Serialize, Deserialize)]
struct BoundEntry {
    lower: f64,
    upper: f64,
}

impl Serialize for ParamBounds {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(PARAM_COUNT))?;
        for (i, name) in PARAM_NAMES.iter().enumerate() {
            map.serialize_entry(
                name,
                &BoundEntry {
                    lower: self.lower[i],
                    upper: self.upper[i],
                },
            )?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for ParamBounds {
    /// Missing keys keep their default bounds.
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let entries = BTreeMap::<String, BoundEntry>::deserialize(d)?;
        let mut bounds = ParamBounds::default();
        for (key, entry) in entries {
            let i = PARAM_NAMES
                .iter()
                .position(|n| *n == key)
                .ok_or_else(|| serde::de::Error::custom(format!("unknown parameter {key}")))?;
            bounds.lower[i] = entry.lower;
            bounds.upper[i] = entry.upper;
        }
        Ok(bounds)
    }
}

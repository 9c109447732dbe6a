//! Element stiffness and damping by central differences on the force curves.

use super::curves::{ce, damper_coefficient, pee, see};
use super::params::MtuParams;

/// Floor applied to element stiffness (N/m).
pub const MIN_STIFFNESS: f64 = 1e-6;

/// Relative finite-difference step, scaled by `l_opt` (lengths) or `l_opt`/s (velocities).
pub const FD_STEP: f64 = 1e-6;

/// Short-range stiffness gain of active fibers (stiffness per unit force per
/// optimal length; Cui et al. 2008).
pub const SHORT_RANGE_GAMMA: f64 = 23.4;

/// Short-range (cross-bridge) stiffness of the fibers carrying active force
/// `f_ce` (N/m).
pub fn short_range_stiffness(f_ce: f64, gamma: f64, p: &MtuParams) -> f64 {
    gamma * f_ce.max(0.0) / p.l_opt()
}

/// Muscle and tendon stiffness (N/m) and damping (N·s/m).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ElementImpedance {
    pub k_m: f64,
    pub k_t: f64,
    pub d_m: f64,
    pub d_t: f64,
}

/// Element impedance at CE length/velocity `l_ce`/`v_ce` inside an MTU of
/// length `l_mtu` lengthening at `v_mtu`.
pub fn element_impedance_at(
    l_ce: f64,
    v_ce: f64,
    act: f64,
    l_mtu: f64,
    v_mtu: f64,
    p: &MtuParams,
) -> ElementImpedance {
    let h = FD_STEP * p.l_opt();
    let muscle = |l: f64| ce(l, v_ce, act, p) + pee(l, p);
    let k_m = (muscle(l_ce + h) - muscle(l_ce - h)) / (2.0 * h);

    let l_se = l_mtu - l_ce;
    let v_se = v_mtu - v_ce;
    let tendon = |l: f64| {
        let f = see(l, p);
        f + damper_coefficient(f, p) * v_se
    };
    let k_t = (tendon(l_se + h) - tendon(l_se - h)) / (2.0 * h);

    let d_m = (ce(l_ce, v_ce + h, act, p) - ce(l_ce, v_ce - h, act, p)) / (2.0 * h);
    // The damper is linear in v_se, so its derivative is the coefficient itself.
    let d_t = damper_coefficient(see(l_se, p), p);

    ElementImpedance {
        k_m: floor_stiffness(k_m),
        k_t: floor_stiffness(k_t),
        d_m: d_m.max(0.0),
        d_t: d_t.max(0.0),
    }
}

fn floor_stiffness(k: f64) -> f64 {
    if k.is_finite() {
        k.max(MIN_STIFFNESS)
    } else {
        MIN_STIFFNESS
    }
}

/// Series combination of two non-negative elements; zero if either is zero.
pub fn series(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        0.0
    } else {
        a * b / (a + b)
    }
}

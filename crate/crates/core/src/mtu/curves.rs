//! Element force curves of the lumped muscle-tendon unit.
//!
//! All functions are pure and evaluate one element at a given length or
//! velocity. Lengths are in meters, velocities in m/s (positive = lengthening)
//! and forces in newtons.

use super::params::MtuParams;
use crate::error::{Error, Result};

/// Smallest `act·F_isom` product used to shape the eccentric branch.
const MIN_ECCENTRIC_LEVEL: f64 = 1e-12;

/// Normalized isometric force of the contractile element, in (0, 1].
pub fn force_length_ce(l_ce: f64, p: &MtuParams) -> Result<f64> {
    if !l_ce.is_finite() {
        return Err(Error::Domain("force_length_ce"));
    }
    Ok(isometric(l_ce, p))
}

pub(crate) fn isometric(l_ce: f64, p: &MtuParams) -> f64 {
    let x = l_ce / p.l_opt() - 1.0;
    let (w, v) = if x < 0.0 {
        (p.w_asc, p.v_asc)
    } else {
        (p.w_des, p.v_des)
    };
    (-(x / w).abs().powf(v)).exp()
}

/// Parallel elastic element force.
pub fn force_pee(l_ce: f64, p: &MtuParams) -> Result<f64> {
    if !l_ce.is_finite() {
        return Err(Error::Domain("force_pee"));
    }
    Ok(pee(l_ce, p))
}

pub(crate) fn pee(l_ce: f64, p: &MtuParams) -> f64 {
    let l0 = p.l_pee0();
    if l_ce <= l0 {
        return 0.0;
    }
    let span = p.l_opt() * (1.0 + p.w_des) - l0;
    p.f_pee0() * ((l_ce - l0) / span).powf(p.v_pee)
}

/// Serial elastic (tendon) force: power-law toe region, linear beyond `du_nl`.
pub fn force_see(l_se: f64, p: &MtuParams) -> Result<f64> {
    if !l_se.is_finite() {
        return Err(Error::Domain("force_see"));
    }
    Ok(see(l_se, p))
}

pub(crate) fn see(l_se: f64, p: &MtuParams) -> f64 {
    let strain = (l_se - p.l_see0) / p.l_see0;
    if strain <= 0.0 {
        0.0
    } else if strain < p.du_nl {
        // Exponent du_nl/du_l makes the toe slope meet the linear slope.
        p.df_see0() * (strain / p.du_nl).powf(p.du_nl / p.du_l)
    } else {
        p.df_see0() * (1.0 + (strain - p.du_nl) / p.du_l)
    }
}

/// Force-dependent damper coefficient (N·s/m).
pub fn damper_coefficient(f_se: f64, p: &MtuParams) -> f64 {
    let rel = (f_se / p.f_max).clamp(0.0, 1.0);
    p.d_se_max() * ((1.0 - p.r_de) * rel + p.r_de)
}

/// Damper force for tendon velocity `v_se` at tendon force `f_se`.
pub fn force_de(v_se: f64, f_se: f64, p: &MtuParams) -> f64 {
    damper_coefficient(f_se, p) * v_se
}

/// Contractile element force at length `l_ce`, velocity `v_ce` and activation `act`.
pub fn force_ce(l_ce: f64, v_ce: f64, act: f64, p: &MtuParams) -> Result<f64> {
    if !(l_ce.is_finite() && v_ce.is_finite() && act.is_finite()) {
        return Err(Error::Domain("force_ce"));
    }
    Ok(ce(l_ce, v_ce, act, p))
}

pub(crate) fn ce(l_ce: f64, v_ce: f64, act: f64, p: &MtuParams) -> f64 {
    let l_opt = p.l_opt();
    let f_iso = isometric(l_ce, p);
    let level = act * f_iso;
    let a_rel = if l_ce < l_opt {
        p.a_max
    } else {
        p.a_max * f_iso
    };
    let b_rel = p.b_max;
    if v_ce <= 0.0 {
        let f = p.f_max * ((level + a_rel) / (1.0 - v_ce / (b_rel * l_opt)) - a_rel);
        f.max(0.0)
    } else {
        let level = level.max(MIN_ECCENTRIC_LEVEL);
        let ceiling = 1.0 + p.f_ecc;
        let b_ecc = b_rel * (ceiling - 1.0) / (p.s_ecc * (1.0 + a_rel / level));
        p.f_max * level * (ceiling - (ceiling - 1.0) / (1.0 + v_ce / (b_ecc * l_opt)))
    }
}

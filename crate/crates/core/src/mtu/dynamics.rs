//! Contraction dynamics: the series force balance between the muscle (CE, PEE)
//! and the tendon (SEE, damper), integrated with a backward Euler step.

use serde::{Deserialize, Serialize};

use super::curves::{ce, damper_coefficient, pee, see};
use super::impedance::{element_impedance_at, series, short_range_stiffness};
use super::params::MtuParams;
use crate::error::{Error, Result};

/// Shortest admissible CE length as a fraction of `l_opt`.
pub const MIN_CE_FRACTION: f64 = 0.001;
/// Longest admissible CE length as a fraction of `l_mtu − l_see0`.
pub const MAX_CE_FRACTION: f64 = 0.95;

/// Velocity bracket width (m/s) at which the root search stops.
const V_TOL: f64 = 1e-10;
/// Residual (as a fraction of `f_max`) at which the root search stops.
const F_TOL: f64 = 1e-9;

/// Instantaneous muscle-tendon state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtuState {
    pub l_mtu: f64,
    pub l_ce: f64,
    pub l_se: f64,
    pub v_mtu: f64,
    pub v_ce: f64,
    pub v_se: f64,
    pub act: f64,
    pub f_ce: f64,
    pub f_pe: f64,
    pub f_se: f64,
    pub f_de: f64,
    pub k_m: f64,
    pub k_t: f64,
    pub d_m: f64,
    pub d_t: f64,
    /// Set when the CE length was projected onto its admissible range.
    pub clamped: bool,
}

impl MtuState {
    /// Builds a fully evaluated state from its kinematic coordinates.
    pub fn evaluate(
        p: &MtuParams,
        act: f64,
        l_mtu: f64,
        v_mtu: f64,
        l_ce: f64,
        v_ce: f64,
        clamped: bool,
    ) -> Self {
        let l_se = l_mtu - l_ce;
        let v_se = v_mtu - v_ce;
        let f_se = see(l_se, p);
        let imp = element_impedance_at(l_ce, v_ce, act, l_mtu, v_mtu, p);
        MtuState {
            l_mtu,
            l_ce,
            l_se,
            v_mtu,
            v_ce,
            v_se,
            act,
            f_ce: ce(l_ce, v_ce, act, p),
            f_pe: pee(l_ce, p),
            f_se,
            f_de: damper_coefficient(f_se, p) * v_se,
            k_m: imp.k_m,
            k_t: imp.k_t,
            d_m: imp.d_m,
            d_t: imp.d_t,
            clamped,
        }
    }

    /// Force transmitted to the skeleton (tendon plus damper).
    pub fn force(&self) -> f64 {
        self.f_se + self.f_de
    }

    /// Series muscle-tendon stiffness (N/m).
    pub fn stiffness(&self) -> f64 {
        series(self.k_m, self.k_t)
    }

    /// Series muscle-tendon stiffness with the fibers' short-range stiffness
    /// (gain `gamma`) added to the curve slope.
    pub fn stiffness_with_short_range(&self, gamma: f64, p: &MtuParams) -> f64 {
        series(
            self.k_m + short_range_stiffness(self.f_ce, gamma, p),
            self.k_t,
        )
    }

    /// Series muscle-tendon damping (N·s/m).
    pub fn damping(&self) -> f64 {
        series(self.d_m, self.d_t)
    }

    /// Series force-balance residual `f_ce + f_pe − f_se − f_de`.
    pub fn residual(&self) -> f64 {
        self.f_ce + self.f_pe - self.f_se - self.f_de
    }
}

/// Admissible CE length interval inside an MTU of length `l_mtu`.
pub fn ce_length_range(l_mtu: f64, p: &MtuParams) -> (f64, f64) {
    let lo = (MIN_CE_FRACTION * p.l_opt()).max(l_mtu - p.l_se_max());
    let hi = MAX_CE_FRACTION * (l_mtu - p.l_see0);
    (lo, hi)
}

/// Advances one MTU by `dt`.
///
/// The CE velocity is solved so that the force balance holds at the
/// end-of-step lengths. If the balance would need a CE length outside the
/// admissible range, or the current length already lies outside it, the CE
/// velocity is zeroed and the length is projected onto the range.
pub fn contraction_step(
    state: &MtuState,
    act: f64,
    l_mtu: f64,
    v_mtu: f64,
    dt: f64,
    p: &MtuParams,
) -> Result<MtuState> {
    if !(act.is_finite() && l_mtu.is_finite() && v_mtu.is_finite() && dt > 0.0) {
        return Err(Error::Domain("contraction_step"));
    }
    let (l_min, l_max) = ce_length_range(l_mtu, p);
    if l_min > l_max {
        return Err(Error::Geometry(format!(
            "MTU length {l_mtu:.5} m leaves no admissible CE length"
        )));
    }
    let l0 = state.l_ce;
    if !(l_min..=l_max).contains(&l0) {
        let l = l0.clamp(l_min, l_max);
        return Ok(MtuState::evaluate(p, act, l_mtu, v_mtu, l, 0.0, true));
    }

    let residual = |v: f64| {
        let l = l0 + dt * v;
        let f_se = see(l_mtu - l, p);
        ce(l, v, act, p) + pee(l, p) - f_se - damper_coefficient(f_se, p) * (v_mtu - v)
    };
    let v_lo = (l_min - l0) / dt;
    let v_hi = (l_max - l0) / dt;

    match bracket_from(residual, state.v_ce.clamp(v_lo, v_hi), v_lo, v_hi)? {
        Bracket::Below => Ok(MtuState::evaluate(p, act, l_mtu, v_mtu, l_min, 0.0, true)),
        Bracket::Above => Ok(MtuState::evaluate(p, act, l_mtu, v_mtu, l_max, 0.0, true)),
        Bracket::Exact(v) => Ok(MtuState::evaluate(
            p,
            act,
            l_mtu,
            v_mtu,
            l0 + dt * v,
            v,
            false,
        )),
        Bracket::Interval { a, b, fa, fb } => {
            let v = illinois(residual, a, b, fa, fb, F_TOL * p.f_max);
            Ok(MtuState::evaluate(
                p,
                act,
                l_mtu,
                v_mtu,
                l0 + dt * v,
                v,
                false,
            ))
        }
    }
}

enum Bracket {
    /// The root lies below the admissible range.
    Below,
    /// The root lies above the admissible range.
    Above,
    Exact(f64),
    Interval {
        a: f64,
        b: f64,
        fa: f64,
        fb: f64,
    },
}

/// Finds a sign change of an increasing residual, searching outward from
/// `start` with geometrically growing steps.
fn bracket_from(f: impl Fn(f64) -> f64, start: f64, lo: f64, hi: f64) -> Result<Bracket> {
    let no_root = |a: f64, b: f64, fa: f64, fb: f64| Error::NoRoot {
        lo: a,
        hi: b,
        r_lo: fa,
        r_hi: fb,
    };
    let f0 = f(start);
    if !f0.is_finite() {
        return Err(no_root(start, start, f0, f0));
    }
    if f0 == 0.0 {
        return Ok(Bracket::Exact(start));
    }
    let upward = f0 < 0.0;
    let mut step = (start.abs() * 0.05).max(1e-4);
    let (mut a, mut fa) = (start, f0);
    loop {
        let b = if upward {
            (a + step).min(hi)
        } else {
            (a - step).max(lo)
        };
        let fb = f(b);
        if !fb.is_finite() {
            return Err(no_root(a, b, fa, fb));
        }
        if fb == 0.0 {
            return Ok(Bracket::Exact(b));
        }
        if (fb > 0.0) == upward {
            return Ok(if upward {
                Bracket::Interval { a, b, fa, fb }
            } else {
                Bracket::Interval {
                    a: b,
                    b: a,
                    fa: fb,
                    fb: fa,
                }
            });
        }
        if b == hi && upward {
            return Ok(Bracket::Above);
        }
        if b == lo && !upward {
            return Ok(Bracket::Below);
        }
        a = b;
        fa = fb;
        step *= 4.0;
    }
}

/// Illinois-modified regula falsi on `[a, b]` with `f(a) < 0 < f(b)`.
fn illinois(
    f: impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    f_tol: f64,
) -> f64 {
    let mut side = 0i8;
    for _ in 0..200 {
        if b - a < V_TOL {
            break;
        }
        let mut c = b - fb * (b - a) / (fb - fa);
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let fc = f(c);
        if fc.abs() <= f_tol {
            return c;
        }
        if fc < 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    // The halved endpoint values are no longer true residuals; re-evaluate.
    if f(a).abs() <= f(b).abs() {
        a
    } else {
        b
    }
}

/// Passive equilibrium of one MTU at length `l_mtu` and activation `act`.
pub fn init_rest(p: &MtuParams, l_mtu: f64, act: f64) -> Result<MtuState> {
    let width = (p.w_des + p.w_asc) * p.l_opt();
    if width >= p.l_ce_init() {
        return Err(Error::Constraint(format!(
            "W_des + W_asc = {:.4} m must be below l_ce_init = {:.4} m",
            width,
            p.l_ce_init()
        )));
    }
    let (mut lo, mut hi) = ce_length_range(l_mtu, p);
    if lo > hi {
        return Err(Error::Initialization(format!(
            "no admissible CE length for l_mtu = {l_mtu:.5} m"
        )));
    }
    let r = |l: f64| ce(l, 0.0, act, p) + pee(l, p) - see(l_mtu - l, p);
    let (r_lo, r_hi) = (r(lo), r(hi));
    if !(r_lo.is_finite() && r_hi.is_finite()) || r_lo > 0.0 || r_hi < 0.0 {
        return Err(Error::Initialization(format!(
            "force balance does not change sign on [{lo:.5}, {hi:.5}] m (residuals {r_lo:.3e}, {r_hi:.3e} N)"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if r(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let l = if r(lo).abs() <= r(hi).abs() { lo } else { hi };
    Ok(MtuState::evaluate(p, act, l_mtu, 0.0, l, 0.0, false))
}

//! Lumped Hill-type muscle-tendon unit: a contractile element (CE) and a
//! parallel elastic element (PEE) in series with a tendon made of a serial
//! elastic element (SEE) and a damper.

pub mod activation;
pub mod curves;
pub mod dynamics;
pub mod impedance;
pub mod params;

pub use activation::{activation_step, ActivationDynamics};
pub use curves::{damper_coefficient, force_ce, force_de, force_length_ce, force_pee, force_see};
pub use dynamics::{ce_length_range, contraction_step, init_rest, MtuState};
pub use impedance::{
    element_impedance_at, series, short_range_stiffness, ElementImpedance, SHORT_RANGE_GAMMA,
};
pub use params::{MtuParams, ParamBounds, ParamVector, PARAM_COUNT, PARAM_NAMES};

/// Element impedance of an evaluated state.
pub fn element_impedance(state: &MtuState, p: &MtuParams) -> ElementImpedance {
    element_impedance_at(
        state.l_ce,
        state.v_ce,
        state.act,
        state.l_mtu,
        state.v_mtu,
        p,
    )
}

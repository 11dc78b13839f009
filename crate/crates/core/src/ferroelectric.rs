//! Linear BFO capacitor: polarization relaxation and the magnetoelectric field.

use crate::magnet::Vec3;
use crate::params::{ParamSet, JOULE_TO_ERG};

/// dP/dt [C/s]: first-order relaxation toward the linear-capacitor charge C_ME·V.
#[inline]
pub fn polarization_rhs(p_charge: f64, v: f64, p: &ParamSet) -> f64 {
    (p.c_me * v - p_charge) / p.tau_fe
}

/// Magnetoelectric effective field [Oe], directed along ±y.
///
/// The coupling energy ζ·2·|P·V| (J → erg) is divided by the total moment
/// M_s·V_FM (emu), giving Oe. The polarization sets the direction: reversing
/// the BFO polarization reverses its weak moment and hence the exchange
/// field on the magnet. At steady state P = C_ME·V the magnitude is
/// ζ·2·C_ME·V²/(M_s·V_FM) with the sign of V.
#[inline]
pub fn me_field(p_charge: f64, v: f64, p: &ParamSet) -> Vec3 {
    let energy_erg = p.zeta * 2.0 * p_charge * v.abs() * JOULE_TO_ERG;
    Vec3::new(0.0, energy_erg / (p.m_s * p.volume_cm3()), 0.0)
}

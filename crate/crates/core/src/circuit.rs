//! IR readout, synapse compact model and power accounting.

use std::ops::AddAssign;

use crate::params::ParamSet;
use crate::Error;

/// Lower bound on the gate-node source resistance [Ω]. Keeps the gate time
/// constant finite when m_y crosses zero.
pub const GATE_R_FLOOR: f64 = 100.0;

/// Signed effective IR resistance R_X [Ω].
#[inline]
pub fn ir_resistance(m_y: f64, p: &ParamSet) -> f64 {
    p.eta * (p.lambda_ir / p.w_ir) * m_y * p.r_ir_x()
}

/// DC read current through the IR stack [A].
pub fn drive_current(p: &ParamSet) -> f64 {
    p.v_drive / (p.r_ir_z() + p.r_drive_extra)
}

#[inline]
pub fn ir_voltage(i_d: f64, r_x: f64) -> f64 {
    i_d * r_x
}

/// dY/dt [V/s]: the gate node follows the IR source through its own resistance.
#[inline]
pub fn gate_rhs(y: f64, v_ir: f64, r_x: f64, p: &ParamSet) -> f64 {
    (v_ir - y) / (r_x.abs().max(GATE_R_FLOOR) * p.c_y)
}

/// Rail-clamped steady-state synapse output for a weighted input sum over
/// `n` synapses [V].
#[inline]
pub fn synapse_target(weighted_sum: f64, n: usize, p: &ParamSet) -> f64 {
    (p.k_sat * weighted_sum / n as f64).clamp(-p.v_dd, p.v_dd)
}

/// dV/dt [V/s] of the ME capacitor node given its clamped synapse target.
#[inline]
pub fn capacitor_rhs(target: f64, v: f64, p: &ParamSet) -> f64 {
    (target - v) / (p.c_me * p.r_v)
}

/// dV/dt [V/s] from the gate voltages of every synapse feeding the node.
pub fn synapse_drive(neighbor_y: &[f64], weights: &[f64], v: f64, p: &ParamSet) -> Result<f64, Error> {
    if neighbor_y.len() != weights.len() {
        return Err(Error::Dimension(format!(
            "{} gate voltages but {} weights",
            neighbor_y.len(),
            weights.len()
        )));
    }
    if neighbor_y.is_empty() {
        return Err(Error::Dimension("synapse needs at least one input".into()));
    }
    let sum: f64 = neighbor_y.iter().zip(weights).map(|(y, w)| y * w).sum();
    Ok(capacitor_rhs(synapse_target(sum, neighbor_y.len(), p), v, p))
}

/// Crowbar current of one repeater gated at `y`, times its supply span [W].
#[inline]
pub fn synapse_leak_power(y: f64, p: &ParamSet) -> f64 {
    let u = y / p.v_dd;
    2.0 * p.v_dd * p.i_leak0 * (-4.0 * u * u).exp()
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PowerBreakdown {
    pub p_drive: f64,
    pub p_leak: f64,
    pub p_charge: f64,
    pub total: f64,
}

impl AddAssign for PowerBreakdown {
    fn add_assign(&mut self, o: Self) {
        self.p_drive += o.p_drive;
        self.p_leak += o.p_leak;
        self.p_charge += o.p_charge;
        self.total += o.total;
    }
}

/// Node voltages and their time derivatives for one neuron.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NodeSnapshot {
    pub v: f64,
    pub dv_dt: f64,
    pub y: f64,
    pub dy_dt: f64,
    /// Number of synapses gated by this neuron's Y.
    pub fan_out: usize,
}

/// Instantaneous power drawn by one neuron and the synapses it gates.
#[inline]
pub fn power_snapshot(node: &NodeSnapshot, p: &ParamSet) -> PowerBreakdown {
    let p_drive = p.v_drive * drive_current(p);
    let p_leak = node.fan_out as f64 * synapse_leak_power(node.y, p);
    let p_charge = p.c_me * (node.v * node.dv_dt).abs() + p.c_y * (node.y * node.dy_dt).abs();
    PowerBreakdown { p_drive, p_leak, p_charge, total: p_drive + p_leak + p_charge }
}

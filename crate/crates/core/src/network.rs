//! The coupled neuron grid: neighborhoods, state, RK4 advance and traces.
//!
//! Each neuron carries six state variables `[m_x, m_y, m_z, P, V, Y]` stored
//! contiguously in a flat vector. One call to [`Simulator::step`] advances the
//! whole grid by `p.dt`, split into enough classical RK4 substeps to resolve
//! the fastest precession and gate time constants (see [`substeps_for`]). The
//! thermal field is drawn once per neuron per `dt`, with the variance of a
//! `dt`-long white-noise average, and held over every substep and stage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circuit::{self, NodeSnapshot, PowerBreakdown, GATE_R_FLOOR};
use crate::image::Image;
use crate::integrator::{OdeSystem, Rk4};
use crate::magnet::{self, Vec3};
use crate::{ferroelectric, params::ParamSet, Error};

/// Values per neuron in the flat state vector.
pub const STRIDE: usize = 6;

/// Grids at least this large evaluate the derivative with rayon.
const PAR_THRESHOLD: usize = 4096;

/// Largest precession angle per substep, γ|H|·h.
const MAX_PRECESSION_PER_SUBSTEP: f64 = 0.5;

/// Largest substep relative to the fastest gate time constant. RK4 is stable
/// on linear decay up to h/τ ≈ 2.78; the floor time constant is only reached
/// while m_y crosses zero.
const MAX_GATE_RATIO: f64 = 2.5;

/// Grid connectivity and the parameters shared by every neuron.
#[derive(Debug, Clone)]
pub struct Network {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    sources: Vec<usize>,
    weights: Vec<f64>,
    /// Flat index of each source's gate node.
    source_slots: Vec<usize>,
    unit_weights: bool,
    /// k_sat over the neighbourhood size.
    syn_gain: Vec<f64>,
    fan_out: Vec<usize>,
    params: ParamSet,
    coeffs: Coeffs,
}

/// Per-neuron constants hoisted out of the derivative loop.
#[derive(Debug, Clone, Copy)]
struct Coeffs {
    h_k: f64,
    demag: [f64; 3],
    me_per_pv: f64,
    gamma: f64,
    alpha_gamma: f64,
    c_me: f64,
    inv_tau_fe: f64,
    inv_rc_v: f64,
    v_dd: f64,
    rx_per_my: f64,
    i_d: f64,
    c_y: f64,
}

impl Coeffs {
    fn new(p: &ParamSet) -> Self {
        let dx = magnet::demag_field(Vec3::new(1.0, 0.0, 0.0), p).x;
        let dy = magnet::demag_field(Vec3::Y, p).y;
        let dz = magnet::demag_field(Vec3::new(0.0, 0.0, 1.0), p).z;
        Self {
            h_k: p.h_k(),
            demag: [dx, dy, dz],
            me_per_pv: ferroelectric::me_field(1.0, 1.0, p).y,
            gamma: p.gamma,
            alpha_gamma: p.alpha * p.gamma,
            c_me: p.c_me,
            inv_tau_fe: 1.0 / p.tau_fe,
            inv_rc_v: 1.0 / (p.c_me * p.r_v),
            v_dd: p.v_dd,
            rx_per_my: circuit::ir_resistance(1.0, p),
            i_d: circuit::drive_current(p),
            c_y: p.c_y,
        }
    }
}

/// Self plus von Neumann neighbors with truncation at the boundary; every
/// weight defaults to 1.
pub fn build_grid(rows: usize, cols: usize, weights: Option<Vec<f64>>, params: ParamSet) -> Result<Network, Error> {
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension(format!("grid must be at least 1x1, got {rows}x{cols}")));
    }
    let violations = params.validate();
    if !violations.is_empty() {
        return Err(Error::Params(crate::params::ParamError::Invalid(violations)));
    }
    let mut offsets = Vec::with_capacity(rows * cols + 1);
    let mut sources = Vec::with_capacity(rows * cols * 5);
    offsets.push(0);
    for r in 0..rows {
        for c in 0..cols {
            sources.push(r * cols + c);
            if r > 0 {
                sources.push((r - 1) * cols + c);
            }
            if r + 1 < rows {
                sources.push((r + 1) * cols + c);
            }
            if c > 0 {
                sources.push(r * cols + c - 1);
            }
            if c + 1 < cols {
                sources.push(r * cols + c + 1);
            }
            offsets.push(sources.len());
        }
    }
    let weights = match weights {
        None => vec![1.0; sources.len()],
        Some(w) if w.len() == sources.len() => w,
        Some(w) => {
            return Err(Error::Dimension(format!(
                "{} weights for {} synapses",
                w.len(),
                sources.len()
            )))
        }
    };
    let mut fan_out = vec![0; rows * cols];
    for &s in &sources {
        fan_out[s] += 1;
    }
    let syn_gain = offsets.windows(2).map(|w| params.k_sat / (w[1] - w[0]) as f64).collect();
    let source_slots = sources.iter().map(|&j| j * STRIDE + 5).collect();
    let unit_weights = weights.iter().all(|&w| w == 1.0);
    Ok(Network {
        rows,
        cols,
        offsets,
        sources,
        weights,
        source_slots,
        unit_weights,
        syn_gain,
        fan_out,
        coeffs: Coeffs::new(&params),
        params,
    })
}

impl Network {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    /// Source neurons feeding neuron `i`, self first.
    pub fn neighborhood(&self, i: usize) -> &[usize] {
        &self.sources[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn weights(&self, i: usize) -> &[f64] {
        &self.weights[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Number of synapses gated by neuron `i`.
    pub fn fan_out(&self, i: usize) -> usize {
        self.fan_out[i]
    }

    fn check_dims(&self, image: &Image) -> Result<(), Error> {
        if image.rows() != self.rows || image.cols() != self.cols {
            return Err(Error::Dimension(format!(
                "image is {}x{}, network is {}x{}",
                image.rows(),
                image.cols(),
                self.rows,
                self.cols
            )));
        }
        Ok(())
    }

    /// Rail-clamped synapse target of neuron `i` at state `y`.
    #[inline]
    fn synapse_target(&self, i: usize, y: &[f64]) -> f64 {
        let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
        let slots = &self.source_slots[lo..hi];
        let sum: f64 = if self.unit_weights {
            slots.iter().map(|&k| y[k]).sum()
        } else {
            slots.iter().zip(&self.weights[lo..hi]).map(|(&k, &w)| w * y[k]).sum()
        };
        (sum * self.syn_gain[i]).clamp(-self.coeffs.v_dd, self.coeffs.v_dd)
    }

    #[inline]
    fn neuron_rhs(&self, i: usize, y: &[f64], thermal: Vec3, out: &mut [f64]) {
        let k = &self.coeffs;
        let s: &[f64; STRIDE] = y[i * STRIDE..(i + 1) * STRIDE].try_into().unwrap();
        let out: &mut [f64; STRIDE] = out.try_into().unwrap();
        let m = Vec3::new(s[0], s[1], s[2]);
        let (q, v, g) = (s[3], s[4], s[5]);

        let h_eff = Vec3::new(
            k.demag[0] * m.x,
            (k.h_k + k.demag[1]) * m.y + k.me_per_pv * q * v.abs(),
            k.demag[2] * m.z,
        ) + thermal;
        let mxh = m.cross(h_eff);
        let dm = k.gamma * mxh - k.alpha_gamma * m.cross(mxh);

        let target = self.synapse_target(i, y);
        let r_x = k.rx_per_my * m.y;
        let v_ir = k.i_d * r_x;

        out[0] = dm.x;
        out[1] = dm.y;
        out[2] = dm.z;
        out[3] = (k.c_me * v - q) * k.inv_tau_fe;
        out[4] = (target - v) * k.inv_rc_v;
        out[5] = (v_ir - g) / (r_x.abs().max(GATE_R_FLOOR) * k.c_y);
    }

    /// Full-grid derivative with the given per-neuron thermal fields.
    pub fn rhs_into(&self, y: &[f64], thermal: &[Vec3], out: &mut [f64]) {
        if self.len() >= PAR_THRESHOLD {
            out.par_chunks_mut(STRIDE)
                .enumerate()
                .for_each(|(i, o)| self.neuron_rhs(i, y, thermal[i], o));
        } else {
            for (i, o) in out.chunks_exact_mut(STRIDE).enumerate() {
                self.neuron_rhs(i, y, thermal[i], o);
            }
        }
    }

    /// Instantaneous power of the whole grid at state `y`.
    pub fn power(&self, y: &[f64]) -> PowerBreakdown {
        let k = &self.coeffs;
        let mut total = PowerBreakdown::default();
        for i in 0..self.len() {
            let b = i * STRIDE;
            let (v, g) = (y[b + 4], y[b + 5]);
            let target = self.synapse_target(i, y);
            let r_x = k.rx_per_my * y[b + 1];
            let node = NodeSnapshot {
                v,
                dv_dt: (target - v) * k.inv_rc_v,
                y: g,
                dy_dt: (k.i_d * r_x - g) / (r_x.abs().max(GATE_R_FLOOR) * k.c_y),
                fan_out: self.fan_out[i],
            };
            total += circuit::power_snapshot(&node, &self.params);
        }
        total
    }
}

/// Number of RK4 substeps per `p.dt` needed to keep the precession angle per
/// substep and the gate-node ratio h/τ within the RK4 accuracy region.
pub fn substeps_for(p: &ParamSet) -> usize {
    let y_max = circuit::drive_current(p) * circuit::ir_resistance(1.0, p).abs();
    let v_max = (p.k_sat * y_max).min(p.v_dd);
    let h_me = ferroelectric::me_field(p.c_me * v_max, v_max, p).y;
    let h_static = p.h_k() + p.m_s + h_me;
    let tau_gate = GATE_R_FLOOR.min(circuit::ir_resistance(1.0, p).abs().max(GATE_R_FLOOR)) * p.c_y;
    let n = (p.dt / (MAX_GATE_RATIO * tau_gate)).ceil().max(1.0) as usize;
    let h_max = h_static + 6.0 * p.sigma_thermal(p.dt);
    let need = (p.dt * p.gamma * h_max / MAX_PRECESSION_PER_SUBSTEP).ceil() as usize;
    n.max(need)
}

/// Energy integrated since t = 0 [J], split by source.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyLedger {
    pub drive: f64,
    pub leak: f64,
    pub charge: f64,
    pub total: f64,
}

impl EnergyLedger {
    fn accumulate(&mut self, a: &PowerBreakdown, b: &PowerBreakdown, h: f64) {
        let half = 0.5 * h;
        self.drive += half * (a.p_drive + b.p_drive);
        self.leak += half * (a.p_leak + b.p_leak);
        self.charge += half * (a.p_charge + b.p_charge);
        self.total = self.drive + self.leak + self.charge;
    }
}

/// One neuron's dynamical variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronState {
    pub m: Vec3,
    pub p: f64,
    pub v: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub t: f64,
    values: Vec<f64>,
    pub energy: EnergyLedger,
    pub power: PowerBreakdown,
}

impl NetworkState {
    pub fn from_neurons(neurons: &[NeuronState]) -> Self {
        let mut values = Vec::with_capacity(neurons.len() * STRIDE);
        for n in neurons {
            values.extend_from_slice(&[n.m.x, n.m.y, n.m.z, n.p, n.v, n.y]);
        }
        Self { t: 0.0, values, energy: EnergyLedger::default(), power: PowerBreakdown::default() }
    }

    pub fn len(&self) -> usize {
        self.values.len() / STRIDE
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn neuron(&self, i: usize) -> NeuronState {
        let b = i * STRIDE;
        let v = &self.values;
        NeuronState { m: Vec3::new(v[b], v[b + 1], v[b + 2]), p: v[b + 3], v: v[b + 4], y: v[b + 5] }
    }

    pub fn set_neuron(&mut self, i: usize, n: NeuronState) {
        let b = i * STRIDE;
        self.values[b..b + STRIDE].copy_from_slice(&[n.m.x, n.m.y, n.m.z, n.p, n.v, n.y]);
    }

    pub fn m_y(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.chunks_exact(STRIDE).map(|c| c[1])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sign pattern of m_y; zero maps to +1.
    pub fn to_image(&self, rows: usize, cols: usize) -> Result<Image, Error> {
        Image::new(rows, cols, self.m_y().map(|y| if y < 0.0 { -1 } else { 1 }).collect())
    }
}

/// Draws m from the easy-axis Boltzmann density ∝ exp(Δ·m_y²) restricted to
/// the well on the pixel's side. Δ = ∞ (T = 0) collapses to ±ŷ.
pub fn sample_well<R: rand::Rng + ?Sized>(rng: &mut R, delta: f64, sign: f64) -> Vec3 {
    let u = if delta.is_infinite() {
        1.0
    } else if delta <= 0.0 {
        rng.random::<f64>()
    } else {
        // envelope exp(Δu) >= exp(Δu²) on [0,1]; accept with exp(-Δu(1-u))
        loop {
            let r: f64 = rng.random();
            let u = (1.0 + (r * (-delta).exp_m1()).ln_1p() / delta).clamp(0.0, 1.0);
            let accept: f64 = rng.random();
            if accept < (-delta * u * (1.0 - u)).exp() {
                break u;
            }
        }
    };
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    let s = (1.0 - u * u).max(0.0).sqrt();
    Vec3::new(s * phi.cos(), sign * u, s * phi.sin())
}

/// Initial state: magnetizations in the thermal well of each pixel, nodes discharged.
pub fn init_state<R: rand::Rng + ?Sized>(image: &Image, net: &Network, rng: &mut R) -> Result<NetworkState, Error> {
    net.check_dims(image)?;
    let delta = net.params.delta_barrier();
    let neurons: Vec<NeuronState> = image
        .pixels()
        .iter()
        .map(|&px| NeuronState { m: sample_well(rng, delta, px as f64), p: 0.0, v: 0.0, y: 0.0 })
        .collect();
    let mut s = NetworkState::from_neurons(&neurons);
    s.power = net.power(&s.values);
    Ok(s)
}

/// Mean absolute deviation of m_y from the target pixels, in percent (0..200).
pub fn error_metric(state: &NetworkState, target: &Image) -> Result<f64, Error> {
    if state.len() != target.len() {
        return Err(Error::Dimension(format!(
            "state has {} neurons, target has {} pixels",
            state.len(),
            target.len()
        )));
    }
    let sum: f64 = state.m_y().zip(target.pixels()).map(|(m, &p)| (p as f64 - m).abs()).sum();
    Ok(100.0 * sum / target.len() as f64)
}

/// Seeds one independent random stream per neuron.
pub fn neuron_streams(seed: u64, count: usize) -> Vec<ChaCha8Rng> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            rng
        })
        .collect()
}

struct GridSystem<'a> {
    net: &'a Network,
    thermal: &'a [Vec3],
}

impl OdeSystem for GridSystem<'_> {
    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) {
        self.net.rhs_into(y, self.thermal, dydt);
    }
}

/// Drives a [`NetworkState`] forward in time.
pub struct Simulator<'a> {
    net: &'a Network,
    substeps: usize,
    h: f64,
    rk: Rk4,
    thermal: Vec<Vec3>,
    streams: Vec<ChaCha8Rng>,
}

impl<'a> Simulator<'a> {
    /// `seed` feeds the per-neuron thermal streams.
    pub fn new(net: &'a Network, seed: u64) -> Self {
        Self::with_substeps(net, seed, substeps_for(&net.params))
    }

    pub fn with_substeps(net: &'a Network, seed: u64, substeps: usize) -> Self {
        let substeps = substeps.max(1);
        let h = net.params.dt / substeps as f64;
        Self {
            net,
            substeps,
            h,
            rk: Rk4::new(net.len() * STRIDE),
            thermal: vec![Vec3::ZERO; net.len()],
            streams: neuron_streams(seed, net.len()),
        }
    }

    pub fn network(&self) -> &Network {
        self.net
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn substep_len(&self) -> f64 {
        self.h
    }

    fn draw_thermal(&mut self) {
        if self.net.params.temperature == 0.0 {
            return;
        }
        for (field, rng) in self.thermal.iter_mut().zip(self.streams.iter_mut()) {
            *field = magnet::thermal_field(rng, &self.net.params, self.net.params.dt);
        }
    }

    /// One RK4 substep of length `substep_len()` under the currently held
    /// thermal field, followed by renormalization.
    pub fn rk4_step(&mut self, state: &mut NetworkState) -> Result<(), Error> {
        let sys = GridSystem { net: self.net, thermal: &self.thermal };
        self.rk.step(&sys, state.t, self.h, &mut state.values);
        for (i, c) in state.values.chunks_exact_mut(STRIDE).enumerate() {
            let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            if !(n > 0.0 && n.is_finite()) || !c[3..].iter().all(|v| v.is_finite()) {
                return Err(Error::Numerical(format!("non-finite state at neuron {i}, t = {:e} s", state.t)));
            }
            c[0] /= n;
            c[1] /= n;
            c[2] /= n;
        }
        state.t += self.h;
        Ok(())
    }

    /// Advances by `p.dt` and trapezoid-integrates power over the interval.
    pub fn step(&mut self, state: &mut NetworkState) -> Result<(), Error> {
        let t0 = state.t;
        self.draw_thermal();
        for k in 0..self.substeps {
            self.rk4_step(state)?;
            // pin the grid so t accumulates without drift
            state.t = t0 + (k + 1) as f64 * self.h;
        }
        state.t = t0 + self.net.params.dt;
        let before = state.power;
        state.power = self.net.power(&state.values);
        state.energy.accumulate(&before, &state.power, self.net.params.dt);
        Ok(())
    }
}

/// When to stop a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    /// Stop once E drops to or below this value [%].
    pub target_e: Option<f64>,
    /// Stop once t reaches this value [s].
    pub max_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Reached { delay: f64 },
    Timeout,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub times: Vec<f64>,
    pub error: Vec<f64>,
    pub energy: Vec<f64>,
    pub power: Vec<PowerBreakdown>,
    /// m_y of every neuron at each sample, row-major, when recorded.
    pub nodes: Option<Vec<Vec<f64>>>,
    pub neurons: usize,
}

impl Trace {
    fn record(&mut self, state: &NetworkState, e: f64) {
        self.times.push(state.t);
        self.error.push(e);
        self.energy.push(state.energy.total);
        self.power.push(state.power);
        if let Some(nodes) = self.nodes.as_mut() {
            nodes.push(state.m_y().collect());
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Options for [`run_until`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub stop: StopRule,
    /// Record a sample every this many `dt` steps (and always at the end).
    pub sample_every: usize,
    pub record_nodes: bool,
}

impl RunOptions {
    pub fn new(stop: StopRule) -> Self {
        Self { stop, sample_every: 10, record_nodes: false }
    }
}

/// Steps until the stop rule fires. The stop check runs on every `dt` step;
/// the step that triggers it is always sampled.
pub fn run_until(
    sim: &mut Simulator<'_>,
    state: &mut NetworkState,
    target: &Image,
    opts: RunOptions,
) -> Result<(Trace, Outcome), Error> {
    let mut trace = Trace {
        nodes: opts.record_nodes.then(Vec::new),
        neurons: state.len(),
        ..Default::default()
    };
    let every = opts.sample_every.max(1);
    let dt = sim.net.params.dt;
    let reached = |e: f64| opts.stop.target_e.is_some_and(|t| e <= t);

    let mut e = error_metric(state, target)?;
    trace.record(state, e);
    if reached(e) {
        return Ok((trace, Outcome::Reached { delay: state.t }));
    }
    let mut k = 0usize;
    // half-step slack so max_t on the dt grid is hit exactly once
    while state.t + 0.5 * dt <= opts.stop.max_t {
        sim.step(state)?;
        k += 1;
        e = error_metric(state, target)?;
        let done = reached(e);
        let last = state.t + 0.5 * dt > opts.stop.max_t;
        if done || last || k % every == 0 {
            trace.record(state, e);
        }
        if done {
            return Ok((trace, Outcome::Reached { delay: state.t }));
        }
    }
    Ok((trace, Outcome::Timeout))
}

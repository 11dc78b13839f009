//! Device-level simulation of cellular neural networks built from
//! magnetoelectric spin-orbit neurons.
//!
//! A neuron stores its state in the y projection of a single-domain magnet.
//! The magnet is written by the exchange field of an adjacent BFO capacitor
//! and read through an inverse Rashba-Edelstein stack whose output gates
//! CMOS repeater synapses. The synapses charge the capacitors of the
//! neighboring neurons, closing the loop.
//!
//! Modules, bottom up: [`params`], [`magnet`], [`ferroelectric`],
//! [`circuit`], [`integrator`], [`network`], [`experiments`].

pub mod circuit;
pub mod experiments;
pub mod ferroelectric;
pub mod image;
pub mod integrator;
pub mod magnet;
pub mod network;
pub mod params;

pub use image::Image;
pub use magnet::Vec3;
pub use network::{build_grid, error_metric, init_state, run_until, Network, NetworkState, Simulator, Trace};
pub use params::{derive_quantities, load_params, DerivedReport, ParamSet};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Params(#[from] params::ParamError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid workload: {0}")]
    Workload(String),
}

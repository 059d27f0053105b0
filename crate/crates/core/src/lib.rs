//! Geometry of the input-space spline partition of small piecewise-linear
//! networks.
//!
//! [`netcore`] holds dense networks, their gradients and the weight file
//! format. [`lcprobe`] counts neuron hyperplanes cutting cross-polytope
//! neighbourhoods (local complexity). [`slicegeom`] computes the exact linear
//! regions of a 2D slice. [`adversarial`] has L∞ PGD, and [`learn`] has data,
//! Adam and the checkpointed training loop. [`validate`] is the built-in
//! validation battery.

pub mod adversarial;
pub mod error;
pub mod learn;
pub mod lcprobe;
pub mod netcore;
pub mod seed;
pub mod slicegeom;
pub mod validate;

pub use error::{Error, Result};
pub use lcprobe::{LcAggregate, LcReport, Neighborhood, ProbeConfig};
pub use netcore::{Activation, BnParams, ForwardTrace, Layer, Network};
pub use slicegeom::{Region, Slice, SlicePartition};

/// Tool name and version embedded in emitted artifacts.
pub const TOOL: &str = concat!("splinelc ", env!("CARGO_PKG_VERSION"));

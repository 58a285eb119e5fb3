//! Coverage and rate analysis for millimetre-wave cellular downlinks with
//! hybrid beamforming: a closed-form engine and a Monte-Carlo engine that
//! share one parameter set.

pub mod analytic;
pub mod beamform;
pub mod channel;
pub mod cli;
pub mod compare;
pub mod error;
pub mod netgeom;
pub mod numerics;
pub mod params;
pub mod simkernel;

pub use error::{Error, Result};
pub use params::{LinkKind, NetworkParams};

//! Semi-synthetic 5G sensing dataset generation.
//!
//! The crate is organised the way a dataset flows through the platform:
//!
//! - [`waveform`]: resource grid dimensions and the known reference grid.
//! - [`channel`]: tapped-delay-line emulator with sum-of-sinusoids fading.
//! - [`estimation`]: channel reconstruction from captured grids into taps.
//! - [`scenario`]: experiment description, validation and UE mobility.
//! - [`runner`]: end-to-end run loop, KPIs and the on-disk dataset format.
//! - [`validation`]: two-sample ensemble statistics and a linear classifier.
//! - [`api`]: HTTP orchestration service with a persistent run registry.

pub mod channel;
pub mod error;
pub mod estimation;
pub mod iq;
pub mod runner;
pub mod scenario;
pub mod validation;
pub mod waveform;

#[cfg(feature = "server")]
pub mod api;

pub use error::{Error, Result};
pub use iq::{GridDims, IqTensor};

/// Version stamped into manifests, stats documents and API responses.
pub const FORMAT_VERSION: u32 = 1;

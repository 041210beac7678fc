//! Simulation, pilot-based channel estimation, and configuration search for
//! an OFDM link aided by a binary-controlled reflecting surface.
//!
//! The link model is a `M`-tap FIR channel that is affine in the surface
//! state vector `θ ∈ {-1,+1}^N`. The crate provides:
//!
//! * [`transform`] / [`channel`]: the DFT/Walsh-Hadamard kernels and the
//!   cyclic-prefix block model they make exact;
//! * [`simulator`]: synthetic scenarios with known ground truth and the
//!   Hadamard-coded pilot phase that produces measurement datasets;
//! * [`estimator`]: recovery of the per-element channels from pilot
//!   measurements, with delay-subspace denoising;
//! * [`optimizer`]: selection of `θ` maximizing the achievable rate
//!   predicted from an estimate;
//! * [`evaluator`]: ground-truth scoring of chosen configurations;
//! * [`dataset`]: the binary container format the pipeline stages exchange.
//!
//! Numeric kernels are generic over the [`scalar::Scalar`] type; the rest of
//! the pipeline, and the aliases below, fix `f64`.

pub mod channel;
pub mod dataset;
pub mod error;
pub mod estimator;
pub mod evaluator;
pub mod optimizer;
pub mod rate;
pub mod scalar;
pub mod seed;
pub mod simulator;
pub mod transform;
pub mod types;

pub use error::{Error, Result};
pub use types::{IrsConfiguration, Matrix, SystemDims};

/// Working complex type of the pipeline.
pub type C64 = num_complex::Complex<f64>;

/// `f64` instantiations of the scalar-generic domain types.
pub type TimeSignal = types::TimeSignal<f64>;
pub type FrequencySignal = types::FrequencySignal<f64>;
pub type ChannelImpulseResponse = types::ChannelImpulseResponse<f64>;
pub type ChannelFrequencyResponse = types::ChannelFrequencyResponse<f64>;
pub type AffineChannelModel = types::AffineChannelModel<f64>;
pub type DelayBasis = transform::DelayBasis<f64>;

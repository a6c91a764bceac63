//! Fast photoacoustic tomography with approximate k-space operators.
//!
//! The crate is organised around a planar (or, in 2D, line) detector at the
//! `z = 0` face of a regular grid:
//!
//! * [`grid`], [`field`], [`mask`], [`noise`], [`metrics`]: shared model types,
//!   detector sub-sampling and image quality metrics.
//! * [`kspace`]: the fast approximate forward model, the inverse k-space
//!   backprojection, the exact discrete adjoint and the data-fidelity gradient.
//! * [`reference`]: an exact spectral propagator used as an accuracy oracle.
//! * [`recon`]: TV-regularised reconstruction and the learned iterative
//!   reconstruction driver with its file-exchange boundary.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below name the double precision instantiations used by the CLI.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod kspace;
pub mod mask;
pub mod metrics;
pub mod noise;
pub mod npy;
pub mod phantom;
pub mod recon;
pub mod reference;
pub mod validate;

mod real;

pub use error::{Error, Result};
pub use field::{PressureImage, SensorData};
pub use grid::{fft_wavenumbers, Grid};
pub use kspace::{
    adjoint_project, backproject, forward_project, gradient, GradientMode, Interpolation,
    KSpaceOperator, SpectralWeights,
};
pub use mask::{apply_mask, generate_beam_mask, MaskMeta, SamplingMask};
pub use metrics::psnr;
pub use noise::add_noise;
pub use real::Real;
pub use reference::{measure, simulate, SimulationRecord};

pub type PressureImage64 = PressureImage<f64>;
pub type PressureImage32 = PressureImage<f32>;
pub type SensorData64 = SensorData<f64>;
pub type SensorData32 = SensorData<f32>;
pub type SpectralWeights64 = SpectralWeights<f64>;
pub type SpectralWeights32 = SpectralWeights<f32>;
pub type KSpaceOperator64 = KSpaceOperator<f64>;
pub type KSpaceOperator32 = KSpaceOperator<f32>;
pub type SimulationRecord64 = SimulationRecord<f64>;

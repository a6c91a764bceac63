//! Fast approximate k-space forward model for planar detectors, its exact
//! adjoint, the inverse k-space backprojection and the fidelity gradient.

pub mod cache;
mod dispersion;
pub mod filter;
mod operator;
mod weights;

pub use dispersion::{build_dispersion_map, build_inverse_map, DispersionMap, Stencils, ABSENT};
pub use filter::{angle_filter, out_of_window_energy};
pub use operator::{
    adjoint_project, backproject, forward_project, gradient, Backprojector, GradientMode,
    KSpaceOperator,
};
pub use weights::{in_cone, Interpolation, SpectralAxes, SpectralWeights, DEFAULT_OVERSAMPLE};

#[cfg(test)]
mod tests;

use std::f64::consts::FRAC_PI_2;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fft_wavenumbers, next_fast_len, Grid};
use crate::real::Real;

/// Default refinement of the internal frequency and depth-wavenumber grids
/// relative to the recorded time window.
pub const DEFAULT_OVERSAMPLE: usize = 4;

/// Resampling rule between the frequency axis and the depth-wavenumber axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    #[default]
    Linear,
    Nearest,
}

/// Internal spectral sampling derived from a grid and an oversampling factor.
///
/// Time is extended to `n_omega` samples (`>= n_t`); its even extension has
/// period `2 (n_omega - 1) dt`, so the cosine-transform frequencies are
/// `omega_l = pi l / ((n_omega - 1) dt)`, `l = 0..n_omega`. The depth axis uses
/// the same count of non-negative wavenumbers up to the spatial Nyquist limit,
/// `kz_m = pi m / ((n_omega - 1) dx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralAxes {
    pub n_omega: usize,
    pub d_omega: f64,
    pub d_kz: f64,
}

impl SpectralAxes {
    pub fn new(grid: &Grid, oversample: usize) -> Result<Self> {
        if oversample == 0 {
            return Err(Error::invalid("oversample must be at least 1"));
        }
        let n_omega = next_fast_len(oversample * (grid.n_t - 1)) + 1;
        Ok(Self {
            n_omega,
            d_omega: std::f64::consts::PI / ((n_omega - 1) as f64 * grid.dt),
            d_kz: std::f64::consts::PI / ((n_omega - 1) as f64 * grid.dx),
        })
    }

    /// Length of the periodic depth transform.
    pub fn z_period(&self) -> usize {
        2 * (self.n_omega - 1)
    }

    /// Number of stored depth wavenumbers (`0..=pi/dx`).
    pub fn n_kz(&self) -> usize {
        self.n_omega
    }

    /// Non-negative angular frequencies, the half spectrum of the even time
    /// extension.
    pub fn omegas(&self, dt: f64) -> Vec<f64> {
        let full = fft_wavenumbers(self.z_period(), dt).expect("valid axis");
        full[..self.n_omega].iter().map(|w| w.abs()).collect()
    }
}

/// Detector wavenumbers `kx^2 + ky^2` for every `(x, y)` bin.
pub(crate) fn transverse_k2(grid: &Grid) -> ndarray::Array2<f64> {
    let kx = fft_wavenumbers(grid.n_x, grid.dx).expect("valid grid");
    let ky = fft_wavenumbers(grid.n_y, grid.dx).expect("valid grid");
    ndarray::Array2::from_shape_fn((grid.n_x, grid.n_y), |(i, j)| kx[i] * kx[i] + ky[j] * ky[j])
}

/// Whether a `(k_perp^2, omega)` node lies inside the detection cone.
///
/// Normal incidence (`k_perp = 0`) is always kept. At `theta_max = pi/2` the
/// grazing shell is excluded so that the weight stays finite.
pub fn in_cone(k2: f64, omega: f64, c: f64, theta_max: f64) -> bool {
    if k2 == 0.0 {
        return true;
    }
    let w2 = (omega / c).powi(2);
    let s = theta_max.sin();
    if theta_max >= FRAC_PI_2 {
        k2 < w2
    } else {
        k2 <= w2 * s * s
    }
}

/// The weighting factor `B(kx, ky, omega) = omega / sqrt((omega/c)^2 - kx^2 - ky^2)`
/// on the `(kx, ky, omega)` grid, zero outside the detection cone.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralWeights<T> {
    grid: Grid,
    theta_max: f64,
    oversample: usize,
    interpolation: Interpolation,
    axes: SpectralAxes,
    b: Array3<T>,
    support: Array3<bool>,
}

impl<T: Real> SpectralWeights<T> {
    /// Weights with the default oversampling and linear interpolation.
    pub fn build(grid: &Grid, theta_max: f64) -> Result<Self> {
        Self::build_with(grid, theta_max, DEFAULT_OVERSAMPLE, Interpolation::Linear)
    }

    pub fn build_with(
        grid: &Grid,
        theta_max: f64,
        oversample: usize,
        interpolation: Interpolation,
    ) -> Result<Self> {
        grid.validate()?;
        if !(theta_max > 0.0 && theta_max <= FRAC_PI_2) {
            return Err(Error::invalid(format!(
                "theta_max must lie in (0, pi/2], got {theta_max}"
            )));
        }
        let axes = SpectralAxes::new(grid, oversample)?;
        let omegas = axes.omegas(grid.dt);
        let k2 = transverse_k2(grid);
        let c = grid.c;
        let shape = (grid.n_x, grid.n_y, axes.n_omega);
        let support = Array3::from_shape_fn(shape, |(i, j, l)| {
            in_cone(k2[[i, j]], omegas[l], c, theta_max)
        });
        let b = Array3::from_shape_fn(shape, |(i, j, l)| {
            if !support[[i, j, l]] {
                return T::zero();
            }
            let k2 = k2[[i, j]];
            if k2 == 0.0 {
                return T::of(c);
            }
            let w = omegas[l];
            T::of(w / ((w / c).powi(2) - k2).sqrt())
        });
        Ok(Self {
            grid: *grid,
            theta_max,
            oversample,
            interpolation,
            axes,
            b,
            support,
        })
    }

    pub(crate) fn from_parts(
        grid: Grid,
        theta_max: f64,
        oversample: usize,
        interpolation: Interpolation,
        b: Array3<T>,
        support: Array3<bool>,
    ) -> Result<Self> {
        let axes = SpectralAxes::new(&grid, oversample)?;
        let shape = [grid.n_x, grid.n_y, axes.n_omega];
        if b.shape() != shape {
            return Err(Error::shape(&shape, b.shape()));
        }
        if support.shape() != shape {
            return Err(Error::shape(&shape, support.shape()));
        }
        Ok(Self {
            grid,
            theta_max,
            oversample,
            interpolation,
            axes,
            b,
            support,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    pub fn oversample(&self) -> usize {
        self.oversample
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn axes(&self) -> &SpectralAxes {
        &self.axes
    }

    pub fn b(&self) -> &Array3<T> {
        &self.b
    }

    pub fn support_mask(&self) -> &Array3<bool> {
        &self.support
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.axes.omegas(self.grid.dt)
    }

    /// Fraction of `(kx, ky, omega)` nodes inside the detection cone.
    pub fn kept_fraction(&self) -> f64 {
        self.support.iter().filter(|&&s| s).count() as f64 / self.support.len() as f64
    }

    /// Copy with every weight set to zero (an operator that annihilates all data).
    pub fn zeroed(&self) -> Self {
        let mut w = self.clone();
        w.b.fill(T::zero());
        w
    }
}

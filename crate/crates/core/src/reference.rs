//! Exact spectral solution of the homogeneous wave equation, used as the
//! accuracy oracle for the approximate k-space model.
//!
//! With `p(x, 0) = f` and `dp/dt(x, 0) = 0`, the periodic-domain solution is
//! `p_hat(k, t) = f_hat(k) cos(c |k| t)`. Each spatial axis is zero-padded so
//! that periodic images of the source cannot reach the detector within the
//! recorded window.

use std::f64::consts::PI;

use ndarray::{s, Array3, Axis, Zip};
use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftDirection;

use crate::error::{Error, Result};
use crate::fft::VolumeFft;
use crate::field::{PressureImage, SensorData};
use crate::grid::{fft_wavenumbers, next_fast_len, Grid};
use crate::mask::{apply_mask, SamplingMask};
use crate::real::Real;

/// Detector-plane pressure for every time sample, as computed by [`simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRecord<T> {
    pub grid: Grid,
    pub full_data: SensorData<T>,
    /// Courant number `c dt / dx`.
    pub cfl: f64,
    /// Padded periodic domain used for the computation.
    pub padded_dims: [usize; 3],
}

/// Padding needed per axis so that no periodic image reaches the detector
/// before `t_end`: the period must exceed the image extent plus `c T`.
pub fn required_padding(grid: &Grid) -> [usize; 3] {
    let reach = (grid.c * grid.t_end() / grid.dx).ceil() as usize + 1;
    [reach, if grid.is_2d() { 0 } else { reach }, reach]
}

#[derive(Debug, Clone, Copy)]
pub struct SimulateOptions {
    /// Explicit per-axis padding; `None` uses [`required_padding`].
    pub padding: Option<[usize; 3]>,
    /// Upper bound on padded voxels.
    pub max_voxels: usize,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            padding: None,
            max_voxels: 1 << 27,
        }
    }
}

pub fn simulate<T: Real>(f: &PressureImage<T>) -> Result<SimulationRecord<T>> {
    simulate_with(f, SimulateOptions::default())
}

pub fn simulate_with<T: Real>(
    f: &PressureImage<T>,
    opts: SimulateOptions,
) -> Result<SimulationRecord<T>> {
    let grid = *f.grid();
    grid.validate()?;
    let need = required_padding(&grid);
    let pad = opts.padding.unwrap_or(need);
    if pad.iter().zip(need).any(|(&p, n)| p < n) {
        return Err(Error::invalid(format!(
            "time window of {:.3e} s wraps around the padded domain: padding {pad:?} < required {need:?}",
            grid.t_end()
        )));
    }
    let [n_x, n_y, n_z] = grid.image_shape();
    let dims = [
        next_fast_len(n_x + pad[0]),
        if grid.is_2d() {
            1
        } else {
            next_fast_len(n_y + pad[1])
        },
        next_fast_len(n_z + pad[2]),
    ];
    let voxels: usize = dims.iter().product();
    if voxels > opts.max_voxels {
        return Err(Error::invalid(format!(
            "padded domain {dims:?} ({voxels} voxels) exceeds the limit of {}; required padding {need:?}",
            opts.max_voxels
        )));
    }

    let mut spec = Array3::<Complex<T>>::zeros(dims);
    spec.slice_mut(s![..n_x, ..n_y, ..n_z])
        .zip_mut_with(f.values(), |d, &v| *d = Complex::new(v, T::zero()));
    VolumeFft::new(dims, FftDirection::Forward).process(&mut spec);
    let omega = angular_frequencies::<T>(dims, grid.dx, grid.c);

    let inverse = VolumeFft::<T>::new(dims, FftDirection::Inverse);
    let inv_n = T::one() / T::of(voxels as f64);
    let frames: Vec<Array3<T>> = (0..grid.n_t)
        .into_par_iter()
        .map(|n| {
            let t = T::of(n as f64 * grid.dt);
            let mut p = Zip::from(&spec)
                .and(&omega)
                .map_collect(|&fh, &w| fh * (w * t).cos());
            inverse.process(&mut p);
            p.slice(s![..n_x, ..n_y, 0..1]).mapv(|v| v.re * inv_n)
        })
        .collect();

    let mut data = Array3::<T>::zeros((n_x, n_y, grid.n_t));
    for (n, frame) in frames.iter().enumerate() {
        data.index_axis_mut(Axis(2), n)
            .assign(&frame.index_axis(Axis(2), 0));
    }
    Ok(SimulationRecord {
        grid,
        full_data: SensorData::new(grid, data)?,
        cfl: grid.cfl(),
        padded_dims: dims,
    })
}

/// `c |k|` on an FFT grid of the given dimensions.
fn angular_frequencies<T: Real>(dims: [usize; 3], dx: f64, c: f64) -> Array3<T> {
    let k: Vec<Vec<f64>> = dims
        .iter()
        .map(|&n| fft_wavenumbers(n, dx).expect("valid dims"))
        .collect();
    Array3::from_shape_fn(dims, |(i, j, l)| {
        T::of(c * (k[0][i].powi(2) + k[1][j].powi(2) + k[2][l].powi(2)).sqrt())
    })
}

/// Applies the detector sub-sampling to a simulated record.
pub fn measure<T: Real>(rec: &SimulationRecord<T>, mask: &SamplingMask) -> Result<SensorData<T>> {
    apply_mask(&rec.full_data, mask)
}

/// Step-wise spectral propagator on the unpadded periodic domain, carrying the
/// quadrature pair `(p_hat, dp_hat/dt / (c |k|))` whose joint norm is conserved.
#[derive(Debug, Clone)]
pub struct SpectralPropagator<T: Real> {
    grid: Grid,
    omega: Array3<T>,
    p: Array3<Complex<T>>,
    q: Array3<Complex<T>>,
    time: f64,
}

impl<T: Real> SpectralPropagator<T> {
    pub fn new(f: &PressureImage<T>) -> Self {
        let grid = *f.grid();
        let dims = grid.image_shape();
        let mut p = f.values().mapv(|v| Complex::new(v, T::zero()));
        VolumeFft::new(dims, FftDirection::Forward).process(&mut p);
        Self {
            grid,
            omega: angular_frequencies(dims, grid.dx, grid.c),
            q: Array3::zeros(dims),
            p,
            time: 0.0,
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Rotates every mode by `c |k| tau`; negative `tau` runs backwards.
    pub fn advance(&mut self, tau: f64) {
        let tau_t = T::of(tau);
        Zip::from(&mut self.p)
            .and(&mut self.q)
            .and(&self.omega)
            .for_each(|p, q, &w| {
                let (s, c) = (w * tau_t).sin_cos();
                let (p0, q0) = (*p, *q);
                *p = p0 * c + q0 * s;
                *q = q0 * c - p0 * s;
            });
        self.time += tau;
    }

    /// `||p_hat||^2 + ||q_hat||^2`, constant under [`SpectralPropagator::advance`].
    pub fn energy(&self) -> f64 {
        let sq = |a: &Array3<Complex<T>>| a.iter().map(|v| v.norm_sqr().as_f64()).sum::<f64>();
        sq(&self.p) + sq(&self.q)
    }

    pub fn pressure(&self) -> PressureImage<T> {
        let dims = self.grid.image_shape();
        let mut p = self.p.clone();
        VolumeFft::new(dims, FftDirection::Inverse).process(&mut p);
        let inv_n = T::one() / T::of(p.len() as f64);
        PressureImage::from_parts(self.grid, p.mapv(|v| v.re * inv_n))
    }
}

/// Largest frequency represented on the grid, `c pi sqrt(d) / dx`.
pub fn max_frequency(grid: &Grid) -> f64 {
    let d = if grid.is_2d() { 2.0 } else { 3.0 };
    grid.c * PI * f64::sqrt(d) / grid.dx
}

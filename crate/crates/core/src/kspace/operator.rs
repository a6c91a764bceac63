use std::f64::consts::PI;
use std::str::FromStr;

use ndarray::{Array3, Axis, Zip};
use num_complex::Complex;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use super::dispersion::{build_dispersion_map, build_inverse_map, DispersionMap, Stencils};
use super::weights::{Interpolation, SpectralAxes, SpectralWeights, DEFAULT_OVERSAMPLE};
use crate::error::{Error, Result};
use crate::fft::{CosineSum, Dct1, DetectorFft};
use crate::field::{PressureImage, SensorData};
use crate::grid::Grid;
use crate::mask::{apply_mask, SamplingMask};
use crate::real::Real;

fn check_shape(want: [usize; 3], got: [usize; 3]) -> Result<()> {
    if want != got {
        return Err(Error::shape(&want, &got));
    }
    Ok(())
}

fn to_complex<T: Real>(a: &Array3<T>) -> Array3<Complex<T>> {
    a.mapv(|v| Complex::new(v, T::zero()))
}

#[inline]
fn sample<T: Real>(src: &[Complex<T>], idx: u32, frac: T) -> Complex<T> {
    let i = idx as usize;
    if frac.is_zero() {
        src[i]
    } else {
        src[i] * (T::one() - frac) + src[i + 1] * frac
    }
}

#[inline]
fn scatter<T: Real>(dst: &mut [Complex<T>], idx: u32, frac: T, v: Complex<T>) {
    let i = idx as usize;
    if frac.is_zero() {
        dst[i] += v;
    } else {
        dst[i] += v * (T::one() - frac);
        dst[i + 1] += v * frac;
    }
}

/// Inverse k-space mapping from detector data to an initial-pressure estimate.
///
/// Data are transformed over the detector axes and cosine-transformed in time,
/// multiplied by `c^2 kz / omega`, resampled from `omega` onto the depth
/// wavenumber axis and synthesised back to depth. No angular threshold is
/// involved; the result carries the limited-view artefacts of a single planar
/// aperture. The detector plane itself is returned as zero.
#[derive(Debug, Clone)]
pub struct Backprojector<T: Real> {
    grid: Grid,
    axes: SpectralAxes,
    fft: DetectorFft<T>,
    dct: Dct1<T>,
    z_kernel: CosineSum<T>,
    map: Stencils<T>,
    factor: Array3<T>,
}

impl<T: Real> Backprojector<T> {
    pub fn new(grid: &Grid, oversample: usize, scheme: Interpolation) -> Result<Self> {
        grid.validate()?;
        let axes = SpectralAxes::new(grid, oversample)?;
        let map = build_inverse_map::<T>(grid, &axes, scheme);
        let k2 = super::weights::transverse_k2(grid);
        let c = grid.c;
        let n_kz = axes.n_kz();
        let constant = 4.0 * c * c * grid.dt * axes.d_kz / PI;
        let factor = Array3::from_shape_fn((grid.n_x, grid.n_y, n_kz), |(i, j, m)| {
            if map.idx[[i, j, m]] == super::dispersion::ABSENT {
                return T::zero();
            }
            let kz = m as f64 * axes.d_kz;
            let omega = c * (kz * kz + k2[[i, j]]).sqrt();
            let jacobian = if omega == 0.0 { 1.0 / c } else { kz / omega };
            let endpoint = if m == 0 || m == n_kz - 1 { 0.5 } else { 1.0 };
            T::of(constant * endpoint * jacobian)
        });
        Ok(Self {
            grid: *grid,
            axes,
            fft: DetectorFft::new(grid.n_x, grid.n_y),
            dct: Dct1::new(axes.n_omega),
            z_kernel: CosineSum::new(axes.z_period()),
            map,
            factor,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn apply(&self, g: &SensorData<T>) -> Result<PressureImage<T>> {
        check_shape(self.grid.data_shape(), g.shape())?;
        let (n_x, n_y, n_z) = (self.grid.n_x, self.grid.n_y, self.grid.n_z);
        let n_omega = self.axes.n_omega;
        let n_kz = self.axes.n_kz();

        let mut spec = to_complex(g.values());
        self.fft.process(&mut spec, FftDirection::Forward);

        let mut depth = Array3::<Complex<T>>::zeros((n_x, n_y, n_z));
        Zip::indexed(depth.lanes_mut(Axis(2)))
            .and(spec.lanes(Axis(2)))
            .par_for_each(|(i, j), mut out, col| {
                let col = col.to_vec();
                let mut dct_s = self.dct.scratch();
                let mut h = vec![Complex::default(); n_omega];
                self.dct.apply(&col, &mut h, &mut dct_s);
                let mut fz = vec![Complex::default(); n_kz];
                for (m, v) in fz.iter_mut().enumerate() {
                    let idx = self.map.idx[[i, j, m]];
                    if idx != super::dispersion::ABSENT {
                        *v = sample(&h, idx, self.map.frac[[i, j, m]]) * self.factor[[i, j, m]];
                    }
                }
                let mut z = vec![Complex::default(); n_z];
                self.z_kernel
                    .apply(&fz, &mut z, &mut self.z_kernel.scratch());
                for (d, s) in out.iter_mut().zip(z) {
                    *d = s;
                }
            });

        self.fft.process(&mut depth, FftDirection::Inverse);
        let inv_n = T::one() / T::of((n_x * n_y) as f64);
        let mut values = depth.mapv(|v| v.re * inv_n);
        values.index_axis_mut(Axis(2), 0).fill(T::zero());
        Ok(PressureImage::from_parts(self.grid, values))
    }
}

/// Which operator maps the data residual back to image space in [`gradient`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    /// Inverse k-space backprojection of the residual (approximate gradient).
    #[default]
    Backprojection,
    /// Exact discrete adjoint of the forward operator (true gradient).
    ExactAdjoint,
}

impl FromStr for GradientMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "backprojection" | "bp" => Ok(Self::Backprojection),
            "exact-adjoint" | "adjoint" => Ok(Self::ExactAdjoint),
            other => Err(Error::invalid(format!("unknown gradient mode '{other}'"))),
        }
    }
}

/// Fast approximate forward model with its exact adjoint and the matching
/// backprojection, sharing FFT plans and precomputed stencils.
///
/// The forward map takes an image to detector data by: a cosine transform in
/// depth (the image is even-extended about the detector plane), a 2D FFT over
/// the detector axes, resampling onto `(kx, ky, omega)` through the dispersion
/// relation, multiplication by `B / c^2`, a type-I cosine transform from
/// `omega` to `t`, and an inverse detector FFT. Detector-plane voxels are
/// treated as zero.
#[derive(Debug, Clone)]
pub struct KSpaceOperator<T: Real> {
    weights: SpectralWeights<T>,
    map: DispersionMap<T>,
    scale: Array3<T>,
    fft: DetectorFft<T>,
    dct: Dct1<T>,
    z_kernel: CosineSum<T>,
    back: Backprojector<T>,
}

impl<T: Real> KSpaceOperator<T> {
    pub fn new(weights: SpectralWeights<T>) -> Result<Self> {
        let grid = *weights.grid();
        let axes = *weights.axes();
        let map = build_dispersion_map(&weights);
        let kappa = grid.dx * axes.d_omega / (PI * grid.c * grid.c);
        let scale = Zip::from(weights.b())
            .and(&map.idx)
            .map_collect(|&b, &idx| {
                if idx == super::dispersion::ABSENT {
                    T::zero()
                } else {
                    b * T::of(kappa)
                }
            });
        let back = Backprojector::new(&grid, weights.oversample(), weights.interpolation())?;
        Ok(Self {
            map,
            scale,
            fft: DetectorFft::new(grid.n_x, grid.n_y),
            dct: Dct1::new(axes.n_omega),
            z_kernel: CosineSum::new(axes.z_period()),
            back,
            weights,
        })
    }

    /// Builds weights with the default oversampling and linear interpolation.
    pub fn for_grid(grid: &Grid, theta_max: f64) -> Result<Self> {
        Self::new(SpectralWeights::build(grid, theta_max)?)
    }

    pub fn grid(&self) -> &Grid {
        self.weights.grid()
    }

    pub fn weights(&self) -> &SpectralWeights<T> {
        &self.weights
    }

    pub fn dispersion_map(&self) -> &DispersionMap<T> {
        &self.map
    }

    pub fn backprojector(&self) -> &Backprojector<T> {
        &self.back
    }

    pub fn forward(&self, f: &PressureImage<T>) -> Result<SensorData<T>> {
        let grid = *self.grid();
        check_shape(grid.image_shape(), f.shape())?;
        let (n_x, n_y, n_t) = (grid.n_x, grid.n_y, grid.n_t);
        let axes = self.weights.axes();
        let (n_omega, n_kz) = (axes.n_omega, axes.n_kz());

        let mut spec = Array3::<Complex<T>>::zeros((n_x, n_y, n_kz));
        Zip::from(spec.lanes_mut(Axis(2)))
            .and(f.values().lanes(Axis(2)))
            .par_for_each(|mut out, col| {
                let input: Vec<Complex<T>> = col
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        if j == 0 {
                            Complex::default()
                        } else {
                            Complex::new(v, T::zero())
                        }
                    })
                    .collect();
                let mut z = vec![Complex::default(); n_kz];
                self.z_kernel
                    .apply(&input, &mut z, &mut self.z_kernel.scratch());
                for (d, s) in out.iter_mut().zip(z) {
                    *d = s;
                }
            });
        self.fft.process(&mut spec, FftDirection::Forward);

        let mut data = Array3::<Complex<T>>::zeros((n_x, n_y, n_t));
        Zip::indexed(data.lanes_mut(Axis(2)))
            .and(spec.lanes(Axis(2)))
            .par_for_each(|(i, j), mut out, col| {
                let col = col.to_vec();
                let mut h = vec![Complex::default(); n_omega];
                for (l, v) in h.iter_mut().enumerate() {
                    let idx = self.map.idx[[i, j, l]];
                    if idx != super::dispersion::ABSENT {
                        *v = sample(&col, idx, self.map.frac[[i, j, l]]) * self.scale[[i, j, l]];
                    }
                }
                let mut p = vec![Complex::default(); n_t];
                self.dct.apply(&h, &mut p, &mut self.dct.scratch());
                for (d, s) in out.iter_mut().zip(p) {
                    *d = s;
                }
            });
        self.fft.process(&mut data, FftDirection::Inverse);
        let inv_n = T::one() / T::of((n_x * n_y) as f64);
        Ok(SensorData::from_parts(grid, data.mapv(|v| v.re * inv_n)))
    }

    /// Exact transpose of [`KSpaceOperator::forward`], stage by stage.
    pub fn adjoint(&self, g: &SensorData<T>) -> Result<PressureImage<T>> {
        let grid = *self.grid();
        check_shape(grid.data_shape(), g.shape())?;
        let (n_x, n_y, n_z) = (grid.n_x, grid.n_y, grid.n_z);
        let axes = self.weights.axes();
        let (n_omega, n_kz) = (axes.n_omega, axes.n_kz());
        let inv_n = T::one() / T::of((n_x * n_y) as f64);

        // transpose of the normalised inverse detector FFT
        let mut data = g.values().mapv(|v| Complex::new(v * inv_n, T::zero()));
        self.fft.process(&mut data, FftDirection::Forward);

        let mut spec = Array3::<Complex<T>>::zeros((n_x, n_y, n_kz));
        Zip::indexed(spec.lanes_mut(Axis(2)))
            .and(data.lanes(Axis(2)))
            .par_for_each(|(i, j), mut out, col| {
                let col = col.to_vec();
                let mut h = vec![Complex::default(); n_omega];
                self.dct
                    .apply_transpose(&col, &mut h, &mut self.dct.scratch());
                let mut z = vec![Complex::default(); n_kz];
                for (l, &v) in h.iter().enumerate() {
                    let idx = self.map.idx[[i, j, l]];
                    if idx != super::dispersion::ABSENT {
                        scatter(
                            &mut z,
                            idx,
                            self.map.frac[[i, j, l]],
                            v * self.scale[[i, j, l]],
                        );
                    }
                }
                for (d, s) in out.iter_mut().zip(z) {
                    *d = s;
                }
            });
        // transpose of the unnormalised forward FFT
        self.fft.process(&mut spec, FftDirection::Inverse);

        let mut image = Array3::<T>::zeros((n_x, n_y, n_z));
        Zip::from(image.lanes_mut(Axis(2)))
            .and(spec.lanes(Axis(2)))
            .par_for_each(|mut out, col| {
                let input: Vec<Complex<T>> =
                    col.iter().map(|v| Complex::new(v.re, T::zero())).collect();
                let mut z = vec![Complex::default(); n_z];
                self.z_kernel
                    .apply(&input, &mut z, &mut self.z_kernel.scratch());
                for (d, s) in out.iter_mut().zip(z) {
                    *d = s.re;
                }
            });
        image.index_axis_mut(Axis(2), 0).fill(T::zero());
        Ok(PressureImage::from_parts(grid, image))
    }

    pub fn backproject(&self, g: &SensorData<T>) -> Result<PressureImage<T>> {
        self.back.apply(g)
    }

    /// Data residual `M A f - g`.
    pub fn residual(
        &self,
        f: &PressureImage<T>,
        g: &SensorData<T>,
        mask: &SamplingMask,
    ) -> Result<SensorData<T>> {
        let af = self.forward(f)?;
        check_shape(af.shape(), g.shape())?;
        let r = apply_mask(&af, mask)?;
        Ok(SensorData::from_parts(
            *self.grid(),
            &r.into_values() - g.values(),
        ))
    }

    /// Gradient of `1/2 ||M A f - g||^2`, exact or with the backprojection in
    /// place of the adjoint.
    pub fn gradient(
        &self,
        f: &PressureImage<T>,
        g: &SensorData<T>,
        mask: &SamplingMask,
        mode: GradientMode,
    ) -> Result<PressureImage<T>> {
        let r = self.residual(f, g, mask)?;
        match mode {
            GradientMode::Backprojection => self.backproject(&r),
            GradientMode::ExactAdjoint => self.adjoint(&r),
        }
    }
}

/// One-shot forward projection; prefer [`KSpaceOperator`] for repeated use.
pub fn forward_project<T: Real>(
    f: &PressureImage<T>,
    w: &SpectralWeights<T>,
) -> Result<SensorData<T>> {
    KSpaceOperator::new(w.clone())?.forward(f)
}

pub fn adjoint_project<T: Real>(
    g: &SensorData<T>,
    w: &SpectralWeights<T>,
) -> Result<PressureImage<T>> {
    KSpaceOperator::new(w.clone())?.adjoint(g)
}

/// One-shot backprojection with the default oversampling and linear resampling.
pub fn backproject<T: Real>(g: &SensorData<T>, grid: &Grid) -> Result<PressureImage<T>> {
    Backprojector::new(grid, DEFAULT_OVERSAMPLE, Interpolation::Linear)?.apply(g)
}

pub fn gradient<T: Real>(
    f: &PressureImage<T>,
    g: &SensorData<T>,
    w: &SpectralWeights<T>,
    mask: &SamplingMask,
    mode: GradientMode,
) -> Result<PressureImage<T>> {
    KSpaceOperator::new(w.clone())?.gradient(f, g, mask, mode)
}

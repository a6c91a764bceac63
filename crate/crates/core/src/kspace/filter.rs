//! Data-space diagnostics: arrival-angle filtering and late-time energy.

use ndarray::{Array3, Axis, Zip};
use num_complex::Complex;
use rustfft::FftDirection;

use super::weights::{in_cone, transverse_k2, SpectralAxes};
use crate::error::{Error, Result};
use crate::fft::{Dct1, DetectorFft};
use crate::field::SensorData;
use crate::real::Real;

/// Keeps only the plane-wave components of `g` that arrive within
/// `theta_max` of normal incidence.
pub fn angle_filter<T: Real>(
    g: &SensorData<T>,
    theta_max: f64,
    oversample: usize,
) -> Result<SensorData<T>> {
    let grid = *g.grid();
    if !(theta_max > 0.0 && theta_max <= std::f64::consts::FRAC_PI_2) {
        return Err(Error::invalid(format!(
            "theta_max must lie in (0, pi/2], got {theta_max}"
        )));
    }
    let axes = SpectralAxes::new(&grid, oversample)?;
    let omegas = axes.omegas(grid.dt);
    let k2 = transverse_k2(&grid);
    let fft = DetectorFft::<T>::new(grid.n_x, grid.n_y);
    let dct = Dct1::<T>::new(axes.n_omega);
    let n_t = grid.n_t;
    let norm = T::of(2.0 / (axes.n_omega - 1) as f64 / (grid.n_x * grid.n_y) as f64);

    let mut spec: Array3<Complex<T>> = g.values().mapv(|v| Complex::new(v, T::zero()));
    fft.process(&mut spec, FftDirection::Forward);
    Zip::indexed(spec.lanes_mut(Axis(2))).par_for_each(|(i, j), mut col| {
        let input = col.to_vec();
        let mut s = dct.scratch();
        let mut h = vec![Complex::default(); axes.n_omega];
        dct.apply(&input, &mut h, &mut s);
        for (l, v) in h.iter_mut().enumerate() {
            if !in_cone(k2[[i, j]], omegas[l], grid.c, theta_max) {
                *v = Complex::default();
            }
        }
        let mut back = vec![Complex::default(); n_t];
        dct.apply(&h, &mut back, &mut s);
        for (d, s) in col.iter_mut().zip(back) {
            *d = s;
        }
    });
    fft.process(&mut spec, FftDirection::Inverse);
    Ok(SensorData::from_parts(grid, spec.mapv(|v| v.re * norm)))
}

/// Sum of squared samples recorded strictly after `t_cut` seconds.
pub fn out_of_window_energy<T: Real>(g: &SensorData<T>, t_cut: f64) -> f64 {
    let dt = g.grid().dt;
    g.values()
        .indexed_iter()
        .filter(|((_, _, n), _)| *n as f64 * dt > t_cut)
        .map(|(_, v)| v.as_f64() * v.as_f64())
        .sum()
}

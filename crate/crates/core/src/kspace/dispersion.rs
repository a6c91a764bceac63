use ndarray::Array3;

use super::weights::{transverse_k2, Interpolation, SpectralAxes, SpectralWeights};
use crate::grid::Grid;
use crate::real::Real;

/// Marks a node with no stencil (thresholded, or beyond the sampled band).
pub const ABSENT: u32 = u32::MAX;

/// Two-point resampling stencils along one spectral axis for every
/// `(x, y, target)` node: `value = (1 - frac) * src[idx] + frac * src[idx + 1]`.
///
/// Weights lie in `[0, 1]` and sum to one for every present entry. With
/// nearest-neighbour resampling `frac` is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencils<T> {
    pub(crate) idx: Array3<u32>,
    pub(crate) frac: Array3<T>,
}

impl<T: Real> Stencils<T> {
    pub fn index(&self) -> &Array3<u32> {
        &self.idx
    }

    pub fn frac(&self) -> &Array3<T> {
        &self.frac
    }

    pub fn is_present(&self, i: usize, j: usize, l: usize) -> bool {
        self.idx[[i, j, l]] != ABSENT
    }

    /// `(index, weight)` pairs of the stencil at a node.
    pub fn stencil(&self, i: usize, j: usize, l: usize) -> Option<[(usize, T); 2]> {
        let idx = self.idx[[i, j, l]];
        if idx == ABSENT {
            return None;
        }
        let a = self.frac[[i, j, l]];
        Some([(idx as usize, T::one() - a), (idx as usize + 1, a)])
    }
}

/// Locates `u` (in units of the source spacing) on a source axis of `len`
/// points. Returns `None` beyond the last sample (zero extrapolation).
fn locate(u: f64, len: usize, scheme: Interpolation) -> Option<(u32, f64)> {
    let last = (len - 1) as f64;
    // tolerate rounding at the band edge
    if !(u >= 0.0) || u > last * (1.0 + 1e-12) {
        return None;
    }
    let u = u.min(last);
    match scheme {
        Interpolation::Nearest => Some((u.round() as u32, 0.0)),
        Interpolation::Linear => {
            let i0 = (u.floor() as usize).min(len - 2);
            Some((i0 as u32, (u - i0 as f64).clamp(0.0, 1.0)))
        }
    }
}

/// Dispersion-relation map from the frequency grid onto the depth-wavenumber
/// axis: for each kept `(kx, ky, omega)` the stencil evaluates the image
/// spectrum at `kz = sqrt((omega/c)^2 - kx^2 - ky^2)`.
pub type DispersionMap<T> = Stencils<T>;

pub fn build_dispersion_map<T: Real>(w: &SpectralWeights<T>) -> DispersionMap<T> {
    let grid = w.grid();
    let axes = w.axes();
    let omegas = w.omegas();
    let k2 = transverse_k2(grid);
    let c = grid.c;
    let n_kz = axes.n_kz();
    let shape = (grid.n_x, grid.n_y, axes.n_omega);
    let mut idx = Array3::from_elem(shape, ABSENT);
    let mut frac = Array3::zeros(shape);
    for ((i, j, l), &keep) in w.support_mask().indexed_iter() {
        if !keep {
            continue;
        }
        let kz2 = ((omegas[l] / c).powi(2) - k2[[i, j]]).max(0.0);
        if let Some((i0, a)) = locate(kz2.sqrt() / axes.d_kz, n_kz, w.interpolation()) {
            idx[[i, j, l]] = i0;
            frac[[i, j, l]] = T::of(a);
        }
    }
    Stencils { idx, frac }
}

/// Inverse map used by backprojection: for each `(kx, ky, kz_m)` the stencil
/// evaluates the data spectrum at `omega = c sqrt(kz^2 + kx^2 + ky^2)`.
pub fn build_inverse_map<T: Real>(
    grid: &Grid,
    axes: &SpectralAxes,
    scheme: Interpolation,
) -> Stencils<T> {
    let k2 = transverse_k2(grid);
    let c = grid.c;
    let n_kz = axes.n_kz();
    let shape = (grid.n_x, grid.n_y, n_kz);
    let mut idx = Array3::from_elem(shape, ABSENT);
    let mut frac = Array3::zeros(shape);
    for i in 0..grid.n_x {
        for j in 0..grid.n_y {
            for m in 0..n_kz {
                let kz = m as f64 * axes.d_kz;
                let omega = c * (kz * kz + k2[[i, j]]).sqrt();
                if let Some((i0, a)) = locate(omega / axes.d_omega, axes.n_omega, scheme) {
                    idx[[i, j, m]] = i0;
                    frac[[i, j, m]] = T::of(a);
                }
            }
        }
    }
    Stencils { idx, frac }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn stencil_weights_are_convex() {
        let g = Grid::with_default_dt(16, 4, 12, 1e-4, 1500.0, 20).unwrap();
        for scheme in [Interpolation::Linear, Interpolation::Nearest] {
            let w = SpectralWeights::<f64>::build_with(&g, 1.2, 2, scheme).unwrap();
            let map = build_dispersion_map(&w);
            for ((i, j, l), &keep) in w.support_mask().indexed_iter() {
                if let Some([(i0, w0), (_, w1)]) = map.stencil(i, j, l) {
                    assert!(keep);
                    assert!((0.0..=1.0).contains(&w0) && (0.0..=1.0).contains(&w1));
                    assert!((w0 + w1 - 1.0).abs() < 1e-15);
                    assert!(i0 + 1 < w.axes().n_kz() || w1 == 0.0);
                    if scheme == Interpolation::Nearest {
                        assert_eq!(w1, 0.0);
                    }
                }
                if !keep {
                    assert!(!map.is_present(i, j, l));
                }
            }
        }
    }

    #[test]
    fn stencil_reproduces_dispersion_relation() {
        let g = Grid::square_2d(32, 40, 1e-4, 1500.0).unwrap();
        let w = SpectralWeights::<f64>::build_with(&g, PI / 3.0, 3, Interpolation::Linear).unwrap();
        let map = build_dispersion_map(&w);
        let om = w.omegas();
        let kx = crate::grid::fft_wavenumbers(32, g.dx).unwrap();
        let d_kz = w.axes().d_kz;
        for ((i, _, l), &keep) in w.support_mask().indexed_iter() {
            if let (true, Some([(i0, _), (_, a)])) = (keep, map.stencil(i, 0, l)) {
                let kz = ((om[l] / g.c).powi(2) - kx[i] * kx[i]).max(0.0).sqrt();
                let recon = (i0 as f64 + a) * d_kz;
                assert!((recon - kz).abs() < 1e-9 * d_kz.max(kz));
            }
        }
    }

    #[test]
    fn normal_incidence_lands_on_grid_nodes() {
        // with dt = dx / c the two spectral axes coincide at kx = ky = 0
        let g = Grid::square_2d(16, 30, 1e-4, 1500.0).unwrap();
        let w = SpectralWeights::<f64>::build(&g, PI / 4.0).unwrap();
        let map = build_dispersion_map(&w);
        for l in 0..w.axes().n_omega {
            let [(i0, w0), _] = map.stencil(0, 0, l).unwrap();
            assert!(i0 == l && (w0 - 1.0).abs() < 1e-9 || i0 + 1 == l && w0.abs() < 1e-9);
        }
    }
}

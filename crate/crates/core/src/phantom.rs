//! Synthetic initial-pressure phantoms.
//!
//! All generators return values in `[0, 1]` and leave a margin of empty voxels
//! next to the detector plane.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PressureImage;
use crate::grid::Grid;
use crate::real::Real;

/// Empty voxel layers kept next to the detector.
pub const DETECTOR_MARGIN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    Disks,
    Balls,
    VesselsSynthetic,
}

/// Smoothed indicator, 1 inside radius `r`, 0 outside, over about one voxel.
fn smooth_step(dist: f64, r: f64) -> f64 {
    0.5 * (1.0 - ((dist - r) / 0.6).tanh())
}

fn finish<T: Real>(grid: Grid, mut f: impl FnMut(f64, f64, f64) -> f64) -> PressureImage<T> {
    let values = ndarray::Array3::from_shape_fn((grid.n_x, grid.n_y, grid.n_z), |(i, j, k)| {
        if k < DETECTOR_MARGIN {
            return T::zero();
        }
        let v = f(i as f64, j as f64, k as f64).clamp(0.0, 1.0);
        // drop tails far below float resolution of the peak
        T::of(if v < 1e-9 { 0.0 } else { v })
    });
    PressureImage::from_parts(grid, values)
}

/// Isotropic Gaussian centred at `center` (voxel units) with width `sigma`.
pub fn gaussian_ball<T: Real>(grid: &Grid, center: [f64; 3], sigma: f64) -> PressureImage<T> {
    finish(*grid, |x, y, z| {
        let r2 = (x - center[0]).powi(2) + (y - center[1]).powi(2) + (z - center[2]).powi(2);
        (-r2 / (2.0 * sigma * sigma)).exp()
    })
}

/// Gaussian envelope modulated along depth by `cos(k0 (z - z_c))`, so that
/// its spectrum concentrates near `kz = +-k0` (radians per voxel) and arrives
/// at the detector close to normal incidence. Values lie in `[-1, 1]`.
pub fn depth_wave_packet<T: Real>(
    grid: &Grid,
    center: [f64; 3],
    sigma: [f64; 3],
    k0: f64,
) -> PressureImage<T> {
    let values = ndarray::Array3::from_shape_fn((grid.n_x, grid.n_y, grid.n_z), |(i, j, k)| {
        if k < DETECTOR_MARGIN {
            return T::zero();
        }
        let d = [
            i as f64 - center[0],
            j as f64 - center[1],
            k as f64 - center[2],
        ];
        let e: f64 = d
            .iter()
            .zip(sigma)
            .map(|(d, s)| d * d / (2.0 * s * s))
            .sum();
        T::of((-e).exp() * (k0 * d[2]).cos())
    });
    PressureImage::from_parts(*grid, values)
}

/// Random smoothed disks (2D) or balls (3D) of radius 2..=max(3, n/8) voxels.
pub fn disks<T: Real>(grid: &Grid, count: usize, seed: u64) -> PressureImage<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r_max = (grid.n_x.min(grid.n_z) as f64 / 8.0).max(3.0);
    let shapes: Vec<([f64; 3], f64, f64)> = (0..count)
        .map(|_| {
            let r = rng.random_range(2.0..=r_max);
            let lo = DETECTOR_MARGIN as f64 + r + 1.0;
            let cx = rng.random_range(
                (r + 1.0).min(grid.n_x as f64 / 2.0)
                    ..=(grid.n_x as f64 - r - 2.0).max(grid.n_x as f64 / 2.0),
            );
            let cy = if grid.is_2d() {
                0.0
            } else {
                rng.random_range(
                    (r + 1.0).min(grid.n_y as f64 / 2.0)
                        ..=(grid.n_y as f64 - r - 2.0).max(grid.n_y as f64 / 2.0),
                )
            };
            let cz = rng
                .random_range(lo.min(grid.n_z as f64 - 1.0)..=(grid.n_z as f64 - r - 2.0).max(lo));
            let amp = rng.random_range(0.3..=1.0);
            ([cx, cy, cz], r, amp)
        })
        .collect();
    finish(*grid, |x, y, z| {
        shapes.iter().fold(0.0f64, |acc, (c, r, a)| {
            let d = ((x - c[0]).powi(2) + (y - c[1]).powi(2) + (z - c[2]).powi(2)).sqrt();
            acc.max(a * smooth_step(d, *r))
        })
    })
}

fn segment_distance(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let len2 = ab.iter().map(|v| v * v).sum::<f64>();
    let t = if len2 == 0.0 {
        0.0
    } else {
        (ap.iter().zip(&ab).map(|(x, y)| x * y).sum::<f64>() / len2).clamp(0.0, 1.0)
    };
    ap.iter()
        .zip(&ab)
        .map(|(x, y)| (x - t * y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Random smooth tubes of 2 to 8 voxel diameter, a stand-in for segmented
/// vessel trees.
pub fn vessels<T: Real>(grid: &Grid, count: usize, seed: u64) -> PressureImage<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [grid.n_x as f64, grid.n_y as f64, grid.n_z as f64];
    let z_lo = DETECTOR_MARGIN as f64 + 5.0;
    let tubes: Vec<(Vec<[f64; 3]>, f64, f64)> = (0..count)
        .map(|_| {
            let radius = rng.random_range(1.0..=4.0);
            let amp = rng.random_range(0.4..=1.0);
            let mut p = [
                rng.random_range(0.0..dims[0]),
                if grid.is_2d() {
                    0.0
                } else {
                    rng.random_range(0.0..dims[1])
                },
                rng.random_range(z_lo.min(dims[2] - 1.0)..dims[2].max(z_lo + 1.0)),
            ];
            let mut heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let mut elev: f64 = rng.random_range(-0.5..0.5);
            let step = (dims[0].max(dims[2]) / 12.0).max(2.0);
            let mut pts = vec![p];
            for _ in 0..16 {
                heading += rng.random_range(-0.5..0.5);
                elev = (elev + rng.random_range(-0.3..0.3)).clamp(-1.2, 1.2);
                let dir = if grid.is_2d() {
                    [heading.cos(), 0.0, heading.sin()]
                } else {
                    [
                        heading.cos() * elev.cos(),
                        heading.sin() * elev.cos(),
                        elev.sin(),
                    ]
                };
                p = [
                    p[0] + step * dir[0],
                    p[1] + step * dir[1],
                    p[2] + step * dir[2],
                ];
                // bounce off the near-detector margin
                if p[2] < z_lo + radius {
                    p[2] = 2.0 * (z_lo + radius) - p[2];
                    heading = -heading;
                    elev = elev.abs();
                }
                pts.push(p);
            }
            (pts, radius, amp)
        })
        .collect();
    finish(*grid, |x, y, z| {
        let p = [x, y, z];
        tubes.iter().fold(0.0f64, |acc, (pts, r, a)| {
            let d = pts
                .windows(2)
                .map(|w| segment_distance(p, w[0], w[1]))
                .fold(f64::INFINITY, f64::min);
            acc.max(a * smooth_step(d, *r))
        })
    })
}

/// A few disks at increasing depth under the detector centre, for inspecting
/// how the angular threshold trades aliasing against aperture.
pub fn aliasing_demo<T: Real>(grid: &Grid) -> PressureImage<T> {
    let cx = grid.n_x as f64 / 2.0;
    let cy = if grid.is_2d() {
        0.0
    } else {
        grid.n_y as f64 / 2.0
    };
    let nz = grid.n_z as f64;
    let r = (nz / 16.0).max(2.0);
    let centres = [
        [cx - nz / 5.0, cy, nz * 0.3],
        [cx, cy, nz * 0.5],
        [cx + nz / 5.0, cy, nz * 0.7],
    ];
    finish(*grid, |x, y, z| {
        centres.iter().fold(0.0f64, |acc, c| {
            let d = ((x - c[0]).powi(2) + (y - c[1]).powi(2) + (z - c[2]).powi(2)).sqrt();
            acc.max(smooth_step(d, r))
        })
    })
}

pub fn generate<T: Real>(
    grid: &Grid,
    kind: PhantomKind,
    count: usize,
    seed: u64,
) -> Result<PressureImage<T>> {
    if grid.n_z <= 2 * DETECTOR_MARGIN + 4 {
        return Err(Error::invalid(format!(
            "n_z = {} is too small for phantoms",
            grid.n_z
        )));
    }
    Ok(match kind {
        PhantomKind::Disks | PhantomKind::Balls => disks(grid, count, seed),
        PhantomKind::VesselsSynthetic => vessels(grid, count, seed),
    })
}

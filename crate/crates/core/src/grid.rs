//! Regular acquisition grid shared by images, sensor data and operators.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial and temporal sampling of one acquisition.
///
/// Images live on `(n_x, n_y, n_z)` voxels of isotropic size `dx`, with the
/// detector occupying the `z = 0` plane. `n_y == 1` selects the 2D
/// line-detector geometry. Sensor data has shape `(n_x, n_y, n_t)` with time
/// step `dt`, so the recorded window is `[0, (n_t - 1) * dt]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub n_x: usize,
    pub n_y: usize,
    pub n_z: usize,
    pub dx: f64,
    pub c: f64,
    pub n_t: usize,
    pub dt: f64,
}

impl Grid {
    pub fn new(
        n_x: usize,
        n_y: usize,
        n_z: usize,
        dx: f64,
        c: f64,
        n_t: usize,
        dt: f64,
    ) -> Result<Self> {
        let grid = Grid {
            n_x,
            n_y,
            n_z,
            dx,
            c,
            n_t,
            dt,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid with the default time step `dt = dx / c`.
    pub fn with_default_dt(
        n_x: usize,
        n_y: usize,
        n_z: usize,
        dx: f64,
        c: f64,
        n_t: usize,
    ) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::invalid(format!(
                "sound speed must be positive, got {c}"
            )));
        }
        Self::new(n_x, n_y, n_z, dx, c, n_t, dx / c)
    }

    /// 2D line-detector grid of `n x n` pixels with `n_t` samples, `dt = dx / c`.
    pub fn square_2d(n: usize, n_t: usize, dx: f64, c: f64) -> Result<Self> {
        Self::with_default_dt(n, 1, n, dx, c, n_t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_x == 0 || self.n_y == 0 || self.n_z == 0 {
            return Err(Error::invalid(format!(
                "grid dimensions must be positive, got ({}, {}, {})",
                self.n_x, self.n_y, self.n_z
            )));
        }
        if !(self.dx > 0.0) || !self.dx.is_finite() {
            return Err(Error::invalid(format!(
                "dx must be positive, got {}",
                self.dx
            )));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::invalid(format!(
                "c must be positive, got {}",
                self.c
            )));
        }
        if self.n_t < 2 {
            return Err(Error::invalid(format!(
                "n_t must be at least 2, got {}",
                self.n_t
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        // relative slack so that dt = dx / c round-trips
        if self.dt * self.c > self.dx * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "dt * c = {} exceeds dx = {}",
                self.dt * self.c,
                self.dx
            )));
        }
        Ok(())
    }

    /// Same sampling with a different sound speed. The time step is kept, so
    /// the result may violate `dt * c <= dx`; it is validated.
    pub fn with_sound_speed(&self, c: f64) -> Result<Self> {
        let g = Grid { c, ..*self };
        g.validate()?;
        Ok(g)
    }

    pub fn with_n_t(&self, n_t: usize) -> Result<Self> {
        let g = Self { n_t, ..*self };
        g.validate()?;
        Ok(g)
    }

    pub fn is_2d(&self) -> bool {
        self.n_y == 1
    }

    /// End of the recorded time window, `(n_t - 1) * dt`.
    pub fn t_end(&self) -> f64 {
        (self.n_t - 1) as f64 * self.dt
    }

    pub fn image_shape(&self) -> [usize; 3] {
        [self.n_x, self.n_y, self.n_z]
    }

    pub fn data_shape(&self) -> [usize; 3] {
        [self.n_x, self.n_y, self.n_t]
    }

    pub fn detector_shape(&self) -> [usize; 2] {
        [self.n_x, self.n_y]
    }

    /// Courant number `c * dt / dx`.
    pub fn cfl(&self) -> f64 {
        self.c * self.dt / self.dx
    }

    /// Time for a wave to cross the image diagonal.
    pub fn diagonal_travel_time(&self) -> f64 {
        let ext = |n: usize| ((n - 1) as f64 * self.dx).powi(2);
        (ext(self.n_x) + ext(self.n_y) + ext(self.n_z)).sqrt() / self.c
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let grid: Grid = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("grid serializes");
        crate::npy::write_atomic(path, text.as_bytes())
    }
}

/// Angular wavenumbers of an `n`-point DFT with spacing `dx`, in DFT order:
/// non-negative frequencies first, then negative ones. For even `n` the
/// Nyquist entry carries the negative sign.
pub fn fft_wavenumbers(n: usize, dx: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("fft_wavenumbers: n must be positive"));
    }
    if !(dx > 0.0) {
        return Err(Error::invalid(format!(
            "fft_wavenumbers: dx must be positive, got {dx}"
        )));
    }
    let dk = 2.0 * PI / (n as f64 * dx);
    let half = (n - 1) / 2;
    Ok((0..n)
        .map(|j| {
            let m = if j <= half {
                j as f64
            } else {
                j as f64 - n as f64
            };
            m * dk
        })
        .collect())
}

/// Smallest integer `>= n` whose only prime factors are 2, 3 and 5.
pub fn next_fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wavenumbers_single_point() {
        assert_eq!(fft_wavenumbers(1, 1.0).unwrap(), vec![0.0]);
    }

    #[test]
    fn wavenumbers_even_has_negative_nyquist() {
        let k = fft_wavenumbers(4, 1.0).unwrap();
        let want = [0.0, PI / 2.0, -PI, -PI / 2.0];
        for (a, b) in k.iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn wavenumbers_odd() {
        let k = fft_wavenumbers(5, 0.5).unwrap();
        let want = [0.0, 0.8 * PI, 1.6 * PI, -1.6 * PI, -0.8 * PI];
        for (a, b) in k.iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn wavenumbers_reject_bad_input() {
        assert!(matches!(
            fft_wavenumbers(0, 1.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            fft_wavenumbers(4, 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            fft_wavenumbers(4, -1.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn grid_invariants() {
        let g = Grid::square_2d(32, 64, 1e-4, 1500.0).unwrap();
        assert!(g.is_2d());
        assert_abs_diff_eq!(g.t_end(), 63.0 * 1e-4 / 1500.0, epsilon = 1e-18);
        assert_abs_diff_eq!(g.cfl(), 1.0, epsilon = 1e-12);
        assert!(Grid::new(4, 1, 4, 1.0, 1.0, 1, 1.0).is_err());
        assert!(Grid::new(4, 1, 4, 1.0, 1.0, 4, 2.0).is_err());
        assert!(Grid::new(0, 1, 4, 1.0, 1.0, 4, 1.0).is_err());
        assert!(Grid::new(4, 1, 4, 1.0, -1.0, 4, 0.5).is_err());
    }

    #[test]
    fn grid_json_rejects_unknown_keys() {
        let text = r#"{"n_x":4,"n_y":1,"n_z":4,"dx":1.0,"c":1.0,"n_t":4,"dt":1.0,"extra":0}"#;
        assert!(serde_json::from_str::<Grid>(text).is_err());
    }

    #[test]
    fn fast_len() {
        assert_eq!(next_fast_len(1), 1);
        assert_eq!(next_fast_len(7), 8);
        assert_eq!(next_fast_len(257), 270);
        assert_eq!(next_fast_len(128), 128);
    }
}

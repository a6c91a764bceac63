//! Detector sub-sampling patterns.

use std::path::Path;

use ndarray::{Array2, Axis, Ix2, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SensorData;
use crate::npy;
use crate::real::Real;

/// Boolean selection of interrogated detector points, shape `(n_x, n_y)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingMask {
    pattern: Array2<bool>,
    pub n_beams: usize,
    pub factor: usize,
    pub seed: u64,
}

/// Generator parameters stored next to a mask file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskMeta {
    pub n_beams: usize,
    pub factor: usize,
    pub seed: u64,
}

impl SamplingMask {
    pub fn from_pattern(pattern: Array2<bool>, n_beams: usize, factor: usize, seed: u64) -> Self {
        Self {
            pattern,
            n_beams,
            factor,
            seed,
        }
    }

    /// Every detector point selected.
    pub fn full(n_x: usize, n_y: usize) -> Self {
        Self::from_pattern(Array2::from_elem((n_x, n_y), true), 1, 1, 0)
    }

    pub fn empty(n_x: usize, n_y: usize) -> Self {
        Self::from_pattern(Array2::from_elem((n_x, n_y), false), 1, 1, 0)
    }

    pub fn pattern(&self) -> &Array2<bool> {
        &self.pattern
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.pattern.nrows(), self.pattern.ncols()]
    }

    pub fn count(&self) -> usize {
        self.pattern.iter().filter(|&&b| b).count()
    }

    pub fn is_full(&self) -> bool {
        self.pattern.iter().all(|&b| b)
    }

    pub fn meta(&self) -> MaskMeta {
        MaskMeta {
            n_beams: self.n_beams,
            factor: self.factor,
            seed: self.seed,
        }
    }

    pub fn write_npy(&self, path: &Path) -> Result<()> {
        npy::write(path, &self.pattern)
    }

    pub fn read_npy(path: &Path, meta: MaskMeta) -> Result<Self> {
        let pattern = npy::read_bool(path)?
            .into_dimensionality::<Ix2>()
            .map_err(|_| Error::Npy {
                path: path.to_path_buf(),
                reason: "mask must be two-dimensional".into(),
            })?;
        Ok(Self::from_pattern(
            pattern,
            meta.n_beams,
            meta.factor,
            meta.seed,
        ))
    }
}

/// Random beam-scanner sub-sampling pattern.
///
/// The scan axis (`y`, or `x` for a 2D line detector with `n_y == 1`) is split
/// into `n_beams` contiguous bands. Within each band a uniformly random subset
/// of `round(len / factor)` detector columns is selected without replacement,
/// where `len` is the extent across the band (`n_x` in 3D, band width in 2D).
pub fn generate_beam_mask(
    n_x: usize,
    n_y: usize,
    n_beams: usize,
    factor: usize,
    seed: u64,
) -> Result<SamplingMask> {
    if n_x == 0 || n_y == 0 {
        return Err(Error::invalid("mask dimensions must be positive"));
    }
    if n_beams == 0 {
        return Err(Error::invalid("n_beams must be positive"));
    }
    if factor == 0 {
        return Err(Error::invalid("sub-sampling factor must be at least 1"));
    }
    let line = n_y == 1;
    let scan_len = if line { n_x } else { n_y };
    if n_beams > scan_len {
        return Err(Error::invalid(format!(
            "n_beams = {n_beams} exceeds the scan axis length {scan_len}"
        )));
    }
    if scan_len % n_beams != 0 {
        return Err(Error::invalid(format!(
            "n_beams = {n_beams} does not divide the scan axis length {scan_len}"
        )));
    }
    let band = scan_len / n_beams;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pattern = Array2::from_elem((n_x, n_y), false);

    for b in 0..n_beams {
        if line {
            let keep = (band as f64 / factor as f64).round() as usize;
            for i in rand::seq::index::sample(&mut rng, band, keep) {
                pattern[[b * band + i, 0]] = true;
            }
        } else {
            let keep = (n_x as f64 / factor as f64).round() as usize;
            for i in rand::seq::index::sample(&mut rng, n_x, keep) {
                for j in b * band..(b + 1) * band {
                    pattern[[i, j]] = true;
                }
            }
        }
    }
    Ok(SamplingMask::from_pattern(pattern, n_beams, factor, seed))
}

/// Zero-fills the time series of every unselected detector point.
pub fn apply_mask<T: Real>(g: &SensorData<T>, m: &SamplingMask) -> Result<SensorData<T>> {
    let [n_x, n_y, _] = g.shape();
    if m.shape() != [n_x, n_y] {
        return Err(Error::shape(&[n_x, n_y], &m.shape()));
    }
    let mut values = g.values().clone();
    Zip::from(values.lanes_mut(Axis(2)))
        .and(m.pattern())
        .for_each(|mut lane, &keep| {
            if !keep {
                lane.fill(T::zero());
            }
        });
    Ok(SensorData::from_parts(*g.grid(), values))
}

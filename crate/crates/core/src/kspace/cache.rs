//! On-disk cache of spectral weights keyed by grid, angle and resampling scheme.

use std::path::{Path, PathBuf};

use ndarray::Ix3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::weights::{Interpolation, SpectralWeights};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::npy;
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsKey {
    pub grid: Grid,
    pub theta_max: f64,
    pub oversample: usize,
    pub interpolation: Interpolation,
}

impl WeightsKey {
    pub fn of<T: Real>(w: &SpectralWeights<T>) -> Self {
        Self {
            grid: *w.grid(),
            theta_max: w.theta_max(),
            oversample: w.oversample(),
            interpolation: w.interpolation(),
        }
    }

    /// Hex digest of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("key serializes");
        let digest = Sha256::digest(&json);
        digest.iter().take(12).map(|b| format!("{b:02x}")).collect()
    }

    pub fn dir(&self, root: &Path) -> PathBuf {
        root.join(format!("weights-{}", self.hash()))
    }
}

pub fn save<T: Real>(root: &Path, w: &SpectralWeights<T>) -> Result<PathBuf> {
    let key = WeightsKey::of(w);
    let dir = key.dir(root);
    npy::write(&dir.join("b.npy"), w.b())?;
    npy::write(&dir.join("support.npy"), w.support_mask())?;
    let json = serde_json::to_vec_pretty(&key).expect("key serializes");
    npy::write_atomic(&dir.join("weights.json"), &json)?;
    Ok(dir)
}

fn load<T: Real>(dir: &Path, key: &WeightsKey) -> Result<SpectralWeights<T>> {
    let meta_path = dir.join("weights.json");
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let stored: WeightsKey = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: meta_path.clone(),
        source,
    })?;
    if &stored != key {
        return Err(Error::invalid(format!(
            "cache entry {} does not match its key",
            dir.display()
        )));
    }
    let b = npy::read::<T>(&dir.join("b.npy"))?
        .into_dimensionality::<Ix3>()
        .map_err(|_| Error::invalid("cached weights must be 3D"))?;
    let support = npy::read_bool(&dir.join("support.npy"))?
        .into_dimensionality::<Ix3>()
        .map_err(|_| Error::invalid("cached support must be 3D"))?;
    SpectralWeights::from_parts(
        key.grid,
        key.theta_max,
        key.oversample,
        key.interpolation,
        b,
        support,
    )
}

/// Loads cached weights, or builds and stores them on a miss.
pub fn load_or_build<T: Real>(
    root: &Path,
    grid: &Grid,
    theta_max: f64,
    oversample: usize,
    interpolation: Interpolation,
) -> Result<SpectralWeights<T>> {
    let key = WeightsKey {
        grid: *grid,
        theta_max,
        oversample,
        interpolation,
    };
    let dir = key.dir(root);
    if dir.join("weights.json").exists() {
        return load(&dir, &key);
    }
    let w = SpectralWeights::build_with(grid, theta_max, oversample, interpolation)?;
    save(root, &w)?;
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_round_trip_and_key_sensitivity() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::square_2d(16, 20, 1e-4, 1500.0).unwrap();
        let a = load_or_build::<f64>(dir.path(), &g, 0.7, 2, Interpolation::Linear).unwrap();
        let b = load_or_build::<f64>(dir.path(), &g, 0.7, 2, Interpolation::Linear).unwrap();
        assert_eq!(a, b);
        let k1 = WeightsKey::of(&a);
        let mut k2 = k1.clone();
        k2.interpolation = Interpolation::Nearest;
        assert_ne!(k1.hash(), k2.hash());
        k2 = k1.clone();
        k2.theta_max = 0.8;
        assert_ne!(k1.hash(), k2.hash());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}

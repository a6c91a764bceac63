//! Output directory layout and writers.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use ffpat_core::npy::write_atomic;
use ffpat_core::PressureImage64;
use image::{GrayImage, ImageFormat, Luma};
use ndarray::{Array2, Axis};
use serde::Serialize;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub struct Layout {
    pub root: PathBuf,
}

pub fn sample_id(i: usize) -> String {
    format!("sample_{i:03}")
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
        }
    }

    pub fn grid(&self) -> PathBuf {
        self.root.join("grid.json")
    }

    pub fn phantoms(&self) -> PathBuf {
        self.root.join("phantoms")
    }

    pub fn phantom(&self, i: usize) -> PathBuf {
        self.phantoms().join(format!("phantom_{i:03}.npy"))
    }

    pub fn mask(&self) -> PathBuf {
        self.root.join("mask.npy")
    }

    pub fn mask_meta(&self) -> PathBuf {
        self.root.join("mask.json")
    }

    pub fn data(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn sample(&self, i: usize) -> PathBuf {
        self.data().join(sample_id(i))
    }

    pub fn recon(&self, method: &str) -> PathBuf {
        self.root.join("recon").join(method)
    }

    pub fn iterates(&self, i: usize) -> PathBuf {
        self.root.join("iterates").join(sample_id(i))
    }

    /// Indices of `prefix_NNN` entries under `dir`, sorted.
    pub fn indices(dir: &Path, prefix: &str, suffix: &str) -> Result<Vec<usize>, CliError> {
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let entries = std::fs::read_dir(dir)
            .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        let mut out: Vec<usize> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                name.strip_prefix(prefix)?
                    .strip_suffix(suffix)?
                    .parse()
                    .ok()
            })
            .collect();
        out.sort_unstable();
        Ok(out)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
    bytes.push(b'\n');
    Ok(write_atomic(path, &bytes)?)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Maximum intensity projection along `axis`, scaled to 8 bits.
pub fn mip(f: &PressureImage64, axis: usize) -> Array2<u8> {
    let proj = f
        .values()
        .fold_axis(Axis(axis), f64::NEG_INFINITY, |a, &b| a.max(b));
    let hi = proj.iter().cloned().fold(0.0f64, f64::max);
    proj.mapv(|v| {
        if hi > 0.0 {
            (255.0 * (v.max(0.0) / hi)).round() as u8
        } else {
            0
        }
    })
}

/// Writes `mip_x.png`, `mip_y.png` and `mip_z.png`; rows run along the first
/// remaining axis.
pub fn write_mips(f: &PressureImage64, dir: &Path) -> Result<(), CliError> {
    for (axis, name) in ["x", "y", "z"].iter().enumerate() {
        let m = mip(f, axis);
        let (rows, cols) = m.dim();
        let img = GrayImage::from_fn(cols as u32, rows as u32, |x, y| {
            Luma([m[[y as usize, x as usize]]])
        });
        let mut buf = Cursor::new(Vec::new());
        img.write_to(&mut buf, ImageFormat::Png)
            .map_err(|e| CliError::Data(format!("png encoding failed: {e}")))?;
        write_atomic(&dir.join(format!("mip_{name}.png")), buf.get_ref())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ffpat_core::Grid;

    #[test]
    fn mip_takes_column_maxima() {
        let g = Grid::with_default_dt(3, 2, 4, 1e-4, 1500.0, 8).unwrap();
        let f = PressureImage64::from_fn(g, |(i, j, k)| (i + 2 * j + k) as f64).unwrap();
        let m = mip(&f, 2);
        assert_eq!(m.dim(), (3, 2));
        assert_eq!(m[[2, 1]], 255);
        assert_eq!(m[[0, 0]], (255.0f64 * 3.0 / 7.0).round() as u8);
    }

    #[test]
    fn indices_are_parsed_and_sorted() {
        let dir = tempfile::tempdir().unwrap();
        for n in [
            "phantom_010.npy",
            "phantom_002.npy",
            "other.npy",
            "phantom_x.npy",
        ] {
            std::fs::write(dir.path().join(n), b"").unwrap();
        }
        assert_eq!(
            Layout::indices(dir.path(), "phantom_", ".npy").unwrap(),
            vec![2, 10]
        );
        assert!(Layout::indices(&dir.path().join("none"), "a", "b")
            .unwrap()
            .is_empty());
    }
}

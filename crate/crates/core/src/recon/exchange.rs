//! File boundary with an out-of-process update operator.
//!
//! Layout per sample: `f_{k}.npy`, `grad_{k}.npy` and `meta.json` written by
//! [`export_iterate`]; the external side answers with `f_next_{k}.npy`.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::learned::IterativeState;
use crate::error::{Error, Result};
use crate::field::PressureImage;
use crate::grid::Grid;
use crate::npy;
use crate::real::Real;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterateMeta {
    pub schema_version: u32,
    pub k: usize,
    pub grid: Grid,
    pub shape: [usize; 3],
    pub dtype: String,
}

pub fn iterate_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("f_{k}.npy"))
}

pub fn gradient_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("grad_{k}.npy"))
}

pub fn update_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("f_next_{k}.npy"))
}

pub fn meta_path(dir: &Path) -> PathBuf {
    dir.join("meta.json")
}

pub fn export_iterate<T: Real>(
    state: &IterativeState<T>,
    gradient: &PressureImage<T>,
    dir: &Path,
) -> Result<()> {
    state.f.check_same(gradient)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    state.f.write_npy(&iterate_path(dir, state.k))?;
    gradient.write_npy(&gradient_path(dir, state.k))?;
    let meta = IterateMeta {
        schema_version: SCHEMA_VERSION,
        k: state.k,
        grid: *state.f.grid(),
        shape: state.f.shape(),
        dtype: T::DESCR.to_string(),
    };
    let json = serde_json::to_vec_pretty(&meta).expect("meta serializes");
    npy::write_atomic(&meta_path(dir), &json)
}

pub fn read_meta(dir: &Path) -> Result<IterateMeta> {
    let path = meta_path(dir);
    if !path.exists() {
        return Err(Error::MissingArtifact(path));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path, source })
}

/// Reads `f_next_{k}.npy`. Values are taken as given; positivity is the
/// external operator's contract.
pub fn import_update<T: Real>(dir: &Path, k: usize, grid: &Grid) -> Result<PressureImage<T>> {
    PressureImage::read_npy(&update_path(dir, k), *grid)
}

/// Produces `f_next_{k}.npy` from the exported iterate.
pub trait UpdateRunner: Send + Sync + std::fmt::Debug {
    fn run(&self, dir: &Path, k: usize, weights: &Path) -> Result<()>;
}

/// Runs an external program; `{dir}`, `{k}` and `{weights}` in the arguments
/// are substituted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandRunner {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl UpdateRunner for CommandRunner {
    fn run(&self, dir: &Path, k: usize, weights: &Path) -> Result<()> {
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| {
                a.replace("{dir}", &dir.to_string_lossy())
                    .replace("{k}", &k.to_string())
                    .replace("{weights}", &weights.to_string_lossy())
            })
            .collect();
        let out = Command::new(&self.program)
            .args(&args)
            .output()
            .map_err(|e| Error::io(&self.program, e))?;
        if !out.status.success() {
            return Err(Error::Update {
                k,
                reason: format!(
                    "{} exited with {}: {}",
                    self.program,
                    out.status,
                    String::from_utf8_lossy(&out.stderr).trim()
                ),
            });
        }
        Ok(())
    }
}

use ffpat_core::{add_noise, apply_mask, simulate, Grid, MaskMeta, PressureImage64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{load_mask, sample_seed};
use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::layout::{write_json, Layout, SCHEMA_VERSION};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleMeta {
    pub schema_version: u32,
    pub sample: usize,
    /// Sound speed used to simulate this sample.
    pub c: f64,
    pub grid: Grid,
    pub nominal_grid: Grid,
    pub snr: Option<f64>,
    pub noise_seed: Option<u64>,
    pub mask: MaskMeta,
    pub padded_dims: [usize; 3],
}

/// Per-sample sound speed, uniform over the configured range.
pub fn sample_sound_speed(cfg: &PipelineConfig, i: usize) -> f64 {
    match &cfg.sound_speed {
        Some(s) if s.c_max > s.c_min => {
            ChaCha8Rng::seed_from_u64(sample_seed(s.seed, i)).random_range(s.c_min..=s.c_max)
        }
        Some(s) => s.c_min,
        None => cfg.grid.c,
    }
}

pub fn run(cfg: &PipelineConfig, layout: &Layout) -> Result<serde_json::Value, CliError> {
    let nominal = cfg.grid()?;
    let phantoms = Layout::indices(&layout.phantoms(), "phantom_", ".npy")?;
    if phantoms.is_empty() {
        return Err(CliError::Data(format!(
            "no phantoms under {}; run `ffpat phantom` first",
            layout.phantoms().display()
        )));
    }
    let mask = load_mask(cfg, layout)?;
    super::mask::write(&mask, layout)?;
    nominal.write_json(&layout.grid())?;
    let speeds: Vec<f64> = phantoms
        .par_iter()
        .map(|&i| -> Result<f64, CliError> {
            let c = sample_sound_speed(cfg, i);
            let grid = nominal
                .with_sound_speed(c)
                .map_err(|e| CliError::Data(format!("sample {i}: {e}")))?;
            let f = PressureImage64::read_npy(&layout.phantom(i), nominal)?.with_grid(grid)?;
            let rec = simulate(&f)?;
            let clean = rec.full_data;
            let masked = apply_mask(&clean, &mask)?;
            let noise = cfg
                .noise
                .as_ref()
                .and_then(|n| n.snr.map(|snr| (snr, sample_seed(n.seed, i))));
            let noisy = match noise {
                Some((snr, seed)) => add_noise(&clean, snr, seed)?,
                None => clean.clone(),
            };
            let dir = layout.sample(i);
            clean.write_npy(&dir.join("clean.npy"))?;
            masked.write_npy(&dir.join("masked.npy"))?;
            noisy.write_npy(&dir.join("noisy.npy"))?;
            let meta = SampleMeta {
                schema_version: SCHEMA_VERSION,
                sample: i,
                c,
                grid,
                nominal_grid: nominal,
                snr: noise.map(|n| n.0),
                noise_seed: noise.map(|n| n.1),
                mask: mask.meta(),
                padded_dims: rec.padded_dims,
            };
            write_json(&dir.join("meta.json"), &meta)?;
            Ok(c)
        })
        .collect::<Result<_, _>>()?;
    Ok(json!({ "samples": phantoms.len(), "sound_speeds": speeds }))
}

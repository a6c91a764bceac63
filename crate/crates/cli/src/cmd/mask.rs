use ffpat_core::{generate_beam_mask, SamplingMask};
use serde_json::json;

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::layout::{write_json, Layout};

pub fn generate(cfg: &PipelineConfig) -> Result<SamplingMask, CliError> {
    let m = &cfg.mask;
    generate_beam_mask(cfg.grid.n_x, cfg.grid.n_y, m.n_beams, m.factor, m.seed)
        .map_err(|e| CliError::Usage(format!("invalid mask block: {e}")))
}

pub fn run(cfg: &PipelineConfig, layout: &Layout) -> Result<serde_json::Value, CliError> {
    let mask = generate(cfg)?;
    write(&mask, layout)?;
    Ok(json!({ "selected": mask.count(), "total": mask.pattern().len() }))
}

pub fn write(mask: &SamplingMask, layout: &Layout) -> Result<(), CliError> {
    mask.write_npy(&layout.mask())?;
    write_json(&layout.mask_meta(), &mask.meta())
}

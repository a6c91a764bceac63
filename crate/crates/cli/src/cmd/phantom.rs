use ffpat_core::phantom::generate;
use ffpat_core::PressureImage64;
use rayon::prelude::*;
use serde_json::json;

use super::sample_seed;
use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::layout::Layout;

pub fn run(cfg: &PipelineConfig, layout: &Layout) -> Result<serde_json::Value, CliError> {
    let grid = cfg.grid()?;
    let p = &cfg.phantom;
    grid.write_json(&layout.grid())?;
    (0..p.count)
        .into_par_iter()
        .try_for_each(|i| -> Result<(), CliError> {
            let f: PressureImage64 = generate(&grid, p.kind, p.objects, sample_seed(p.seed, i))
                .map_err(|e| CliError::Usage(format!("invalid phantom block: {e}")))?;
            f.write_npy(&layout.phantom(i))?;
            Ok(())
        })?;
    Ok(json!({ "phantoms": p.count }))
}

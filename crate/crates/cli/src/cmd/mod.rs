pub mod bench;
pub mod mask;
pub mod metrics;
pub mod phantom;
pub mod reconstruct;
pub mod simulate;
pub mod validate;

use ffpat_core::{MaskMeta, SamplingMask};

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::layout::Layout;

/// Seed for sample `i` of a stream seeded with `base`.
pub fn sample_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add(i as u64)
}

/// The stored mask if present, else the one described by the config.
pub fn load_mask(cfg: &PipelineConfig, layout: &Layout) -> Result<SamplingMask, CliError> {
    if layout.mask().exists() {
        let meta: MaskMeta = crate::layout::read_json(&layout.mask_meta())?;
        let m = SamplingMask::read_npy(&layout.mask(), meta)?;
        let want = [cfg.grid.n_x, cfg.grid.n_y];
        if m.shape() != want {
            return Err(CliError::Data(format!(
                "stored mask has shape {:?}, grid needs {:?}",
                m.shape(),
                want
            )));
        }
        return Ok(m);
    }
    mask::generate(cfg)
}

use ffpat_core::metrics::relative_l2;
use ffpat_core::{psnr, PressureImage64};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::layout::{write_json, Layout, SCHEMA_VERSION};

#[derive(Debug, Serialize)]
struct Entry {
    method: String,
    sample: usize,
    psnr: f64,
    relative_l2: f64,
}

/// Scores every stored reconstruction that has a ground-truth phantom.
pub fn run(cfg: &PipelineConfig, layout: &Layout) -> Result<Value, CliError> {
    let grid = cfg.grid()?;
    let recon_root = layout.root.join("recon");
    let mut methods: Vec<String> = match std::fs::read_dir(&recon_root) {
        Ok(rd) => rd
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .filter_map(|e| e.file_name().into_string().ok())
            .collect(),
        Err(_) => Vec::new(),
    };
    methods.sort();
    let mut entries = Vec::new();
    let mut means = serde_json::Map::new();
    for method in methods {
        let dir = recon_root.join(&method);
        let mut scores = Vec::new();
        for i in Layout::indices(&dir, "sample_", "")? {
            let image_path = dir.join(crate::layout::sample_id(i)).join("recon.npy");
            let truth_path = layout.phantom(i);
            if !image_path.exists() || !truth_path.exists() {
                continue;
            }
            let x = PressureImage64::read_npy(&image_path, grid)?;
            let truth = PressureImage64::read_npy(&truth_path, grid)?;
            let p = psnr(&x, &truth)?;
            scores.push(p);
            entries.push(Entry {
                method: method.clone(),
                sample: i,
                psnr: p,
                relative_l2: relative_l2(x.values(), truth.values()),
            });
        }
        if !scores.is_empty() {
            means.insert(
                method,
                json!(scores.iter().sum::<f64>() / scores.len() as f64),
            );
        }
    }
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "mean_psnr": means,
        "entries": entries,
    });
    write_json(&layout.root.join("metrics.json"), &report)?;
    Ok(report)
}

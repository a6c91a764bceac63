use std::sync::Arc;
use std::time::Instant;

use ffpat_core::kspace::Interpolation;
use ffpat_core::recon::{
    alpha_sweep, estimate_lipschitz, gradient_descent, learned_reconstruct, tv_reconstruct,
    ExternalUpdate, TVParams, UpdateOperator,
};
use ffpat_core::{
    apply_mask, psnr, KSpaceOperator64, PressureImage64, SamplingMask, SensorData64,
    SpectralWeights64,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::load_mask;
use crate::config::{LearnedConfig, Method, MethodParams, PipelineConfig, TvConfig, UpdateKind};
use crate::error::CliError;
use crate::layout::{write_json, write_mips, Layout, SCHEMA_VERSION};

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub sample: usize,
    pub method: Method,
    pub psnr: Option<f64>,
    pub wall_clock_seconds: f64,
    pub history: Vec<f64>,
    pub details: Value,
}

struct Outcome {
    image: PressureImage64,
    history: Vec<f64>,
    details: Value,
}

fn run_tv(
    g: &SensorData64,
    op: &KSpaceOperator64,
    mask: &SamplingMask,
    p: &TvConfig,
    truth: Option<&PressureImage64>,
) -> Result<Outcome, CliError> {
    let scale = if p.relative_alpha {
        op.adjoint(g)?.max().max(0.0)
    } else {
        1.0
    };
    let base = TVParams {
        alpha: p.alpha * scale,
        n_outer: p.n_outer,
        n_inner: p.n_inner,
        step: p.step,
        nonneg: p.nonneg,
        accelerate: p.accelerate,
    };
    if let Some(sweep) = &p.sweep {
        let truth = truth.ok_or_else(|| {
            CliError::Data("an alpha sweep needs the ground-truth phantom".into())
        })?;
        let alphas: Vec<f64> = sweep.iter().map(|a| a * scale).collect();
        let r = alpha_sweep(g, op, mask, &base, &alphas, truth)?;
        return Ok(Outcome {
            image: r.image,
            history: r.history,
            details: json!({ "alpha": r.best_alpha, "alpha_scale": scale, "sweep": r.scores }),
        });
    }
    let (image, history) = tv_reconstruct(g, op, mask, &base)?;
    Ok(Outcome {
        image,
        history,
        details: json!({ "alpha": base.alpha, "alpha_scale": scale }),
    })
}

fn updates(
    p: &LearnedConfig,
    op: &KSpaceOperator64,
    mask: &SamplingMask,
    layout: &Layout,
    sample: usize,
) -> Result<Vec<UpdateOperator>, CliError> {
    Ok(match p.update {
        UpdateKind::Identity => vec![UpdateOperator::Identity; p.iterations],
        UpdateKind::GradientStep => {
            let tau = match p.tau {
                Some(t) => t,
                None => 0.5 / estimate_lipschitz(op, mask, 30, 0)?,
            };
            vec![UpdateOperator::GradientStep(tau); p.iterations]
        }
        UpdateKind::External => {
            let runner = Arc::new(p.runner.clone().expect("checked at parse"));
            p.weights
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    UpdateOperator::External(ExternalUpdate {
                        k,
                        weights: w.clone(),
                        exchange_dir: layout.iterates(sample),
                        runner: runner.clone(),
                    })
                })
                .collect()
        }
    })
}

pub fn run(cfg: &PipelineConfig, layout: &Layout, method: Option<&str>) -> Result<Value, CliError> {
    let configured: Method = cfg.recon.method.parse()?;
    let method: Method = match method {
        Some(m) => m.parse()?,
        None => configured,
    };
    // params belong to the configured method; an override runs with defaults
    let params = if method == configured {
        MethodParams::parse(method, &cfg.recon.params)?
    } else {
        MethodParams::parse(method, &Value::Null)?
    };
    let grid = cfg.grid()?;
    let samples = Layout::indices(&layout.data(), "sample_", "")?;
    if samples.is_empty() {
        return Err(CliError::Data(format!(
            "no samples under {}; run `ffpat simulate` first",
            layout.data().display()
        )));
    }
    let mask = load_mask(cfg, layout)?;
    let weights = SpectralWeights64::build_with(
        &grid,
        cfg.recon.theta_max_deg.to_radians(),
        cfg.recon.oversample,
        Interpolation::Linear,
    )?;
    let op = KSpaceOperator64::new(weights)?;
    let out_dir = layout.recon(method.name());

    let reports: Vec<Report> = samples
        .par_iter()
        .map(|&i| -> Result<Report, CliError> {
            let noisy = SensorData64::read_npy(&layout.sample(i).join("noisy.npy"), grid)?;
            let g = apply_mask(&noisy, &mask)?;
            let truth_path = layout.phantom(i);
            let truth = if truth_path.exists() {
                Some(PressureImage64::read_npy(&truth_path, grid)?)
            } else {
                None
            };
            let start = Instant::now();
            let out = match &params {
                MethodParams::Bp => Outcome {
                    image: op.backproject(&g)?,
                    history: Vec::new(),
                    details: Value::Null,
                },
                MethodParams::Tv(p) => run_tv(&g, &op, &mask, p, truth.as_ref())?,
                MethodParams::Gd(p) => {
                    let (image, history) = gradient_descent(&g, &op, &mask, p)?;
                    Outcome {
                        image,
                        history,
                        details: serde_json::to_value(p).expect("params serialize"),
                    }
                }
                MethodParams::Learned(p) => {
                    let ups = updates(p, &op, &mask, layout, i)?;
                    let (image, states) = learned_reconstruct(&g, &op, &mask, &ups)?;
                    let history = states
                        .last()
                        .map(|s| s.objective_history.clone())
                        .unwrap_or_default();
                    Outcome {
                        image,
                        history,
                        details: json!({ "update": p.update, "iterations": ups.len() }),
                    }
                }
            };
            let seconds = start.elapsed().as_secs_f64();
            let dir = out_dir.join(crate::layout::sample_id(i));
            out.image.write_npy(&dir.join("recon.npy"))?;
            write_mips(&out.image, &dir)?;
            let report = Report {
                schema_version: SCHEMA_VERSION,
                sample: i,
                method,
                psnr: truth.as_ref().map(|t| psnr(&out.image, t)).transpose()?,
                wall_clock_seconds: seconds,
                history: out.history,
                details: out.details,
            };
            write_json(&dir.join("report.json"), &report)?;
            Ok(report)
        })
        .collect::<Result<_, _>>()?;

    let scored: Vec<f64> = reports.iter().filter_map(|r| r.psnr).collect();
    let mean_psnr = (!scored.is_empty()).then(|| scored.iter().sum::<f64>() / scored.len() as f64);
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "method": method,
        "samples": reports.len(),
        "mean_psnr": mean_psnr,
        "total_seconds": reports.iter().map(|r| r.wall_clock_seconds).sum::<f64>(),
    });
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

use std::f64::consts::FRAC_PI_4;
use std::time::Instant;

use ffpat_core::recon::{estimate_lipschitz, tv_reconstruct, TVParams};
use ffpat_core::{phantom, simulate, Grid, KSpaceOperator64, SamplingMask};
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;
use crate::layout::Layout;

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub operator: &'static str,
    pub grid: String,
    pub n_t: usize,
    pub reps: usize,
    pub median_seconds: f64,
}

fn median_time(reps: usize, mut f: impl FnMut() -> Result<(), CliError>) -> Result<f64, CliError> {
    f()?;
    let mut t = Vec::with_capacity(reps);
    for _ in 0..reps {
        let s = Instant::now();
        f()?;
        t.push(s.elapsed().as_secs_f64());
    }
    t.sort_by(|a, b| a.total_cmp(b));
    Ok(t[t.len() / 2])
}

pub fn measure(sizes: &[usize], reps: usize) -> Result<Vec<Row>, CliError> {
    if reps == 0 || sizes.is_empty() {
        return Err(CliError::Usage(
            "bench needs at least one size and one repetition".into(),
        ));
    }
    let mut rows = Vec::new();
    for &n in sizes {
        let grid = Grid::square_2d(n, n, 1e-4, 1500.0)
            .map_err(|e| CliError::Usage(format!("size {n}: {e}")))?;
        let name = format!("{n}x1x{n}");
        let f = phantom::disks::<f64>(&grid, 5, 0);
        let op = KSpaceOperator64::for_grid(&grid, FRAC_PI_4)?;
        let mask = SamplingMask::full(n, 1);
        let data = op.forward(&f)?;
        let step = 1.0 / estimate_lipschitz(&op, &mask, 20, 0)?;
        let tv = TVParams {
            alpha: 1e-3,
            n_outer: 1,
            step: Some(step),
            ..Default::default()
        };
        let mut push = |operator, secs| {
            rows.push(Row {
                operator,
                grid: name.clone(),
                n_t: n,
                reps,
                median_seconds: secs,
            });
        };
        push(
            "forward_project",
            median_time(reps, || op.forward(&f).map(drop).map_err(Into::into))?,
        );
        push(
            "backproject",
            median_time(reps, || op.backproject(&data).map(drop).map_err(Into::into))?,
        );
        push(
            "simulate",
            median_time(reps, || simulate(&f).map(drop).map_err(Into::into))?,
        );
        push(
            "tv_iteration",
            median_time(reps, || {
                tv_reconstruct(&data, &op, &mask, &tv)
                    .map(drop)
                    .map_err(Into::into)
            })?,
        );
    }
    Ok(rows)
}

pub fn run(layout: &Layout, sizes: &[usize], reps: usize) -> Result<Value, CliError> {
    let rows = measure(sizes, reps)?;
    let path = layout.root.join("bench.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r)
            .map_err(|e| CliError::Data(format!("csv: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Data(format!("csv: {e}")))?;
    ffpat_core::npy::write_atomic(&path, &bytes)?;
    let _ = std::io::Write::write_all(&mut std::io::stdout(), &bytes);
    Ok(serde_json::to_value(&rows).expect("rows serialize"))
}

//! Learned iterative reconstruction driver and classical gradient descent.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::exchange::{export_iterate, import_update, UpdateRunner};
use super::tv::estimate_lipschitz;
use crate::error::{Error, Result};
use crate::field::{PressureImage, SensorData};
use crate::kspace::{GradientMode, KSpaceOperator};
use crate::mask::SamplingMask;
use crate::real::Real;

pub const DEFAULT_ITERATES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct IterativeState<T> {
    pub k: usize,
    pub f: PressureImage<T>,
    /// Data fidelity `1/2 ||M A f_j - g||^2` for `j = 0..=k`.
    pub objective_history: Vec<f64>,
}

/// Out-of-process update for iterate `k`.
#[derive(Debug, Clone)]
pub struct ExternalUpdate {
    pub k: usize,
    pub weights: PathBuf,
    pub exchange_dir: PathBuf,
    pub runner: Arc<dyn UpdateRunner>,
}

#[derive(Debug, Clone)]
pub enum UpdateOperator {
    Identity,
    GradientStep(f64),
    External(ExternalUpdate),
}

impl UpdateOperator {
    fn check(&self, k: usize) -> Result<()> {
        match self {
            UpdateOperator::Identity => Ok(()),
            UpdateOperator::GradientStep(tau) if tau.is_finite() => Ok(()),
            UpdateOperator::GradientStep(tau) => Err(Error::Update {
                k,
                reason: format!("step {tau} is not finite"),
            }),
            UpdateOperator::External(e) if e.k != k => Err(Error::Update {
                k,
                reason: format!("external operator is for iterate {}", e.k),
            }),
            UpdateOperator::External(e) if !e.weights.exists() => Err(Error::Update {
                k,
                reason: format!("missing weights {}", e.weights.display()),
            }),
            UpdateOperator::External(_) => Ok(()),
        }
    }

    fn apply<T: Real>(
        &self,
        state: &IterativeState<T>,
        grad: &PressureImage<T>,
    ) -> Result<PressureImage<T>> {
        match self {
            UpdateOperator::Identity => Ok(state.f.clone()),
            UpdateOperator::GradientStep(tau) => state.f.lincomb(T::one(), grad, T::of(-tau)),
            UpdateOperator::External(e) => {
                let wrap = |err: Error| Error::Update {
                    k: state.k,
                    reason: err.to_string(),
                };
                export_iterate(state, grad, &e.exchange_dir).map_err(wrap)?;
                e.runner
                    .run(&e.exchange_dir, state.k, &e.weights)
                    .map_err(wrap)?;
                import_update(&e.exchange_dir, state.k, state.f.grid()).map_err(wrap)
            }
        }
    }
}

fn half_sq<T: Real>(r: &SensorData<T>) -> f64 {
    0.5 * r
        .values()
        .iter()
        .map(|v| v.as_f64() * v.as_f64())
        .sum::<f64>()
}

/// Starts from the backprojection of `g` and applies `updates[k]` to the
/// iterate and its backprojected residual. Returns the final image and every
/// state `f_0..=f_K`.
pub fn learned_reconstruct<T: Real>(
    g: &SensorData<T>,
    op: &KSpaceOperator<T>,
    mask: &SamplingMask,
    updates: &[UpdateOperator],
) -> Result<(PressureImage<T>, Vec<IterativeState<T>>)> {
    if updates.is_empty() {
        return Err(Error::invalid("at least one update operator is required"));
    }
    for (k, u) in updates.iter().enumerate() {
        u.check(k)?;
    }
    let f0 = op.backproject(g)?;
    let mut r = op.residual(&f0, g, mask)?;
    let mut states = vec![IterativeState {
        k: 0,
        f: f0,
        objective_history: vec![half_sq(&r)],
    }];
    for (k, u) in updates.iter().enumerate() {
        let cur = &states[k];
        let grad = op.backproject(&r)?;
        let f = u.apply(cur, &grad)?;
        r = op.residual(&f, g, mask)?;
        let mut objective_history = cur.objective_history.clone();
        objective_history.push(half_sq(&r));
        states.push(IterativeState {
            k: k + 1,
            f,
            objective_history,
        });
    }
    let last = states.last().expect("non-empty").f.clone();
    Ok((last, states))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GdParams {
    pub n_iter: usize,
    /// `None` uses the inverse of the estimated Lipschitz constant.
    pub step: Option<f64>,
    pub mode: GradientMode,
    pub nonneg: bool,
}

impl Default for GdParams {
    fn default() -> Self {
        Self {
            n_iter: 20,
            step: None,
            mode: GradientMode::ExactAdjoint,
            nonneg: true,
        }
    }
}

/// Fixed-step (projected) gradient descent on the fidelity from `f = 0`.
pub fn gradient_descent<T: Real>(
    g: &SensorData<T>,
    op: &KSpaceOperator<T>,
    mask: &SamplingMask,
    p: &GdParams,
) -> Result<(PressureImage<T>, Vec<f64>)> {
    let step = match p.step {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(Error::invalid(format!("step must be > 0, got {s}"))),
        None => {
            let l = estimate_lipschitz(op, mask, 30, 0)?;
            if l <= 0.0 {
                return Ok((PressureImage::zeros(*op.grid()), vec![half_sq(g)]));
            }
            1.0 / l
        }
    };
    let mut f = PressureImage::zeros(*op.grid());
    let mut r = op.residual(&f, g, mask)?;
    let mut history = vec![half_sq(&r)];
    for _ in 0..p.n_iter {
        let grad = match p.mode {
            GradientMode::ExactAdjoint => op.adjoint(&r)?,
            GradientMode::Backprojection => op.backproject(&r)?,
        };
        f = f.lincomb(T::one(), &grad, T::of(-step))?;
        if p.nonneg {
            f = f.map(|v| v.max(T::zero()));
        }
        r = op.residual(&f, g, mask)?;
        history.push(half_sq(&r));
    }
    Ok((f, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::mask::{apply_mask, generate_beam_mask};
    use crate::metrics::relative_l2;
    use crate::phantom;
    use crate::recon::exchange::{update_path, CommandRunner};
    use std::path::Path;

    fn setup() -> (Grid, KSpaceOperator<f64>, SamplingMask, SensorData<f64>) {
        let grid = Grid::square_2d(24, 40, 1e-4, 1500.0).unwrap();
        let op = KSpaceOperator::for_grid(&grid, 1.2).unwrap();
        let mask = generate_beam_mask(24, 1, 6, 2, 4).unwrap();
        let truth = phantom::disks::<f64>(&grid, 2, 5);
        let data = apply_mask(&op.forward(&truth).unwrap(), &mask).unwrap();
        (grid, op, mask, data)
    }

    #[test]
    fn identity_updates_leave_backprojection_untouched() {
        let (_, op, mask, data) = setup();
        let ups = vec![UpdateOperator::Identity; 5];
        let (f, states) = learned_reconstruct(&data, &op, &mask, &ups).unwrap();
        assert_eq!(f, op.backproject(&data).unwrap());
        assert_eq!(states.len(), 6);
        for s in &states {
            assert_eq!(s.objective_history.len(), s.k + 1);
        }
    }

    #[test]
    fn gradient_steps_are_gradient_descent() {
        let (_, op, mask, data) = setup();
        let tau = 0.5 / estimate_lipschitz(&op, &mask, 30, 1).unwrap();
        for n in [1, 3, 5] {
            let ups = vec![UpdateOperator::GradientStep(tau); n];
            let (f, _) = learned_reconstruct(&data, &op, &mask, &ups).unwrap();
            let mut x = op.backproject(&data).unwrap();
            for _ in 0..n {
                let grad = op
                    .gradient(&x, &data, &mask, GradientMode::Backprojection)
                    .unwrap();
                x = x.lincomb(1.0, &grad, -tau).unwrap();
            }
            assert!(relative_l2(f.values(), x.values()) <= 1e-12);
        }
    }

    #[test]
    fn empty_or_misindexed_updates_are_rejected() {
        let (_, op, mask, data) = setup();
        assert!(learned_reconstruct(&data, &op, &mask, &[]).is_err());
        let dir = tempfile::tempdir().unwrap();
        let ext = |k: usize, weights: &Path| {
            UpdateOperator::External(ExternalUpdate {
                k,
                weights: weights.to_path_buf(),
                exchange_dir: dir.path().to_path_buf(),
                runner: Arc::new(CommandRunner {
                    program: "true".into(),
                    args: vec![],
                }),
            })
        };
        let missing = dir.path().join("nope.bin");
        match learned_reconstruct(
            &data,
            &op,
            &mask,
            &[UpdateOperator::Identity, ext(1, &missing)],
        ) {
            Err(Error::Update { k: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let w = dir.path().join("w.bin");
        std::fs::write(&w, b"w").unwrap();
        match learned_reconstruct(&data, &op, &mask, &[ext(2, &w)]) {
            Err(Error::Update { k: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        // runner succeeds but never writes the update
        match learned_reconstruct(&data, &op, &mask, &[UpdateOperator::Identity, ext(1, &w)]) {
            Err(Error::Update { k: 1, reason }) => assert!(reason.contains("f_next_1")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[cfg(unix)]
    #[test]
    fn external_update_goes_through_files() {
        let (grid, op, mask, data) = setup();
        let dir = tempfile::tempdir().unwrap();
        let w = dir.path().join("w.bin");
        std::fs::write(&w, b"w").unwrap();
        let exchange = dir.path().join("iterates").join("s0");
        let runner = Arc::new(CommandRunner {
            program: "sh".into(),
            args: vec![
                "-c".into(),
                "cp {dir}/f_{k}.npy {dir}/f_next_{k}.npy".into(),
            ],
        });
        let ups: Vec<_> = (0..2)
            .map(|k| {
                UpdateOperator::External(ExternalUpdate {
                    k,
                    weights: w.clone(),
                    exchange_dir: exchange.clone(),
                    runner: runner.clone(),
                })
            })
            .collect();
        let (f, _) = learned_reconstruct(&data, &op, &mask, &ups).unwrap();
        assert_eq!(f, op.backproject(&data).unwrap());
        assert!(update_path(&exchange, 1).exists());

        // wrong shape from the external side
        let bad = CommandRunner {
            program: "sh".into(),
            args: vec!["-c".into(), "true".into()],
        };
        crate::npy::write(
            &update_path(&exchange, 0),
            &ndarray::Array3::<f64>::zeros((3, 1, 3)),
        )
        .unwrap();
        let ups = vec![UpdateOperator::External(ExternalUpdate {
            k: 0,
            weights: w,
            exchange_dir: exchange,
            runner: Arc::new(bad),
        })];
        match learned_reconstruct(&data, &op, &mask, &ups) {
            Err(Error::Update { k: 0, reason }) => assert!(reason.contains("shape")),
            other => panic!("unexpected {other:?}"),
        }
        let _ = grid;
    }

    #[test]
    fn gradient_descent_decreases_fidelity() {
        let (_, op, mask, data) = setup();
        let (f, h) = gradient_descent(&data, &op, &mask, &GdParams::default()).unwrap();
        assert_eq!(h.len(), 21);
        assert!(h[20] < 0.5 * h[0]);
        assert!(f.min() >= 0.0);
    }
}

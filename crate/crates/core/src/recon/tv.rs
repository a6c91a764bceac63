//! Total-variation regularised reconstruction.
//!
//! Minimises `1/2 ||M A f - g||^2 + alpha TV(f)` over `f` in a convex set
//! (non-negative if requested, zero on the detector plane) with monotone
//! FISTA. The TV proximal map is solved by fast dual projected gradient.

use ndarray::{s, Array3, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{PressureImage, SensorData};
use crate::kspace::KSpaceOperator;
use crate::mask::{apply_mask, SamplingMask};
use crate::metrics::psnr;
use crate::real::Real;

const SHRINK: f64 = 0.5;
const MAX_SHRINKS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TVParams {
    pub alpha: f64,
    pub n_outer: usize,
    pub n_inner: usize,
    /// Initial step; `None` uses the inverse of a power-iteration estimate of
    /// `||M A||^2`.
    pub step: Option<f64>,
    pub nonneg: bool,
    /// Nesterov momentum; off gives a monotone proximal gradient method.
    pub accelerate: bool,
}

impl Default for TVParams {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            n_outer: 20,
            n_inner: 20,
            step: None,
            nonneg: true,
            accelerate: true,
        }
    }
}

impl TVParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if self.n_outer == 0 {
            return Err(Error::invalid("n_outer must be >= 1"));
        }
        if let Some(s) = self.step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("step must be > 0, got {s}")));
            }
        }
        Ok(())
    }
}

/// Isotropic total variation with forward differences and Neumann boundaries.
pub fn total_variation<T: Real>(x: &Array3<T>) -> f64 {
    let d = grad(x);
    let mut mag = Array3::<f64>::zeros(x.raw_dim());
    for da in &d {
        Zip::from(&mut mag)
            .and(da)
            .for_each(|m, &v| *m += v.as_f64() * v.as_f64());
    }
    mag.iter().map(|v| v.sqrt()).sum()
}

fn active_axes(shape: &[usize]) -> Vec<usize> {
    (0..3).filter(|&a| shape[a] > 1).collect()
}

fn grad<T: Real>(x: &Array3<T>) -> Vec<Array3<T>> {
    active_axes(x.shape())
        .into_iter()
        .map(|a| {
            let n = x.len_of(Axis(a));
            let mut d = Array3::zeros(x.raw_dim());
            let hi = x.slice_axis(Axis(a), (1..n).into());
            let lo = x.slice_axis(Axis(a), (0..n - 1).into());
            Zip::from(d.slice_axis_mut(Axis(a), (0..n - 1).into()))
                .and(&hi)
                .and(&lo)
                .for_each(|o, &h, &l| *o = h - l);
            d
        })
        .collect()
}

/// Adjoint of [`grad`], i.e. minus the divergence.
fn grad_t<T: Real>(p: &[Array3<T>], shape: &[usize]) -> Array3<T> {
    let mut out = Array3::zeros((shape[0], shape[1], shape[2]));
    for (pa, a) in p.iter().zip(active_axes(shape)) {
        let n = shape[a];
        let head = pa.slice_axis(Axis(a), (0..n - 1).into());
        Zip::from(out.slice_axis_mut(Axis(a), (1..n).into()))
            .and(&head)
            .for_each(|o, &v| *o += v);
        Zip::from(out.slice_axis_mut(Axis(a), (0..n - 1).into()))
            .and(&head)
            .for_each(|o, &v| *o -= v);
    }
    out
}

fn project_set<T: Real>(x: &mut Array3<T>, nonneg: bool) {
    x.slice_mut(s![.., .., 0]).fill(T::zero());
    if nonneg {
        x.mapv_inplace(|v| v.max(T::zero()));
    }
}

/// `argmin_x 1/2 ||x - b||^2 + lambda TV(x)` over the constraint set, by fast
/// gradient projection on the dual.
pub fn tv_prox<T: Real>(b: &Array3<T>, lambda: f64, n_inner: usize, nonneg: bool) -> Array3<T> {
    let shape = b.shape().to_vec();
    let mut x = b.clone();
    let axes = active_axes(&shape);
    if lambda == 0.0 || n_inner == 0 || axes.is_empty() {
        project_set(&mut x, nonneg);
        return x;
    }
    let lam = T::of(lambda);
    let tau = T::of(1.0 / (4.0 * axes.len() as f64 * lambda));
    let zero = || vec![Array3::<T>::zeros(b.raw_dim()); axes.len()];
    let (mut p, mut r) = (zero(), zero());
    let mut t = 1.0f64;
    let primal = |q: &[Array3<T>]| {
        let mut x = b - &(grad_t(q, &shape) * lam);
        project_set(&mut x, nonneg);
        x
    };
    for _ in 0..n_inner {
        x = primal(&r);
        let d = grad(&x);
        let mut next: Vec<Array3<T>> = r.iter().zip(&d).map(|(ra, da)| ra + &(da * tau)).collect();
        let mut mag = Array3::<T>::zeros(b.raw_dim());
        for na in &next {
            Zip::from(&mut mag).and(na).for_each(|m, &v| *m += v * v);
        }
        mag.mapv_inplace(|m| m.sqrt().max(T::one()));
        for na in &mut next {
            *na /= &mag;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = T::of((t - 1.0) / t_next);
        for ((ra, na), pa) in r.iter_mut().zip(&next).zip(&p) {
            *ra = na + &((na - pa) * beta);
        }
        p = next;
        t = t_next;
    }
    primal(&p)
}

/// Power-iteration estimate of `||M A||^2` (the Lipschitz constant of the
/// fidelity gradient).
pub fn estimate_lipschitz<T: Real>(
    op: &KSpaceOperator<T>,
    mask: &SamplingMask,
    iters: usize,
    seed: u64,
) -> Result<f64> {
    let grid = *op.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = PressureImage::from_fn(grid, |(_, _, k)| {
        if k == 0 {
            T::zero()
        } else {
            T::of(rng.random_range(-1.0..1.0))
        }
    })?;
    let mut est = 0.0;
    for _ in 0..iters.max(1) {
        let n = v.norm().as_f64();
        if n == 0.0 {
            return Ok(0.0);
        }
        v = v.scale(T::of(1.0 / n));
        let w = op.adjoint(&apply_mask(&op.forward(&v)?, mask)?)?;
        est = w.dot(&v)?.as_f64();
        v = w;
    }
    Ok(est)
}

fn half_sq<T: Real>(r: &SensorData<T>) -> f64 {
    0.5 * r
        .values()
        .iter()
        .map(|v| v.as_f64() * v.as_f64())
        .sum::<f64>()
}

/// Reconstructs `f` from masked data `g`; returns the image and the composite
/// objective at the start and after each outer iteration.
pub fn tv_reconstruct<T: Real>(
    g: &SensorData<T>,
    op: &KSpaceOperator<T>,
    mask: &SamplingMask,
    p: &TVParams,
) -> Result<(PressureImage<T>, Vec<f64>)> {
    p.validate()?;
    let grid = *op.grid();
    let nonneg = p.nonneg;
    let mut step = match p.step {
        Some(s) => s,
        None => {
            let l = estimate_lipschitz(op, mask, 30, 0)?;
            if l <= 0.0 {
                return Ok((PressureImage::zeros(grid), vec![half_sq(g)]));
            }
            1.0 / l
        }
    };
    let objective = |x: &PressureImage<T>, fid: f64| fid + p.alpha * total_variation(x.values());

    let mut x = PressureImage::zeros(grid);
    let mut fx = objective(&x, half_sq(&op.residual(&x, g, mask)?));
    let mut history = vec![fx];
    let mut y = x.clone();
    let mut t = 1.0f64;
    for it in 0..p.n_outer {
        let ry = op.residual(&y, g, mask)?;
        let hy = half_sq(&ry);
        let gy = op.adjoint(&ry)?;
        let mut shrinks = 0;
        let (z, fz) = loop {
            let b = y.lincomb(T::one(), &gy, T::of(-step))?;
            let z = PressureImage::from_parts(
                grid,
                tv_prox(b.values(), step * p.alpha, p.n_inner, nonneg),
            );
            let hz = half_sq(&op.residual(&z, g, mask)?);
            let dz = z.sub(&y)?;
            let bound = hy + gy.dot(&dz)?.as_f64() + dz.norm().as_f64().powi(2) / (2.0 * step);
            if hz <= bound * (1.0 + 1e-12) + 1e-300 {
                break (z.clone(), objective(&z, hz));
            }
            shrinks += 1;
            step *= SHRINK;
            if shrinks > MAX_SHRINKS || step == 0.0 {
                return Err(Error::LineSearch {
                    iteration: it,
                    step,
                    history,
                });
            }
        };
        let x_prev = x.clone();
        if fz <= fx {
            x = z.clone();
            fx = fz;
        }
        history.push(fx);
        if p.accelerate {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let a = T::of(t / t_next);
            let b = T::of((t - 1.0) / t_next);
            // y = x + a (z - x) + b (x - x_prev)
            let mut v = x.values().clone();
            Zip::from(&mut v)
                .and(z.values())
                .and(x.values())
                .and(x_prev.values())
                .for_each(|o, &zv, &xv, &pv| *o = xv + a * (zv - xv) + b * (xv - pv));
            y = PressureImage::from_parts(grid, v);
            t = t_next;
        } else {
            y = x.clone();
        }
    }
    Ok((x, history))
}

/// Result of an alpha sweep scored against a known ground truth.
#[derive(Debug, Clone)]
pub struct SweepResult<T> {
    pub best_alpha: f64,
    pub best_psnr: f64,
    pub image: PressureImage<T>,
    pub history: Vec<f64>,
    pub scores: Vec<(f64, f64)>,
}

/// `n` alphas log-spaced over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Runs [`tv_reconstruct`] for each alpha and keeps the best PSNR against `truth`.
pub fn alpha_sweep<T: Real>(
    g: &SensorData<T>,
    op: &KSpaceOperator<T>,
    mask: &SamplingMask,
    base: &TVParams,
    alphas: &[f64],
    truth: &PressureImage<T>,
) -> Result<SweepResult<T>> {
    if alphas.is_empty() {
        return Err(Error::invalid("alpha sweep needs at least one value"));
    }
    let step = match base.step {
        Some(s) => s,
        None => 1.0 / estimate_lipschitz(op, mask, 30, 0)?,
    };
    let mut best: Option<SweepResult<T>> = None;
    let mut scores = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let params = TVParams {
            alpha,
            step: Some(step),
            ..base.clone()
        };
        let (image, history) = tv_reconstruct(g, op, mask, &params)?;
        let score = psnr(&image, truth)?;
        scores.push((alpha, score));
        if best.as_ref().is_none_or(|b| score > b.best_psnr) {
            best = Some(SweepResult {
                best_alpha: alpha,
                best_psnr: score,
                image,
                history,
                scores: Vec::new(),
            });
        }
    }
    let mut best = best.expect("non-empty sweep");
    best.scores = scores;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::metrics::relative_l2;
    use crate::phantom;
    use approx::assert_relative_eq;

    fn random(shape: (usize, usize, usize), seed: u64) -> Array3<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array3::from_shape_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn grad_transpose_is_adjoint() {
        for shape in [(7, 1, 5), (4, 3, 6), (1, 1, 9)] {
            let x = random(shape, 1);
            let p: Vec<_> = (0..active_axes(x.shape()).len())
                .map(|i| random(shape, 10 + i as u64))
                .collect();
            let lhs: f64 = grad(&x).iter().zip(&p).map(|(a, b)| (a * b).sum()).sum();
            let rhs = (&x * &grad_t(&p, x.shape())).sum();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn tv_of_step_edge_counts_jump_times_length() {
        let x = Array3::from_shape_fn((6, 1, 8), |(i, _, _)| if i < 3 { 0.0 } else { 2.0 });
        assert_relative_eq!(total_variation(&x), 2.0 * 8.0, epsilon = 1e-12);
        let flat = Array3::from_elem((5, 2, 5), 3.0);
        assert_eq!(total_variation(&flat), 0.0);
        // isotropic: a diagonal unit step in one voxel
        let mut d = Array3::<f64>::zeros((2, 1, 2));
        d[[0, 0, 0]] = 1.0;
        assert_relative_eq!(total_variation(&d), 2f64.sqrt() + 0.0, epsilon = 1e-12);
    }

    fn prox_objective(x: &Array3<f64>, b: &Array3<f64>, lambda: f64) -> f64 {
        0.5 * (x - b).mapv(|v| v * v).sum() + lambda * total_variation(x)
    }

    #[test]
    fn prox_beats_perturbations_and_respects_constraints() {
        let mut b = random((12, 1, 10), 3);
        b.slice_mut(s![.., .., 0]).fill(0.0);
        let lambda = 0.3;
        let x = tv_prox(&b, lambda, 300, true);
        assert!(x.iter().all(|&v| v >= 0.0));
        assert!(x.slice(s![.., .., 0]).iter().all(|&v| v == 0.0));
        let fx = prox_objective(&x, &b, lambda);
        assert!(fx < prox_objective(&b.mapv(|v| v.max(0.0)), &b, lambda));
        for seed in 0..10 {
            let mut y = &x + &(random(x.dim(), 100 + seed) * 1e-3);
            project_set(&mut y, true);
            assert!(fx <= prox_objective(&y, &b, lambda) + 1e-9);
        }
    }

    #[test]
    fn prox_with_zero_lambda_is_projection() {
        let b = random((5, 1, 6), 4);
        let x = tv_prox(&b, 0.0, 50, true);
        let mut want = b.clone();
        project_set(&mut want, true);
        assert_eq!(x, want);
    }

    #[test]
    fn params_are_validated() {
        assert!(TVParams {
            alpha: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TVParams {
            n_outer: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TVParams {
            step: Some(0.0),
            ..Default::default()
        }
        .validate()
        .is_err());
        assert_eq!(TVParams::default().n_outer, 20);
        assert!(TVParams::default().nonneg);
    }

    fn small() -> (Grid, KSpaceOperator<f64>) {
        let g = Grid::square_2d(24, 40, 1e-4, 1500.0).unwrap();
        (g, KSpaceOperator::for_grid(&g, 1.2).unwrap())
    }

    #[test]
    fn zero_data_gives_zero_image() {
        let (g, op) = small();
        let mask = SamplingMask::full(24, 1);
        let p = TVParams {
            alpha: 0.5,
            ..Default::default()
        };
        let (f, h) = tv_reconstruct(&SensorData::zeros(g), &op, &mask, &p).unwrap();
        assert_eq!(f.norm(), 0.0);
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn alpha_zero_matches_gradient_descent() {
        let (g, op) = small();
        let mask = SamplingMask::full(24, 1);
        let truth = phantom::gaussian_ball::<f64>(&g, [12.0, 0.0, 10.0], 3.0);
        let data = op.forward(&truth).unwrap();
        let step = 0.9 / estimate_lipschitz(&op, &mask, 50, 9).unwrap();
        let p = TVParams {
            alpha: 0.0,
            n_outer: 8,
            step: Some(step),
            nonneg: false,
            accelerate: false,
            ..Default::default()
        };
        let (f, h) = tv_reconstruct(&data, &op, &mask, &p).unwrap();
        let mut x = PressureImage::zeros(g);
        for _ in 0..8 {
            let r = &op.forward(&x).unwrap().into_values() - data.values();
            let grad = op.adjoint(&SensorData::new(g, r).unwrap()).unwrap();
            x = x.lincomb(1.0, &grad, -step).unwrap();
        }
        assert!(relative_l2(f.values(), x.values()) < 1e-8);
        assert!(h.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn history_is_monotone_and_nonneg_holds() {
        let (g, op) = small();
        let mask = crate::mask::generate_beam_mask(24, 1, 6, 2, 1).unwrap();
        let truth = phantom::disks::<f64>(&g, 3, 2);
        let data = apply_mask(&op.forward(&truth).unwrap(), &mask).unwrap();
        let data = crate::noise::add_noise(&data, 10.0, 3).unwrap();
        let alpha = 1e-3 * op.adjoint(&data).unwrap().max();
        let p = TVParams {
            alpha,
            step: Some(1e6),
            ..Default::default()
        };
        let (f, h) = tv_reconstruct(&data, &op, &mask, &p).unwrap();
        assert_eq!(h.len(), 21);
        assert!(h.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs()));
        assert!(h[20] < h[0]);
        assert!(f.min() >= 0.0);
    }

    #[test]
    fn step_underflow_reports_history() {
        let (g, op) = small();
        let mask = SamplingMask::full(24, 1);
        let truth = phantom::gaussian_ball::<f64>(&g, [12.0, 0.0, 10.0], 3.0);
        let data = op.forward(&truth).unwrap();
        let p = TVParams {
            alpha: 1e-6,
            step: Some(1e300),
            ..Default::default()
        };
        match tv_reconstruct(&data, &op, &mask, &p) {
            Err(Error::LineSearch {
                iteration, history, ..
            }) => {
                assert!(iteration < 20);
                assert_eq!(history.len(), iteration + 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn log_grid_endpoints() {
        let a = log_grid(1e-3, 1e1, 5);
        assert_eq!(a.len(), 5);
        assert_relative_eq!(a[0], 1e-3, max_relative = 1e-12);
        assert_relative_eq!(a[2], 1e-1, max_relative = 1e-12);
        assert_relative_eq!(a[4], 1e1, max_relative = 1e-12);
    }
}

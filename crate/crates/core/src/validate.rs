//! Self-checks of the operators and the oracle, reported as JSON.

use std::f64::consts::FRAC_PI_4;
use std::time::Instant;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::field::{PressureImage, SensorData};
use crate::grid::Grid;
use crate::kspace::{
    angle_filter, out_of_window_energy, GradientMode, KSpaceOperator, DEFAULT_OVERSAMPLE,
};
use crate::mask::SamplingMask;
use crate::metrics::{inner, l2_norm, relative_l2};
use crate::phantom;
use crate::reference::{simulate, SpectralPropagator};

pub const SCHEMA_VERSION: u32 = 1;

pub const DOT_TOLERANCE: f64 = 1e-10;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;
pub const ENERGY_TOLERANCE: f64 = 1e-10;
pub const ACCURACY_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub schema_version: u32,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn new(checks: Vec<CheckResult>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }
}

fn random_array(shape: [usize; 3], rng: &mut ChaCha8Rng) -> Array3<f64> {
    Array3::from_shape_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Worst relative dot-product mismatch `|<A x, y> - <x, B y>| / (||A x|| ||y||)`
/// over random trials.
pub fn dot_product_test<F, B>(
    forward: F,
    adjoint: B,
    x_shape: [usize; 3],
    y_shape: [usize; 3],
    trials: usize,
    seed: u64,
) -> f64
where
    F: Fn(&Array3<f64>) -> Array3<f64>,
    B: Fn(&Array3<f64>) -> Array3<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let x = random_array(x_shape, &mut rng);
        let y = random_array(y_shape, &mut rng);
        let ax = forward(&x);
        let by = adjoint(&y);
        let denom = l2_norm(&ax) * l2_norm(&y);
        let err = (inner(&ax, &y) - inner(&x, &by)).abs();
        worst = worst.max(if denom > 0.0 { err / denom } else { err });
    }
    worst
}

/// Dot-product test of the forward model against its adjoint on `grid`.
pub fn check_adjoint(grid: &Grid, theta_max: f64, trials: usize, seed: u64) -> Result<CheckResult> {
    let start = Instant::now();
    let op = KSpaceOperator::<f64>::for_grid(grid, theta_max)?;
    let g = *grid;
    let worst = dot_product_test(
        |x| {
            op.forward(&PressureImage::from_parts(g, x.clone()))
                .unwrap()
                .into_values()
        },
        |y| {
            op.adjoint(&SensorData::from_parts(g, y.clone()))
                .unwrap()
                .into_values()
        },
        g.image_shape(),
        g.data_shape(),
        trials,
        seed,
    );
    let [nx, ny, nz] = g.image_shape();
    Ok(CheckResult {
        name: format!("adjoint_{nx}x{ny}x{nz}"),
        passed: worst <= DOT_TOLERANCE,
        value: worst,
        threshold: DOT_TOLERANCE,
        detail: format!("{trials} trials, n_t = {}", g.n_t),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Central differences of `1/2 ||A f - g||^2` against the exact-adjoint gradient.
pub fn check_gradient(
    grid: &Grid,
    theta_max: f64,
    directions: usize,
    seed: u64,
) -> Result<CheckResult> {
    let start = Instant::now();
    let op = KSpaceOperator::<f64>::for_grid(grid, theta_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = SamplingMask::full(grid.n_x, grid.n_y);
    let f = PressureImage::new(*grid, random_array(grid.image_shape(), &mut rng))?;
    let g = SensorData::new(*grid, random_array(grid.data_shape(), &mut rng))?;
    let obj = |x: &PressureImage<f64>| -> Result<f64> {
        Ok(0.5 * op.residual(x, &g, &mask)?.norm().powi(2))
    };
    let grad = op.gradient(&f, &g, &mask, GradientMode::ExactAdjoint)?;
    let mut worst = 0.0f64;
    for _ in 0..directions {
        let d = PressureImage::new(*grid, random_array(grid.image_shape(), &mut rng))?;
        let h = 1e-3 * f.norm() / d.norm();
        let fd = (obj(&f.lincomb(1.0, &d, h)?)? - obj(&f.lincomb(1.0, &d, -h)?)?) / (2.0 * h);
        let an = grad.dot(&d)?;
        worst = worst.max((fd - an).abs() / an.abs());
    }
    Ok(CheckResult {
        name: "gradient_finite_difference".into(),
        passed: worst <= GRADIENT_TOLERANCE,
        value: worst,
        threshold: GRADIENT_TOLERANCE,
        detail: format!("{directions} directions on {}x{}", grid.n_x, grid.n_z),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Relative energy drift of the periodic spectral propagator over `steps` steps.
pub fn check_energy(grid: &Grid, steps: usize) -> Result<CheckResult> {
    let start = Instant::now();
    let center = [
        grid.n_x as f64 / 2.0,
        grid.n_y as f64 / 2.0 - 0.5,
        grid.n_z as f64 / 3.0,
    ];
    let f = phantom::gaussian_ball::<f64>(grid, center, 2.0);
    let mut prop = SpectralPropagator::new(&f);
    let e0 = prop.energy();
    let mut worst = 0.0f64;
    for _ in 0..steps {
        prop.advance(grid.dt);
        worst = worst.max((prop.energy() - e0).abs() / e0);
    }
    Ok(CheckResult {
        name: "energy_conservation".into(),
        passed: worst <= ENERGY_TOLERANCE,
        value: worst,
        threshold: ENERGY_TOLERANCE,
        detail: format!("{steps} steps"),
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn accuracy_grid() -> Grid {
    Grid::square_2d(128, 128, 1e-4, 1500.0).expect("valid grid")
}

/// In-angle test object for [`check_accuracy`]: a depth-modulated packet whose
/// spectrum sits around 45 degrees.
pub fn accuracy_phantom(grid: &Grid) -> PressureImage<f64> {
    let cx = grid.n_x as f64 / 2.0;
    let cz = (grid.n_z as f64 * 0.3).max(phantom::DETECTOR_MARGIN as f64 + 4.0);
    phantom::depth_wave_packet(grid, [cx, 0.0, cz], [10.0, 1.0, 4.0], FRAC_PI_4)
}

/// Relative error of the fast forward model against the angle-filtered oracle.
pub fn model_error(
    f: &PressureImage<f64>,
    oracle: &SensorData<f64>,
    theta_max: f64,
) -> Result<f64> {
    let approx = KSpaceOperator::<f64>::for_grid(f.grid(), theta_max)?.forward(f)?;
    let reference = angle_filter(oracle, theta_max, DEFAULT_OVERSAMPLE)?;
    Ok(relative_l2(approx.values(), reference.values()))
}

/// Forward model against the oracle at 45 and 80 degrees; passes when the
/// 45 degree error is within tolerance and does not exceed the 80 degree one.
pub fn check_accuracy(grid: &Grid) -> Result<Vec<CheckResult>> {
    let start = Instant::now();
    let f = accuracy_phantom(grid);
    let oracle = simulate(&f)?.full_data;
    let e45 = model_error(&f, &oracle, FRAC_PI_4)?;
    let e80 = model_error(&f, &oracle, 80f64.to_radians())?;
    let seconds = start.elapsed().as_secs_f64();
    Ok(vec![
        CheckResult {
            name: "model_error_45deg".into(),
            passed: e45 <= ACCURACY_TOLERANCE,
            value: e45,
            threshold: ACCURACY_TOLERANCE,
            detail: "relative L2 vs angle-filtered oracle".into(),
            seconds,
        },
        CheckResult {
            name: "model_error_80deg".into(),
            passed: e80 >= e45,
            value: e80,
            threshold: e45,
            detail: "must not be below the 45 degree error".into(),
            seconds,
        },
    ])
}

/// Energy that the fast model wraps past the physical travel window,
/// compared between 45 and 80 degrees.
pub fn check_aliasing(grid: &Grid) -> Result<CheckResult> {
    let start = Instant::now();
    let f = phantom::aliasing_demo::<f64>(grid);
    let t_cut = grid.diagonal_travel_time();
    let energy = |deg: f64| -> Result<f64> {
        let d = KSpaceOperator::<f64>::for_grid(grid, deg.to_radians())?.forward(&f)?;
        Ok(out_of_window_energy(&d, t_cut))
    };
    let (e45, e80) = (energy(45.0)?, energy(80.0)?);
    Ok(CheckResult {
        name: "aliasing_80_vs_45".into(),
        passed: e80 > e45,
        value: e80,
        threshold: e45,
        detail: format!("out-of-window energy beyond t = {t_cut:.3e} s"),
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn aliasing_grid() -> Grid {
    Grid::square_2d(64, 160, 1e-4, 1500.0).expect("valid grid")
}

/// Grids for the adjoint check: 32^2, 64^2, 128^2 and 32^3.
pub fn adjoint_grids() -> Vec<Grid> {
    let mut grids: Vec<Grid> = [32, 64, 128]
        .into_iter()
        .map(|n| Grid::square_2d(n, n, 1e-4, 1500.0).expect("valid grid"))
        .collect();
    grids.push(Grid::with_default_dt(32, 32, 32, 1e-4, 1500.0, 32).expect("valid grid"));
    grids
}

/// Runs every check with its default size.
pub fn run_all() -> Result<ValidationReport> {
    let mut checks = Vec::new();
    for g in adjoint_grids() {
        checks.push(check_adjoint(&g, FRAC_PI_4, 10, 11)?);
    }
    let g64 = Grid::square_2d(64, 64, 1e-4, 1500.0)?;
    checks.push(check_gradient(&g64, FRAC_PI_4, 5, 12)?);
    checks.push(check_energy(&g64.with_n_t(256)?, 256)?);
    checks.extend(check_accuracy(&accuracy_grid())?);
    checks.push(check_aliasing(&aliasing_grid())?);
    Ok(ValidationReport::new(checks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn injected_sign_error_fails_dot_product_test() {
        let g = Grid::square_2d(16, 24, 1e-4, 1500.0).unwrap();
        let op = KSpaceOperator::<f64>::for_grid(&g, 1.0).unwrap();
        let fwd = |x: &Array3<f64>| {
            op.forward(&PressureImage::from_parts(g, x.clone()))
                .unwrap()
                .into_values()
        };
        let adj = |y: &Array3<f64>| {
            op.adjoint(&SensorData::from_parts(g, y.clone()))
                .unwrap()
                .into_values()
        };
        let good = dot_product_test(fwd, adj, g.image_shape(), g.data_shape(), 3, 0);
        assert!(good <= DOT_TOLERANCE);
        let flipped = |y: &Array3<f64>| -adj(y);
        let bad = dot_product_test(fwd, flipped, g.image_shape(), g.data_shape(), 3, 0);
        assert!(bad > DOT_TOLERANCE);
    }

    #[test]
    fn small_checks_pass() {
        let g = Grid::square_2d(24, 32, 1e-4, 1500.0).unwrap();
        assert!(check_adjoint(&g, 1.0, 2, 0).unwrap().passed);
        assert!(check_gradient(&g, 1.0, 2, 0).unwrap().passed);
        assert!(check_energy(&g, 64).unwrap().passed);
    }

    #[test]
    fn report_serializes_with_schema_version() {
        let r = ValidationReport::new(vec![CheckResult {
            name: "x".into(),
            passed: false,
            value: 1.0,
            threshold: 0.5,
            detail: String::new(),
            seconds: 0.0,
        }]);
        assert!(!r.passed);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["checks"][0]["name"], "x");
    }
}

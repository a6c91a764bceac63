use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::field::{PressureImage, SensorData};
use crate::grid::Grid;
use crate::mask::{generate_beam_mask, SamplingMask};
use crate::metrics::{inner, l2_norm, relative_l2};
use crate::phantom;
use crate::reference::simulate;

fn random_image(grid: &Grid, rng: &mut ChaCha8Rng) -> PressureImage<f64> {
    PressureImage::from_fn(*grid, |(_, _, k)| {
        if k == 0 {
            0.0
        } else {
            rng.random_range(-1.0..1.0)
        }
    })
    .unwrap()
}

fn random_data(grid: &Grid, rng: &mut ChaCha8Rng) -> SensorData<f64> {
    SensorData::from_fn(*grid, |_| rng.random_range(-1.0..1.0)).unwrap()
}

fn dot_test(grid: &Grid, theta: f64, trials: usize) -> f64 {
    let op = KSpaceOperator::<f64>::for_grid(grid, theta).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let f = random_image(grid, &mut rng);
        let g = random_data(grid, &mut rng);
        let af = op.forward(&f).unwrap();
        let atg = op.adjoint(&g).unwrap();
        let lhs = inner(af.values(), g.values());
        let rhs = inner(f.values(), atg.values());
        let rel = (lhs - rhs).abs() / (l2_norm(af.values()) * l2_norm(g.values()));
        worst = worst.max(rel);
    }
    worst
}

#[test]
fn adjoint_passes_dot_product_test_2d() {
    for n in [16, 32] {
        let g = Grid::square_2d(n, 2 * n, 1e-4, 1500.0).unwrap();
        for theta in [PI / 4.0, 80f64.to_radians(), PI / 2.0] {
            let e = dot_test(&g, theta, 4);
            assert!(e < 1e-12, "n {n} theta {theta}: {e:e}");
        }
    }
}

#[test]
fn adjoint_passes_dot_product_test_3d_and_odd_sizes() {
    let g = Grid::with_default_dt(9, 6, 7, 1e-4, 1500.0, 11).unwrap();
    assert!(dot_test(&g, 1.0, 3) < 1e-12);
    let g = Grid::new(12, 1, 10, 1e-4, 1500.0, 17, 0.7e-4 / 1500.0).unwrap();
    assert!(dot_test(&g, 1.3, 3) < 1e-12);
    let w = SpectralWeights::<f64>::build_with(&g, 1.3, 1, Interpolation::Nearest).unwrap();
    let op = KSpaceOperator::new(w).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = random_image(&g, &mut rng);
    let d = random_data(&g, &mut rng);
    let lhs = inner(op.forward(&f).unwrap().values(), d.values());
    let rhs = inner(f.values(), op.adjoint(&d).unwrap().values());
    assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
}

#[test]
fn operators_are_linear() {
    let g = Grid::square_2d(24, 40, 1e-4, 1500.0).unwrap();
    let op = KSpaceOperator::<f64>::for_grid(&g, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (f1, f2) = (random_image(&g, &mut rng), random_image(&g, &mut rng));
    let (g1, g2) = (random_data(&g, &mut rng), random_data(&g, &mut rng));
    let (a, b) = (0.7, -2.3);
    let lhs = op.forward(&f1.lincomb(a, &f2, b).unwrap()).unwrap();
    let rhs = op
        .forward(&f1)
        .unwrap()
        .lincomb(a, &op.forward(&f2).unwrap(), b)
        .unwrap();
    assert!(relative_l2(lhs.values(), rhs.values()) < 1e-12);
    for apply in [
        |op: &KSpaceOperator<f64>, d: &SensorData<f64>| op.adjoint(d).unwrap(),
        |op: &KSpaceOperator<f64>, d: &SensorData<f64>| op.backproject(d).unwrap(),
    ] {
        let lhs = apply(&op, &g1.lincomb(a, &g2, b).unwrap());
        let rhs = apply(&op, &g1).lincomb(a, &apply(&op, &g2), b).unwrap();
        assert!(relative_l2(lhs.values(), rhs.values()) < 1e-12);
    }
    // zero maps to zero
    assert_eq!(op.forward(&PressureImage::zeros(g)).unwrap().norm(), 0.0);
    assert_eq!(op.adjoint(&SensorData::zeros(g)).unwrap().norm(), 0.0);
    assert_eq!(op.backproject(&SensorData::zeros(g)).unwrap().norm(), 0.0);
    let twice = op.forward(&f1.scale(2.0)).unwrap();
    assert!(relative_l2(twice.values(), op.forward(&f1).unwrap().scale(2.0).values()) < 1e-14);
}

#[test]
fn zero_weights_annihilate() {
    let g = Grid::square_2d(16, 24, 1e-4, 1500.0).unwrap();
    let w = SpectralWeights::<f64>::build(&g, 1.0).unwrap().zeroed();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let d = random_data(&g, &mut rng);
    assert_eq!(adjoint_project(&d, &w).unwrap().norm(), 0.0);
    assert_eq!(
        forward_project(&random_image(&g, &mut rng), &w)
            .unwrap()
            .norm(),
        0.0
    );
}

#[test]
fn shape_mismatch_is_rejected() {
    let g = Grid::square_2d(16, 24, 1e-4, 1500.0).unwrap();
    let other = Grid::square_2d(12, 24, 1e-4, 1500.0).unwrap();
    let op = KSpaceOperator::<f64>::for_grid(&g, 1.0).unwrap();
    assert!(op.forward(&PressureImage::zeros(other)).is_err());
    assert!(op.adjoint(&SensorData::zeros(other)).is_err());
    assert!(op.backproject(&SensorData::zeros(other)).is_err());
}

#[test]
fn normal_incidence_round_trip_is_identity() {
    let g = Grid::square_2d(32, 64, 1e-4, 1500.0).unwrap();
    let f = PressureImage::from_fn(g, |(_, _, k)| {
        if k == 0 {
            0.0
        } else {
            (-(k as f64 - 14.0).powi(2) / 6.0).exp()
                + 0.3 * (-(k as f64 - 22.0).powi(2) / 2.0).exp()
        }
    })
    .unwrap();
    let op = KSpaceOperator::<f64>::for_grid(&g, PI / 4.0).unwrap();
    let back = op.backproject(&op.forward(&f).unwrap()).unwrap();
    let e = relative_l2(back.values(), f.values());
    assert!(e < 1e-3, "plane-wave round trip error {e:e}");
}

#[test]
fn exact_gradient_matches_finite_differences() {
    let g = Grid::square_2d(20, 36, 1e-4, 1500.0).unwrap();
    let op = KSpaceOperator::<f64>::for_grid(&g, 1.2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mask = generate_beam_mask(20, 1, 4, 2, 3).unwrap();
    let f = random_image(&g, &mut rng);
    let data = crate::mask::apply_mask(&random_data(&g, &mut rng), &mask).unwrap();
    let obj = |x: &PressureImage<f64>| 0.5 * op.residual(x, &data, &mask).unwrap().norm().powi(2);
    let grad = op
        .gradient(&f, &data, &mask, GradientMode::ExactAdjoint)
        .unwrap();
    for _ in 0..3 {
        let d = random_image(&g, &mut rng);
        let h = 1e-4;
        let fd = (obj(&f.lincomb(1.0, &d, h).unwrap()) - obj(&f.lincomb(1.0, &d, -h).unwrap()))
            / (2.0 * h);
        let an = grad.dot(&d).unwrap();
        assert!((fd - an).abs() <= 1e-6 * an.abs(), "{fd} vs {an}");
    }
}

#[test]
fn consistent_data_gives_zero_backprojection_gradient() {
    let g = Grid::square_2d(16, 24, 1e-4, 1500.0).unwrap();
    let op = KSpaceOperator::<f64>::for_grid(&g, 1.0).unwrap();
    let f = phantom::gaussian_ball::<f64>(&g, [8.0, 0.0, 9.0], 2.0);
    let full = SamplingMask::full(16, 1);
    let data = op.forward(&f).unwrap();
    let grad = op
        .gradient(&f, &data, &full, GradientMode::Backprojection)
        .unwrap();
    assert_eq!(grad.norm(), 0.0);
    let zero = op
        .gradient(
            &PressureImage::zeros(g),
            &SensorData::zeros(g),
            &full,
            GradientMode::ExactAdjoint,
        )
        .unwrap();
    assert_eq!(zero.norm(), 0.0);
    assert!("sideways".parse::<GradientMode>().is_err());
    assert_eq!(
        "exact-adjoint".parse::<GradientMode>().unwrap(),
        GradientMode::ExactAdjoint
    );
}

#[test]
fn single_precision_agrees_with_double() {
    let g = Grid::square_2d(32, 48, 1e-4, 1500.0).unwrap();
    let f64_img = phantom::gaussian_ball::<f64>(&g, [16.0, 0.0, 14.0], 3.0);
    let f32_img = phantom::gaussian_ball::<f32>(&g, [16.0, 0.0, 14.0], 3.0);
    let a = KSpaceOperator::<f64>::for_grid(&g, 1.0)
        .unwrap()
        .forward(&f64_img)
        .unwrap();
    let b = KSpaceOperator::<f32>::for_grid(&g, 1.0)
        .unwrap()
        .forward(&f32_img)
        .unwrap();
    let b64 = b.values().mapv(|v| v as f64);
    assert!(relative_l2(&b64, a.values()) < 1e-4);
}

fn packet_grid() -> Grid {
    Grid::square_2d(128, 128, 1e-4, 1500.0).unwrap()
}

fn packet() -> PressureImage<f64> {
    phantom::depth_wave_packet(
        &packet_grid(),
        [64.0, 0.0, 40.0],
        [10.0, 1.0, 4.0],
        PI / 4.0,
    )
}

#[test]
fn forward_model_matches_oracle_within_angle() {
    let g = packet_grid();
    let theta = PI / 4.0;
    let f = packet();
    let oracle = simulate(&f).unwrap().full_data;
    let reference = angle_filter(&oracle, theta, DEFAULT_OVERSAMPLE).unwrap();
    let approx = KSpaceOperator::<f64>::for_grid(&g, theta)
        .unwrap()
        .forward(&f)
        .unwrap();
    let e = relative_l2(approx.values(), reference.values());
    let e_raw = relative_l2(approx.values(), oracle.values());
    println!("forward vs filtered oracle: {e:.4}, vs raw oracle {e_raw:.4}");
    assert!(e <= 0.05, "relative error {e}");
}

#[test]
fn backprojection_round_trip_recovers_in_angle_phantom() {
    let g = packet_grid();
    let f = packet();
    let op = KSpaceOperator::<f64>::for_grid(&g, PI / 4.0).unwrap();
    let back = op.backproject(&op.forward(&f).unwrap()).unwrap();
    let e = relative_l2(back.values(), f.values());
    println!("round trip error {e:.4}");
    assert!(e <= 0.10, "relative error {e}");
}

#[test]
fn wider_angle_aliases_more() {
    let g = Grid::square_2d(64, 160, 1e-4, 1500.0).unwrap();
    let f = phantom::aliasing_demo::<f64>(&g);
    let t_cut = g.diagonal_travel_time();
    let energy = |deg: f64| {
        let d = KSpaceOperator::<f64>::for_grid(&g, deg.to_radians())
            .unwrap()
            .forward(&f)
            .unwrap();
        (
            out_of_window_energy(&d, t_cut),
            out_of_window_energy(&d, t_cut) / d.norm().powi(2),
        )
    };
    let (e45, r45) = energy(45.0);
    let (e80, r80) = energy(80.0);
    println!("out-of-window energy 45: {e45:e} ({r45:e}), 80: {e80:e} ({r80:e})");
    assert!(e80 > e45);
}

//! Image quality and vector-space helpers.

use ndarray::{ArrayBase, Data, Dimension, Zip};

use crate::error::{Error, Result};
use crate::field::PressureImage;
use crate::real::Real;

/// Peak signal-to-noise ratio in decibels, `20 log10(max(ref) / rmse)`.
///
/// Returns `f64::INFINITY` when the images are identical.
pub fn psnr<T: Real>(x: &PressureImage<T>, reference: &PressureImage<T>) -> Result<f64> {
    x.check_same(reference)?;
    let peak = reference.max().as_f64();
    if reference.values().iter().all(|v| v.is_zero()) {
        return Err(Error::invalid("PSNR reference is identically zero"));
    }
    if peak <= 0.0 {
        return Err(Error::invalid("PSNR reference has no positive peak"));
    }
    let n = x.values().len() as f64;
    let sse = Zip::from(x.values())
        .and(reference.values())
        .fold(0.0f64, |acc, &a, &b| {
            let d = (a - b).as_f64();
            acc + d * d
        });
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let rmse = (sse / n).sqrt();
    Ok(20.0 * (peak / rmse).log10())
}

/// `||a - b|| / ||b||`, accumulated in double precision.
pub fn relative_l2<T, S1, S2, D>(a: &ArrayBase<S1, D>, b: &ArrayBase<S2, D>) -> f64
where
    T: Real,
    S1: Data<Elem = T>,
    S2: Data<Elem = T>,
    D: Dimension,
{
    let (num, den) = Zip::from(a)
        .and(b)
        .fold((0.0f64, 0.0f64), |(n, d), &x, &y| {
            let diff = (x - y).as_f64();
            (n + diff * diff, d + y.as_f64() * y.as_f64())
        });
    (num / den).sqrt()
}

pub fn inner<T, S1, S2, D>(a: &ArrayBase<S1, D>, b: &ArrayBase<S2, D>) -> f64
where
    T: Real,
    S1: Data<Elem = T>,
    S2: Data<Elem = T>,
    D: Dimension,
{
    Zip::from(a)
        .and(b)
        .fold(0.0f64, |acc, &x, &y| acc + x.as_f64() * y.as_f64())
}

pub fn l2_norm<T, S, D>(a: &ArrayBase<S, D>) -> f64
where
    T: Real,
    S: Data<Elem = T>,
    D: Dimension,
{
    a.iter()
        .map(|v| v.as_f64() * v.as_f64())
        .sum::<f64>()
        .sqrt()
}

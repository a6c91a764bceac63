use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::field::SensorData;
use crate::real::Real;

/// Adds i.i.d. Gaussian noise at amplitude signal-to-noise ratio `target_snr`.
///
/// The noise standard deviation is `||g|| / (target_snr * sqrt(n))`, so the
/// expected ratio `||g|| / ||noise||` equals `target_snr`. An infinite ratio
/// returns `g` unchanged.
pub fn add_noise<T: Real>(g: &SensorData<T>, target_snr: f64, seed: u64) -> Result<SensorData<T>> {
    if target_snr.is_nan() || target_snr <= 0.0 {
        return Err(Error::invalid(format!(
            "target SNR must be positive, got {target_snr}"
        )));
    }
    let norm = g.norm().as_f64();
    if norm == 0.0 {
        return Err(Error::invalid("SNR is undefined for identically zero data"));
    }
    if target_snr.is_infinite() {
        return Ok(g.clone());
    }
    let n = g.values().len() as f64;
    let sigma = norm / (target_snr * n.sqrt());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = g.values().mapv(|v| {
        let z: f64 = StandardNormal.sample(&mut rng);
        v + T::of(sigma * z)
    });
    SensorData::new(*g.grid(), noisy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn data() -> SensorData<f64> {
        let g = Grid::with_default_dt(64, 1, 8, 1.0, 1.0, 200).unwrap();
        SensorData::from_fn(g, |(i, _, t)| ((i * 7 + t) as f64 * 0.37).sin() + 0.2).unwrap()
    }

    #[test]
    fn realizes_amplitude_snr() {
        let g = data();
        assert!(g.values().len() >= 10_000);
        for seed in 0..5 {
            let noisy = add_noise(&g, 10.0, seed).unwrap();
            let eta = noisy.sub(&g).unwrap();
            let snr = g.norm() / eta.norm();
            assert!((9.5..=10.5).contains(&snr), "seed {seed}: snr {snr}");
        }
    }

    #[test]
    fn deterministic_and_seed_dependent() {
        let g = data();
        assert_eq!(
            add_noise(&g, 20.0, 3).unwrap(),
            add_noise(&g, 20.0, 3).unwrap()
        );
        assert_ne!(
            add_noise(&g, 20.0, 3).unwrap(),
            add_noise(&g, 20.0, 4).unwrap()
        );
    }

    #[test]
    fn infinite_snr_is_noiseless() {
        let g = data();
        assert_eq!(add_noise(&g, f64::INFINITY, 1).unwrap(), g);
        let tiny = add_noise(&g, 1e12, 1).unwrap().sub(&g).unwrap().norm();
        assert!(tiny < 1e-9 * g.norm());
    }

    #[test]
    fn rejects_zero_data_and_bad_snr() {
        let z = SensorData::<f64>::zeros(*data().grid());
        assert!(matches!(
            add_noise(&z, 10.0, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(add_noise(&data(), 0.0, 0).is_err());
        assert!(add_noise(&data(), -1.0, 0).is_err());
    }
}

//! Synthetic datasets.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// `n` points uniform on the unit `d`-sphere occupying coordinates
/// `0..=d` of `R^D`; every other coordinate is exactly zero.
///
/// Uniformity comes from normalizing standard Gaussian vectors in `R^{d+1}`.
pub fn sample_sphere(d: usize, ambient: usize, n: usize, seed: u64) -> Result<PointCloud> {
    if d >= ambient {
        return Err(Error::Domain(format!(
            "sphere dimension {d} must be below ambient dimension {ambient}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut data = vec![0.0; n * ambient];
    for row in data.chunks_exact_mut(ambient) {
        loop {
            let mut sq = 0.0f64;
            for v in row.iter_mut().take(d + 1) {
                *v = rng.sample(StandardNormal);
                sq += *v * *v;
            }
            if sq > 1e-300 {
                let n = sq.sqrt();
                row.iter_mut().take(d + 1).for_each(|v| *v /= n);
                break;
            }
        }
    }
    PointCloud::new(ambient, data)
}

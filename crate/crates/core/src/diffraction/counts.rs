//! Shot-noise photon counting over a detector grid.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::image::{polar_angle, DiffractionImage, ImageData, ImageMode};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Relative detection weight of each pixel: intensity times the solid angle
/// `dΩ ∝ dk_x dk_y / cos θ` it subtends.
pub fn pixel_weights(image: &DiffractionImage) -> Result<Vec<f64>> {
    let values = image
        .intensities()
        .ok_or_else(|| Error::domain("image", "photon counting needs an intensity image"))?;
    Ok(values
        .iter()
        .zip(image.grid.points())
        .map(|(&v, k)| v / polar_angle(k, image.k0).cos())
        .collect())
}

/// Multinomial draw of `total_photons` over the pixels of an intensity image.
///
/// The draw is a pure function of `(image, total_photons, rng_seed)`.
/// Sparse budgets sample photon by photon from the cumulative weights;
/// dense budgets use sequential conditional binomials. Both are exact
/// multinomial samplers.
pub fn photon_counts(
    image: &DiffractionImage,
    total_photons: u64,
    rng_seed: u64,
) -> Result<DiffractionImage> {
    let weights = pixel_weights(image)?;
    let counts = multinomial(&weights, total_photons, rng_seed)?;
    Ok(DiffractionImage {
        data: ImageData::Counts(counts),
        mode: ImageMode::Counts,
        ..image.clone()
    })
}

/// Multinomial sample with probabilities proportional to `weights`.
pub fn multinomial(weights: &[f64], total: u64, rng_seed: u64) -> Result<Vec<u64>> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::domain(
            "pixel weights",
            "must be finite and nonnegative",
        ));
    }
    let mut counts = vec![0u64; weights.len()];
    if total == 0 {
        return Ok(counts);
    }
    let wsum: f64 = weights.iter().sum();
    if !(wsum > 0.0) {
        return Err(Error::domain(
            "image",
            format!("all-zero intensity cannot host {total} photons"),
        ));
    }
    let mut rng = rng_from_seed(rng_seed);
    if (total as usize) < weights.len() / 4 {
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in weights {
            acc += w;
            cdf.push(acc);
        }
        for _ in 0..total {
            let u = rng.random::<f64>() * acc;
            // first pixel whose cumulative weight exceeds u; never a zero-weight pixel
            let i = cdf.partition_point(|&c| c <= u);
            counts[i.min(weights.len() - 1)] += 1;
        }
    } else {
        let mut remaining = total;
        let mut rest = wsum;
        for (c, &w) in counts.iter_mut().zip(weights) {
            if remaining == 0 {
                break;
            }
            if w <= 0.0 {
                continue;
            }
            let p = (w / rest).clamp(0.0, 1.0);
            let k = if p >= 1.0 {
                remaining
            } else {
                Binomial::new(remaining, p)
                    .map_err(|e| Error::Numerical(format!("binomial draw: {e}")))?
                    .sample(&mut rng)
            };
            *c = k;
            remaining -= k;
            rest -= w;
        }
        if remaining > 0 {
            // rounding left the tail weight slightly short
            let last = weights
                .iter()
                .rposition(|&w| w > 0.0)
                .expect("positive weight exists");
            counts[last] += remaining;
        }
    }
    Ok(counts)
}

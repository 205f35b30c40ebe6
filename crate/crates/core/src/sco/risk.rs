use rand::Rng;

use super::data::DataPoint;
use super::loss::ConvexLoss;
use crate::error::{Error, Result};

/// A distribution over data points.
pub trait DataSampler<X> {
    fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> DataPoint<X>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub num_samples: usize,
}

/// Monte Carlo estimate of `E[ℓ(w, z) - ℓ(reference, z)]` over i.i.d. draws
/// from `sampler`, with its standard error.
pub fn excess_risk_montecarlo<X, F, S, R>(
    w: &[f64],
    sampler: &S,
    loss: &F,
    num_samples: usize,
    reference_w: &[f64],
    rng: &mut R,
) -> Result<RiskEstimate>
where
    F: ConvexLoss<X> + ?Sized,
    S: DataSampler<X> + ?Sized,
    R: Rng + ?Sized,
{
    if num_samples == 0 {
        return Err(Error::InvalidParams("need at least one Monte Carlo sample".into()));
    }
    for v in [w, reference_w] {
        if v.len() != loss.dimension() {
            return Err(Error::DimensionMismatch {
                expected: loss.dimension(),
                found: v.len(),
            });
        }
    }
    // Welford
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..num_samples {
        let z = sampler.sample_point(rng);
        let diff = loss.value(w, &z.feature, z.label) - loss.value(reference_w, &z.feature, z.label);
        let delta = diff - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (diff - mean);
    }
    let std_error = if num_samples > 1 {
        (m2 / (num_samples - 1) as f64 / num_samples as f64).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(RiskEstimate {
        mean,
        std_error,
        num_samples,
    })
}

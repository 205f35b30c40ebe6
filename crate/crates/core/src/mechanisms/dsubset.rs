use rand::seq::index;
use rand::Rng;

use super::types::{Label, MechanismParams, SanitizedSubset, SubsetMechanism};
use crate::error::{Error, Result};
use crate::numeric::ln_binomial;

const LOG_SPACE_THRESHOLD: usize = 16;

fn subset_size(params: &MechanismParams) -> Result<usize> {
    params.validate()?;
    params
        .subset_size()
        .ok_or_else(|| Error::InvalidParams("d-subset randomizer requires a subset size".into()))
}

/// Subset size `⌈K / (2 e^ε)⌉`, at least 1.
pub fn recommended_subset_size(num_labels: usize, epsilon: f64) -> usize {
    ((num_labels as f64 / (2.0 * epsilon.exp())).ceil() as usize).max(1)
}

/// Marginal inclusion probabilities `(γ_d, ζ_d)` for the true label and for any
/// other label respectively.
pub fn d_subset_inclusion_probabilities(params: &MechanismParams) -> Result<(f64, f64)> {
    let d = subset_size(params)? as f64;
    let k = params.num_labels() as f64;
    let gamma = 1.0 / (1.0 + (-params.epsilon()).exp() * (k - d) / d);
    let zeta = (d - gamma) / (k - 1.0);
    Ok((gamma, zeta))
}

/// Emits a uniformly weighted subset of size `d`, with subsets containing `y`
/// weighted `e^ε` against those that do not.
///
/// Sampled in two stages: `y` is included with probability `γ_d`, then the
/// remaining slots are filled uniformly without replacement from `[K] \ {y}`.
/// Within each class (contains `y` or not) every subset is equally likely, so
/// this reproduces the target law exactly.
pub fn d_subset_randomize<R: Rng + ?Sized>(
    y: Label,
    params: &MechanismParams,
    rng: &mut R,
) -> Result<SanitizedSubset> {
    let d = subset_size(params)?;
    let y = params.label(y.value())?;
    let k = params.num_labels();
    let (gamma, _) = d_subset_inclusion_probabilities(params)?;
    let include_y = rng.random::<f64>() < gamma;
    let fill = if include_y { d - 1 } else { d };
    // positions in [0, K-1) skip over y's index
    let mut indices: Vec<usize> = index::sample(rng, k - 1, fill)
        .into_iter()
        .map(|j| if j >= y.index() { j + 1 } else { j })
        .collect();
    if include_y {
        indices.push(y.index());
    }
    indices.sort_unstable();
    Ok(SanitizedSubset::from_sorted_indices(
        indices,
        k,
        SubsetMechanism::DSubset,
    ))
}

/// Exact probability of emitting `s` on input `y`:
/// `e^ε / (e^ε C(K-1, d-1) + C(K-1, d))` when `y ∈ s`, else `1 / (same)`.
pub fn d_subset_likelihood(s: &SanitizedSubset, y: Label, params: &MechanismParams) -> Result<f64> {
    let d = subset_size(params)?;
    s.check_label_space(params)?;
    if s.len() != d {
        return Err(Error::SubsetSize {
            expected: d,
            found: s.len(),
        });
    }
    let y = params.label(y.value())?;
    let k = params.num_labels();
    let eps = params.epsilon();
    let log_numerator = if s.contains(y) { eps } else { 0.0 };
    if k > LOG_SPACE_THRESHOLD {
        // ln(e^ε a + b) with a = C(K-1, d-1), b = C(K-1, d)
        let (la, lb) = (eps + ln_binomial(k - 1, d - 1), ln_binomial(k - 1, d));
        let hi = la.max(lb);
        let log_norm = hi + ((la - hi).exp() + (lb - hi).exp()).ln();
        Ok((log_numerator - log_norm).exp())
    } else {
        let norm = eps.exp() * crate::numeric::binomial(k - 1, d - 1)
            + crate::numeric::binomial(k - 1, d);
        Ok(log_numerator.exp() / norm)
    }
}

use rand::Rng;

use super::types::{Label, MechanismParams, SanitizedSubset, SubsetMechanism};
use crate::error::{Error, Result};

/// K-ary randomized response: keeps `y` with probability `e^ε / (e^ε + K - 1)`,
/// otherwise reports one of the other `K - 1` labels uniformly.
pub fn krr_randomize<R: Rng + ?Sized>(
    y: Label,
    params: &MechanismParams,
    rng: &mut R,
) -> Result<SanitizedSubset> {
    params.validate()?;
    let y = params.label(y.value())?;
    let k = params.num_labels();
    let e = params.exp_epsilon();
    let keep = e / (e + (k - 1) as f64);
    let index = if rng.random::<f64>() < keep {
        y.index()
    } else {
        let j = rng.random_range(0..k - 1);
        if j >= y.index() {
            j + 1
        } else {
            j
        }
    };
    Ok(SanitizedSubset::from_sorted_indices(
        [index],
        k,
        SubsetMechanism::Krr,
    ))
}

pub fn krr_likelihood(s: &SanitizedSubset, y: Label, params: &MechanismParams) -> Result<f64> {
    params.validate()?;
    s.check_label_space(params)?;
    if s.len() != 1 {
        return Err(Error::SubsetSize {
            expected: 1,
            found: s.len(),
        });
    }
    let y = params.label(y.value())?;
    let e = params.exp_epsilon();
    let denom = e + (params.num_labels() - 1) as f64;
    Ok(if s.contains(y) { e / denom } else { 1.0 / denom })
}

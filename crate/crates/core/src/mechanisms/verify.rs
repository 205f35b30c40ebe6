//! Exhaustive check of the local label-DP likelihood-ratio bound.

use super::types::{Label, MechanismParams, SanitizedSubset, SubsetMechanism};
use crate::error::{Error, Result};
use crate::numeric::binomial;

/// Largest label space enumerated by [`verify_ldp_ratio`] for the subset
/// mechanisms.
pub const MAX_VERIFY_LABELS: usize = 20;

/// Number of distinct outputs the mechanism can emit.
pub fn output_space_size(mechanism: SubsetMechanism, params: &MechanismParams) -> Result<f64> {
    params.validate()?;
    let k = params.num_labels();
    Ok(match mechanism {
        SubsetMechanism::BernoulliSubset => 2f64.powi(k as i32),
        SubsetMechanism::DSubset => {
            let d = params.subset_size().ok_or_else(|| {
                Error::InvalidParams("d-subset randomizer requires a subset size".into())
            })?;
            binomial(k, d)
        }
        SubsetMechanism::Krr => k as f64,
    })
}

/// Every output of the mechanism. Bernoulli subsets are produced in binary
/// counter order (label 1 is the low bit), d-subsets in lexicographic order.
pub fn output_space(
    mechanism: SubsetMechanism,
    params: &MechanismParams,
) -> Result<Box<dyn Iterator<Item = SanitizedSubset>>> {
    params.validate()?;
    let k = params.num_labels();
    match mechanism {
        SubsetMechanism::BernoulliSubset => {
            if k >= 63 {
                return Err(Error::EnumerationGuard {
                    size: 2f64.powi(k as i32),
                    limit: 2f64.powi(62),
                });
            }
            Ok(Box::new((0u64..1u64 << k).map(move |bits| {
                let mask: Vec<bool> = (0..k).map(|i| bits >> i & 1 == 1).collect();
                SanitizedSubset::from_mask(&mask, SubsetMechanism::BernoulliSubset)
            })))
        }
        SubsetMechanism::DSubset => {
            let d = params.subset_size().ok_or_else(|| {
                Error::InvalidParams("d-subset randomizer requires a subset size".into())
            })?;
            Ok(Box::new(Combinations::new(k, d).map(move |c| {
                SanitizedSubset::from_sorted_indices(c, k, SubsetMechanism::DSubset)
            })))
        }
        SubsetMechanism::Krr => Ok(Box::new((0..k).map(move |i| {
            SanitizedSubset::from_sorted_indices([i], k, SubsetMechanism::Krr)
        }))),
    }
}

/// Lexicographic k-combinations of `0..n`.
struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let c = self.current.as_mut().unwrap();
        let k = c.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if c[i] < self.n - k + i {
                c[i] += 1;
                for j in i + 1..k {
                    c[j] = c[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// `max_{s, y, y'} P[s | y] / P[s | y']` over the given outputs and labels.
///
/// Outputs that are impossible under every label are skipped. An output that
/// is possible under some label but impossible under another yields `+∞`.
pub fn max_likelihood_ratio<I, F>(outputs: I, labels: &[Label], mut likelihood: F) -> Result<f64>
where
    I: IntoIterator<Item = SanitizedSubset>,
    F: FnMut(&SanitizedSubset, Label) -> Result<f64>,
{
    let mut worst = 1.0f64;
    for s in outputs {
        let mut hi = 0.0f64;
        let mut lo = f64::INFINITY;
        for &y in labels {
            let p = likelihood(&s, y)?;
            hi = hi.max(p);
            lo = lo.min(p);
        }
        if hi == 0.0 {
            continue;
        }
        worst = worst.max(if lo == 0.0 { f64::INFINITY } else { hi / lo });
    }
    Ok(worst)
}

/// Enumerates the full output space and every label pair and returns the
/// largest likelihood ratio. Equals `e^ε` for all three subset mechanisms.
pub fn verify_ldp_ratio(mechanism: SubsetMechanism, params: &MechanismParams) -> Result<f64> {
    params.validate()?;
    let k = params.num_labels();
    if mechanism != SubsetMechanism::Krr && k > MAX_VERIFY_LABELS {
        return Err(Error::EnumerationGuard {
            size: output_space_size(mechanism, params)?,
            limit: 2f64.powi(MAX_VERIFY_LABELS as i32),
        });
    }
    let labels: Vec<Label> = params.labels().collect();
    max_likelihood_ratio(output_space(mechanism, params)?, &labels, |s, y| {
        super::likelihood(s, y, params)
    })
}

use rand::Rng;

use super::types::{Label, MechanismParams, SanitizedSubset, SubsetMechanism};
use crate::error::{Error, Result};

/// Above this many labels the likelihood product is accumulated in log space.
const LOG_SPACE_THRESHOLD: usize = 16;

/// Probability that label `i` lands in the output when the input is `y`:
/// `1/2` for the true label, `1/(e^ε + 1)` for every other label.
pub fn bernoulli_inclusion_probability(i: Label, y: Label, params: &MechanismParams) -> f64 {
    if i == y {
        0.5
    } else {
        1.0 / (params.exp_epsilon() + 1.0)
    }
}

fn check_params(params: &MechanismParams) -> Result<()> {
    params.validate()?;
    if params.subset_size().is_some() {
        return Err(Error::InvalidParams(
            "bernoulli-subset randomizer takes no subset size".into(),
        ));
    }
    Ok(())
}

/// Includes every label independently, the true label with probability 1/2
/// and every other label with probability `1/(e^ε + 1)`.
pub fn bernoulli_subset_randomize<R: Rng + ?Sized>(
    y: Label,
    params: &MechanismParams,
    rng: &mut R,
) -> Result<SanitizedSubset> {
    check_params(params)?;
    let y = params.label(y.value())?;
    let other = 1.0 / (params.exp_epsilon() + 1.0);
    let mask: Vec<bool> = (0..params.num_labels())
        .map(|i| {
            let p = if i == y.index() { 0.5 } else { other };
            rng.random::<f64>() < p
        })
        .collect();
    Ok(SanitizedSubset::from_mask(
        &mask,
        SubsetMechanism::BernoulliSubset,
    ))
}

/// Exact probability of emitting `s` on input `y`, as a product of `K`
/// Bernoulli factors.
pub fn bernoulli_subset_likelihood(
    s: &SanitizedSubset,
    y: Label,
    params: &MechanismParams,
) -> Result<f64> {
    check_params(params)?;
    s.check_label_space(params)?;
    let y = params.label(y.value())?;
    let k = params.num_labels();
    let other = 1.0 / (params.exp_epsilon() + 1.0);
    let mask = s.indicator();
    let factor = |i: usize| {
        let p = if i == y.index() { 0.5 } else { other };
        if mask[i] {
            p
        } else {
            1.0 - p
        }
    };
    if k > LOG_SPACE_THRESHOLD {
        Ok((0..k).map(|i| factor(i).ln()).sum::<f64>().exp())
    } else {
        Ok((0..k).map(factor).product())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::output_space;
    use crate::rng::{Purpose, RandomnessStream};
    use std::collections::HashMap;

    fn ln3_params(k: usize) -> MechanismParams {
        MechanismParams::new(3f64.ln(), k).unwrap()
    }

    fn subset(members: &[usize], k: usize) -> SanitizedSubset {
        let labels = members.iter().map(|&v| Label::new(v, k).unwrap()).collect();
        SanitizedSubset::new(labels, k, SubsetMechanism::BernoulliSubset, None).unwrap()
    }

    #[test]
    fn inclusion_probabilities_k2_ln3() {
        let p = ln3_params(2);
        let (one, two) = (p.label(1).unwrap(), p.label(2).unwrap());
        assert_eq!(bernoulli_inclusion_probability(one, one, &p), 0.5);
        assert!((bernoulli_inclusion_probability(two, one, &p) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn likelihood_worked_values() {
        let p = ln3_params(2);
        let y = p.label(1).unwrap();
        let cases = [(&[1][..], 3.0 / 8.0), (&[][..], 3.0 / 8.0), (&[1, 2][..], 1.0 / 8.0), (&[2][..], 1.0 / 8.0)];
        for (members, expected) in cases {
            let l = bernoulli_subset_likelihood(&subset(members, 2), y, &p).unwrap();
            assert!((l - expected).abs() < 1e-15, "{members:?}: {l}");
        }
    }

    #[test]
    fn likelihood_rejects_label_space_mismatch() {
        let p = ln3_params(3);
        let err = bernoulli_subset_likelihood(&subset(&[1], 2), p.label(1).unwrap(), &p);
        assert!(matches!(err, Err(Error::LabelSpaceMismatch { .. })));
    }

    #[test]
    fn rejects_subset_size() {
        let p = MechanismParams::with_subset_size(1.0, 4, 1).unwrap();
        let mut rng = RandomnessStream::from_seed(0);
        assert!(bernoulli_subset_randomize(p.label(1).unwrap(), &p, &mut rng).is_err());
    }

    #[test]
    fn log_space_agrees_with_direct_product() {
        // K = 18 goes through the log-space branch; compare against a direct
        // product computed here.
        let p = MechanismParams::new(0.7, 18).unwrap();
        let y = p.label(5).unwrap();
        let s = subset(&[1, 5, 9, 18], 18);
        let q = 1.0 / (0.7f64.exp() + 1.0);
        let direct = 0.5 * q.powi(3) * (1.0 - q).powi(14);
        let l = bernoulli_subset_likelihood(&s, y, &p).unwrap();
        assert!((l - direct).abs() / direct < 1e-12);
    }

    #[test]
    fn expected_size_k3_ln3_is_one() {
        let p = ln3_params(3);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..n {
            let mut rng = RandomnessStream::derive(11, i, Purpose::LabelRandomization);
            let s = bernoulli_subset_randomize(p.label(2).unwrap(), &p, &mut rng).unwrap();
            let len = s.len() as f64;
            sum += len;
            sum_sq += len * len;
        }
        let mean = sum / n as f64;
        let se = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 4.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn empirical_frequencies_match_likelihood() {
        for k in [2, 3, 4] {
            let p = MechanismParams::new(1.0, k).unwrap();
            let y = p.label(1).unwrap();
            let n = 100_000u64;
            let mut counts: HashMap<SanitizedSubset, u64> = HashMap::new();
            let mut rng = RandomnessStream::from_seed(1234 + k as u64);
            for _ in 0..n {
                *counts
                    .entry(bernoulli_subset_randomize(y, &p, &mut rng).unwrap())
                    .or_default() += 1;
            }
            for s in output_space(SubsetMechanism::BernoulliSubset, &p).unwrap() {
                let prob = bernoulli_subset_likelihood(&s, y, &p).unwrap();
                let freq = *counts.get(&s).unwrap_or(&0) as f64 / n as f64;
                let se = (prob * (1.0 - prob) / n as f64).sqrt();
                assert!((freq - prob).abs() <= 4.0 * se, "K={k} {s}: {freq} vs {prob}");
            }
        }
    }
}

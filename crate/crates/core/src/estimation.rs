//! Unbiased gradient estimators built from sanitized label subsets, and an
//! exact enumeration oracle for their first two moments.
//!
//! Every estimator here is linear in the per-label gradients: it assigns a
//! weight to each label and returns `Σ_k weight_k · ∇ℓ(w, (x, k))`. The
//! weights depend only on the sanitized subset and the mechanism parameters
//! (see [`estimator_weights`]), which lets losses with structured gradients
//! evaluate the sum without materializing all `K` gradients.

use crate::error::{Error, Result};
use crate::mechanisms::{
    self, d_subset_inclusion_probabilities, output_space, output_space_size, Label,
    MechanismParams, SanitizedSubset, SubsetMechanism,
};
use crate::numeric::{axpy, dot, CompensatedSum};

/// Largest Bernoulli-subset output space the moment oracle will enumerate.
pub const MAX_BERNOULLI_OUTPUTS: f64 = (1u64 << 20) as f64;
/// Largest d-subset output space the moment oracle will enumerate.
pub const MAX_D_SUBSET_OUTPUTS: f64 = 1e6;
/// Absolute constant used with the d-subset second-moment bound.
pub const D_SUBSET_BOUND_CONSTANT: f64 = 16.0;

/// The gradients `∇ℓ(w, (x, k))` for every label `k`, plus their Lipschitz
/// bound.
#[derive(Debug, Clone, PartialEq)]
pub struct PerLabelGradients {
    gradients: Vec<Vec<f64>>,
    lipschitz_bound: f64,
}

impl PerLabelGradients {
    pub fn new(gradients: Vec<Vec<f64>>, lipschitz_bound: f64) -> Result<Self> {
        if gradients.is_empty() {
            return Err(Error::EmptyData);
        }
        if !(lipschitz_bound > 0.0 && lipschitz_bound.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "Lipschitz bound must be positive, got {lipschitz_bound}"
            )));
        }
        let p = gradients[0].len();
        for (index, g) in gradients.iter().enumerate() {
            if g.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: g.len(),
                });
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite);
            }
            let norm = dot(g, g).sqrt();
            if norm > lipschitz_bound * (1.0 + 1e-9) {
                return Err(Error::LipschitzViolated {
                    index,
                    norm,
                    bound: lipschitz_bound,
                });
            }
        }
        Ok(Self {
            gradients,
            lipschitz_bound,
        })
    }

    pub fn num_labels(&self) -> usize {
        self.gradients.len()
    }

    pub fn dimension(&self) -> usize {
        self.gradients[0].len()
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    pub fn gradients(&self) -> &[Vec<f64>] {
        &self.gradients
    }

    pub fn get(&self, label: Label) -> &[f64] {
        &self.gradients[label.index()]
    }

    /// `Σ_k weights[k] · gradients[k]`.
    pub fn combine(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension()];
        for (w, g) in weights.iter().zip(&self.gradients) {
            if *w != 0.0 {
                axpy(*w, g, &mut out);
            }
        }
        out
    }

    fn check_against(&self, params: &MechanismParams) -> Result<()> {
        if self.num_labels() != params.num_labels() {
            return Err(Error::DimensionMismatch {
                expected: params.num_labels(),
                found: self.num_labels(),
            });
        }
        Ok(())
    }
}

fn bernoulli_weights(s: &SanitizedSubset, params: &MechanismParams) -> Result<Vec<f64>> {
    s.expect_mechanism(SubsetMechanism::BernoulliSubset)?;
    s.check_label_space(params)?;
    params.validate()?;
    let e = params.exp_epsilon();
    let scale = 2.0 * (e + 1.0) / (e - 1.0);
    let q = 1.0 / (e + 1.0);
    Ok(s.indicator()
        .into_iter()
        .map(|m| scale * (f64::from(u8::from(m)) - q))
        .collect())
}

fn d_subset_weights(s: &SanitizedSubset, params: &MechanismParams) -> Result<Vec<f64>> {
    s.expect_mechanism(SubsetMechanism::DSubset)?;
    s.check_label_space(params)?;
    let (gamma, zeta) = d_subset_inclusion_probabilities(params)?;
    let d = params.subset_size().unwrap_or_default();
    if s.len() != d {
        return Err(Error::SubsetSize {
            expected: d,
            found: s.len(),
        });
    }
    let gap = gamma - zeta;
    if gap <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "inclusion gap γ_d - ζ_d = {gap} is not positive"
        )));
    }
    Ok(s.indicator()
        .into_iter()
        .map(|m| (f64::from(u8::from(m)) - zeta) / gap)
        .collect())
}

/// Debiasing coefficients `(a, b)` for randomized response,
/// `a = (e^ε + K - 1)/(e^ε - 1)` and `b = -1/(e^ε - 1)`.
pub fn krr_coefficients(params: &MechanismParams) -> (f64, f64) {
    let e = params.exp_epsilon();
    let k = params.num_labels() as f64;
    ((e + k - 1.0) / (e - 1.0), -1.0 / (e - 1.0))
}

fn krr_weights(s: &SanitizedSubset, params: &MechanismParams) -> Result<Vec<f64>> {
    s.expect_mechanism(SubsetMechanism::Krr)?;
    s.check_label_space(params)?;
    params.validate()?;
    if s.len() != 1 {
        return Err(Error::SubsetSize {
            expected: 1,
            found: s.len(),
        });
    }
    let (a, b) = krr_coefficients(params);
    let mut weights = vec![b; params.num_labels()];
    weights[s.members()[0].index()] += a;
    Ok(weights)
}

/// Per-label weights of the unbiased estimator matching `s`'s mechanism.
pub fn estimator_weights(s: &SanitizedSubset, params: &MechanismParams) -> Result<Vec<f64>> {
    match s.mechanism() {
        SubsetMechanism::BernoulliSubset => bernoulli_weights(s, params),
        SubsetMechanism::DSubset => d_subset_weights(s, params),
        SubsetMechanism::Krr => krr_weights(s, params),
    }
}

/// `2(e^ε+1)/(e^ε-1) · Σ_k (1{k ∈ s} - 1/(e^ε+1)) · grads[k]`.
pub fn subset_gradient_estimate(
    s: &SanitizedSubset,
    grads: &PerLabelGradients,
    params: &MechanismParams,
) -> Result<Vec<f64>> {
    grads.check_against(params)?;
    Ok(grads.combine(&bernoulli_weights(s, params)?))
}

/// `1/(γ_d - ζ_d) · Σ_k (1{k ∈ s} - ζ_d) · grads[k]`.
pub fn d_subset_gradient_estimate(
    s: &SanitizedSubset,
    grads: &PerLabelGradients,
    params: &MechanismParams,
) -> Result<Vec<f64>> {
    grads.check_against(params)?;
    Ok(grads.combine(&d_subset_weights(s, params)?))
}

/// `a · grads[j] + b · Σ_k grads[k]` for the reported label `j`.
pub fn krr_gradient_estimate(
    s: &SanitizedSubset,
    grads: &PerLabelGradients,
    params: &MechanismParams,
) -> Result<Vec<f64>> {
    grads.check_against(params)?;
    Ok(grads.combine(&krr_weights(s, params)?))
}

/// Estimate for whichever mechanism produced `s`.
pub fn gradient_estimate(
    s: &SanitizedSubset,
    grads: &PerLabelGradients,
    params: &MechanismParams,
) -> Result<Vec<f64>> {
    grads.check_against(params)?;
    Ok(grads.combine(&estimator_weights(s, params)?))
}

/// Exact moments of an estimator under one true label.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub mean: Vec<f64>,
    /// `E‖ĝ‖²`
    pub second_moment: f64,
    /// `P[{k, k'} ⊆ S] - ζ_d²` for two distinct labels other than `y`.
    /// d-subset only, and only when `K ≥ 3`.
    pub pairwise_cov: Option<f64>,
    /// Analytic bound on `second_moment`.
    pub bound: f64,
}

/// Flat summary of a [`MomentReport`] for tabular output.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRecord {
    pub mechanism: SubsetMechanism,
    pub num_labels: usize,
    pub subset_size: Option<usize>,
    pub epsilon: f64,
    pub second_moment: f64,
    pub bound: f64,
    /// Largest absolute deviation of the mean from the true-label gradient.
    pub mean_error: f64,
}

impl MomentReport {
    pub fn record(
        &self,
        mechanism: SubsetMechanism,
        params: &MechanismParams,
        truth: &[f64],
    ) -> MomentRecord {
        let mean_error = self
            .mean
            .iter()
            .zip(truth)
            .map(|(m, t)| (m - t).abs())
            .fold(0.0, f64::max);
        MomentRecord {
            mechanism,
            num_labels: params.num_labels(),
            subset_size: params.subset_size(),
            epsilon: params.epsilon(),
            second_moment: self.second_moment,
            bound: self.bound,
            mean_error,
        }
    }

    /// `second_moment ≤ bound`, up to relative rounding slack.
    pub fn within_bound(&self) -> bool {
        self.second_moment <= self.bound * (1.0 + 1e-9) + 1e-12
    }
}

/// `L² (1 + 4 e^ε (K + e^ε) / (e^ε - 1)²)`.
pub fn bernoulli_second_moment_bound(params: &MechanismParams, lipschitz: f64) -> f64 {
    let e = params.exp_epsilon();
    let k = params.num_labels() as f64;
    lipschitz * lipschitz * (1.0 + 4.0 * e * (k + e) / ((e - 1.0) * (e - 1.0)))
}

/// `C' ((e^ε + K/d) / (e^ε - 1))² d L²` with `C' = 16`.
pub fn d_subset_second_moment_bound(params: &MechanismParams, lipschitz: f64) -> Result<f64> {
    let d = params
        .subset_size()
        .ok_or_else(|| Error::InvalidParams("d-subset bound requires a subset size".into()))?
        as f64;
    let e = params.exp_epsilon();
    let k = params.num_labels() as f64;
    let factor = (e + k / d) / (e - 1.0);
    Ok(D_SUBSET_BOUND_CONSTANT * factor * factor * d * lipschitz * lipschitz)
}

/// Closed form of `E‖ĝ‖²` for randomized response:
/// `a² Σ_j p_j‖g_j‖² + 2ab ⟨Σ_j p_j g_j, G⟩ + b²‖G‖²` with `G = Σ_k g_k`.
pub fn krr_second_moment(y: Label, grads: &PerLabelGradients, params: &MechanismParams) -> f64 {
    let (a, b) = krr_coefficients(params);
    let e = params.exp_epsilon();
    let k = params.num_labels();
    let denom = e + (k - 1) as f64;
    let prob = |j: usize| if j == y.index() { e / denom } else { 1.0 / denom };
    let total = grads.combine(&vec![1.0; k]);
    let weighted = grads.combine(&(0..k).map(prob).collect::<Vec<_>>());
    let sq: f64 = grads
        .gradients()
        .iter()
        .enumerate()
        .map(|(j, g)| prob(j) * dot(g, g))
        .sum();
    a * a * sq + 2.0 * a * b * dot(&weighted, &total) + b * b * dot(&total, &total)
}

/// Exact mean and second moment of the estimator by summing over the whole
/// output space, each output weighted by its exact likelihood under `y`.
pub fn estimator_moments_bruteforce(
    mechanism: SubsetMechanism,
    y: Label,
    grads: &PerLabelGradients,
    params: &MechanismParams,
) -> Result<MomentReport> {
    params.validate()?;
    grads.check_against(params)?;
    let y = params.label(y.value())?;
    let size = output_space_size(mechanism, params)?;
    let limit = match mechanism {
        SubsetMechanism::BernoulliSubset => MAX_BERNOULLI_OUTPUTS,
        SubsetMechanism::DSubset => MAX_D_SUBSET_OUTPUTS,
        SubsetMechanism::Krr => f64::INFINITY,
    };
    if size > limit {
        return Err(Error::EnumerationGuard { size, limit });
    }

    // two labels other than y, for the d-subset pairwise term
    let pair: Option<(Label, Label)> = {
        let mut others = params.labels().filter(|&l| l != y);
        match (others.next(), others.next()) {
            (Some(a), Some(b)) if mechanism == SubsetMechanism::DSubset => Some((a, b)),
            _ => None,
        }
    };

    let p = grads.dimension();
    let mut mean = vec![CompensatedSum::new(); p];
    let mut second = CompensatedSum::new();
    let mut pair_prob = CompensatedSum::new();
    for s in output_space(mechanism, params)? {
        let prob = mechanisms::likelihood(&s, y, params)?;
        if prob == 0.0 {
            continue;
        }
        let est = grads.combine(&estimator_weights(&s, params)?);
        for (acc, x) in mean.iter_mut().zip(&est) {
            acc.add(prob * x);
        }
        second.add(prob * dot(&est, &est));
        if let Some((a, b)) = pair {
            if s.contains(a) && s.contains(b) {
                pair_prob.add(prob);
            }
        }
    }

    let lipschitz = grads.lipschitz_bound();
    let (bound, pairwise_cov) = match mechanism {
        SubsetMechanism::BernoulliSubset => (bernoulli_second_moment_bound(params, lipschitz), None),
        SubsetMechanism::DSubset => {
            let (_, zeta) = d_subset_inclusion_probabilities(params)?;
            (
                d_subset_second_moment_bound(params, lipschitz)?,
                pair.map(|_| pair_prob.value() - zeta * zeta),
            )
        }
        SubsetMechanism::Krr => (krr_second_moment(y, grads, params), None),
    };
    Ok(MomentReport {
        mean: mean.iter().map(CompensatedSum::value).collect(),
        second_moment: second.value(),
        pairwise_cov,
        bound,
    })
}

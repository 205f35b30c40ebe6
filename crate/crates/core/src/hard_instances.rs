//! Hard instances for label-private SCO.
//!
//! A label distribution `θ` perturbed by `±γ` around uniform, paired with the
//! feature-independent linear loss `ℓ(w; (x, y)) = -½⟨w, e_y - 1/K · 1⟩` over
//! the unit ball. Its population loss is `-(α/2)⟨w, b⟩` with `α = γ√K` and
//! unit direction `b = (θ - 1/K · 1)/α`, so the minimizer is `w* = b` and the
//! excess risk of any `w` is `(α/2)(1 - ⟨w, b⟩)` in closed form.
//!
//! The affine map `θ̂ = 1/K · 1 + α ŵ` turns a parameter estimate into a
//! distribution estimate with `‖θ̂ - θ‖₂ = α‖ŵ - b‖₂`.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::mechanisms::Label;
use crate::numeric::{distance, dot, norm};
use crate::rng::{Purpose, RandomnessStream};
use crate::sco::{ConvexLoss, DataPoint, DataSampler};

/// Default constant in `γ = c · sqrt(e^ε / ((e^ε - 1)² n))`.
pub const DEFAULT_C_GAMMA: f64 = 0.25;

/// A distribution over `[K]`, with the perturbation size it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistribution {
    probabilities: Vec<f64>,
    gamma: f64,
    cumulative: Vec<f64>,
}

impl LabelDistribution {
    pub fn new(probabilities: Vec<f64>, gamma: f64) -> Result<Self> {
        if probabilities.len() < 2 {
            return Err(Error::InvalidInstance("need at least 2 labels".into()));
        }
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidInstance("probabilities must be nonnegative".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInstance(format!("probabilities sum to {total}")));
        }
        let cumulative = probabilities
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            probabilities,
            gamma,
            cumulative,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn num_labels(&self) -> usize {
        self.probabilities.len()
    }

    pub fn sample_label<R: Rng + ?Sized>(&self, rng: &mut R) -> Label {
        let u: f64 = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        let i = self.cumulative.partition_point(|&c| c <= u);
        Label::from_index(i.min(self.probabilities.len() - 1))
    }
}

/// `min{1/(2K), c_gamma · sqrt(e^ε / ((e^ε - 1)² n))}`.
pub fn hard_gamma(num_labels: usize, n: usize, epsilon: f64, c_gamma: f64) -> f64 {
    let em1 = epsilon.exp_m1();
    let scale = (epsilon.exp() / (em1 * em1 * n as f64)).sqrt();
    (c_gamma * scale).min(1.0 / (2.0 * num_labels as f64))
}

/// `1, 0, 1, 0, ...`
pub fn alternating_pattern(num_labels: usize) -> Vec<bool> {
    (0..num_labels).map(|i| i % 2 == 0).collect()
}

/// A uniformly random pattern with exactly `K/2` ones.
pub fn random_balanced_pattern(num_labels: usize, seed: u64) -> Vec<bool> {
    let mut pattern = alternating_pattern(num_labels);
    let mut rng = RandomnessStream::derive(seed, 0, Purpose::SignPattern);
    pattern.shuffle(&mut rng);
    pattern
}

/// `θ_i = 1/K + γ` where the pattern is set, `1/K - γ` elsewhere.
pub fn make_hard_theta(
    num_labels: usize,
    n: usize,
    epsilon: f64,
    sign_pattern: Option<&[bool]>,
    c_gamma: f64,
) -> Result<LabelDistribution> {
    if num_labels < 2 || num_labels % 2 == 1 {
        return Err(Error::InvalidInstance(format!(
            "K must be even and at least 2, got {num_labels}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidInstance("n must be at least 1".into()));
    }
    if !(c_gamma >= 0.0 && c_gamma.is_finite()) {
        return Err(Error::InvalidInstance(format!("c_gamma must be nonnegative, got {c_gamma}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInstance(format!("epsilon must be positive, got {epsilon}")));
    }
    let default_pattern;
    let pattern = match sign_pattern {
        Some(p) => p,
        None => {
            default_pattern = alternating_pattern(num_labels);
            &default_pattern
        }
    };
    if pattern.len() != num_labels {
        return Err(Error::DimensionMismatch {
            expected: num_labels,
            found: pattern.len(),
        });
    }
    let ones = pattern.iter().filter(|&&b| b).count();
    if 2 * ones != num_labels {
        return Err(Error::InvalidInstance(format!(
            "sign pattern has {ones} ones, expected {}",
            num_labels / 2
        )));
    }
    let gamma = hard_gamma(num_labels, n, epsilon, c_gamma);
    let base = 1.0 / num_labels as f64;
    let probabilities = pattern
        .iter()
        .map(|&up| if up { base + gamma } else { base - gamma })
        .collect();
    LabelDistribution::new(probabilities, gamma)
}

/// The linear loss `ℓ(w; (x, y)) = -½⟨w, e_y - 1/K · 1⟩`, 1-Lipschitz, with
/// gradient `-½(e_y - 1/K · 1)` independent of `w` and `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearLoss {
    num_labels: usize,
}

pub fn linear_loss(num_labels: usize) -> Result<LinearLoss> {
    if num_labels < 2 {
        return Err(Error::InvalidParams(format!("need K >= 2, got {num_labels}")));
    }
    Ok(LinearLoss { num_labels })
}

impl<X> ConvexLoss<X> for LinearLoss {
    fn num_labels(&self) -> usize {
        self.num_labels
    }

    fn dimension(&self) -> usize {
        self.num_labels
    }

    fn lipschitz_bound(&self) -> f64 {
        1.0
    }

    fn value(&self, w: &[f64], _x: &X, y: Label) -> f64 {
        let mean = w.iter().sum::<f64>() / self.num_labels as f64;
        -0.5 * (w[y.index()] - mean)
    }

    fn gradient(&self, _w: &[f64], _x: &X, y: Label) -> Vec<f64> {
        let base = 0.5 / self.num_labels as f64;
        let mut g = vec![base; self.num_labels];
        g[y.index()] -= 0.5;
        g
    }

    // Σ_k a_k · (-½)(e_k - 1/K · 1) = -½ (a - (Σa / K) · 1)
    fn weighted_gradient(&self, _w: &[f64], _x: &X, weights: &[f64]) -> Vec<f64> {
        let mean = weights.iter().sum::<f64>() / self.num_labels as f64;
        weights.iter().map(|a| -0.5 * (a - mean)).collect()
    }
}

/// Constant feature shared by every data point of a hard instance.
pub const FIXED_FEATURE: u64 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct HardInstance {
    distribution: LabelDistribution,
    direction: Vec<f64>,
    alpha: f64,
}

impl HardInstance {
    pub fn new(distribution: LabelDistribution) -> Result<Self> {
        let k = distribution.num_labels();
        let gamma = distribution.gamma();
        if gamma.is_nan() || gamma <= 0.0 {
            return Err(Error::InvalidInstance("γ must be positive to define a direction".into()));
        }
        let alpha = gamma * (k as f64).sqrt();
        let base = 1.0 / k as f64;
        let direction: Vec<f64> = distribution
            .probabilities()
            .iter()
            .map(|t| (t - base) / alpha)
            .collect();
        let len = norm(&direction);
        if (len - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInstance(format!(
                "θ is not a ±γ perturbation of uniform (‖b‖ = {len})"
            )));
        }
        Ok(Self {
            distribution,
            direction,
            alpha,
        })
    }

    /// Builds the instance from `make_hard_theta` arguments.
    pub fn build(spec: &HardInstanceSpec) -> Result<Self> {
        let theta = make_hard_theta(
            spec.num_labels,
            spec.n,
            spec.epsilon,
            spec.pattern.as_deref(),
            spec.c_gamma,
        )?;
        Self::new(theta)
    }

    pub fn distribution(&self) -> &LabelDistribution {
        &self.distribution
    }

    pub fn theta(&self) -> &[f64] {
        self.distribution.probabilities()
    }

    pub fn gamma(&self) -> f64 {
        self.distribution.gamma()
    }

    pub fn num_labels(&self) -> usize {
        self.distribution.num_labels()
    }

    /// Unit vector `b`; also the minimizer `w*`.
    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn optimum(&self) -> &[f64] {
        &self.direction
    }

    /// `α = γ √K`
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn fixed_feature(&self) -> u64 {
        FIXED_FEATURE
    }

    /// Population loss `-(α/2)⟨w, b⟩`.
    pub fn population_loss(&self, w: &[f64]) -> f64 {
        -0.5 * self.alpha * dot(w, &self.direction)
    }

    /// `n` i.i.d. points `(x₀, Y)` with `Y ~ θ`.
    pub fn sample_dataset<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<DataPoint<u64>> {
        (0..n).map(|_| self.sample_point(rng)).collect()
    }
}

impl DataSampler<u64> for HardInstance {
    fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> DataPoint<u64> {
        DataPoint::new(FIXED_FEATURE, self.distribution.sample_label(rng))
    }
}

/// `(α/2)(1 - ⟨w, b⟩)`, defined on the unit ball.
pub fn closed_form_excess_risk(w: &[f64], instance: &HardInstance) -> Result<f64> {
    if w.len() != instance.num_labels() {
        return Err(Error::DimensionMismatch {
            expected: instance.num_labels(),
            found: w.len(),
        });
    }
    let n = norm(w);
    if n > 1.0 + 1e-9 {
        return Err(Error::OutsideUnitBall { norm: n });
    }
    Ok(0.5 * instance.alpha() * (1.0 - dot(w, instance.direction())))
}

/// `θ̂ = 1/K · 1 + γ√K · ŵ`, left unprojected.
pub fn reduce_to_theta_hat(w_hat: &[f64], num_labels: usize, gamma: f64) -> Result<Vec<f64>> {
    if w_hat.len() != num_labels {
        return Err(Error::DimensionMismatch {
            expected: num_labels,
            found: w_hat.len(),
        });
    }
    let alpha = gamma * (num_labels as f64).sqrt();
    let base = 1.0 / num_labels as f64;
    Ok(w_hat.iter().map(|w| base + alpha * w).collect())
}

/// `‖θ̂ - θ‖₂` for the reduction of `w_hat` against the instance's `θ`.
pub fn reduction_error(w_hat: &[f64], instance: &HardInstance) -> Result<f64> {
    let theta_hat = reduce_to_theta_hat(w_hat, instance.num_labels(), instance.gamma())?;
    Ok(distance(&theta_hat, instance.theta()))
}

/// Everything needed to rebuild a hard instance deterministically.
#[derive(Debug, Clone, PartialEq)]
pub struct HardInstanceSpec {
    pub num_labels: usize,
    pub n: usize,
    pub epsilon: f64,
    pub c_gamma: f64,
    /// Alternating when absent.
    pub pattern: Option<Vec<bool>>,
}

impl HardInstanceSpec {
    pub fn new(num_labels: usize, n: usize, epsilon: f64) -> Self {
        Self {
            num_labels,
            n,
            epsilon,
            c_gamma: DEFAULT_C_GAMMA,
            pattern: None,
        }
    }

    /// `key = value` lines; the pattern as a string of `0`/`1`.
    pub fn to_config(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "k = {}", self.num_labels);
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "epsilon = {:?}", self.epsilon);
        let _ = writeln!(out, "c_gamma = {:?}", self.c_gamma);
        if let Some(p) = &self.pattern {
            let bits: String = p.iter().map(|&b| if b { '1' } else { '0' }).collect();
            let _ = writeln!(out, "pattern = {bits}");
        }
        out
    }

    pub fn from_config(text: &str) -> Result<Self> {
        let mut k = None;
        let mut n = None;
        let mut epsilon = None;
        let mut c_gamma = DEFAULT_C_GAMMA;
        let mut pattern = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let value = value.trim();
            let bad = |what: &str| err(format!("invalid {what} `{value}`"));
            match key.trim() {
                "k" => k = Some(value.parse().map_err(|_| bad("k"))?),
                "n" => n = Some(value.parse().map_err(|_| bad("n"))?),
                "epsilon" => epsilon = Some(value.parse().map_err(|_| bad("epsilon"))?),
                "c_gamma" => c_gamma = value.parse().map_err(|_| bad("c_gamma"))?,
                "pattern" => {
                    pattern = Some(
                        value
                            .chars()
                            .map(|c| match c {
                                '1' => Ok(true),
                                '0' => Ok(false),
                                _ => Err(bad("pattern")),
                            })
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        let missing = |what: &str| Error::Parse {
            line: 0,
            message: format!("missing `{what}`"),
        };
        Ok(Self {
            num_labels: k.ok_or_else(|| missing("k"))?,
            n: n.ok_or_else(|| missing("n"))?,
            epsilon: epsilon.ok_or_else(|| missing("epsilon"))?,
            c_gamma,
            pattern,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sco::excess_risk_montecarlo;

    fn golden_epsilon() -> f64 {
        // e^ε / (e^ε - 1)² = 1
        ((3.0 + 5f64.sqrt()) / 2.0).ln()
    }

    fn random_ball_point<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = norm(&v);
        let r = rng.random::<f64>();
        v.into_iter().map(|x| x * r / n).collect()
    }

    #[test]
    fn worked_theta() {
        let theta = make_hard_theta(2, 1, golden_epsilon(), Some(&[true, false]), 0.1).unwrap();
        assert!((theta.gamma() - 0.1).abs() < 1e-14);
        assert!((theta.probabilities()[0] - 0.6).abs() < 1e-14);
        assert!((theta.probabilities()[1] - 0.4).abs() < 1e-14);
    }

    #[test]
    fn zero_gamma_is_uniform() {
        let theta = make_hard_theta(6, 100, 1.0, None, 0.0).unwrap();
        assert!(theta.probabilities().iter().all(|&p| p == 1.0 / 6.0));
        assert!(HardInstance::new(theta).is_err());
    }

    #[test]
    fn theta_is_valid_for_any_parameters() {
        for k in [2usize, 4, 16, 64] {
            for n in [1usize, 10, 100_000] {
                for eps in [0.01, 1.0, 5.0] {
                    for c in [0.25, 10.0] {
                        let theta = make_hard_theta(k, n, eps, None, c).unwrap();
                        let total: f64 = theta.probabilities().iter().sum();
                        assert!((total - 1.0).abs() < 1e-12);
                        let lo = 1.0 / (2.0 * k as f64);
                        let hi = 3.0 / (2.0 * k as f64);
                        assert!(theta
                            .probabilities()
                            .iter()
                            .all(|&p| p >= lo - 1e-15 && p <= hi + 1e-15));
                        let inst = HardInstance::new(theta).unwrap();
                        assert!((norm(inst.direction()) - 1.0).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn theta_errors() {
        assert!(make_hard_theta(3, 10, 1.0, None, 0.25).is_err());
        assert!(make_hard_theta(4, 10, 1.0, Some(&[true, true, true, false]), 0.25).is_err());
        assert!(make_hard_theta(4, 10, 1.0, Some(&[true, false]), 0.25).is_err());
        let p = random_balanced_pattern(10, 3);
        assert_eq!(p.iter().filter(|&&b| b).count(), 5);
        assert_eq!(p, random_balanced_pattern(10, 3));
    }

    #[test]
    fn linear_loss_gradients() {
        let loss = linear_loss(2).unwrap();
        let g = ConvexLoss::<u64>::gradient(&loss, &[0.3, 0.1], &0, Label::new(1, 2).unwrap());
        assert_eq!(g, vec![-0.25, 0.25]);
        for k in [2usize, 3, 10, 64] {
            let loss = linear_loss(k).unwrap();
            for y in 1..=k {
                let y = Label::new(y, k).unwrap();
                let g = ConvexLoss::<u64>::gradient(&loss, &vec![0.0; k], &0, y);
                let expected = 0.5 * (1.0 - 1.0 / k as f64).sqrt();
                assert!((norm(&g) - expected).abs() < 1e-15);
                assert_eq!(ConvexLoss::<u64>::value(&loss, &vec![0.0; k], &0, y), 0.0);
            }
        }
        assert!(linear_loss(1).is_err());
    }

    #[test]
    fn closed_form_worked_values() {
        let inst = HardInstance::build(&HardInstanceSpec::new(4, 1000, 1.0)).unwrap();
        let b = inst.direction().to_vec();
        let neg: Vec<f64> = b.iter().map(|x| -x).collect();
        assert!(closed_form_excess_risk(&b, &inst).unwrap().abs() < 1e-15);
        assert!((closed_form_excess_risk(&neg, &inst).unwrap() - inst.alpha()).abs() < 1e-15);
        assert!((closed_form_excess_risk(&[0.0; 4], &inst).unwrap() - inst.alpha() / 2.0).abs() < 1e-15);
        assert!(matches!(
            closed_form_excess_risk(&[2.0, 0.0, 0.0, 0.0], &inst),
            Err(Error::OutsideUnitBall { .. })
        ));
    }

    #[test]
    fn closed_form_matches_population_loss_gap() {
        let inst = HardInstance::build(&HardInstanceSpec::new(6, 50, 0.5)).unwrap();
        let mut rng = RandomnessStream::from_seed(4);
        for _ in 0..100 {
            let w = random_ball_point(6, &mut rng);
            let gap = inst.population_loss(&w) - inst.population_loss(inst.optimum());
            // population loss from θ directly: -½ Σ θ_y (w_y - mean(w))
            let mean = w.iter().sum::<f64>() / 6.0;
            let direct: f64 = inst
                .theta()
                .iter()
                .zip(&w)
                .map(|(t, wi)| -0.5 * t * (wi - mean))
                .sum();
            assert!((direct - inst.population_loss(&w)).abs() < 1e-15);
            assert!((closed_form_excess_risk(&w, &inst).unwrap() - gap).abs() < 1e-15);
        }
    }

    #[test]
    fn minorant_and_reduction_identity() {
        let inst = HardInstance::build(&HardInstanceSpec::new(8, 10_000, 1.0)).unwrap();
        let b = inst.direction();
        let mut rng = RandomnessStream::from_seed(9);
        for _ in 0..1000 {
            let w = random_ball_point(8, &mut rng);
            let risk = closed_form_excess_risk(&w, &inst).unwrap();
            let minorant = inst.alpha() / 4.0 * distance(&w, b).powi(2);
            assert!(minorant <= risk + 1e-12);
        }
        for _ in 0..100 {
            let w = random_ball_point(8, &mut rng);
            let lhs = reduction_error(&w, &inst).unwrap();
            let rhs = inst.alpha() * distance(&w, b);
            assert!((lhs - rhs).abs() < 1e-12);
        }
        let uniform = reduce_to_theta_hat(&[0.0; 8], 8, inst.gamma()).unwrap();
        assert!(uniform.iter().all(|&t| t == 0.125));
        let recovered = reduce_to_theta_hat(b, 8, inst.gamma()).unwrap();
        assert!(distance(&recovered, inst.theta()) < 1e-15);
    }

    #[test]
    fn monte_carlo_risk_matches_closed_form() {
        let inst = HardInstance::build(&HardInstanceSpec {
            c_gamma: 10.0,
            ..HardInstanceSpec::new(4, 100, 1.0)
        })
        .unwrap();
        let loss = linear_loss(4).unwrap();
        let mut rng = RandomnessStream::from_seed(21);
        for _ in 0..5 {
            let w = random_ball_point(4, &mut rng);
            let est = excess_risk_montecarlo(&w, &inst, &loss, 200_000, inst.optimum(), &mut rng).unwrap();
            let exact = closed_form_excess_risk(&w, &inst).unwrap();
            assert!((est.mean - exact).abs() <= 4.0 * est.std_error, "{} vs {exact}", est.mean);
        }
        let w = random_ball_point(4, &mut rng);
        let same = excess_risk_montecarlo(&w, &inst, &loss, 10, &w, &mut rng).unwrap();
        assert_eq!(same.mean, 0.0);
    }

    #[test]
    fn spec_round_trips_through_config() {
        let spec = HardInstanceSpec {
            num_labels: 6,
            n: 500,
            epsilon: 0.75,
            c_gamma: 0.3,
            pattern: Some(random_balanced_pattern(6, 1)),
        };
        let parsed = HardInstanceSpec::from_config(&spec.to_config()).unwrap();
        assert_eq!(parsed, spec);
        assert_eq!(HardInstance::build(&parsed).unwrap(), HardInstance::build(&spec).unwrap());
        assert!(HardInstanceSpec::from_config("k = 4\n").is_err());
        assert!(HardInstanceSpec::from_config("k = 4\nn = 1\nepsilon = 1\npattern = 10x1\n").is_err());
    }
}

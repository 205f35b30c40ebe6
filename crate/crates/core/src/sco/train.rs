//! Two-stage training.
//!
//! Stage one ([`randomize_labels`]) is the only code that reads raw labels:
//! each user's label goes through the randomizer exactly once, with its own
//! derived stream. Stage two ([`learning_stage`]) sees only
//! [`SanitizedRecord`]s and runs single-pass projected SGD with the matching
//! unbiased estimator, returning the average of the iterates `w_1..w_n`.
//!
//! The vector-randomizer mechanism (`djw`) needs the gradient at `w_{t-1}`
//! before it can randomize, so it runs as an interleaved loop and is marked
//! interactive in the result.

use rand::seq::SliceRandom;

use super::data::{DataPoint, LabelStore, SanitizedRecord};
use super::domain::ParameterDomain;
use super::loss::ConvexLoss;
use crate::error::{Error, Result};
use crate::estimation::estimator_weights;
use crate::mechanisms::{
    self, djw::djw_randomize_coordinates, Mechanism, MechanismParams, SanitizedSubset,
    SubsetMechanism,
};
use crate::numeric::{axpy, dot, norm, orthonormal_basis, CompensatedSum};
use crate::rng::{Purpose, RandomnessStream};

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be positive, got {v}")))
    }
}

/// `(R/L) · sqrt((e^ε - 1)² / (2n (K + e^ε) e^ε))`.
pub fn learning_rate(
    radius: f64,
    lipschitz: f64,
    n: usize,
    num_labels: usize,
    epsilon: f64,
) -> Result<f64> {
    check_positive("radius", radius)?;
    check_positive("Lipschitz bound", lipschitz)?;
    check_positive("epsilon", epsilon)?;
    if n == 0 || num_labels < 2 {
        return Err(Error::InvalidParams(format!(
            "need n >= 1 and K >= 2, got n = {n}, K = {num_labels}"
        )));
    }
    let e = epsilon.exp();
    let em1 = epsilon.exp_m1();
    Ok(radius / lipschitz * (em1 * em1 / (2.0 * n as f64 * (num_labels as f64 + e) * e)).sqrt())
}

/// The `ε → ∞` limit of [`learning_rate`]: `R / (L sqrt(2n))`.
pub fn non_private_learning_rate(radius: f64, lipschitz: f64, n: usize) -> Result<f64> {
    check_positive("radius", radius)?;
    check_positive("Lipschitz bound", lipschitz)?;
    if n == 0 {
        return Err(Error::EmptyData);
    }
    Ok(radius / (lipschitz * (2.0 * n as f64).sqrt()))
}

/// `sqrt(max{K e^ε / (e^ε - 1)², 1}) · R L / sqrt(n)`, the excess-risk rate
/// of the subset-selection algorithm without its absolute constant.
pub fn risk_upper_bound_rate(num_labels: usize, epsilon: f64, n: usize, radius: f64, lipschitz: f64) -> f64 {
    let e = epsilon.exp();
    let em1 = epsilon.exp_m1();
    let factor = (num_labels as f64 * e / (em1 * em1)).max(1.0);
    factor.sqrt() * radius * lipschitz / (n as f64).sqrt()
}

/// Projected-SGD guarantee `R²/(η n) + η G²/2` for averaged iterates, where
/// `G²` bounds the mean squared norm of the stochastic gradients.
///
/// Uses `R²/(ηn)`; the `R/(ηn)` form that sometimes appears after the
/// inequality is dimensionally inconsistent and is not used here.
pub fn projected_sgd_bound(radius: f64, learning_rate: f64, n: usize, mean_sq_grad: f64) -> f64 {
    radius * radius / (learning_rate * n as f64) + learning_rate * mean_sq_grad / 2.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub params: MechanismParams,
    pub mechanism: Mechanism,
    pub seed: u64,
    /// Starting point `w_0`; the origin when absent.
    pub initial: Option<Vec<f64>>,
    /// Visit the sanitized records in a seeded random order instead of input
    /// order.
    pub shuffle: bool,
    /// Overrides the default step size from [`learning_rate`].
    pub learning_rate: Option<f64>,
}

impl TrainConfig {
    pub fn new(params: MechanismParams, mechanism: Mechanism, seed: u64) -> Self {
        Self {
            params,
            mechanism,
            seed,
            initial: None,
            shuffle: false,
            learning_rate: None,
        }
    }

    fn check_mechanism(&self) -> Result<()> {
        self.params.validate()?;
        let has_d = self.params.subset_size().is_some();
        let wants_d = self.mechanism == Mechanism::DSubset;
        if has_d != wants_d {
            return Err(Error::InvalidParams(format!(
                "mechanism {} {} a subset size",
                self.mechanism,
                if wants_d { "requires" } else { "does not take" }
            )));
        }
        Ok(())
    }
}

/// Iterate, step counter and running sum of projected SGD.
#[derive(Debug, Clone)]
pub struct SgdState {
    iterate: Vec<f64>,
    step_index: usize,
    learning_rate: f64,
    running_sum: Vec<CompensatedSum>,
}

impl SgdState {
    pub fn new(initial: Vec<f64>, learning_rate: f64) -> Self {
        let running_sum = vec![CompensatedSum::new(); initial.len()];
        Self {
            iterate: initial,
            step_index: 0,
            learning_rate,
            running_sum,
        }
    }

    /// `w_t = Proj(w_{t-1} - η g)`, then adds `w_t` to the running sum.
    pub fn step(&mut self, gradient: &[f64], domain: &ParameterDomain) {
        axpy(-self.learning_rate, gradient, &mut self.iterate);
        domain.project_in_place(&mut self.iterate);
        for (acc, x) in self.running_sum.iter_mut().zip(&self.iterate) {
            acc.add(*x);
        }
        self.step_index += 1;
    }

    pub fn iterate(&self) -> &[f64] {
        &self.iterate
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// `(1/t) Σ_{s=1}^t w_s`; the initial point when no step has been taken.
    pub fn average(&self) -> Vec<f64> {
        if self.step_index == 0 {
            return self.iterate.clone();
        }
        let t = self.step_index as f64;
        self.running_sum.iter().map(|s| s.value() / t).collect()
    }
}

/// Norm statistics of the stochastic gradients used in a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradientStats {
    pub steps: usize,
    pub mean_norm: f64,
    pub max_norm: f64,
    pub mean_sq_norm: f64,
}

impl GradientStats {
    fn record(&mut self, g: &[f64]) {
        let sq = dot(g, g);
        let n = sq.sqrt();
        self.steps += 1;
        let t = self.steps as f64;
        self.mean_norm += (n - self.mean_norm) / t;
        self.mean_sq_norm += (sq - self.mean_sq_norm) / t;
        self.max_norm = self.max_norm.max(n);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    /// `w̄ = (1/n) Σ_{t=1}^n w_t`
    pub averaged_iterate: Vec<f64>,
    pub final_iterate: Vec<f64>,
    pub gradient_stats: GradientStats,
    /// `None` for the non-private baseline.
    pub mechanism: Option<Mechanism>,
    pub seed: u64,
    pub learning_rate: f64,
    /// False when every label was randomized before learning started.
    pub interactive: bool,
    /// Coordinate ℓ1 bound passed to the vector randomizer (`L √K`).
    pub l1_bound: Option<f64>,
}

fn initial_point(domain: &ParameterDomain, initial: Option<&Vec<f64>>) -> Result<Vec<f64>> {
    match initial {
        None => Ok(vec![0.0; domain.dimension()]),
        Some(w) => {
            if w.len() != domain.dimension() {
                return Err(Error::DimensionMismatch {
                    expected: domain.dimension(),
                    found: w.len(),
                });
            }
            if w.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite);
            }
            if norm(w) > domain.radius() * (1.0 + 1e-12) {
                return Err(Error::InvalidParams("initial point outside the domain".into()));
            }
            Ok(w.clone())
        }
    }
}

fn check_loss<X, F: ConvexLoss<X> + ?Sized>(
    loss: &F,
    domain: &ParameterDomain,
    params: &MechanismParams,
) -> Result<()> {
    if loss.num_labels() != params.num_labels() {
        return Err(Error::DimensionMismatch {
            expected: params.num_labels(),
            found: loss.num_labels(),
        });
    }
    if loss.dimension() != domain.dimension() {
        return Err(Error::DimensionMismatch {
            expected: domain.dimension(),
            found: loss.dimension(),
        });
    }
    Ok(())
}

/// Stage one: every user randomizes their own label once, with the stream
/// derived from `(seed, user index)`.
pub fn randomize_labels<S: LabelStore + ?Sized>(
    store: &S,
    mechanism: SubsetMechanism,
    params: &MechanismParams,
    seed: u64,
) -> Result<Vec<SanitizedSubset>> {
    (0..store.len())
        .map(|i| {
            let y = params.label(store.label(i).value())?;
            let mut rng = RandomnessStream::derive(seed, i as u64, Purpose::LabelRandomization);
            mechanisms::randomize(mechanism, y, params, &mut rng)
        })
        .collect()
}

fn visiting_order(n: usize, shuffle: bool, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        let mut rng = RandomnessStream::derive(seed, 0, Purpose::Shuffle);
        order.shuffle(&mut rng);
    }
    order
}

/// Stage two: projected SGD on sanitized records only.
pub fn learning_stage<X, F: ConvexLoss<X> + ?Sized>(
    records: &[SanitizedRecord<'_, X>],
    loss: &F,
    domain: &ParameterDomain,
    config: &TrainConfig,
) -> Result<TrainResult> {
    if records.is_empty() {
        return Err(Error::EmptyData);
    }
    let params = &config.params;
    check_loss(loss, domain, params)?;
    let n = records.len();
    let eta = match config.learning_rate {
        Some(eta) => eta,
        None => learning_rate(
            domain.radius(),
            loss.lipschitz_bound(),
            n,
            params.num_labels(),
            params.epsilon(),
        )?,
    };
    let mut state = SgdState::new(initial_point(domain, config.initial.as_ref())?, eta);
    let mut stats = GradientStats::default();
    for t in visiting_order(n, config.shuffle, config.seed) {
        let record = &records[t];
        let weights = estimator_weights(&record.subset, params)?;
        let g = loss.weighted_gradient(state.iterate(), record.feature, &weights);
        stats.record(&g);
        state.step(&g, domain);
    }
    Ok(TrainResult {
        averaged_iterate: state.average(),
        final_iterate: state.iterate().to_vec(),
        gradient_stats: stats,
        mechanism: Some(config.mechanism),
        seed: config.seed,
        learning_rate: eta,
        interactive: false,
        l1_bound: None,
    })
}

fn train_vector_randomizer<X, F: ConvexLoss<X> + ?Sized>(
    data: &[DataPoint<X>],
    loss: &F,
    domain: &ParameterDomain,
    config: &TrainConfig,
) -> Result<TrainResult> {
    let params = &config.params;
    let n = data.len();
    let k = params.num_labels();
    let eta = match config.learning_rate {
        Some(eta) => eta,
        None => learning_rate(domain.radius(), loss.lipschitz_bound(), n, k, params.epsilon())?,
    };
    let l1_bound = loss.lipschitz_bound() * (k as f64).sqrt();
    let mut state = SgdState::new(initial_point(domain, config.initial.as_ref())?, eta);
    let mut stats = GradientStats::default();
    for t in visiting_order(n, config.shuffle, config.seed) {
        let point = &data[t];
        let grads = loss.per_label_gradients(state.iterate(), &point.feature)?;
        let basis = orthonormal_basis(grads.gradients(), 1e-10);
        let v = grads.get(point.label);
        let coords: Vec<f64> = basis.iter().map(|b| dot(b, v)).collect();
        let mut rng = RandomnessStream::derive(config.seed, t as u64, Purpose::VectorRandomization);
        let noisy = djw_randomize_coordinates(&coords, l1_bound, params.epsilon(), &mut rng);
        let mut g = vec![0.0; domain.dimension()];
        for (c, b) in noisy.iter().zip(&basis) {
            axpy(*c, b, &mut g);
        }
        stats.record(&g);
        state.step(&g, domain);
    }
    Ok(TrainResult {
        averaged_iterate: state.average(),
        final_iterate: state.iterate().to_vec(),
        gradient_stats: stats,
        mechanism: Some(Mechanism::Djw),
        seed: config.seed,
        learning_rate: eta,
        interactive: true,
        l1_bound: Some(l1_bound),
    })
}

/// Runs the full protocol on `data`: label randomization for every user,
/// then the learning stage. For [`Mechanism::Djw`] the two are interleaved.
pub fn train<X, F: ConvexLoss<X> + ?Sized>(
    data: &[DataPoint<X>],
    loss: &F,
    domain: &ParameterDomain,
    config: &TrainConfig,
) -> Result<TrainResult> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    config.check_mechanism()?;
    check_loss(loss, domain, &config.params)?;
    for p in data {
        config.params.label(p.label.value())?;
    }
    let Some(mechanism) = config.mechanism.as_subset() else {
        return train_vector_randomizer(data, loss, domain, config);
    };
    let subsets = randomize_labels(data, mechanism, &config.params, config.seed)?;
    let records: Vec<SanitizedRecord<'_, X>> = data
        .iter()
        .zip(subsets)
        .map(|(p, subset)| SanitizedRecord {
            feature: &p.feature,
            subset,
        })
        .collect();
    learning_stage(&records, loss, domain, config)
}

/// Ordinary projected SGD on the true labels, with step size
/// [`non_private_learning_rate`] unless `learning_rate` is given.
pub fn train_non_private<X, F: ConvexLoss<X> + ?Sized>(
    data: &[DataPoint<X>],
    loss: &F,
    domain: &ParameterDomain,
    initial: Option<&Vec<f64>>,
    learning_rate: Option<f64>,
) -> Result<TrainResult> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if loss.dimension() != domain.dimension() {
        return Err(Error::DimensionMismatch {
            expected: domain.dimension(),
            found: loss.dimension(),
        });
    }
    let eta = match learning_rate {
        Some(eta) => eta,
        None => non_private_learning_rate(domain.radius(), loss.lipschitz_bound(), data.len())?,
    };
    let mut state = SgdState::new(initial_point(domain, initial)?, eta);
    let mut stats = GradientStats::default();
    for point in data {
        if point.label.value() > loss.num_labels() {
            return Err(Error::LabelOutOfRange {
                label: point.label.value(),
                num_labels: loss.num_labels(),
            });
        }
        let g = loss.gradient(state.iterate(), &point.feature, point.label);
        stats.record(&g);
        state.step(&g, domain);
    }
    Ok(TrainResult {
        averaged_iterate: state.average(),
        final_iterate: state.iterate().to_vec(),
        gradient_stats: stats,
        mechanism: None,
        seed: 0,
        learning_rate: eta,
        interactive: false,
        l1_bound: None,
    })
}

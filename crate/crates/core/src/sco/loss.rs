use crate::error::{Error, Result};
use crate::estimation::PerLabelGradients;
use crate::mechanisms::Label;
use crate::numeric::{axpy, dot, norm};

/// A loss `ℓ(w, (x, y))` that is convex and `L`-Lipschitz in `w`.
///
/// Convexity is a contract of the implementor; [`check_lipschitz`] and
/// [`check_gradient_consistency`] spot-check the other two properties.
pub trait ConvexLoss<X> {
    fn num_labels(&self) -> usize;

    /// Dimension `p` of the parameter vector.
    fn dimension(&self) -> usize;

    fn lipschitz_bound(&self) -> f64;

    fn value(&self, w: &[f64], x: &X, y: Label) -> f64;

    /// `∇_w ℓ(w, (x, y))`.
    fn gradient(&self, w: &[f64], x: &X, y: Label) -> Vec<f64>;

    /// `Σ_k weights[k] · ∇ℓ(w, (x, k))`. The default evaluates all `K`
    /// gradients; losses with structured gradients should override it.
    fn weighted_gradient(&self, w: &[f64], x: &X, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension()];
        for (i, &c) in weights.iter().enumerate() {
            if c != 0.0 {
                axpy(c, &self.gradient(w, x, Label::from_index(i)), &mut out);
            }
        }
        out
    }

    fn per_label_gradients(&self, w: &[f64], x: &X) -> Result<PerLabelGradients> {
        let grads = (0..self.num_labels())
            .map(|i| self.gradient(w, x, Label::from_index(i)))
            .collect();
        PerLabelGradients::new(grads, self.lipschitz_bound())
    }
}

/// Largest gradient norm over the probe points, failing if it exceeds the
/// loss's Lipschitz bound (with `1e-9` relative slack).
pub fn check_lipschitz<X, F: ConvexLoss<X> + ?Sized>(
    loss: &F,
    probes: &[(Vec<f64>, X)],
) -> Result<f64> {
    let bound = loss.lipschitz_bound();
    let mut worst = 0.0f64;
    for (w, x) in probes {
        for i in 0..loss.num_labels() {
            let n = norm(&loss.gradient(w, x, Label::from_index(i)));
            if n > bound * (1.0 + 1e-9) {
                return Err(Error::LipschitzViolated {
                    index: i,
                    norm: n,
                    bound,
                });
            }
            worst = worst.max(n);
        }
    }
    Ok(worst)
}

/// Relative gap between the analytic directional derivative `⟨∇ℓ, u⟩` and a
/// central finite difference with step `1e-5`.
pub fn check_gradient_consistency<X, F: ConvexLoss<X> + ?Sized>(
    loss: &F,
    w: &[f64],
    x: &X,
    y: Label,
    direction: &[f64],
) -> f64 {
    const STEP: f64 = 1e-5;
    let shifted = |sign: f64| -> Vec<f64> {
        w.iter().zip(direction).map(|(a, u)| a + sign * STEP * u).collect()
    };
    let numeric =
        (loss.value(&shifted(1.0), x, y) - loss.value(&shifted(-1.0), x, y)) / (2.0 * STEP);
    let analytic = dot(&loss.gradient(w, x, y), direction);
    (numeric - analytic).abs() / analytic.abs().max(1e-8)
}

/// Multinomial logistic loss `-log softmax(W x)_y` with `W` stored row-major
/// as `K` blocks of the feature dimension. Features are assumed to satisfy
/// `‖x‖ ≤ feature_bound`, which gives Lipschitz bound `√2 · feature_bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftmaxLoss {
    num_labels: usize,
    feature_dim: usize,
    feature_bound: f64,
}

impl SoftmaxLoss {
    pub fn new(num_labels: usize, feature_dim: usize, feature_bound: f64) -> Result<Self> {
        if num_labels < 2 || feature_dim == 0 || feature_bound.is_nan() || feature_bound <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "softmax loss needs K >= 2, feature_dim >= 1, positive feature bound \
                 (got {num_labels}, {feature_dim}, {feature_bound})"
            )));
        }
        Ok(Self {
            num_labels,
            feature_dim,
            feature_bound,
        })
    }

    fn probabilities(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = w.chunks(self.feature_dim).map(|row| dot(row, x)).collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / total).collect()
    }

    fn outer(&self, coeffs: &[f64], x: &[f64]) -> Vec<f64> {
        coeffs
            .iter()
            .flat_map(|c| x.iter().map(move |xi| c * xi))
            .collect()
    }
}

impl ConvexLoss<Vec<f64>> for SoftmaxLoss {
    fn num_labels(&self) -> usize {
        self.num_labels
    }

    fn dimension(&self) -> usize {
        self.num_labels * self.feature_dim
    }

    fn lipschitz_bound(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.feature_bound
    }

    fn value(&self, w: &[f64], x: &Vec<f64>, y: Label) -> f64 {
        let logits: Vec<f64> = w.chunks(self.feature_dim).map(|row| dot(row, x)).collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        lse - logits[y.index()]
    }

    fn gradient(&self, w: &[f64], x: &Vec<f64>, y: Label) -> Vec<f64> {
        let mut coeffs = self.probabilities(w, x);
        coeffs[y.index()] -= 1.0;
        self.outer(&coeffs, x)
    }

    // Σ_k a_k (p - e_k) ⊗ x = ((Σ a) p - a) ⊗ x
    fn weighted_gradient(&self, w: &[f64], x: &Vec<f64>, weights: &[f64]) -> Vec<f64> {
        let total: f64 = weights.iter().sum();
        let coeffs: Vec<f64> = self
            .probabilities(w, x)
            .into_iter()
            .zip(weights)
            .map(|(p, a)| total * p - a)
            .collect();
        self.outer(&coeffs, x)
    }
}

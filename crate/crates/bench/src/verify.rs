//! Exhaustive privacy and estimator checks over a config grid.

use std::io::Write;

use rand::Rng;

use labeldp_sco::estimation::{estimator_moments_bruteforce, MomentRecord, PerLabelGradients};
use labeldp_sco::mechanisms::verify::{max_likelihood_ratio, MAX_VERIFY_LABELS};
use labeldp_sco::mechanisms::{self, output_space, output_space_size};
use labeldp_sco::{
    derive_seed, Error, Label, Mechanism, MechanismParams, Purpose, RandomnessStream, SanitizedSubset,
    SubsetMechanism,
};

use crate::config::ExperimentConfig;
use crate::csv;

/// Relative slack on `e^ε` when checking likelihood ratios.
pub const RATIO_TOLERANCE: f64 = 1e-9;
/// Absolute tolerance on the estimator mean.
pub const MEAN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Pass,
    Fail(String),
    Skipped(String),
}

impl CellStatus {
    pub fn is_fail(&self) -> bool {
        matches!(self, CellStatus::Fail(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyCell {
    pub mechanism: Mechanism,
    pub num_labels: usize,
    pub epsilon: f64,
    pub subset_size: Option<usize>,
    /// Largest `P[S | y] / P[S | y']`; `None` when skipped.
    pub ratio: Option<f64>,
    pub status: CellStatus,
}

impl PrivacyCell {
    pub fn describe(&self) -> String {
        let d = self.subset_size.map(|d| format!(" d={d}")).unwrap_or_default();
        let head = format!("{} K={}{d} epsilon={:.6}", self.mechanism, self.num_labels, self.epsilon);
        match (&self.status, self.ratio) {
            (CellStatus::Skipped(why), _) => format!("{head}: skipped ({why})"),
            (status, Some(r)) => format!(
                "{head}: ratio {r:.12} vs e^eps {:.12} {}",
                self.epsilon.exp(),
                if status.is_fail() { "FAIL" } else { "ok" }
            ),
            (_, None) => head,
        }
    }
}

pub type LikelihoodFn<'a> = dyn Fn(&SanitizedSubset, Label, &MechanismParams) -> labeldp_sco::Result<f64> + 'a;

/// [`verify_privacy_with`] on the mechanisms' own likelihoods.
pub fn verify_privacy(config: &ExperimentConfig) -> Vec<PrivacyCell> {
    verify_privacy_with(config, &mechanisms::likelihood)
}

/// Largest likelihood ratio per grid cell, computed with `likelihood`.
/// Cells whose output space is too large to enumerate are skipped.
pub fn verify_privacy_with(config: &ExperimentConfig, likelihood: &LikelihoodFn<'_>) -> Vec<PrivacyCell> {
    let mut cells = Vec::new();
    for &mechanism in &config.mechanisms {
        for eps in &config.epsilons {
            for &k in &config.num_labels {
                let epsilon = eps.resolve(k);
                let mut cell = PrivacyCell {
                    mechanism,
                    num_labels: k,
                    epsilon,
                    subset_size: None,
                    ratio: None,
                    status: CellStatus::Pass,
                };
                cell.status = match check_privacy_cell(config, mechanism, k, epsilon, likelihood) {
                    Ok((params, ratio)) => {
                        cell.subset_size = params.subset_size();
                        cell.ratio = Some(ratio);
                        if ratio <= epsilon.exp() * (1.0 + RATIO_TOLERANCE) {
                            CellStatus::Pass
                        } else {
                            CellStatus::Fail(format!("ratio {ratio} exceeds e^eps"))
                        }
                    }
                    Err(CheckError::Skip(why)) => CellStatus::Skipped(why),
                    Err(CheckError::Fail(why)) => CellStatus::Fail(why),
                };
                cells.push(cell);
            }
        }
    }
    cells
}

enum CheckError {
    Skip(String),
    Fail(String),
}

fn check_privacy_cell(
    config: &ExperimentConfig,
    mechanism: Mechanism,
    k: usize,
    epsilon: f64,
    likelihood: &LikelihoodFn<'_>,
) -> Result<(MechanismParams, f64), CheckError> {
    let Some(subset) = mechanism.as_subset() else {
        return Err(CheckError::Skip("continuous output, not enumerable".into()));
    };
    let params = config
        .cell_params(mechanism, k, epsilon)
        .map_err(|e| CheckError::Skip(e.to_string()))?;
    if subset != SubsetMechanism::Krr && k > MAX_VERIFY_LABELS {
        return Err(CheckError::Skip(format!("K > {MAX_VERIFY_LABELS}")));
    }
    let fail = |e: Error| CheckError::Fail(e.to_string());
    output_space_size(subset, &params).map_err(fail)?;
    let labels: Vec<Label> = params.labels().collect();
    let outputs = output_space(subset, &params).map_err(fail)?;
    let ratio = max_likelihood_ratio(outputs, &labels, |s, y| likelihood(s, y, &params)).map_err(fail)?;
    Ok((params, ratio))
}

/// Which gradients a moment check used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientSet {
    Basis,
    Zero,
    Random(usize),
}

impl std::fmt::Display for GradientSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GradientSet::Basis => f.write_str("basis"),
            GradientSet::Zero => f.write_str("zero"),
            GradientSet::Random(i) => write!(f, "random-{i}"),
        }
    }
}

/// Worst case over true labels of one gradient set in one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorCell {
    pub gradient_set: GradientSet,
    pub record: MomentRecord,
    pub status: CellStatus,
}

pub const MOMENT_HEADER: &str = "mechanism,K,d,epsilon,gradient_set,second_moment,bound,mean_error";

impl EstimatorCell {
    pub fn to_csv(&self) -> String {
        let r = &self.record;
        format!(
            "{},{},{},{},{},{},{},{}",
            r.mechanism,
            r.num_labels,
            csv::optional_int(r.subset_size),
            csv::float(r.epsilon),
            self.gradient_set,
            csv::float(r.second_moment),
            csv::float(r.bound),
            csv::float(r.mean_error),
        )
    }
}

pub fn write_moments<W: Write>(mut out: W, cells: &[EstimatorCell]) -> std::io::Result<()> {
    writeln!(out, "{MOMENT_HEADER}")?;
    for c in cells {
        writeln!(out, "{}", c.to_csv())?;
    }
    out.flush()
}

/// Dimension of the random gradient sets.
pub const RANDOM_GRADIENT_DIM: usize = 3;

/// `K` random vectors in `R^p` with uniformly random directions and norms
/// uniform in `[0, lipschitz]`.
pub fn random_gradients<R: Rng + ?Sized>(
    k: usize,
    dim: usize,
    lipschitz: f64,
    rng: &mut R,
) -> labeldp_sco::Result<PerLabelGradients> {
    let grads = (0..k)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let r = lipschitz * rng.random::<f64>();
            v.into_iter().map(|x| x * r / n).collect()
        })
        .collect();
    PerLabelGradients::new(grads, lipschitz)
}

fn basis_gradients(k: usize) -> labeldp_sco::Result<PerLabelGradients> {
    let g = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    PerLabelGradients::new(g, 1.0)
}

fn nan_record(mechanism: SubsetMechanism, k: usize, subset_size: Option<usize>, epsilon: f64) -> MomentRecord {
    MomentRecord {
        mechanism,
        num_labels: k,
        subset_size,
        epsilon,
        second_moment: f64::NAN,
        bound: f64::NAN,
        mean_error: f64::NAN,
    }
}

fn moment_cell(
    mechanism: SubsetMechanism,
    params: &MechanismParams,
    set: GradientSet,
    grads: &PerLabelGradients,
) -> EstimatorCell {
    let mut records = Vec::new();
    let mut status = CellStatus::Pass;
    for y in params.labels() {
        let report = match estimator_moments_bruteforce(mechanism, y, grads, params) {
            Ok(r) => r,
            Err(Error::EnumerationGuard { size, .. }) => {
                status = CellStatus::Skipped(format!("{size} outputs"));
                break;
            }
            Err(e) => {
                status = CellStatus::Fail(e.to_string());
                break;
            }
        };
        let record = report.record(mechanism, params, grads.get(y));
        if record.mean_error > MEAN_TOLERANCE {
            status = CellStatus::Fail(format!("y={y}: mean off by {}", record.mean_error));
        } else if !report.within_bound() {
            status = CellStatus::Fail(format!(
                "y={y}: second moment {} above bound {}",
                report.second_moment, report.bound
            ));
        }
        records.push(record);
        if status.is_fail() {
            break;
        }
    }
    // report the label closest to its bound, with the largest mean error seen
    let mean_error = records.iter().map(|r| r.mean_error).fold(0.0, f64::max);
    let slack = |r: &MomentRecord| if r.bound > 0.0 { r.second_moment / r.bound } else { 0.0 };
    let record = records
        .into_iter()
        .max_by(|a, b| slack(a).total_cmp(&slack(b)))
        .map(|r| MomentRecord { mean_error, ..r })
        .unwrap_or_else(|| nan_record(mechanism, params.num_labels(), params.subset_size(), params.epsilon()));
    EstimatorCell {
        gradient_set: set,
        record,
        status,
    }
}

/// Exact moments for the basis set, the zero set and `gradient_sets` random
/// sets in every cell of the grid.
pub fn verify_estimators(config: &ExperimentConfig) -> Vec<EstimatorCell> {
    let mut out = Vec::new();
    for (mi, &mechanism) in config.mechanisms.iter().enumerate() {
        let Some(subset) = mechanism.as_subset() else {
            continue;
        };
        for eps in &config.epsilons {
            for &k in &config.num_labels {
                let epsilon = eps.resolve(k);
                let params = match config.cell_params(mechanism, k, epsilon) {
                    Ok(p) => p,
                    Err(e) => {
                        out.push(EstimatorCell {
                            gradient_set: GradientSet::Basis,
                            record: nan_record(subset, k, None, epsilon),
                            status: CellStatus::Fail(e.to_string()),
                        });
                        continue;
                    }
                };
                let cell_seed = derive_seed(&[config.seed, mi as u64, k as u64, epsilon.to_bits()]);
                let mut rng = RandomnessStream::derive(cell_seed, 0, Purpose::GradientSets);
                let mut sets = vec![
                    (GradientSet::Basis, basis_gradients(k)),
                    (GradientSet::Zero, PerLabelGradients::new(vec![vec![0.0; k]; k], 1.0)),
                ];
                for i in 0..config.gradient_sets {
                    sets.push((GradientSet::Random(i), random_gradients(k, RANDOM_GRADIENT_DIM, 1.0, &mut rng)));
                }
                for (set, grads) in sets {
                    out.push(match grads {
                        Ok(g) => moment_cell(subset, &params, set, &g),
                        Err(e) => EstimatorCell {
                            gradient_set: set,
                            record: nan_record(subset, k, params.subset_size(), epsilon),
                            status: CellStatus::Fail(e.to_string()),
                        },
                    });
                }
            }
        }
    }
    out
}

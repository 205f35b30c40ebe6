//! Excess-risk sweeps on the hard instance.
//!
//! Grid order is mechanism, then `ε`, then `K`, then `n`, then trial. Trials
//! run in parallel but rows come back in grid order.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use labeldp_sco::hard_instances::{closed_form_excess_risk, linear_loss, HardInstance, HardInstanceSpec};
use labeldp_sco::sco::{
    excess_risk_montecarlo, risk_upper_bound_rate, train, train_non_private, ParameterDomain, TrainConfig, TrainResult,
};
use labeldp_sco::{derive_seed, Mechanism, MechanismParams, Purpose, RandomnessStream};

use crate::config::ExperimentConfig;
use crate::csv;
use crate::error::{BenchError, Result};

pub const RESULT_HEADER: &str = "mechanism,K,epsilon,n,d,trial,seed,empirical_excess_risk,closed_form_risk,theoretical_bound,wall_time_ms";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub mechanism: Mechanism,
    pub num_labels: usize,
    pub epsilon: f64,
    pub n: usize,
    pub subset_size: Option<usize>,
    pub trial: usize,
    pub seed: u64,
    /// Monte Carlo excess risk of `w̄`; its standard error is kept in
    /// `empirical_std_error` but not written out.
    pub empirical_excess_risk: f64,
    pub empirical_std_error: f64,
    pub closed_form_risk: f64,
    pub theoretical_bound: f64,
    pub wall_time_ms: Option<f64>,
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.mechanism,
            self.num_labels,
            csv::float(self.epsilon),
            self.n,
            csv::optional_int(self.subset_size),
            self.trial,
            self.seed,
            csv::float(self.empirical_excess_risk),
            csv::float(self.closed_form_risk),
            csv::float(self.theoretical_bound),
            csv::optional_float(self.wall_time_ms),
        )
    }
}

pub fn write_rows<W: Write>(mut out: W, rows: &[ResultRow]) -> std::io::Result<()> {
    writeln!(out, "{RESULT_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv())?;
    }
    out.flush()
}

/// One `(mechanism, K, ε, n)` point of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub index: usize,
    pub mechanism: Mechanism,
    pub params: MechanismParams,
    pub n: usize,
}

impl SweepCell {
    pub fn label(&self) -> String {
        format!(
            "{} K={} epsilon={} n={}",
            self.mechanism,
            self.params.num_labels(),
            self.params.epsilon(),
            self.n
        )
    }
}

pub fn sweep_cells(config: &ExperimentConfig) -> Result<Vec<SweepCell>> {
    config.validate()?;
    let mut cells = Vec::new();
    for &mechanism in &config.mechanisms {
        for eps in &config.epsilons {
            for &k in &config.num_labels {
                for &n in &config.sample_sizes {
                    let params = config.cell_params(mechanism, k, eps.resolve(k))?;
                    cells.push(SweepCell {
                        index: cells.len(),
                        mechanism,
                        params,
                        n,
                    });
                }
            }
        }
    }
    Ok(cells)
}

/// `hash(master, cell, trial)`
pub fn trial_seed(master: u64, cell_index: usize, trial: usize) -> u64 {
    derive_seed(&[master, cell_index as u64, trial as u64])
}

/// Hard instance and its dataset for one trial. The data stream depends on
/// the trial seed only, so a private and a non-private run given the same
/// seed see the same users.
pub fn trial_data(
    num_labels: usize,
    n: usize,
    epsilon: f64,
    c_gamma: f64,
    seed: u64,
) -> labeldp_sco::Result<(HardInstance, Vec<labeldp_sco::sco::DataPoint<u64>>)> {
    let instance = HardInstance::build(&HardInstanceSpec {
        c_gamma,
        ..HardInstanceSpec::new(num_labels, n, epsilon)
    })?;
    let mut rng = RandomnessStream::derive(seed, 0, Purpose::DataGeneration);
    let data = instance.sample_dataset(n, &mut rng);
    Ok((instance, data))
}

fn unit_domain(num_labels: usize) -> labeldp_sco::Result<ParameterDomain> {
    ParameterDomain::new(num_labels, 1.0)
}

/// Trains the private mechanism of `cell` on one trial's data.
pub fn run_trial(cell: &SweepCell, trial: usize, config: &ExperimentConfig) -> Result<ResultRow> {
    let seed = trial_seed(config.seed, cell.index, trial);
    let k = cell.params.num_labels();
    let eps = cell.params.epsilon();
    let wrap = |source| BenchError::Cell {
        cell: format!("{} trial={trial}", cell.label()),
        source,
    };
    let start = Instant::now();
    let (instance, data) = trial_data(k, cell.n, eps, config.c_gamma, seed).map_err(wrap)?;
    let loss = linear_loss(k).map_err(wrap)?;
    let domain = unit_domain(k).map_err(wrap)?;
    let result = train(&data, &loss, &domain, &TrainConfig::new(cell.params, cell.mechanism, seed))
        .map_err(wrap)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let row = evaluate(&instance, &result, config.mc_samples, seed).map_err(wrap)?;
    Ok(ResultRow {
        mechanism: cell.mechanism,
        num_labels: k,
        epsilon: eps,
        n: cell.n,
        subset_size: cell.params.subset_size(),
        trial,
        seed,
        empirical_excess_risk: row.0,
        empirical_std_error: row.1,
        closed_form_risk: row.2,
        theoretical_bound: risk_upper_bound_rate(k, eps, cell.n, 1.0, 1.0),
        wall_time_ms: config.record_timing.then_some(elapsed),
    })
}

/// `(Monte Carlo mean, its standard error, closed form)` for `w̄`.
fn evaluate(
    instance: &HardInstance,
    result: &TrainResult,
    mc_samples: usize,
    seed: u64,
) -> labeldp_sco::Result<(f64, f64, f64)> {
    let w = &result.averaged_iterate;
    let loss = linear_loss(instance.num_labels())?;
    let mut rng = RandomnessStream::derive(seed, 0, Purpose::RiskEvaluation);
    let mc = excess_risk_montecarlo(w, instance, &loss, mc_samples, instance.optimum(), &mut rng)?;
    Ok((mc.mean, mc.std_error, closed_form_excess_risk(w, instance)?))
}

/// Closed-form excess risk of ordinary projected SGD on the true labels, for
/// the same trial data a private run with `seed` would see.
pub fn non_private_risk(num_labels: usize, n: usize, epsilon: f64, c_gamma: f64, seed: u64) -> labeldp_sco::Result<f64> {
    let (instance, data) = trial_data(num_labels, n, epsilon, c_gamma, seed)?;
    let loss = linear_loss(num_labels)?;
    let result = train_non_private(&data, &loss, &unit_domain(num_labels)?, None, None)?;
    closed_form_excess_risk(&result.averaged_iterate, &instance)
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let cells = sweep_cells(config)?;
    let jobs: Vec<(&SweepCell, usize)> = cells
        .iter()
        .flat_map(|cell| (0..config.trials).map(move |t| (cell, t)))
        .collect();
    jobs.into_par_iter()
        .map(|(cell, trial)| run_trial(cell, trial, config))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EpsilonSpec;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            mechanisms: vec![Mechanism::BernoulliSubset, Mechanism::Krr],
            epsilons: vec![EpsilonSpec::Value(1.0)],
            num_labels: vec![4],
            sample_sizes: vec![200],
            trials: 2,
            seed: 5,
            mc_samples: 500,
            record_timing: false,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn grid_order_and_seeds() {
        let config = ExperimentConfig {
            num_labels: vec![2, 4],
            ..small()
        };
        let rows = run_sweep(&config).unwrap();
        assert_eq!(rows.len(), 8);
        let keys: Vec<_> = rows.iter().map(|r| (r.mechanism, r.num_labels, r.trial)).collect();
        assert_eq!(keys[0], (Mechanism::BernoulliSubset, 2, 0));
        assert_eq!(keys[1], (Mechanism::BernoulliSubset, 2, 1));
        assert_eq!(keys[2], (Mechanism::BernoulliSubset, 4, 0));
        assert_eq!(keys[4], (Mechanism::Krr, 2, 0));
        let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), rows.len());
    }

    #[test]
    fn rows_are_consistent() {
        for row in run_sweep(&small()).unwrap() {
            assert!(row.theoretical_bound > 0.0);
            assert!(row.closed_form_risk >= 0.0);
            assert!(row.empirical_excess_risk >= -4.0 * row.empirical_std_error);
            assert!((row.empirical_excess_risk - row.closed_form_risk).abs() <= 5.0 * row.empirical_std_error + 1e-12);
            assert_eq!(row.wall_time_ms, None);
            assert_eq!(row.to_csv().split(',').count(), RESULT_HEADER.split(',').count());
        }
    }

    #[test]
    fn d_subset_rows_carry_d() {
        let config = ExperimentConfig {
            mechanisms: vec![Mechanism::DSubset],
            num_labels: vec![16],
            trials: 1,
            ..small()
        };
        let rows = run_sweep(&config).unwrap();
        assert_eq!(rows[0].subset_size, Some(3));
        assert!(rows[0].to_csv().starts_with("d-subset,16,"));
    }

    #[test]
    fn odd_k_fails_with_cell_name() {
        let config = ExperimentConfig {
            num_labels: vec![3],
            ..small()
        };
        let err = run_sweep(&config).unwrap_err();
        assert!(err.to_string().contains("K=3"), "{err}");
    }
}

//! Parameter estimate to distribution estimate: `θ̂ = 1/K · 1 + α ŵ`.

use std::io::Write;

use rayon::prelude::*;

use labeldp_sco::hard_instances::{linear_loss, reduce_to_theta_hat, HardInstance};
use labeldp_sco::numeric::distance;
use labeldp_sco::sco::{train, ParameterDomain, TrainConfig};

use crate::config::ExperimentConfig;
use crate::csv;
use crate::error::{BenchError, Result};
use crate::sweep::{sweep_cells, trial_data, trial_seed, SweepCell};

pub const REDUCE_HEADER: &str = "mechanism,K,epsilon,n,trial,seed,gamma,alpha,theta_error,scaled_parameter_error";

/// Where `ŵ` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimate {
    /// `w̄` from private training.
    Trained,
    /// `ŵ = b`, the exact minimizer.
    Optimum,
    /// `ŵ = 0`
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReduceRow {
    pub cell: SweepCell,
    pub trial: usize,
    pub seed: u64,
    pub gamma: f64,
    pub alpha: f64,
    /// `‖θ̂ - θ‖₂`
    pub theta_error: f64,
    /// `α ‖ŵ - b‖₂`
    pub scaled_parameter_error: f64,
}

impl ReduceRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.cell.mechanism,
            self.cell.params.num_labels(),
            csv::float(self.cell.params.epsilon()),
            self.cell.n,
            self.trial,
            self.seed,
            csv::float(self.gamma),
            csv::float(self.alpha),
            csv::float(self.theta_error),
            csv::float(self.scaled_parameter_error),
        )
    }

    pub fn gap(&self) -> f64 {
        (self.theta_error - self.scaled_parameter_error).abs()
    }
}

pub fn write_reduce_rows<W: Write>(mut out: W, rows: &[ReduceRow]) -> std::io::Result<()> {
    writeln!(out, "{REDUCE_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv())?;
    }
    out.flush()
}

fn reduce_trial(cell: &SweepCell, trial: usize, config: &ExperimentConfig, estimate: Estimate) -> Result<ReduceRow> {
    let k = cell.params.num_labels();
    let seed = trial_seed(config.seed, cell.index, trial);
    let wrap = |source| BenchError::Cell {
        cell: format!("{} trial={trial}", cell.label()),
        source,
    };
    let (instance, data): (HardInstance, _) =
        trial_data(k, cell.n, cell.params.epsilon(), config.c_gamma, seed).map_err(wrap)?;
    let w_hat = match estimate {
        Estimate::Trained => {
            let loss = linear_loss(k).map_err(wrap)?;
            let domain = ParameterDomain::new(k, 1.0).map_err(wrap)?;
            train(&data, &loss, &domain, &TrainConfig::new(cell.params, cell.mechanism, seed))
                .map_err(wrap)?
                .averaged_iterate
        }
        Estimate::Optimum => instance.optimum().to_vec(),
        Estimate::Zero => vec![0.0; k],
    };
    let theta_hat = reduce_to_theta_hat(&w_hat, k, instance.gamma()).map_err(wrap)?;
    Ok(ReduceRow {
        cell: cell.clone(),
        trial,
        seed,
        gamma: instance.gamma(),
        alpha: instance.alpha(),
        theta_error: distance(&theta_hat, instance.theta()),
        scaled_parameter_error: instance.alpha() * distance(&w_hat, instance.optimum()),
    })
}

pub fn run_reduce_demo(config: &ExperimentConfig, estimate: Estimate) -> Result<Vec<ReduceRow>> {
    if let Some(k) = config.num_labels.iter().find(|&&k| k % 2 == 1) {
        return Err(BenchError::Usage(format!("reduce-demo needs even K, got {k}")));
    }
    let cells = sweep_cells(config)?;
    let jobs: Vec<(&SweepCell, usize)> = cells
        .iter()
        .flat_map(|cell| (0..config.trials).map(move |t| (cell, t)))
        .collect();
    jobs.into_par_iter()
        .map(|(cell, trial)| reduce_trial(cell, trial, config, estimate))
        .collect()
}

//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comment
//! mechanism = bernoulli-subset, krr
//! epsilon = 0.5, 1, lnK
//! k = 4, 16, 64
//! n = 100000
//! trials = 50
//! seed = 7
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use labeldp_sco::mechanisms::recommended_subset_size;
use labeldp_sco::{Mechanism, MechanismParams};

use crate::error::{BenchError, Result};

/// A privacy level, either fixed or `ln K` of the cell it lands in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonSpec {
    Value(f64),
    LnK,
}

impl EpsilonSpec {
    pub fn resolve(self, num_labels: usize) -> f64 {
        match self {
            EpsilonSpec::Value(v) => v,
            EpsilonSpec::LnK => (num_labels as f64).ln(),
        }
    }
}

impl FromStr for EpsilonSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("lnk") || s.eq_ignore_ascii_case("ln(k)") {
            return Ok(EpsilonSpec::LnK);
        }
        let value = match s.strip_prefix("ln(").and_then(|r| r.strip_suffix(')')) {
            Some(inner) => inner
                .trim()
                .parse::<f64>()
                .map(f64::ln)
                .map_err(|_| format!("invalid epsilon `{s}`"))?,
            None => s.parse::<f64>().map_err(|_| format!("invalid epsilon `{s}`"))?,
        };
        if !(value > 0.0 && value.is_finite()) {
            return Err(format!("epsilon must be positive, got `{s}`"));
        }
        Ok(EpsilonSpec::Value(value))
    }
}

impl fmt::Display for EpsilonSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsilonSpec::Value(v) => write!(f, "{v}"),
            EpsilonSpec::LnK => f.write_str("lnK"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mechanisms: Vec<Mechanism>,
    pub epsilons: Vec<EpsilonSpec>,
    pub num_labels: Vec<usize>,
    pub sample_sizes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub c_gamma: f64,
    pub out: Option<PathBuf>,
    /// Subset size for `d-subset`; `⌈K/(2e^ε)⌉` per cell when absent.
    pub d_override: Option<usize>,
    /// Random gradient sets per cell in `verify-estimators`.
    pub gradient_sets: usize,
    /// Monte Carlo draws behind the `empirical_excess_risk` column.
    pub mc_samples: usize,
    /// When false the `wall_time_ms` column is left empty, making the CSV a
    /// pure function of the config.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mechanisms: vec![Mechanism::BernoulliSubset, Mechanism::DSubset, Mechanism::Krr],
            epsilons: vec![EpsilonSpec::Value(1.0)],
            num_labels: vec![4, 16, 64],
            sample_sizes: vec![100_000],
            trials: 50,
            seed: 0,
            c_gamma: labeldp_sco::hard_instances::DEFAULT_C_GAMMA,
            out: None,
            d_override: None,
            gradient_sets: 100,
            mc_samples: 10_000,
            record_timing: true,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub mechanisms: Option<Vec<Mechanism>>,
    pub epsilons: Option<Vec<EpsilonSpec>>,
    pub num_labels: Option<Vec<usize>>,
    pub sample_sizes: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub no_timing: bool,
}

fn parse_list<T: FromStr>(value: &str, what: &str) -> std::result::Result<Vec<T>, String> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|item| {
            item.trim()
                .parse::<T>()
                .map_err(|_| format!("invalid {what} `{}`", item.trim()))
        })
        .collect()
}

fn parse_one<T: FromStr>(value: &str, what: &str) -> std::result::Result<T, String> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| format!("invalid {what} `{}`", value.trim()))
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(format!("invalid boolean `{other}`")),
    }
}

/// Parses a comma-separated list with `FromStr` items, as used by the CLI.
pub fn parse_cli_list<T: FromStr>(value: &str, what: &str) -> Result<Vec<T>> {
    parse_list(value, what).map_err(BenchError::Usage)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| BenchError::Config { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let value = value.trim();
            match key.trim() {
                "mechanism" | "mechanisms" => config.mechanisms = parse_list(value, "mechanism").map_err(err)?,
                "epsilon" => config.epsilons = parse_list(value, "epsilon").map_err(err)?,
                "k" | "K" => config.num_labels = parse_list(value, "K").map_err(err)?,
                "n" => config.sample_sizes = parse_list(value, "n").map_err(err)?,
                "trials" => config.trials = parse_one(value, "trials").map_err(err)?,
                "seed" => config.seed = parse_one(value, "seed").map_err(err)?,
                "c_gamma" => config.c_gamma = parse_one(value, "c_gamma").map_err(err)?,
                "out" => config.out = Some(PathBuf::from(value)),
                "d_override" => {
                    config.d_override = match value {
                        "" | "none" => None,
                        v => Some(parse_one(v, "d_override").map_err(err)?),
                    }
                }
                "gradient_sets" => config.gradient_sets = parse_one(value, "gradient_sets").map_err(err)?,
                "mc_samples" => config.mc_samples = parse_one(value, "mc_samples").map_err(err)?,
                "record_timing" => config.record_timing = parse_bool(value).map_err(err)?,
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        Ok(config)
    }

    pub fn apply(&mut self, overrides: Overrides) {
        if let Some(v) = overrides.mechanisms {
            self.mechanisms = v;
        }
        if let Some(v) = overrides.epsilons {
            self.epsilons = v;
        }
        if let Some(v) = overrides.num_labels {
            self.num_labels = v;
        }
        if let Some(v) = overrides.sample_sizes {
            self.sample_sizes = v;
        }
        if let Some(v) = overrides.trials {
            self.trials = v;
        }
        if let Some(v) = overrides.seed {
            self.seed = v;
        }
        if let Some(v) = overrides.out {
            self.out = Some(v);
        }
        if overrides.no_timing {
            self.record_timing = false;
        }
    }

    /// Mechanism parameters for one grid cell, picking `d` for `d-subset`.
    pub fn cell_params(&self, mechanism: Mechanism, num_labels: usize, epsilon: f64) -> labeldp_sco::Result<MechanismParams> {
        if mechanism == Mechanism::DSubset {
            let d = self
                .d_override
                .unwrap_or_else(|| recommended_subset_size(num_labels, epsilon));
            MechanismParams::with_subset_size(epsilon, num_labels, d)
        } else {
            MechanismParams::new(epsilon, num_labels)
        }
    }

    /// Checks the invariants needed by the sweep: nonempty grid, at least one
    /// trial, and valid parameters in every cell.
    pub fn validate(&self) -> Result<()> {
        let usage = |m: &str| Err(BenchError::Usage(m.into()));
        if self.mechanisms.is_empty() || self.epsilons.is_empty() || self.num_labels.is_empty() || self.sample_sizes.is_empty() {
            return usage("mechanism, epsilon, k and n lists must be nonempty");
        }
        if self.trials == 0 {
            return usage("trials must be at least 1");
        }
        if self.sample_sizes.contains(&0) {
            return usage("n must be at least 1");
        }
        if !(self.c_gamma >= 0.0 && self.c_gamma.is_finite()) {
            return usage("c_gamma must be nonnegative");
        }
        if self.mc_samples == 0 {
            return usage("mc_samples must be at least 1");
        }
        for &m in &self.mechanisms {
            for &k in &self.num_labels {
                for eps in &self.epsilons {
                    self.cell_params(m, k, eps.resolve(k)).map_err(|e| {
                        BenchError::Usage(format!("{m} K={k} epsilon={eps}: {e}"))
                    })?;
                }
            }
        }
        Ok(())
    }
}

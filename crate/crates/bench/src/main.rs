use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use labeldp_bench::config::parse_cli_list;
use labeldp_bench::reduce::{run_reduce_demo, write_reduce_rows, Estimate};
use labeldp_bench::sweep::{run_sweep, write_rows};
use labeldp_bench::verify::{verify_estimators, verify_privacy, write_moments, CellStatus};
use labeldp_bench::{csv, BenchError, ExperimentConfig, Overrides, Result};

#[derive(Parser)]
#[command(name = "labeldp-bench", version, about = "Verification and excess-risk sweeps for label-private SCO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exhaustive likelihood-ratio check of every randomizer in the grid.
    VerifyPrivacy(CommonArgs),
    /// Exact estimator mean and second moment on random gradient sets.
    VerifyEstimators(CommonArgs),
    /// Train on the hard instance across the grid and write one row per trial.
    Sweep(CommonArgs),
    /// Map trained parameters to distribution estimates and compare errors.
    ReduceDemo {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value_t = EstimateArg::Trained)]
        estimate: EstimateArg,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated mechanism names.
    #[arg(long)]
    mechanism: Option<String>,
    /// Comma-separated values; `lnK` and `ln(x)` are accepted.
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Leave the wall_time_ms column empty.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimateArg {
    Trained,
    Optimum,
    Zero,
}

impl CommonArgs {
    fn load(self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| BenchError::Usage(format!("cannot read {}: {e}", path.display())))?;
                ExperimentConfig::parse(&text)?
            }
            None => ExperimentConfig::default(),
        };
        config.apply(Overrides {
            mechanisms: list(self.mechanism.as_deref(), "mechanism")?,
            epsilons: list(self.epsilon.as_deref(), "epsilon")?,
            num_labels: list(self.k.as_deref(), "k")?,
            sample_sizes: list(self.n.as_deref(), "n")?,
            trials: self.trials,
            seed: self.seed,
            out: self.out,
            no_timing: self.no_timing,
        });
        Ok(config)
    }
}

fn list<T: std::str::FromStr>(value: Option<&str>, what: &str) -> Result<Option<Vec<T>>> {
    value.map(|v| parse_cli_list(v, what)).transpose()
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_verify_privacy(config: &ExperimentConfig) -> Result<bool> {
    let cells = verify_privacy(config);
    let mut ok = true;
    for cell in &cells {
        match &cell.status {
            CellStatus::Skipped(_) => eprintln!("warning: {}", cell.describe()),
            CellStatus::Fail(why) => {
                ok = false;
                eprintln!("{}: {why}", cell.describe());
            }
            CellStatus::Pass => eprintln!("{}", cell.describe()),
        }
    }
    if let Some(path) = &config.out {
        let mut out = output(Some(path))?;
        writeln!(out, "mechanism,K,d,epsilon,ratio,exp_epsilon,status")?;
        for c in &cells {
            let status = match c.status {
                CellStatus::Pass => "pass",
                CellStatus::Fail(_) => "fail",
                CellStatus::Skipped(_) => "skipped",
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{status}",
                c.mechanism,
                c.num_labels,
                csv::optional_int(c.subset_size),
                csv::float(c.epsilon),
                csv::optional_float(c.ratio),
                csv::float(c.epsilon.exp()),
            )?;
        }
        out.flush()?;
    }
    eprintln!("{} cells, {}", cells.len(), if ok { "all within e^eps" } else { "FAILED" });
    Ok(ok)
}

fn cmd_verify_estimators(config: &ExperimentConfig) -> Result<bool> {
    let cells = verify_estimators(config);
    let mut ok = true;
    for c in &cells {
        let r = &c.record;
        let name = format!("{} K={} epsilon={:.6} set={}", r.mechanism, r.num_labels, r.epsilon, c.gradient_set);
        match &c.status {
            CellStatus::Fail(why) => {
                ok = false;
                eprintln!("{name}: FAIL {why}");
            }
            CellStatus::Skipped(why) => eprintln!("warning: {name}: skipped ({why})"),
            CellStatus::Pass => {}
        }
    }
    write_moments(output(config.out.as_deref())?, &cells)?;
    eprintln!("{} records, {}", cells.len(), if ok { "all passed" } else { "FAILED" });
    Ok(ok)
}

fn cmd_sweep(config: &ExperimentConfig) -> Result<bool> {
    let rows = run_sweep(config)?;
    write_rows(output(config.out.as_deref())?, &rows)?;
    Ok(true)
}

fn cmd_reduce_demo(config: &ExperimentConfig, estimate: EstimateArg) -> Result<bool> {
    let estimate = match estimate {
        EstimateArg::Trained => Estimate::Trained,
        EstimateArg::Optimum => Estimate::Optimum,
        EstimateArg::Zero => Estimate::Zero,
    };
    let rows = run_reduce_demo(config, estimate)?;
    write_reduce_rows(output(config.out.as_deref())?, &rows)?;
    let worst = rows.iter().map(|r| r.gap()).fold(0.0, f64::max);
    if worst > 1e-12 {
        eprintln!("reduction identity off by {worst}");
        return Ok(false);
    }
    Ok(true)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::VerifyPrivacy(args) => cmd_verify_privacy(&args.load()?),
        Command::VerifyEstimators(args) => cmd_verify_estimators(&args.load()?),
        Command::Sweep(args) => cmd_sweep(&args.load()?),
        Command::ReduceDemo { common, estimate } => cmd_reduce_demo(&common.load()?, estimate),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

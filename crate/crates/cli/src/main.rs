//! `dpe`: command-line front end for private e-values and e-processes.
//!
//! Exit codes: 0 on success, 1 on configuration or runtime errors, 2 when
//! `validate` finds a failing check.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dp_evalue::dist::TestingPair;
use dp_evalue::harness::run::{batch_output, plan, run_batch, run_compare, run_sequential, write_compare, write_sequential};
use dp_evalue::harness::validate::{binary_dual_rate, render, run_validate, Fault};
use dp_evalue::harness::{ExperimentConfig, Hypothesis, Mode, RawConfig, StatisticKind};
use dp_evalue::optimal::{emit_construction_report, solve_lambda_star, DEFAULT_TOL};
use dp_evalue::Error;

#[derive(Parser, Debug)]
#[command(name = "dpe", version, about = "Differentially private e-values, e-processes and sequential tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the optimal construction and private rate for each epsilon.
    Rate {
        #[command(flatten)]
        common: Common,
        /// Compare the rate against a grid search of the dual problem
        /// (two-point supports only).
        #[arg(long)]
        dual_check: bool,
    },
    /// Private batch e-values over repeated datasets.
    Batch(Common),
    /// Two-sided private e-process runs.
    Sequential(Common),
    /// Paired e-process vs DP-SPRT comparison over the epsilon x q grid.
    Compare(Common),
    /// Run the self-check suite.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Deliberately break the implementation to confirm checks fail.
        #[arg(long, value_parser = ["omit-compensator"])]
        inject_fault: Option<String>,
    },
    /// Rate, stopping-time lower bound and minimum e-process time.
    Plan(Common),
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Args, Debug, Default)]
struct Common {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Null distribution, e.g. "bernoulli p=0.3".
    #[arg(long)]
    null: Option<String>,
    /// Alternate distribution, e.g. "bernoulli p=0.7".
    #[arg(long)]
    alt: Option<String>,
    /// Privacy budget(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    /// Alternate locations for `compare`, comma separated.
    #[arg(long, value_delimiter = ',')]
    q_grid: Option<Vec<f64>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    max_n: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// `optimal` or `tslr`.
    #[arg(long)]
    statistic: Option<StatisticKind>,
    /// Batch size for `batch`.
    #[arg(long)]
    n: Option<usize>,
    /// Monte Carlo trials per check in `validate`.
    #[arg(long)]
    mc_trials: Option<usize>,
    /// `null` or `alt`: which hypothesis generates the data.
    #[arg(long)]
    sample_from: Option<Hypothesis>,
}

impl Common {
    fn resolve(self, mode: Mode) -> dp_evalue::Result<ExperimentConfig> {
        let base = match &self.config {
            Some(p) => RawConfig::load(p)?,
            None => RawConfig::default(),
        };
        let flags = RawConfig {
            mode: Some(mode),
            null: self.null,
            alt: self.alt,
            epsilon_grid: self.epsilon,
            q_grid: self.q_grid,
            alpha: self.alpha,
            beta: self.beta,
            rho: self.rho,
            trials: self.trials,
            max_n: self.max_n,
            seed: self.seed,
            output_dir: self.output_dir,
            statistic: self.statistic,
            n: self.n,
            mc_trials: self.mc_trials,
            sample_from: self.sample_from,
        };
        base.overlay(flags).finish()
    }
}

enum Failure {
    Error(Error),
    Validation,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn rate(cfg: &ExperimentConfig, dual_check: bool) -> Result<(), Failure> {
    let pair = TestingPair::new(cfg.null_dist()?, cfg.alt_dist()?)?;
    for &eps in &cfg.epsilon_grid {
        let c = solve_lambda_star(&pair, eps, DEFAULT_TOL)?;
        println!("# epsilon = {eps}");
        print!("{}", emit_construction_report(&pair, &c));
        if dual_check {
            match pair.support_points() {
                Some(s) if s.len() == 2 => {
                    let p = pair.null().density(s[1]);
                    let q = pair.alt().density(s[1]);
                    let dual = binary_dual_rate(p, q, eps, 1_000_000);
                    let gap = (c.rate - dual).abs();
                    println!("# dual grid rate = {dual}, gap = {gap:e}, {}", if gap <= 1e-6 { "ok" } else { "MISMATCH" });
                }
                _ => println!("# dual check skipped: needs a two-point support"),
            }
        }
        println!();
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Rate { common, dual_check } => rate(&common.resolve(Mode::Rate)?, dual_check),
        Command::Batch(common) => {
            let cfg = common.resolve(Mode::Batch)?;
            let (rows, report) = run_batch(&cfg)?;
            batch_output(&cfg, &rows, &report)?;
            print!("{report}");
            Ok(())
        }
        Command::Sequential(common) => {
            let cfg = common.resolve(Mode::Sequential)?;
            let (records, report) = run_sequential(&cfg)?;
            write_sequential(&cfg, &records, &report)?;
            print!("{report}");
            Ok(())
        }
        Command::Compare(common) => {
            let cfg = common.resolve(Mode::Compare)?;
            let result = run_compare(&cfg)?;
            write_compare(&cfg, &result)?;
            print!("{}", result.report);
            Ok(())
        }
        Command::Validate { common, inject_fault } => {
            let cfg = common.resolve(Mode::Validate)?;
            let fault = inject_fault.map(|_| Fault::OmitCompensator);
            let report = run_validate(&cfg, fault)?;
            let text = render(&report, fault);
            std::fs::create_dir_all(&cfg.output_dir).map_err(Error::from)?;
            std::fs::write(cfg.output_dir.join("report.txt"), &text).map_err(Error::from)?;
            print!("{text}");
            if report.passed() { Ok(()) } else { Err(Failure::Validation) }
        }
        Command::Plan(common) => {
            print!("{}", plan(&common.resolve(Mode::Plan)?)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation) => ExitCode::from(2),
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

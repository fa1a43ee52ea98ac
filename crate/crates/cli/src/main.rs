//! `revwel`: runs revenue-to-welfare experiments and writes CSV results.
//!
//! Exit status is 0 when every check in the run passes, 1 when one fails,
//! and 2 when the configuration is invalid or the run cannot finish.

mod config;
mod experiments;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use revwel::dist::TRUNCATION_TAIL;
use revwel::report::write_csv;

use config::{Experiment, Flags};

#[derive(Parser)]
#[command(name = "revwel", version, about = "Revenue-to-welfare experiments for single-parameter auctions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Regularity, hyper-regularity, MHR and c-boundedness of distributions
    Classify(Flags),
    /// Expected revenue and welfare of a mechanism in an environment
    Ratio(Flags),
    /// Revenue-to-welfare ratio against the applicable lower bound
    Audit(Flags),
    /// Public-project ratio times √n for i.i.d. agents
    Asymptotics(Flags),
    /// Ratio of the regular, non-hyper-regular counterexample as n grows
    Counterexample(Flags),
    /// Median-deviation, interval-count and positive-part sum checks
    Anticoncentration(Flags),
    /// Weighted Chebyshev inequality and the hyper-regular per-bidder audit
    Chebyshev(Flags),
    /// Runs the experiment named in --config
    Run(Flags),
}

impl Command {
    fn split(&self) -> (Option<Experiment>, &Flags) {
        match self {
            Self::Classify(f) => (Some(Experiment::Classify), f),
            Self::Ratio(f) => (Some(Experiment::Ratio), f),
            Self::Audit(f) => (Some(Experiment::Audit), f),
            Self::Asymptotics(f) => (Some(Experiment::Asymptotics), f),
            Self::Counterexample(f) => (Some(Experiment::Counterexample), f),
            Self::Anticoncentration(f) => (Some(Experiment::Anticoncentration), f),
            Self::Chebyshev(f) => (Some(Experiment::Chebyshev), f),
            Self::Run(f) => (None, f),
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("REVWEL_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .with_context(|| format!("REVWEL_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn execute(cli: &Cli) -> Result<bool> {
    configure_threads()?;
    let (experiment, flags) = cli.command.split();
    let cfg = flags.resolve(experiment)?;
    let output = experiments::run(&cfg)?;

    let comments = vec![
        format!("revwel {} {}", env!("CARGO_PKG_VERSION"), cfg.experiment().as_str()),
        format!("config: {}", serde_json::to_string(&cfg)?),
        format!("unbounded values are sampled below quantile 1 - {TRUNCATION_TAIL:e}"),
    ];
    match &cfg.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            write_csv(&mut w, &comments, &output.rows)?;
            w.flush()?;
        }
        None => write_csv(io::stdout().lock(), &comments, &output.rows)?,
    }

    let mut err = io::stderr().lock();
    for r in &output.rows {
        writeln!(
            err,
            "{} {} n={} {}: revenue {:.6} ± {:.6}, welfare {:.6} ± {:.6}, ratio {:.6}, bound {:.6}",
            if r.bound_satisfied { "PASS" } else { "FAIL" },
            r.experiment,
            r.n,
            r.mechanism,
            r.revenue,
            r.rev_se,
            r.welfare,
            r.wel_se,
            r.ratio,
            r.bound
        )?;
    }
    for (status, text) in &output.extra {
        writeln!(err, "{} {text}", status.label())?;
    }
    Ok(output.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

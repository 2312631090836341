//! `fermi-ee`: entanglement entropies of free Fermi gases from the command line.

mod config;
mod error;
mod record;
mod run;
mod validate;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::record::ResultRecord;
use crate::run::Invocation;
use crate::validate::Fault;

#[derive(Parser)]
#[command(name = "fermi-ee", version, about = "Rényi entanglement entropies of the free Fermi gas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Entropies at a single scale L.
    Entropy(Common),
    /// Entropies over an L grid, fitted against the log-enhanced area law.
    Sweep(Common),
    /// Widom coefficient by every applicable method, with cross-checks.
    Jcoeff(Common),
    /// I(h_α) by quadrature against its closed form; dilogarithm limit check.
    Functional(Common),
    /// Invariant suite on small problems.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Print a per-check timing table.
        #[arg(short, long)]
        verbose: bool,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<Fault>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// JSON result record (stdout when absent).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Flat CSV of the entropy rows.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Replace measured entropies by rows generated from the theory line.
    #[arg(long)]
    self_test: bool,
}

impl Common {
    fn invocation(&self, config_required: bool) -> Result<Invocation, CliError> {
        let text = match &self.config {
            Some(p) => fs::read_to_string(p).map_err(|e| CliError::Config(format!("reading {}: {e}", p.display())))?,
            None if config_required => return Err(CliError::Config("--config is required".into())),
            None => String::new(),
        };
        let cfg = RunConfig::parse(&text)?;
        cfg.validate()?;
        let seed = self.seed.unwrap_or(cfg.seed);
        Ok(Invocation {
            json: self.out.clone().or_else(|| cfg.output.json.as_ref().map(PathBuf::from)),
            csv: self.csv.clone().or_else(|| cfg.output.csv.as_ref().map(PathBuf::from)),
            cfg,
            text,
            seed,
            parallel: self.jobs != Some(1),
            self_test: self.self_test,
        })
    }
}

fn set_jobs(jobs: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn emit(rec: &ResultRecord, inv: &Invocation) -> Result<(), CliError> {
    match &inv.json {
        Some(p) => rec.write_json(p)?,
        None => println!("{}", rec.to_json()),
    }
    if let Some(p) = &inv.csv {
        rec.write_csv(p)?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Entropy(c) | Command::Jcoeff(c) | Command::Functional(c) if c.self_test => {
            Err(CliError::Config("--self-test applies to `sweep` only".into()))
        }
        Command::Entropy(c) => {
            set_jobs(c.jobs)?;
            let inv = c.invocation(true)?;
            emit(&run::entropy(&inv)?, &inv)
        }
        Command::Sweep(c) => {
            set_jobs(c.jobs)?;
            let inv = c.invocation(true)?;
            emit(&run::sweep(&inv)?, &inv)
        }
        Command::Jcoeff(c) => {
            set_jobs(c.jobs)?;
            let inv = c.invocation(true)?;
            let rec = run::jcoeff(&inv)?;
            emit(&rec, &inv)?;
            run::require_checks(&rec)
        }
        Command::Functional(c) => {
            set_jobs(c.jobs)?;
            let inv = c.invocation(false)?;
            let rec = run::functional(&inv)?;
            emit(&rec, &inv)?;
            run::require_checks(&rec)
        }
        Command::Validate { common, verbose, inject_fault } => {
            set_jobs(common.jobs)?;
            let inv = common.invocation(false)?;
            let report = validate::run(inject_fault);
            let passed = report.checks.iter().filter(|c| c.passed).count();
            if verbose {
                print!("{}", validate::table(&report));
            }
            println!("validate: {passed} of {} checks passed", report.checks.len());
            let verdict = validate::verdict(&report);
            if let Some(p) = &inv.json {
                let mut rec = ResultRecord::new("validate", common.config.as_ref().map(|_| (&inv.cfg, inv.text.as_str())), inv.seed);
                rec.validation = Some(report);
                rec.write_json(p)?;
            }
            verdict
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}

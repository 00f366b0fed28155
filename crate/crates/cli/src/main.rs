mod commands;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use peakload_core::Error;
use serde_json::json;

use commands::{CurvesArgs, CvArgs, FitArgs, IngestArgs, LrtArgs, SynthArgs};

/// Peak-load models versus annual energy consumption.
#[derive(Debug, Parser)]
#[command(name = "peakload", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter load profiles and reduce them to (energy, peak) records
    Ingest(IngestArgs),
    /// Fit formulations by quantile regression and/or maximum likelihood
    Fit(FitArgs),
    /// k-fold cross-validation report
    Cv(CvArgs),
    /// Gumbel vs Frechet likelihood ratio test and Fisher Std(gamma)
    Lrt(LrtArgs),
    /// Generate synthetic records or profiles
    Synth(SynthArgs),
    /// Export quantile and beta curves
    Curves(CurvesArgs),
}

impl Command {
    fn common(&self) -> &settings::CommonArgs {
        match self {
            Command::Ingest(a) => &a.common,
            Command::Fit(a) => &a.common,
            Command::Cv(a) => &a.common,
            Command::Lrt(a) => &a.common,
            Command::Synth(a) => &a.common,
            Command::Curves(a) => &a.common,
        }
    }

    fn run(&self) -> peakload_core::Result<()> {
        match self {
            Command::Ingest(a) => commands::ingest(a),
            Command::Fit(a) => commands::fit(a),
            Command::Cv(a) => commands::cv(a),
            Command::Lrt(a) => commands::lrt(a),
            Command::Synth(a) => commands::synth(a),
            Command::Curves(a) => commands::curves(a),
        }
    }
}

fn error_json(err: &Error) -> serde_json::Value {
    match err {
        Error::Schema { row, column, message } => json!({
            "error": "schema",
            "row": row,
            "column": column,
            "message": message,
        }),
        Error::InvalidArgument(m) => json!({ "error": "invalid_argument", "message": m }),
        Error::Csv(e) => json!({ "error": "schema", "message": e.to_string() }),
        other => json!({ "error": "failed", "message": other.to_string() }),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Schema { .. } | Error::Csv(_) | Error::InvalidArgument(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": "usage", "message": e.to_string().trim_end() }));
            return ExitCode::from(2);
        }
    };
    let result = settings::resolve_jobs(cli.command.common()).and_then(|jobs| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(|| cli.command.run())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

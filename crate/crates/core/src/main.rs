use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use submersion_lab::cli_runner::{
    cmd_check, cmd_curvature, cmd_validate, configure_threads, merge_runs, render, write_output, Format, RunReport, ScenarioConfig,
};

/// Numerical checks for pull-back bundles of Riemannian submersions.
#[derive(Parser)]
#[command(name = "submersion-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every pointwise identity and report residuals.
    Validate(RunArgs),
    /// Decide whether the pulled-back metric can be nonnegatively curved.
    Check(RunArgs),
    /// Sample sectional curvatures of the pull-back.
    Curvature(RunArgs),
    /// Merge run files into a summary.
    Report {
        /// Run files produced with `--format json`.
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "md")]
        format: Format,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long = "fd-step")]
    fd_step: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: Format,
}

impl RunArgs {
    fn config(&self) -> Result<ScenarioConfig> {
        let mut c = ScenarioConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        if let Some(n) = self.samples {
            c.samples = n;
        }
        if let Some(h) = self.fd_step {
            c.fd_step = h;
        }
        Ok(c)
    }
}

fn run(args: &RunArgs, f: fn(&ScenarioConfig) -> submersion_lab::Result<RunReport>) -> Result<u8> {
    let report = f(&args.config()?)?;
    let text = render(std::slice::from_ref(&report), args.format)?;
    write_output(&text, args.out.as_deref())?;
    Ok(report.exit_code as u8)
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Validate(a) => run(&a, cmd_validate),
        Command::Check(a) => run(&a, cmd_check),
        Command::Curvature(a) => run(&a, cmd_curvature),
        Command::Report { files, out, format } => {
            let runs = merge_runs(&files)?;
            write_output(&render(&runs, format)?, out.as_deref())?;
            if let (Format::Md, Some(path)) = (format, &out) {
                let csv_path = path.with_extension("csv");
                write_output(&render(&runs, Format::Csv)?, Some(&csv_path))
                    .with_context(|| format!("writing {}", csv_path.display()))?;
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

//! Command-line driver for the `salmap` toolkit: `train`, `saliency`,
//! `benchmark` and `report`.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

use std::io::Write;

pub use args::{Cli, Command};
pub use config::{RunConfig, Settings};
pub use error::{CliError, CliResult};

use commands::report::{ReportInputs, REPORT_NAME};

/// Runs one parsed invocation, writing human-readable results to `stdout`.
pub fn execute(cli: &Cli, stdout: &mut impl Write) -> CliResult<()> {
    match &cli.command {
        Command::Train(args) => {
            let config = args.settings()?.resolve()?;
            let summary = commands::train::run(&config)?;
            writeln!(
                stdout,
                "{} accuracy: {:.4}",
                summary.accuracy_split, summary.accuracy
            )?;
        }
        Command::Saliency(args) => {
            let config = args.settings()?.resolve()?;
            let entries = commands::saliency::run(&config)?;
            for e in &entries {
                writeln!(
                    stdout,
                    "image {} label {} predicted {}",
                    e.id, e.label, e.predicted
                )?;
            }
            writeln!(
                stdout,
                "wrote {} images to {}",
                entries.len(),
                config.out.display()
            )?;
        }
        Command::Benchmark(args) => {
            let config = args.settings()?.resolve()?;
            let result = commands::benchmark::run(&config)?;
            for curve in &result.curves {
                writeln!(
                    stdout,
                    "{} {} auc {:.6}",
                    curve.kind, curve.color, curve.auc
                )?;
            }
        }
        Command::Report(args) => {
            let mut inputs = ReportInputs::in_dir(&args.out);
            for (slot, dir) in [
                (&mut inputs.train_dir, &args.train_dir),
                (&mut inputs.saliency_dir, &args.saliency_dir),
                (&mut inputs.benchmark_dir, &args.benchmark_dir),
            ] {
                if let Some(dir) = dir {
                    *slot = dir.clone();
                }
            }
            let report = commands::report::run(&inputs)?;
            for check in &report.checks {
                writeln!(stdout, "{}: {}", check.name, check.verdict)?;
            }
            writeln!(stdout, "wrote {}", inputs.out.join(REPORT_NAME).display())?;
        }
    }
    Ok(())
}

mod cli;
mod commands;
mod config;
mod manifest;
mod report;

use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{CommandFactory, Parser};
use petquant::{Dims, VoxelSpacing};

use cli::{Cli, Command};
use commands::{EvaluateInputs, PhantomOptions};
use config::Config;

fn run(cli: Cli) -> Result<()> {
    let cfg = Config::load(&cli.global)?;
    if cli.global.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg.echo())?);
        return Ok(());
    }
    let Some(command) = cli.command else {
        Cli::command().print_help()?;
        bail!("no subcommand given");
    };
    match command {
        Command::Extract { manifest } => {
            let out = commands::extract(&manifest, &cfg)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Detect { manifest } => {
            let out = commands::detect(&manifest, &cfg)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Evaluate {
            metrics,
            gt,
            pred,
            detection,
            label,
        } => {
            let (gt, pred) = match (metrics, gt, pred) {
                (Some(m), None, None) => (m.clone(), m),
                (None, Some(g), Some(p)) => (g, p),
                _ => bail!("evaluate needs either --metrics FILE or both --gt FILE and --pred FILE"),
            };
            let inputs = EvaluateInputs {
                gt: &gt,
                pred: &pred,
                detection: detection.as_deref(),
                label: &label,
            };
            for out in commands::evaluate(&inputs, &cfg)? {
                eprintln!("wrote {}", out.display());
            }
        }
        Command::Vote { masks, output } => {
            commands::vote_masks(&masks, &output, &cfg)?;
            eprintln!("wrote {}", output.display());
        }
        Command::Loss {
            prob,
            truth,
            scalar_weight,
        } => {
            print!("{}", commands::losses(&prob, &truth, scalar_weight, &cfg)?);
        }
        Command::Phantom {
            patients,
            dims,
            spacing,
            max_lesions,
            folds,
            noise_sd,
            volume_format,
        } => {
            if dims.len() != 3 || spacing.len() != 3 {
                bail!("--dims and --spacing take three comma-separated values");
            }
            let opts = PhantomOptions {
                patients,
                dims: Dims::new(dims[0], dims[1], dims[2])?,
                spacing: VoxelSpacing::new(spacing[0], spacing[1], spacing[2])?,
                max_lesions,
                folds,
                noise_sd,
                volume_format,
            };
            let out = commands::phantom_cohort(&opts, &cfg)?;
            eprintln!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use skirtlink::io::{read_mask_json, read_taps_csv, write_taps_csv};
use skirtlink::sim::{config_from_document, emit_results, run_scenario, RESULTS_FILE};
use skirtlink::spectral::{check_mask, design_ssf, DesignWeights, SpectralMask};

#[derive(Parser)]
#[command(name = "skirtlink", version, about = "Spectrum-skirt filling link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo scenario and write results.csv, envelope.csv and manifest.json.
    Run {
        /// Scenario config, or a manifest from an earlier run.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the master seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Design a mask-filling pulse and export its taps.
    DesignFilter {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value_t = 257)]
        taps: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        grid: usize,
    },
    /// Exit 0 iff the taps satisfy the mask.
    ValidateMask {
        #[arg(long)]
        taps: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value_t = 1000)]
        grid: usize,
    },
}

fn load_mask(path: &PathBuf, grid: usize) -> Result<SpectralMask> {
    let def = read_mask_json(path).with_context(|| format!("reading mask {}", path.display()))?;
    Ok(SpectralMask::from_definition(&def, grid)?)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, out, threads, seed } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = config_from_document(&text)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = threads {
                if n == 0 {
                    bail!("--threads must be >= 1");
                }
                rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
            }
            let output = run_scenario(&cfg)?;
            emit_results(&out, &cfg, &output)?;
            let failed = output.points.iter().filter(|p| p.error.is_some()).count();
            eprintln!(
                "{} rows written to {}{}",
                output.results.len(),
                out.join(RESULTS_FILE).display(),
                if failed > 0 { format!(" ({failed} point(s) failed, see manifest)") } else { String::new() }
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::DesignFilter { mask, taps, out, grid } => {
            let mask = load_mask(&mask, grid)?;
            let design = design_ssf(&mask, &DesignWeights::reference(&mask)?, taps)?;
            write_taps_csv(&out, &design.taps)?;
            let report = check_mask(&design.taps, &mask);
            eprintln!(
                "objective {:.6e} after {} iterations; grid excess {:.3e}, verification excess {:.4} dB",
                design.objective, design.iterations, report.grid_excess, report.verify_excess_db
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateMask { taps, mask, grid } => {
            let mask = load_mask(&mask, grid)?;
            let taps = read_taps_csv(&taps, 2).with_context(|| format!("reading taps {}", taps.display()))?;
            let report = check_mask(&taps, &mask);
            println!(
                "{}: grid excess {:.3e} at f={}, verification excess {:.4} dB at f={}",
                if report.compliant { "compliant" } else { "VIOLATION" },
                report.grid_excess,
                report.grid_worst_freq,
                report.verify_excess_db,
                report.verify_worst_freq
            );
            Ok(if report.compliant { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

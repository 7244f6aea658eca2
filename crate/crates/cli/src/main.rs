use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use rotinv::{cmd_classify, cmd_extract, cmd_gen, cmd_retrieve, init_threads, ClassifyResult, ExperimentConfig};

#[derive(Parser)]
#[command(name = "rotinv", version, about = "Rotation-invariant descriptor experiments on galaxy images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `paths.out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Render templates and the artificial conditions.
    Gen,
    /// Describe every image of a condition folder.
    Extract,
    /// Leave-one-out retrieval over a feature file.
    Retrieve,
    /// Cross-validated classification of a survey corpus.
    Classify {
        /// Run once per confidence threshold of `classify.sweep`.
        #[arg(long)]
        sweep_confidence: bool,
    },
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cfg.out_dir(cli.out.as_deref());
    match cli.command {
        Command::Gen => {
            for p in cmd_gen(&cfg, &out)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Extract => println!("wrote {}", cmd_extract(&cfg, &out)?.display()),
        Command::Retrieve => {
            let r = cmd_retrieve(&cfg, &out)?;
            println!(
                "{} queries, grouping {}: precision {:.2} ± {:.2} %, MAP {:.2} ± {:.2} %",
                r.n_queries,
                r.grouping,
                100.0 * r.precision_mean,
                100.0 * r.precision_std,
                100.0 * r.map_mean,
                100.0 * r.map_std
            );
        }
        Command::Classify { sweep_confidence } => match cmd_classify(&cfg, &out, sweep_confidence)? {
            ClassifyResult::Single { tau, n_examples, report } => println!(
                "{} on {n_examples} examples (tau {tau}): AUC {:.2} ± {:.2} %",
                report.classifier.name(),
                100.0 * report.mean.auc,
                100.0 * report.std.auc
            ),
            ClassifyResult::Sweep(rows) => {
                for s in rows {
                    match (&s.report, &s.error) {
                        (Some(r), _) => println!("tau {}: {} examples, AUC {:.2} ± {:.2} %", s.tau, s.n_examples, 100.0 * r.mean.auc, 100.0 * r.std.auc),
                        (None, e) => println!("tau {}: {}", s.tau, e.as_deref().unwrap_or("no result")),
                    }
                }
            }
        },
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

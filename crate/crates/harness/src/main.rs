use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use log::info;
use tscc_harness::ber::run_ber;
use tscc_harness::dataset::{build_dataset, export_dataset};
use tscc_harness::experiment::{
    bandwidth_summary, run_eval, run_ratio_sweep, run_snr_sweep, run_training, write_resolved_config,
};
use tscc_harness::{ExperimentConfig, SweepRecord};

#[derive(Parser)]
#[command(name = "tscc", version, about = "Task-oriented source-channel coding experiments")]
struct Cli {
    /// Experiment config (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `experiment.out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweep jobs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the synthetic dataset (or load the image directory) and write it as PNG + CSV.
    GenData,
    /// Train the neural codecs and save checkpoints.
    Train,
    /// Evaluate every method over the SNR grid.
    SweepSnr,
    /// Sweep the digital chain's compression ratio at a fixed SNR.
    SweepRatio,
    /// Evaluate every method at one SNR.
    Eval {
        #[arg(long, allow_hyphen_values = true)]
        snr: f64,
    },
    /// Coded BER curves of the digital baseline.
    Ber,
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.experiment.out_dir = out.clone();
    }
    if let Some(s) = cli.seed {
        cfg.experiment.seeds = vec![s];
    }
    if let Some(t) = cli.threads {
        cfg.experiment.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_records(records: &[SweepRecord]) {
    println!(
        "{:<9} {:>7} {:>9} {:>6} {:>9} {:>7} {:>7} {:>6} {:>4}",
        "method", "snr_db", "ratio", "task", "act_mse", "psnr", "msssim", "fail", "seed"
    );
    for r in records {
        println!(
            "{:<9} {:>7.2} {:>9.5} {:>6.3} {:>9.5} {:>7.2} {:>7.4} {:>6.3} {:>4}",
            r.method.as_str(),
            r.snr_db,
            r.compression_ratio,
            r.task_score,
            r.action_mse,
            r.psnr,
            r.ms_ssim,
            r.failure_rate,
            r.seed
        );
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = resolve(&cli)?;
    let out = cfg.experiment.out_dir.clone();
    match cli.command {
        Command::GenData => {
            let data = build_dataset(&cfg.dataset)?;
            let dir = out.join("data");
            export_dataset(&data, &dir)?;
            write_resolved_config(&cfg)?;
            info!(
                "wrote {} training and {} held-out images to {}",
                data.train.len(),
                data.test.len(),
                dir.display()
            );
        }
        Command::Train => {
            for r in run_training(&cfg)? {
                println!(
                    "{} seed {}: final loss {:.4}, {} ({})",
                    r.method,
                    r.seed,
                    r.final_loss,
                    r.path.display(),
                    r.checksum
                );
            }
        }
        Command::SweepSnr => print_records(&run_snr_sweep(&cfg)?),
        Command::SweepRatio => {
            let o = run_ratio_sweep(&cfg)?;
            print_records(&o.records);
            print!("{}", bandwidth_summary(&o));
        }
        Command::Eval { snr } => print_records(&run_eval(&cfg, snr)?),
        Command::Ber => {
            for r in run_ber(&cfg)? {
                println!(
                    "{:<6} {:>6.2} dB  ber {:.3e}  ({} / {} bits, {} of {} blocks failed)",
                    r.modulation, r.x_db, r.ber, r.errors, r.bits, r.failed_blocks, r.blocks
                );
            }
        }
    }
    info!("outputs in {}", out.display());
    Ok(())
}

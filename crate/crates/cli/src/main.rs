use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use ppopt_core::harness::{
    load_config, plot_dir, run_compare, thread_count_from_env, train_to_dir, Algo, DEFAULT_CLIP_FLOOR,
};
use ppopt_core::nn::{params_hash, write_param_file};
use ppopt_core::ppopt::{extract_core, pretrain};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Pretrained-core PPO experiments.
#[derive(Parser)]
#[command(name = "ppopt", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain a policy on the config's `pre_env` and write its parameter file.
    Pretrain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every seed of one experiment and write records, CSV and aggregate to DIR.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the config's `output_dir`.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Parameter file to transplant instead of the config's `pretrained`.
        #[arg(long)]
        pretrained: Option<PathBuf>,
    },
    /// Run every config in a directory and plot them together.
    Compare {
        #[arg(long, value_name = "D")]
        config_dir: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CLIP_FLOOR, allow_negative_numbers = true)]
        clip_floor: f64,
        /// Draw returns unclipped.
        #[arg(long, conflicts_with = "clip_floor")]
        no_clip: bool,
    },
    /// Plot every results.csv found in DIR and its subdirectories.
    Plot {
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Returns below this are drawn at it.
        #[arg(long, default_value_t = DEFAULT_CLIP_FLOOR, allow_negative_numbers = true)]
        clip_floor: f64,
        /// Draw returns unclipped.
        #[arg(long, conflicts_with = "clip_floor")]
        no_clip: bool,
    },
}

fn floor(clip_floor: f64, no_clip: bool) -> f64 {
    if no_clip {
        f64::NEG_INFINITY
    } else {
        clip_floor
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pretrain { config, out } => {
            let config = load_config(&config)?;
            let Some(pre_env) = config.pre_env else { bail!("config has no `pre_env` to pretrain on") };
            let mut env = pre_env.make();
            let mut rng = ChaCha8Rng::seed_from_u64(config.pretrain_seed);
            log::info!("pretraining on {} for {} episodes", pre_env.as_str(), config.n_pre);
            let done = pretrain(env.as_mut(), &config.ppopt_hyper(), &mut rng)?;
            let policy = &done.policy;
            log::info!("core sha256 {}", params_hash(&extract_core(&policy.net.params)?));
            log::info!("final 50-episode mean return {:.2}", done.curve.tail_mean(50));
            write_param_file(&out, &policy.net.params, &policy.log_std).with_context(|| format!("writing {}", out.display()))?;
            println!("{}", out.display());
        }
        Command::Train { config, out, pretrained } => {
            let mut config = load_config(&config)?;
            if pretrained.is_some() {
                config.pretrained = pretrained;
            }
            if config.algo != Algo::Ppopt && config.pretrained.is_some() {
                log::warn!("`pretrained` is ignored for {}", config.algo);
            }
            let out = out.unwrap_or_else(|| config.output_dir.clone());
            let (outcome, agg) = train_to_dir(&config, thread_count_from_env(config.seeds.len()), &out)?;
            println!(
                "{}: {} runs, {} failed, final-50 mean {:.2}, mean time {:.2} s",
                config.algo,
                outcome.records.len(),
                outcome.failures.len(),
                agg.tail_mean(50),
                agg.mean_total_seconds
            );
            if !outcome.failures.is_empty() {
                bail!("{} of {} runs failed", outcome.failures.len(), config.seeds.len());
            }
        }
        Command::Compare { config_dir, out, clip_floor, no_clip } => {
            let done = run_compare(&config_dir, &out, None, floor(clip_floor, no_clip))?;
            for a in &done.aggregates {
                println!("{}: final-50 mean {:.2}, mean time {:.2} s", a.algo, a.tail_mean(50), a.mean_total_seconds);
            }
            println!("{}", done.plot.display());
        }
        Command::Plot { input, out, clip_floor, no_clip } => {
            let aggs = plot_dir(&input, &out, floor(clip_floor, no_clip))?;
            println!("{} curves -> {}", aggs.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

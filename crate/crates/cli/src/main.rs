//! `lnav`: command-line front end of the experiment harness.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for runtime
//! failures.

use clap::{Args, Parser, Subcommand};
use lnav_cli::{resolve_config, CliError, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "lnav",
    about = "Continuous-time vision policies in a voxel flight simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Args, Clone)]
struct CommonArgs {
    /// Experiment configuration file (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Task family: static-target | chase | hiking.
    #[arg(long)]
    task: Option<String>,
    /// World family: forest | neighborhood.
    #[arg(long)]
    world: Option<String>,
    /// Controller family: ncp | ct-rnn | ode-rnn | ct-gru | lstm.
    #[arg(long)]
    arch: Option<String>,
    /// Weather at evaluation: clear | fog | light-rain | heavy-rain.
    #[arg(long)]
    weather: Option<String>,
    /// Episode budget (collection) respectively episodes per condition
    /// (evaluation).
    #[arg(long)]
    episodes: Option<usize>,
    /// Deterministic interleaved planning (true) or threaded planning
    /// (false).
    #[arg(long)]
    sync: Option<bool>,
    /// Cut every disjoint training window per episode instead of one.
    #[arg(long)]
    multi_window: Option<bool>,
    /// Cap on training epochs.
    #[arg(long)]
    max_epochs: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self, episodes_are_eval: bool) -> Overrides {
        Overrides {
            seed: self.seed,
            world: self.world.clone(),
            weather: self.weather.clone(),
            task: self.task.clone(),
            arch: self.arch.clone(),
            episodes: if episodes_are_eval { None } else { self.episodes },
            eval_episodes: if episodes_are_eval { self.episodes } else { None },
            sync: self.sync,
            multi_window: self.multi_window,
            max_epochs: self.max_epochs,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fly the scripted expert and store successful demonstrations.
    Collect {
        #[command(flatten)]
        common: CommonArgs,
        /// Dataset directory to create.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a policy on a collected dataset.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Dataset directory from `collect`.
        #[arg(long)]
        dataset: PathBuf,
        /// Output directory for checkpoint and report.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint closed-loop.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint file from `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output directory for the report.
        #[arg(long)]
        out: PathBuf,
        /// Sweep all four weathers instead of the configured one.
        #[arg(long, default_value_t = false)]
        all_weathers: bool,
    },
    /// Extract intervention coefficients, saliency maps, and attention
    /// scores from a checkpoint.
    Causal {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint file from `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Optional second checkpoint for a paired attention comparison.
        #[arg(long)]
        compare: Option<PathBuf>,
        /// Output directory for reports.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every controller family and evaluate the full task/weather
    /// grid.
    Benchmark {
        #[command(flatten)]
        common: CommonArgs,
        /// Reuse an existing dataset instead of collecting one.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Output directory for checkpoints and reports.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Collect { common, out } => {
            let cfg = resolve_config(common.config.as_deref(), &common.overrides(false))?;
            let report = lnav_cli::cmd_collect(&cfg, &out)?;
            println!(
                "collected {} episodes ({} attempts) into {} [sha256 {}]",
                report.kept,
                report.attempted,
                out.display(),
                &report.dataset_sha256[..16]
            );
        }
        Command::Train { common, dataset, out } => {
            let cfg = resolve_config(common.config.as_deref(), &common.overrides(false))?;
            let report = lnav_cli::cmd_train(&cfg, &dataset, &out)?;
            println!(
                "trained {} on {} windows: best val {:.4} at epoch {} [checkpoint {}]",
                report.arch,
                report.windows,
                report.best_val,
                report.best_epoch,
                &report.checkpoint_sha256[..16]
            );
        }
        Command::Eval { common, checkpoint, out, all_weathers } => {
            let cfg = resolve_config(common.config.as_deref(), &common.overrides(true))?;
            let report = lnav_cli::cmd_eval(&cfg, &checkpoint, &out, all_weathers)?;
            for c in &report.conditions {
                println!(
                    "{} on {}/{}: {}/{} successes ({:.0}%)",
                    report.controller,
                    c.task,
                    c.weather,
                    c.successes,
                    c.episodes,
                    c.success_rate * 100.0
                );
            }
        }
        Command::Causal { common, checkpoint, compare, out } => {
            let cfg = resolve_config(common.config.as_deref(), &common.overrides(true))?;
            let report = lnav_cli::cmd_causal(&cfg, &checkpoint, compare.as_deref(), &out)?;
            println!(
                "{}: mean attention on target {:.4} over {} frames",
                report.controller, report.attention.mean_mass_on_target, report.attention.frames
            );
            if let Some(cmp) = &report.compare {
                println!(
                    "vs {}: diff {:+.4} (90% CI [{:+.4}, {:+.4}]){}",
                    cmp.reference_controller,
                    cmp.mean_difference,
                    cmp.ci_low,
                    cmp.ci_high,
                    if cmp.discrepancy { " DISCREPANCY" } else { "" }
                );
            }
        }
        Command::Benchmark { common, dataset, out } => {
            let cfg = resolve_config(common.config.as_deref(), &common.overrides(true))?;
            let report = lnav_cli::cmd_benchmark(&cfg, dataset.as_deref(), &out)?;
            let failed = report.cells.iter().filter(|c| c.error.is_some()).count();
            println!(
                "benchmark: {} cells ({} failed), {} trained controllers, reports in {}",
                report.cells.len(),
                failed,
                report.training.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lnav: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

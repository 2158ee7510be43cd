use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use forcegrip_core::Error;

use crate::config::{Overrides, RunConfig};
use crate::pipeline;

#[derive(Debug, Parser)]
#[command(name = "forcegrip", version, about = "Force-aware imitation learning pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Task name; overrides the config.
    #[arg(long, global = true)]
    pub task: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a norm-to-Newton curve to a weighing-scale session.
    Calibrate {
        #[arg(long)]
        session: PathBuf,
    },
    /// Generate scripted demonstrations.
    GenDemos {
        /// Number of demos (defaults to the config's `demos`).
        #[arg(long, visible_alias = "count")]
        episodes: Option<usize>,
    },
    /// Retarget a hand track into a demonstration.
    Retarget {
        #[arg(long)]
        track: PathBuf,
    },
    /// Train a policy on generated or retargeted demos.
    Train {
        /// Directory of demo files (defaults to <out>/demos).
        #[arg(long)]
        demos: Option<PathBuf>,
        /// Hide the force channel from the policy's observations.
        #[arg(long)]
        mask_force: bool,
    },
    /// Run one closed-loop episode.
    Rollout {
        /// Model file (defaults to <out>/model.fgp).
        #[arg(long, conflicts_with = "untrained")]
        model: Option<PathBuf>,
        /// Use an all-zero network instead of a model file.
        #[arg(long)]
        untrained: bool,
        /// Evaluation seed index.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Replace force feedback with full closure.
        #[arg(long)]
        binary: bool,
    },
    /// Evaluate a policy on held-out seeds.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Number of episodes (defaults to the config's `episodes`).
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        binary: bool,
    },
}

/// 2 for configuration, parse and I/O errors, 3 for contract and domain errors, 4 for degeneracy.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Io { .. } => 2,
        Error::Contract(_) | Error::Domain(_) => 3,
        Error::Degenerate { .. } => 4,
    }
}

/// Parses `args` (program name first), runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: Cli) -> forcegrip_core::Result<()> {
    let episodes = match &cli.command {
        Command::GenDemos { episodes } | Command::Eval { episodes, .. } => *episodes,
        _ => None,
    };
    let over = Overrides {
        seed: cli.global.seed,
        out: cli.global.out.clone(),
        task: cli.global.task.clone(),
        episodes,
    };
    let cfg = RunConfig::load(cli.global.config.as_deref(), &over)?;
    match cli.command {
        Command::Calibrate { session } => {
            let fit = pipeline::cmd_calibrate(&cfg, &session)?;
            println!(
                "calibration: {} knots, max residual {:.3e}, {} pooled blocks",
                fit.curve.knots().len(),
                fit.max_residual,
                fit.pooled_blocks
            );
        }
        Command::GenDemos { episodes } => {
            let paths = pipeline::cmd_gen_demos(&cfg, episodes.unwrap_or(cfg.demos))?;
            println!(
                "generated {} demos in {}",
                paths.len(),
                cfg.output_dir.join(pipeline::DEMO_DIR).display()
            );
        }
        Command::Retarget { track } => {
            let path = pipeline::cmd_retarget(&cfg, &track)?;
            println!("wrote {}", path.display());
        }
        Command::Train { demos, mask_force } => {
            let (path, report) = pipeline::cmd_train(&cfg, demos.as_deref(), mask_force)?;
            println!(
                "trained {} steps on {} samples, final loss {:.4e}; wrote {}",
                report.steps,
                report.samples,
                report.final_loss,
                path.display()
            );
        }
        Command::Rollout {
            model,
            untrained,
            index,
            binary,
        } => {
            let r = pipeline::cmd_rollout(&cfg, model.as_deref(), untrained, index, binary)?;
            println!(
                "episode seed {}: success {} peak force {:.1} crushed {} dropped {}",
                r.seed, r.success, r.peak_force, r.crushed, r.dropped
            );
        }
        Command::Eval { model, binary, .. } => {
            let r = pipeline::cmd_eval(&cfg, model.as_deref(), cfg.episodes, binary)?;
            println!(
                "{:?}: success {}/{} crush {} drop {} mean peak force {:.1}",
                r.gripper_mode, r.successes, r.episodes, r.crush_count, r.drop_count, r.mean_peak_force
            );
        }
    }
    Ok(())
}

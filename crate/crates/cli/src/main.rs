//! Single entry point for the whole pipeline: coupling generation, dataset
//! generation, K-NN classification, MLP training, evaluation, sweeps, and
//! report emission.
//!
//! Exit codes: 0 success, 2 configuration, 3 data, 4 numerics, 5 I/O.

mod commands;
mod config;
mod csvout;
mod svg;

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use qmodel_core::CoreError;

use commands::DataRole;
use config::PipelineConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Stage { stage: String, source: CoreError },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration: {msg}"),
            CliError::Stage { stage, source } => write!(f, "stage {stage}: {source}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { source, .. } => match source {
                CoreError::InvalidArgument(_) => 2,
                CoreError::Parse { .. }
                | CoreError::VersionMismatch { .. }
                | CoreError::InvariantViolation(_) => 3,
                CoreError::NumericDomain(_) | CoreError::Training { .. } => 4,
                CoreError::Io(_) => 5,
            },
        }
    }
}

#[derive(Parser)]
#[command(
    name = "qmodel",
    version,
    about = "Simulate black-box open systems and learn their effective model from output-population measurements"
)]
struct Cli {
    /// TOML config file; command-line flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for all artifacts.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Worker threads for parallel stages (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Number of black-box states N.
    #[arg(long, global = true)]
    n_states: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Role {
    Train,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the coupling sets of the configured cases plus spread stats.
    GenCouplings {
        /// Coupling case ids to generate (defaults to the config list).
        #[arg(long, value_delimiter = ',')]
        cases: Option<Vec<u32>>,
    },
    /// Generate a labeled measurement dataset (JSON lines).
    GenData {
        /// Which seed/record-count block to use.
        #[arg(long, value_enum, default_value_t = Role::Train)]
        role: Role,
        #[arg(long)]
        record_count: Option<usize>,
        #[arg(long)]
        master_seed: Option<u64>,
        /// Explicit output path (defaults to out_dir/dataset_n<N>_<role>.jsonl).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train K-NN on per-class datasets and report accuracy and confusion.
    Classify {
        #[arg(long)]
        train_per_class: Option<usize>,
        #[arg(long)]
        test_per_class: Option<usize>,
    },
    /// Train the regression network on a dataset file.
    Train {
        /// Input dataset (defaults to out_dir/dataset_n<N>_train.jsonl).
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Checkpoint output path (defaults to out_dir/checkpoint_n<N>.json).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a dataset and emit the error report.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Regression error across the configured mean-dephasing grid.
    SweepDephasing {
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Per-case training plus mixed-training generalization study.
    CaseStudy {
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Populations of every state over time for one sampled model.
    Trajectory {
        #[arg(long)]
        q_index: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// End-to-end run: couplings, classification, data, training, report.
    FullPipeline {
        /// Shrink every stage for a fast smoke run.
        #[arg(long)]
        smoke: bool,
    },
}

fn apply_smoke_profile(config: &mut PipelineConfig) {
    config.record_count = 200;
    config.test_record_count = 60;
    config.epochs = 60;
    config.train_per_class = 40;
    config.test_per_class = 15;
    config.q_count = 64;
    config.hidden_dims = vec![256, 128];
    config.trajectory_steps = 60;
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(dir) = cli.out_dir {
        config.out_dir = dir;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    if let Some(n) = cli.n_states {
        config.n_states = n;
    }

    if config.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build_global()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    }

    match cli.command {
        Command::GenCouplings { cases } => {
            if let Some(cases) = cases {
                config.coupling_case_ids = cases;
            }
            config.validate()?;
            commands::cmd_gen_couplings(&config)
        }
        Command::GenData { role, record_count, master_seed, out } => {
            match role {
                Role::Train => {
                    if let Some(c) = record_count {
                        config.record_count = c;
                    }
                    if let Some(s) = master_seed {
                        config.master_seed = s;
                    }
                }
                Role::Test => {
                    if let Some(c) = record_count {
                        config.test_record_count = c;
                    }
                    if let Some(s) = master_seed {
                        config.test_master_seed = s;
                    }
                }
            }
            config.validate()?;
            let role = match role {
                Role::Train => DataRole::Train,
                Role::Test => DataRole::Test,
            };
            commands::cmd_gen_data(&config, role, out)
        }
        Command::Classify { train_per_class, test_per_class } => {
            if let Some(v) = train_per_class {
                config.train_per_class = v;
            }
            if let Some(v) = test_per_class {
                config.test_per_class = v;
            }
            config.validate()?;
            commands::cmd_classify(&config)
        }
        Command::Train { data, epochs, checkpoint } => {
            if let Some(e) = epochs {
                config.epochs = e;
            }
            config.validate()?;
            commands::cmd_train(&config, data, checkpoint)
        }
        Command::Eval { checkpoint, data } => {
            config.validate()?;
            commands::cmd_eval(&config, checkpoint, data)
        }
        Command::SweepDephasing { epochs } => {
            if let Some(e) = epochs {
                config.epochs = e;
            }
            config.validate()?;
            commands::cmd_sweep_dephasing(&config)
        }
        Command::CaseStudy { epochs } => {
            if let Some(e) = epochs {
                config.epochs = e;
            }
            config.validate()?;
            commands::cmd_case_study(&config)
        }
        Command::Trajectory { q_index, seed } => {
            if let Some(q) = q_index {
                config.trajectory_q_index = q;
            }
            if let Some(s) = seed {
                config.trajectory_seed = s;
            }
            config.validate()?;
            commands::cmd_trajectory(&config)
        }
        Command::FullPipeline { smoke } => {
            if smoke {
                apply_smoke_profile(&mut config);
            }
            config.validate()?;
            commands::cmd_full_pipeline(&config)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

//! Experiment harness for the continuous-time navigation stack: collect
//! demonstrations, train policies, evaluate them closed-loop, extract
//! intervention reports, and run the full comparison suite. Every command is
//! driven by one serializable configuration and derives all randomness from
//! its seed, so reports, datasets, and checkpoints reproduce bit for bit.

pub mod benchmark_cmd;
pub mod causal_cmd;
pub mod collect;
pub mod config;
pub mod error;
pub mod eval_cmd;
pub mod hash;
pub mod policies;
pub mod seeds;
pub mod train_cmd;

pub use benchmark_cmd::{cmd_benchmark, BenchmarkOutcome};
pub use causal_cmd::{cmd_causal, CausalOutcome};
pub use collect::{cmd_collect, CollectOutcome};
pub use config::{resolve_config, Arch, ExperimentConfig, Overrides};
pub use error::{CliError, Result};
pub use eval_cmd::{cmd_eval, evaluate, EvalOutcome};
pub use train_cmd::{cmd_train, TrainOutcome};

//! Experiment configuration: one serializable struct drives every command,
//! optionally overridden by CLI flags. Reloading a saved config reproduces
//! the run exactly.

use crate::error::{CliError, Result};
use lnav_core::cell::CellKind;
use lnav_core::train::TrainConfig;
use lnav_sim::{TaskKind, Weather, WorldKind};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Recurrent controller families the harness can train and compare.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    /// Sparse four-layer wired liquid network.
    Ncp,
    CtRnn,
    OdeRnn,
    CtGru,
    Lstm,
}

impl Arch {
    pub const ALL: [Arch; 5] = [Arch::Ncp, Arch::CtRnn, Arch::OdeRnn, Arch::CtGru, Arch::Lstm];

    pub fn name(self) -> &'static str {
        match self {
            Arch::Ncp => "ncp",
            Arch::CtRnn => "ct-rnn",
            Arch::OdeRnn => "ode-rnn",
            Arch::CtGru => "ct-gru",
            Arch::Lstm => "lstm",
        }
    }

    pub fn parse(s: &str) -> Result<Arch> {
        Arch::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown architecture '{s}'")))
    }

    pub fn cell_kind(self) -> CellKind {
        match self {
            Arch::Ncp => CellKind::Ltc,
            Arch::CtRnn => CellKind::CtRnn,
            Arch::OdeRnn => CellKind::OdeRnn,
            Arch::CtGru => CellKind::CtGru,
            Arch::Lstm => CellKind::Lstm,
        }
    }
}

fn default_seed() -> u64 {
    7
}
fn default_world() -> WorldKind {
    WorldKind::Forest
}
fn default_weather() -> Weather {
    Weather::Clear
}
fn default_task() -> TaskKind {
    TaskKind::StaticTarget
}
fn default_arch() -> Arch {
    Arch::Ncp
}
fn default_episodes() -> usize {
    200
}
fn default_eval_episodes() -> usize {
    20
}
fn default_resolution() -> usize {
    64
}
fn default_true() -> bool {
    true
}
fn default_hidden_dim() -> usize {
    23
}
fn default_learning_rate() -> f64 {
    5e-4
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_minibatch() -> usize {
    8
}
fn default_max_epochs() -> usize {
    30
}
fn default_val_fraction() -> f64 {
    0.1
}
fn default_eval_timeout_s() -> f64 {
    60.0
}

/// Everything a run depends on. Fields default individually, so a partial
/// JSON file is a valid config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_world")]
    pub world: WorldKind,
    /// Weather applied at evaluation; demonstrations are always collected
    /// in clear conditions.
    #[serde(default = "default_weather")]
    pub weather: Weather,
    #[serde(default = "default_task")]
    pub task: TaskKind,
    #[serde(default = "default_arch")]
    pub arch: Arch,
    /// Successful demonstration episodes to keep during collection.
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    /// Closed-loop episodes per condition during evaluation.
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Deterministic interleaved planning (false runs the planner thread).
    #[serde(default = "default_true")]
    pub sync: bool,
    /// Draw every disjoint training window per episode instead of one.
    #[serde(default)]
    pub multi_window: bool,
    /// State size for the dense architectures (the wired one derives its
    /// own size from the wiring).
    #[serde(default = "default_hidden_dim")]
    pub hidden_dim: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_minibatch")]
    pub minibatch: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    /// Stop early once validation loss reaches this value.
    #[serde(default)]
    pub stop_at_val: Option<f64>,
    /// Epochs without validation improvement before stopping (0 = never).
    #[serde(default)]
    pub patience: usize,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    /// Per-goal time budget in closed-loop evaluation, in seconds.
    #[serde(default = "default_eval_timeout_s")]
    pub eval_timeout_s: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Runtime(format!("serializing config: {e}")))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(CliError::Config("episodes must be positive".into()));
        }
        if self.eval_episodes == 0 {
            return Err(CliError::Config("eval_episodes must be positive".into()));
        }
        if self.resolution < 16 || self.resolution % 2 != 0 {
            return Err(CliError::Config(format!(
                "resolution {} must be an even number of at least 16 pixels",
                self.resolution
            )));
        }
        if self.hidden_dim < 4 {
            return Err(CliError::Config("hidden_dim must be at least 4".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(CliError::Config("val_fraction must lie in (0, 1)".into()));
        }
        if self.minibatch == 0 || self.max_epochs == 0 {
            return Err(CliError::Config("minibatch and max_epochs must be positive".into()));
        }
        if !(self.eval_timeout_s > 0.0) {
            return Err(CliError::Config("eval_timeout_s must be positive".into()));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            minibatch: self.minibatch,
            max_epochs: self.max_epochs,
            stop_at_val: self.stop_at_val,
            patience: if self.patience == 0 { usize::MAX } else { self.patience },
            seed: self.seed,
        }
    }
}

/// CLI flags that override the (file or default) config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub world: Option<String>,
    pub weather: Option<String>,
    pub task: Option<String>,
    pub arch: Option<String>,
    pub episodes: Option<usize>,
    pub eval_episodes: Option<usize>,
    pub sync: Option<bool>,
    pub multi_window: Option<bool>,
    pub max_epochs: Option<usize>,
}

/// Resolve the effective config: file (if given), then flag overrides.
pub fn resolve_config(path: Option<&Path>, ov: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    if let Some(world) = &ov.world {
        cfg.world = WorldKind::parse(world)
            .ok_or_else(|| CliError::Config(format!("unknown world '{world}'")))?;
    }
    if let Some(weather) = &ov.weather {
        cfg.weather = Weather::parse(weather)
            .ok_or_else(|| CliError::Config(format!("unknown weather '{weather}'")))?;
    }
    if let Some(task) = &ov.task {
        cfg.task = TaskKind::parse(task)
            .ok_or_else(|| CliError::Config(format!("unknown task '{task}'")))?;
    }
    if let Some(arch) = &ov.arch {
        cfg.arch = Arch::parse(arch)?;
    }
    if let Some(n) = ov.episodes {
        cfg.episodes = n;
    }
    if let Some(n) = ov.eval_episodes {
        cfg.eval_episodes = n;
    }
    if let Some(sync) = ov.sync {
        cfg.sync = sync;
    }
    if let Some(mw) = ov.multi_window {
        cfg.multi_window = mw;
    }
    if let Some(n) = ov.max_epochs {
        cfg.max_epochs = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.episodes, 200);
        assert_eq!(cfg.eval_episodes, 20);
        assert!(cfg.sync);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        cfg.save(&path).unwrap();
        let loaded = ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg, loaded);
    }

    #[test]
    fn partial_config_file_fills_in_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("partial.json");
        std::fs::write(&path, r#"{"seed": 99, "arch": "ct-gru"}"#).unwrap();
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.arch, Arch::CtGru);
        assert_eq!(cfg.episodes, 200);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, r#"{"sed": 99}"#).unwrap();
        let err = ExperimentConfig::load(&path).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn overrides_take_precedence_and_are_validated() {
        let ov = Overrides { seed: Some(5), arch: Some("lstm".into()), ..Overrides::default() };
        let cfg = resolve_config(None, &ov).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.arch, Arch::Lstm);
        let bad = Overrides { arch: Some("transformer".into()), ..Overrides::default() };
        let err = resolve_config(None, &bad).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn arch_names_round_trip() {
        for arch in Arch::ALL {
            assert_eq!(Arch::parse(arch.name()).unwrap(), arch);
        }
        assert!(Arch::parse("mlp").is_err());
    }

    #[test]
    fn zero_patience_means_never_stop_early() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.train_config().patience, usize::MAX);
    }
}

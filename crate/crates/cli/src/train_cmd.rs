//! Imitation training: stored episodes are cut into windows, split into
//! train/validation, and fitted with the exact-gradient trainer. The best
//! checkpoint plus a training report leave the command.

use crate::collect::{load_dataset_episodes, write_json};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::hash::{sha256_file, sha256_tree};
use crate::policies::build_policy;
use crate::seeds::{derive_seed, Stream};
use lnav_core::container::save_policy;
use lnav_core::policy::Policy;
use lnav_core::train::{train_policy, TrainSequence};
use lnav_sim::dataset::episode_sequences;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub degenerate_frames: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub config: ExperimentConfig,
    pub arch: String,
    pub windows: usize,
    pub train_windows: usize,
    pub val_windows: usize,
    pub curve: Vec<EpochRow>,
    pub best_val: f64,
    pub best_epoch: usize,
    pub dataset_sha256: String,
    pub checkpoint_sha256: String,
}

/// Cut all episodes into windows and split deterministically: with stride
/// `s = round(1 / val_fraction)`, every s-th window validates.
pub fn load_windows(
    cfg: &ExperimentConfig,
    dataset: &Path,
) -> Result<(Vec<TrainSequence<f64>>, Vec<TrainSequence<f64>>)> {
    let episodes = load_dataset_episodes(dataset)?;
    let mut windows = Vec::new();
    for (idx, ep) in episodes.iter().enumerate() {
        let seed = derive_seed(cfg.seed, Stream::Window, idx as u64);
        windows.extend(episode_sequences(ep, seed, cfg.multi_window)?);
    }
    if windows.is_empty() {
        return Err(CliError::Runtime("dataset yields no training windows".into()));
    }
    let stride = (1.0 / cfg.val_fraction).round().max(2.0) as usize;
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (i, w) in windows.into_iter().enumerate() {
        if i % stride == stride - 1 {
            val.push(w);
        } else {
            train.push(w);
        }
    }
    Ok((train, val))
}

/// Fit a fresh policy of the configured family on pre-split windows.
pub fn train_on_windows(
    cfg: &ExperimentConfig,
    train: &[TrainSequence<f64>],
    val: &[TrainSequence<f64>],
) -> Result<(Policy<f64>, Vec<EpochRow>, f64, usize)> {
    let mut policy = build_policy(cfg, cfg.arch, cfg.seed)?;
    let report = train_policy(&mut policy, train, val, &cfg.train_config())?;
    let curve = report
        .curve
        .iter()
        .map(|e| EpochRow {
            epoch: e.epoch,
            train_loss: e.train_loss,
            val_loss: e.val_loss,
            degenerate_frames: e.degenerate_frames,
        })
        .collect();
    Ok((policy, curve, report.best_val, report.best_epoch))
}

pub fn cmd_train(cfg: &ExperimentConfig, dataset: &Path, out: &Path) -> Result<TrainOutcome> {
    std::fs::create_dir_all(out)?;
    let dataset_sha256 = sha256_tree(&dataset.join("episodes"))?;
    let (train, val) = load_windows(cfg, dataset)?;
    let (policy, curve, best_val, best_epoch) = train_on_windows(cfg, &train, &val)?;
    let checkpoint = out.join("policy.lnav");
    save_policy(&checkpoint, &policy)?;
    let outcome = TrainOutcome {
        config: cfg.clone(),
        arch: cfg.arch.name().to_string(),
        windows: train.len() + val.len(),
        train_windows: train.len(),
        val_windows: val.len(),
        curve,
        best_val,
        best_epoch,
        dataset_sha256,
        checkpoint_sha256: sha256_file(&checkpoint)?,
    };
    write_json(&out.join("train_report.json"), &outcome)?;
    cfg.save(&out.join("config.json"))?;
    Ok(outcome)
}

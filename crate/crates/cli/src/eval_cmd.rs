//! Closed-loop evaluation: fly fresh seeded episodes with a checkpointed
//! policy (or the expert) and tally outcomes per condition.

use crate::collect::write_json;
use crate::config::{Arch, ExperimentConfig};
use crate::error::Result;
use crate::hash::sha256_file;
use crate::seeds::{derive_seed, Stream};
use lnav_core::cell::CellKind;
use lnav_core::container::load_policy;
use lnav_core::policy::Policy;
use lnav_sim::runner::run_seeded_episode;
use lnav_sim::{EpisodeConfig, Outcome, Pilot, PolicyPilot, TaskKind, Weather};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Tally for one (task, weather) condition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionEval {
    pub task: String,
    pub weather: String,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub timeouts: usize,
    pub collisions: usize,
    pub aborted: usize,
    /// Seeds skipped because the world offered no valid spawn.
    pub spawn_failures: usize,
    /// Mean episode length of the successful runs, in frames.
    pub mean_success_frames: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub config: ExperimentConfig,
    pub controller: String,
    pub checkpoint_sha256: Option<String>,
    pub conditions: Vec<ConditionEval>,
}

/// Name a policy by its family, distinguishing the wired liquid cell from
/// a dense one of the same kind.
pub fn controller_label(policy: &Policy<f64>) -> String {
    match (policy.cell.kind, policy.cell.rec_mask.is_some()) {
        (CellKind::Ltc, true) => Arch::Ncp.name().to_string(),
        (CellKind::Ltc, false) => "ltc-dense".to_string(),
        (CellKind::CtRnn, _) => Arch::CtRnn.name().to_string(),
        (CellKind::OdeRnn, _) => Arch::OdeRnn.name().to_string(),
        (CellKind::CtGru, _) => Arch::CtGru.name().to_string(),
        (CellKind::Lstm, _) => Arch::Lstm.name().to_string(),
    }
}

/// Fly `n` fresh episodes under one condition. `salt` separates the seed
/// block of this condition from every other one in the same experiment.
pub fn evaluate(
    cfg: &ExperimentConfig,
    pilot: &mut Pilot,
    task: TaskKind,
    weather: Weather,
    n: usize,
    salt: u64,
) -> Result<ConditionEval> {
    let ep_cfg = EpisodeConfig {
        resolution: cfg.resolution,
        sync: cfg.sync,
        weather,
        record: false,
        subgoal_timeout: cfg.eval_timeout_s,
        ..EpisodeConfig::default()
    };
    let mut out = ConditionEval {
        task: task.name().to_string(),
        weather: weather.name().to_string(),
        episodes: 0,
        successes: 0,
        success_rate: 0.0,
        timeouts: 0,
        collisions: 0,
        aborted: 0,
        spawn_failures: 0,
        mean_success_frames: 0.0,
    };
    let mut success_frames = 0usize;
    let mut attempt = 0u64;
    let max_attempts = (n as u64) * 5 + 10;
    while out.episodes < n && attempt < max_attempts {
        let index = salt * 100_000 + attempt;
        attempt += 1;
        let world_seed = derive_seed(cfg.seed, Stream::EvalWorld, index);
        let task_seed = derive_seed(cfg.seed, Stream::EvalTask, index);
        let episode = match run_seeded_episode(
            cfg.world, weather, world_seed, task, task_seed, pilot, &ep_cfg,
        ) {
            Ok(ep) => ep,
            Err(_) => {
                out.spawn_failures += 1;
                continue;
            }
        };
        out.episodes += 1;
        match episode.meta.outcome {
            Outcome::Success => {
                out.successes += 1;
                success_frames += episode.meta.record_count;
            }
            Outcome::Timeout => out.timeouts += 1,
            Outcome::Collision => out.collisions += 1,
            Outcome::Aborted => out.aborted += 1,
        }
    }
    if out.episodes > 0 {
        out.success_rate = out.successes as f64 / out.episodes as f64;
    }
    if out.successes > 0 {
        out.mean_success_frames = success_frames as f64 / out.successes as f64;
    }
    Ok(out)
}

pub fn cmd_eval(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
    out: &Path,
    all_weathers: bool,
) -> Result<EvalOutcome> {
    std::fs::create_dir_all(out)?;
    let policy: Policy<f64> = load_policy(checkpoint)?;
    let controller = controller_label(&policy);
    let checkpoint_sha256 = Some(sha256_file(checkpoint)?);
    let mut pilot = Pilot::Policy(PolicyPilot::new(policy));
    let weathers: Vec<Weather> =
        if all_weathers { Weather::ALL.to_vec() } else { vec![cfg.weather] };
    let mut conditions = Vec::new();
    for (salt, weather) in weathers.iter().enumerate() {
        conditions.push(evaluate(
            cfg,
            &mut pilot,
            cfg.task,
            *weather,
            cfg.eval_episodes,
            salt as u64,
        )?);
    }
    let outcome = EvalOutcome { config: cfg.clone(), controller, checkpoint_sha256, conditions };
    write_json(&out.join("eval_report.json"), &outcome)?;
    Ok(outcome)
}

//! The full comparison suite: train every controller family on the same
//! demonstrations, then fly every controller (plus the scripted expert)
//! across the task/weather grid. Individual cell failures are recorded and
//! the suite keeps going.

use crate::collect::{cmd_collect, write_json};
use crate::config::{Arch, ExperimentConfig};
use crate::error::Result;
use crate::eval_cmd::{evaluate, ConditionEval};
use crate::hash::{sha256_file, sha256_tree};
use crate::train_cmd::{load_windows, train_on_windows};
use lnav_core::container::save_policy;
use lnav_sim::{Pilot, PolicyPilot, TaskKind, Weather};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

/// The nine evaluation conditions: both target tasks under every weather,
/// and the waypoint-following task in the clear.
pub fn conditions() -> Vec<(TaskKind, Weather)> {
    let mut out = Vec::new();
    for task in [TaskKind::StaticTarget, TaskKind::Chase] {
        for weather in Weather::ALL {
            out.push((task, weather));
        }
    }
    out.push((TaskKind::Hiking, Weather::Clear));
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchmarkCell {
    pub controller: String,
    pub task: String,
    pub weather: String,
    pub result: Option<ConditionEval>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub checkpoint_sha256: String,
    pub best_val: f64,
    pub epochs: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DegradationRow {
    pub controller: String,
    pub task: String,
    pub clear_rate: f64,
    pub heavy_rain_rate: f64,
    /// Success-rate drop from clear to heavy rain (positive = degraded).
    pub drop: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchmarkOutcome {
    pub config: ExperimentConfig,
    pub dataset_sha256: String,
    pub training: BTreeMap<String, TrainingSummary>,
    pub training_errors: BTreeMap<String, String>,
    pub cells: Vec<BenchmarkCell>,
    pub degradation: Vec<DegradationRow>,
}

fn rate_of(cells: &[BenchmarkCell], controller: &str, task: &str, weather: &str) -> Option<f64> {
    cells
        .iter()
        .find(|c| c.controller == controller && c.task == task && c.weather == weather)
        .and_then(|c| c.result.as_ref())
        .map(|r| r.success_rate)
}

pub fn cmd_benchmark(
    cfg: &ExperimentConfig,
    dataset: Option<&Path>,
    out: &Path,
) -> Result<BenchmarkOutcome> {
    std::fs::create_dir_all(out.join("checkpoints"))?;
    let dataset_dir = match dataset {
        Some(d) => d.to_path_buf(),
        None => {
            let d = out.join("dataset");
            cmd_collect(cfg, &d)?;
            d
        }
    };
    let dataset_sha256 = sha256_tree(&dataset_dir.join("episodes"))?;
    let (train, val) = load_windows(cfg, &dataset_dir)?;

    // One trained policy per family, all on the same windows.
    let mut training = BTreeMap::new();
    let mut training_errors = BTreeMap::new();
    let mut pilots: Vec<(String, Pilot)> = vec![("expert".to_string(), Pilot::Expert)];
    for arch in Arch::ALL {
        let arch_cfg = ExperimentConfig { arch, ..cfg.clone() };
        match train_on_windows(&arch_cfg, &train, &val) {
            Ok((policy, curve, best_val, _)) => {
                let path = out.join("checkpoints").join(format!("{}.lnav", arch.name()));
                save_policy(&path, &policy)?;
                training.insert(
                    arch.name().to_string(),
                    TrainingSummary {
                        checkpoint_sha256: sha256_file(&path)?,
                        best_val,
                        epochs: curve.len(),
                    },
                );
                pilots.push((arch.name().to_string(), Pilot::Policy(PolicyPilot::new(policy))));
            }
            Err(e) => {
                training_errors.insert(arch.name().to_string(), e.to_string());
            }
        }
    }

    // The matrix: every controller over every condition. A failed cell is
    // recorded, not fatal.
    let conds = conditions();
    let mut cells = Vec::new();
    for (row, (controller, pilot)) in pilots.iter_mut().enumerate() {
        for (ci, (task, weather)) in conds.iter().enumerate() {
            let salt = 100 + (row * conds.len() + ci) as u64;
            let cell = match evaluate(cfg, pilot, *task, *weather, cfg.eval_episodes, salt) {
                Ok(result) => BenchmarkCell {
                    controller: controller.clone(),
                    task: task.name().to_string(),
                    weather: weather.name().to_string(),
                    result: Some(result),
                    error: None,
                },
                Err(e) => BenchmarkCell {
                    controller: controller.clone(),
                    task: task.name().to_string(),
                    weather: weather.name().to_string(),
                    result: None,
                    error: Some(e.to_string()),
                },
            };
            cells.push(cell);
        }
    }

    // Clear -> heavy-rain robustness, per controller and weather-swept task.
    let mut degradation = Vec::new();
    for (controller, _) in &pilots {
        for task in [TaskKind::StaticTarget, TaskKind::Chase] {
            let clear = rate_of(&cells, controller, task.name(), Weather::Clear.name());
            let heavy = rate_of(&cells, controller, task.name(), Weather::HeavyRain.name());
            if let (Some(clear_rate), Some(heavy_rain_rate)) = (clear, heavy) {
                degradation.push(DegradationRow {
                    controller: controller.clone(),
                    task: task.name().to_string(),
                    clear_rate,
                    heavy_rain_rate,
                    drop: clear_rate - heavy_rain_rate,
                });
            }
        }
    }

    let outcome = BenchmarkOutcome {
        config: cfg.clone(),
        dataset_sha256,
        training,
        training_errors,
        cells,
        degradation,
    };
    write_json(&out.join("benchmark.json"), &outcome)?;
    write_csv(&out.join("benchmark.csv"), &outcome)?;
    cfg.save(&out.join("config.json"))?;
    Ok(outcome)
}

fn write_csv(path: &Path, outcome: &BenchmarkOutcome) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "controller,task,weather,episodes,successes,success_rate,error")?;
    for c in &outcome.cells {
        match (&c.result, &c.error) {
            (Some(r), _) => writeln!(
                f,
                "{},{},{},{},{},{},",
                c.controller, c.task, c.weather, r.episodes, r.successes, r.success_rate
            )?,
            (None, Some(e)) => writeln!(
                f,
                "{},{},{},,,,\"{}\"",
                c.controller,
                c.task,
                c.weather,
                e.replace('"', "'")
            )?,
            (None, None) => writeln!(f, "{},{},{},,,,", c.controller, c.task, c.weather)?,
        }
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_grid_is_the_expected_nine() {
        let conds = conditions();
        assert_eq!(conds.len(), 9);
        assert_eq!(conds.iter().filter(|(t, _)| *t == TaskKind::StaticTarget).count(), 4);
        assert_eq!(conds.iter().filter(|(t, _)| *t == TaskKind::Chase).count(), 4);
        assert!(conds.contains(&(TaskKind::Hiking, Weather::Clear)));
    }

    #[test]
    fn tiny_benchmark_fills_the_matrix_and_degradation_rows() {
        let cfg = ExperimentConfig {
            episodes: 2,
            eval_episodes: 1,
            resolution: 32,
            seed: 21,
            max_epochs: 1,
            minibatch: 2,
            multi_window: true,
            eval_timeout_s: 2.0,
            ..ExperimentConfig::default()
        };
        let out = tempfile::tempdir().unwrap();
        let report = cmd_benchmark(&cfg, None, out.path()).unwrap();
        // 6 controllers x 9 conditions, minus rows for any arch that failed
        // to train (none expected here).
        assert!(report.training_errors.is_empty(), "{:?}", report.training_errors);
        assert_eq!(report.cells.len(), 6 * 9);
        assert_eq!(report.training.len(), 5);
        // Degradation covers each controller on both weather-swept tasks.
        assert_eq!(report.degradation.len(), 6 * 2);
        for row in &report.degradation {
            assert!((-1.0..=1.0).contains(&row.drop));
        }
        assert!(out.path().join("benchmark.csv").exists());
        assert!(out.path().join("benchmark.json").exists());
        for arch in Arch::ALL {
            assert!(out
                .path()
                .join("checkpoints")
                .join(format!("{}.lnav", arch.name()))
                .exists());
        }
    }
}

//! Episode records and their on-disk format: a directory with a JSON
//! manifest, a pose/label CSV, and one PPM frame per record. Round-trips are
//! byte-exact: floats are written in shortest form that parses back to the
//! identical bits.

use crate::geom::Vec3;
use crate::task::TaskKind;
use crate::world::{DronePose, Weather, WorldKind};
use crate::SimError;
use lnav_core::image::RgbImage;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// How an episode ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    /// Reached the final target within the success radius before timing out.
    Success,
    /// Ran out of time.
    Timeout,
    /// Drone entered an occupied voxel.
    Collision,
    /// Planning or spawning failed; recorded data is discarded.
    Aborted,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Timeout => "timeout",
            Outcome::Collision => "collision",
            Outcome::Aborted => "aborted",
        }
    }
}

/// One control-loop tick: the frame seen before acting, the pose it was seen
/// from, the current target position, and the unit direction actually flown
/// during the tick (world frame).
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    /// Seconds since episode start; tick `k` is exactly `k * 0.05`.
    pub t: f64,
    pub pose: DronePose,
    /// Active target position at this tick (not persisted in the CSV).
    pub target: Vec3,
    /// Unit direction of travel in world coordinates.
    pub label: [f64; 3],
    /// Camera frame; `None` when the episode ran without rendering.
    pub frame: Option<RgbImage>,
}

/// Episode-level metadata persisted as `manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMeta {
    pub world_kind: WorldKind,
    pub world_seed: u64,
    pub task: TaskKind,
    pub task_seed: u64,
    pub weather: Weather,
    pub outcome: Outcome,
    pub record_count: usize,
    /// Frames in which the target was fully occluded from the camera.
    pub occluded_frames: usize,
    pub resolution: usize,
    /// Whether the episode ran in the deterministic synchronous mode.
    pub sync: bool,
}

/// A finished episode: metadata plus the per-tick records.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub meta: EpisodeMeta,
    pub records: Vec<EpisodeRecord>,
}

const POSES_HEADER: &str = "t,x,y,z,yaw,label_x,label_y,label_z";

/// Write an episode directory: `manifest.json`, `poses.csv`, and
/// `frames/NNNNN.ppm` for each record that has a frame.
pub fn save_episode(dir: &Path, ep: &Episode) -> Result<(), SimError> {
    fs::create_dir_all(dir)?;
    let manifest = serde_json::to_string_pretty(&ep.meta)
        .map_err(|e| SimError::Corrupt(format!("manifest encode: {e}")))?;
    fs::write(dir.join("manifest.json"), manifest + "\n")?;
    let mut csv = String::from(POSES_HEADER);
    csv.push('\n');
    for r in &ep.records {
        // `{}` on f64 prints the shortest string that parses back to the
        // same bits, making the CSV round-trip exact.
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.t,
            r.pose.position.x,
            r.pose.position.y,
            r.pose.position.z,
            r.pose.yaw,
            r.label[0],
            r.label[1],
            r.label[2]
        ));
    }
    fs::write(dir.join("poses.csv"), csv)?;
    let frames_dir = dir.join("frames");
    if ep.records.iter().any(|r| r.frame.is_some()) {
        fs::create_dir_all(&frames_dir)?;
    }
    for (i, r) in ep.records.iter().enumerate() {
        if let Some(frame) = &r.frame {
            frame
                .save_ppm(&frames_dir.join(format!("{i:05}.ppm")))
                .map_err(|e| SimError::Corrupt(format!("frame {i}: {e}")))?;
        }
    }
    Ok(())
}

/// Load an episode directory written by [`save_episode`]. Targets are not
/// persisted, so loaded records carry a zero target.
pub fn load_episode(dir: &Path) -> Result<Episode, SimError> {
    let manifest = fs::read_to_string(dir.join("manifest.json"))?;
    let meta: EpisodeMeta = serde_json::from_str(&manifest)
        .map_err(|e| SimError::Corrupt(format!("manifest decode: {e}")))?;
    let csv = fs::read_to_string(dir.join("poses.csv"))?;
    let mut lines = csv.lines();
    match lines.next() {
        Some(h) if h == POSES_HEADER => {}
        other => return Err(SimError::Corrupt(format!("bad poses header: {other:?}"))),
    }
    let mut records = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(SimError::Corrupt(format!("poses row {n} has {} fields", fields.len())));
        }
        let mut vals = [0.0f64; 8];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f
                .parse()
                .map_err(|e| SimError::Corrupt(format!("poses row {n}: {e}")))?;
        }
        let frame_path = dir.join("frames").join(format!("{n:05}.ppm"));
        let frame = if frame_path.exists() {
            Some(
                RgbImage::load_ppm(&frame_path)
                    .map_err(|e| SimError::Corrupt(format!("frame {n}: {e}")))?,
            )
        } else {
            None
        };
        records.push(EpisodeRecord {
            t: vals[0],
            pose: DronePose {
                position: Vec3::new(vals[1], vals[2], vals[3]),
                yaw: vals[4],
                speed: 0.0,
            },
            target: Vec3::ZERO,
            label: [vals[5], vals[6], vals[7]],
            frame,
        });
    }
    if records.len() != meta.record_count {
        return Err(SimError::Corrupt(format!(
            "manifest says {} records, found {}",
            meta.record_count,
            records.len()
        )));
    }
    Ok(Episode { meta, records })
}

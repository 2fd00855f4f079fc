//! Conversion of recorded episodes into supervised training windows.
//!
//! A window covers 65 consecutive records and yields 64 (frame, label)
//! pairs: each frame is paired with the unit direction of the *next*
//! displacement, expressed in the camera frame of that instant. Rotating
//! labels into the camera frame makes the task viewpoint-relative, which is
//! what a vision policy can actually learn.

use crate::episode::{Episode, EpisodeRecord};
use crate::geom::{world_to_camera, yaw_basis, Vec3};
use crate::SimError;
use lnav_core::train::{SeqFrames, TrainSequence};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Records per window; one more than the frame count because labels come
/// from consecutive position differences.
pub const WINDOW_RECORDS: usize = 65;
/// Supervised pairs per window.
pub const WINDOW_FRAMES: usize = WINDOW_RECORDS - 1;

/// Start offsets of the windows drawn from an episode with `record_count`
/// records. The default is a single window at a seeded random offset;
/// `multi` switches to every disjoint window. Episodes shorter than one
/// window yield nothing.
pub fn window_offsets(record_count: usize, rng: &mut impl Rng, multi: bool) -> Vec<usize> {
    if record_count < WINDOW_RECORDS {
        return Vec::new();
    }
    if multi {
        (0..)
            .map(|w| w * WINDOW_RECORDS)
            .take_while(|start| start + WINDOW_RECORDS <= record_count)
            .collect()
    } else {
        vec![rng.random_range(0..=record_count - WINDOW_RECORDS)]
    }
}

/// Turn one 65-record slice into a training sequence. Every record except
/// the last must carry a frame.
pub fn sequence_from_window(records: &[EpisodeRecord]) -> Result<TrainSequence<f64>, SimError> {
    if records.len() != WINDOW_RECORDS {
        return Err(SimError::Corrupt(format!(
            "window needs {WINDOW_RECORDS} records, got {}",
            records.len()
        )));
    }
    let mut frames = Vec::with_capacity(WINDOW_FRAMES);
    let mut labels = Vec::with_capacity(WINDOW_FRAMES);
    for k in 0..WINDOW_FRAMES {
        let rec = &records[k];
        let frame = rec.frame.clone().ok_or_else(|| {
            SimError::Corrupt("record in training window is missing its frame".into())
        })?;
        let step = records[k + 1].pose.position - rec.pose.position;
        // Stationary instants fall back to the commanded direction so the
        // label stays unit-norm.
        let dir_world = step
            .normalized()
            .unwrap_or(Vec3::new(rec.label[0], rec.label[1], rec.label[2]));
        let basis = yaw_basis(rec.pose.yaw);
        let cam = world_to_camera(&basis, dir_world);
        frames.push(frame);
        labels.push([cam.x, cam.y, cam.z]);
    }
    Ok(TrainSequence { frames: SeqFrames::Images(frames), labels })
}

/// All training sequences drawn from one episode. `seed` fixes the window
/// offsets, so collection is reproducible.
pub fn episode_sequences(
    episode: &Episode,
    seed: u64,
    multi: bool,
) -> Result<Vec<TrainSequence<f64>>, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    window_offsets(episode.records.len(), &mut rng, multi)
        .into_iter()
        .map(|start| sequence_from_window(&episode.records[start..start + WINDOW_RECORDS]))
        .collect()
}

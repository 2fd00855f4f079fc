//! Intervention analysis of a checkpoint: closed-form coupling coefficients
//! (liquid cells only), input-attribution saliency maps, and attention-on-
//! target scores — optionally compared against a second checkpoint with a
//! paired bootstrap.

use crate::collect::write_json;
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::eval_cmd::controller_label;
use crate::hash::sha256_file;
use crate::seeds::{derive_seed, Stream};
use lnav_core::causal::intervention_coefficients;
use lnav_core::causal::saliency::{visual_backprop, SaliencyMap};
use lnav_core::cell::CellKind;
use lnav_core::container::load_policy;
use lnav_core::image::RgbImage;
use lnav_core::policy::Policy;
use lnav_sim::render::{target_pixel_box, Camera};
use lnav_sim::runner::run_seeded_episode;
use lnav_sim::{EpisodeConfig, Outcome, Pilot, Weather};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;

/// Frames in the shared probe set both checkpoints are scored on.
pub const PROBE_FRAMES: usize = 200;
/// Bootstrap resamples behind the confidence interval.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
/// Saliency overlays written to disk (the scores cover every probe frame).
const OVERLAY_COUNT: usize = 8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttentionSummary {
    pub frames: usize,
    pub mean_mass_on_target: f64,
    /// Probe frames whose saliency map had no contrast at all.
    pub flat_maps: usize,
}

/// Paired comparison of attention-on-target between two checkpoints.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttentionComparison {
    pub reference_controller: String,
    pub reference_checkpoint_sha256: String,
    pub frames: usize,
    pub mean_primary: f64,
    pub mean_reference: f64,
    pub mean_difference: f64,
    /// Central 90% bootstrap interval of the mean difference.
    pub ci_low: f64,
    pub ci_high: f64,
    /// The primary checkpoint attends to the target more, and the interval
    /// excludes zero.
    pub primary_higher: bool,
    /// Raised whenever the data do not support `primary_higher`.
    pub discrepancy: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CausalOutcome {
    pub config: ExperimentConfig,
    pub controller: String,
    pub checkpoint_sha256: String,
    /// Relative directory holding `a.csv`, `b.csv`, `c.csv`, or `None` with
    /// `coefficients_note` explaining why.
    pub coefficients_dir: Option<String>,
    pub coefficients_note: Option<String>,
    pub attention: AttentionSummary,
    pub compare: Option<AttentionComparison>,
}

/// One probe frame: the rendered image and the target's pixel box.
pub struct ProbeFrame {
    pub image: RgbImage,
    pub target_box: (usize, usize, usize, usize),
}

/// Build the shared probe set: expert flights over seeded worlds, keeping
/// frames whose target projects into the image. Deterministic in the
/// experiment seed, independent of any policy under test.
pub fn probe_frames(cfg: &ExperimentConfig, count: usize) -> Result<Vec<ProbeFrame>> {
    let ep_cfg = EpisodeConfig {
        resolution: cfg.resolution,
        sync: true,
        weather: Weather::Clear,
        record: true,
        ..EpisodeConfig::default()
    };
    let mut frames = Vec::new();
    let mut attempt = 0u64;
    while frames.len() < count && attempt < 200 {
        let world_seed = derive_seed(cfg.seed, Stream::ProbeWorld, attempt);
        let task_seed = derive_seed(cfg.seed, Stream::ProbeTask, attempt);
        attempt += 1;
        let episode = match run_seeded_episode(
            cfg.world,
            Weather::Clear,
            world_seed,
            cfg.task,
            task_seed,
            &mut Pilot::Expert,
            &ep_cfg,
        ) {
            Ok(ep) => ep,
            Err(_) => continue,
        };
        if episode.meta.outcome != Outcome::Success {
            continue;
        }
        for record in episode.records {
            if frames.len() >= count {
                break;
            }
            let camera = Camera::from_pose(&record.pose, cfg.resolution);
            if let (Some(image), Some(bx)) =
                (record.frame, target_pixel_box(&camera, record.target))
            {
                frames.push(ProbeFrame { image, target_box: bx });
            }
        }
    }
    if frames.len() < count {
        return Err(CliError::Runtime(format!(
            "probe set stalled at {}/{} frames",
            frames.len(),
            count
        )));
    }
    Ok(frames)
}

/// Saliency map of one frame under a policy.
pub fn frame_saliency(policy: &Policy<f64>, image: &RgbImage) -> Result<SaliencyMap> {
    let head = policy
        .conv
        .as_ref()
        .ok_or_else(|| CliError::Runtime("checkpoint has no vision front end".into()))?;
    let (_, cache) = policy.features(image)?;
    Ok(visual_backprop(head, &cache)?)
}

/// Fraction of saliency mass inside the target's pixel box.
pub fn mass_on_target(map: &SaliencyMap, bx: (usize, usize, usize, usize)) -> f64 {
    let (x0, y0, x1, y1) = bx;
    map.mass_fraction(|x, y| x >= x0 && x <= x1 && y >= y0 && y <= y1)
}

/// Attention scores of a policy over the probe set.
pub fn attention_scores(policy: &Policy<f64>, probes: &[ProbeFrame]) -> Result<Vec<(f64, bool)>> {
    probes
        .iter()
        .map(|p| {
            let map = frame_saliency(policy, &p.image)?;
            Ok((mass_on_target(&map, p.target_box), map.flat))
        })
        .collect()
}

/// Central 90% bootstrap interval of the mean of `diffs`.
pub fn bootstrap_mean_interval(diffs: &[f64], seed: u64) -> (f64, f64) {
    assert!(!diffs.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let sum: f64 =
                (0..diffs.len()).map(|_| diffs[rng.random_range(0..diffs.len())]).sum();
            sum / diffs.len() as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let lo = means[(BOOTSTRAP_RESAMPLES as f64 * 0.05) as usize];
    let hi = means[(BOOTSTRAP_RESAMPLES as f64 * 0.95) as usize - 1];
    (lo, hi)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in xs {
        sum += x;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Compare two policies' attention on a shared probe set.
pub fn compare_attention(
    primary: &[(f64, bool)],
    reference: &[(f64, bool)],
    seed: u64,
) -> (f64, f64, f64, f64, f64, bool) {
    assert_eq!(primary.len(), reference.len());
    let diffs: Vec<f64> =
        primary.iter().zip(reference).map(|((a, _), (b, _))| a - b).collect();
    let mean_primary = mean(primary.iter().map(|(v, _)| *v));
    let mean_reference = mean(reference.iter().map(|(v, _)| *v));
    let mean_diff = mean(diffs.iter().copied());
    let (lo, hi) = bootstrap_mean_interval(&diffs, seed);
    let primary_higher = mean_diff > 0.0 && lo > 0.0;
    (mean_primary, mean_reference, mean_diff, lo, hi, primary_higher)
}

pub fn cmd_causal(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
    compare: Option<&Path>,
    out: &Path,
) -> Result<CausalOutcome> {
    std::fs::create_dir_all(out)?;
    let policy: Policy<f64> = load_policy(checkpoint)?;
    let controller = controller_label(&policy);

    // Closed-form coupling coefficients exist for the liquid cell only.
    let (coefficients_dir, coefficients_note) = if policy.cell.kind == CellKind::Ltc {
        let coeff = intervention_coefficients(&policy.cell, None, None)?;
        coeff.export_csv(&out.join("coefficients"))?;
        (Some("coefficients".to_string()), None)
    } else {
        let note = format!(
            "closed-form intervention coefficients are not defined for the {controller} \
             family; saliency analysis below still applies"
        );
        std::fs::write(out.join("coefficients_note.txt"), format!("{note}\n"))?;
        (None, Some(note))
    };

    let probes = probe_frames(cfg, PROBE_FRAMES)?;
    let scores = attention_scores(&policy, &probes)?;

    // A few overlays for eyeballing, plus the full per-frame score table.
    let overlays = out.join("saliency");
    std::fs::create_dir_all(&overlays)?;
    for (i, probe) in probes.iter().take(OVERLAY_COUNT).enumerate() {
        let map = frame_saliency(&policy, &probe.image)?;
        let img = map.overlay(&probe.image)?;
        img.save_ppm(&overlays.join(format!("frame_{i:03}.ppm")))?;
    }
    let mut table = std::io::BufWriter::new(std::fs::File::create(out.join("attention.csv"))?);
    writeln!(table, "frame,mass_on_target,flat")?;
    for (i, (mass, flat)) in scores.iter().enumerate() {
        writeln!(table, "{i},{mass},{flat}")?;
    }
    table.flush()?;

    let attention = AttentionSummary {
        frames: scores.len(),
        mean_mass_on_target: mean(scores.iter().map(|(v, _)| *v)),
        flat_maps: scores.iter().filter(|(_, flat)| *flat).count(),
    };

    let compare = match compare {
        None => None,
        Some(ref_path) => {
            let reference: Policy<f64> = load_policy(ref_path)?;
            let ref_scores = attention_scores(&reference, &probes)?;
            let (mp, mr, md, lo, hi, higher) = compare_attention(
                &scores,
                &ref_scores,
                derive_seed(cfg.seed, Stream::Bootstrap, 0),
            );
            Some(AttentionComparison {
                reference_controller: controller_label(&reference),
                reference_checkpoint_sha256: sha256_file(ref_path)?,
                frames: probes.len(),
                mean_primary: mp,
                mean_reference: mr,
                mean_difference: md,
                ci_low: lo,
                ci_high: hi,
                primary_higher: higher,
                discrepancy: !higher,
            })
        }
    };

    let outcome = CausalOutcome {
        config: cfg.clone(),
        controller,
        checkpoint_sha256: sha256_file(checkpoint)?,
        coefficients_dir,
        coefficients_note,
        attention,
        compare,
    };
    write_json(&out.join("causal_report.json"), &outcome)?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Arch;
    use crate::policies::build_policy;
    use lnav_core::container::save_policy;

    fn tiny_cfg() -> ExperimentConfig {
        ExperimentConfig { resolution: 32, seed: 21, ..ExperimentConfig::default() }
    }

    #[test]
    fn bootstrap_interval_brackets_an_obvious_shift() {
        let diffs: Vec<f64> = (0..100).map(|i| 1.0 + 0.01 * (i % 7) as f64).collect();
        let (lo, hi) = bootstrap_mean_interval(&diffs, 3);
        assert!(lo > 0.9 && hi < 1.2 && lo < hi);
        // Deterministic under the same seed.
        assert_eq!(bootstrap_mean_interval(&diffs, 3), (lo, hi));
    }

    #[test]
    fn comparison_flags_hold_for_separated_and_mixed_samples() {
        let a: Vec<(f64, bool)> = (0..80).map(|i| (0.6 + 0.001 * (i % 5) as f64, false)).collect();
        let b: Vec<(f64, bool)> = (0..80).map(|i| (0.2 + 0.001 * (i % 3) as f64, false)).collect();
        let (_, _, diff, lo, _, higher) = compare_attention(&a, &b, 9);
        assert!(diff > 0.3 && lo > 0.0 && higher);
        let (_, _, _, _, _, higher_rev) = compare_attention(&b, &a, 9);
        assert!(!higher_rev, "reversed comparison cannot also claim superiority");
    }

    #[test]
    fn probe_frames_have_targets_in_view() {
        let cfg = tiny_cfg();
        let probes = probe_frames(&cfg, 20).unwrap();
        assert_eq!(probes.len(), 20);
        for p in &probes {
            let (x0, y0, x1, y1) = p.target_box;
            assert!(x0 <= x1 && y0 <= y1 && x1 < 32 && y1 < 32);
            assert_eq!(p.image.width, 32);
        }
    }

    #[test]
    fn causal_report_covers_liquid_and_non_liquid_checkpoints() {
        let cfg = tiny_cfg();
        let dir = tempfile::tempdir().unwrap();
        let ncp_path = dir.path().join("ncp.lnav");
        save_policy(&ncp_path, &build_policy(&cfg, Arch::Ncp, 5).unwrap()).unwrap();
        let lstm_path = dir.path().join("lstm.lnav");
        save_policy(&lstm_path, &build_policy(&cfg, Arch::Lstm, 5).unwrap()).unwrap();

        let small = ExperimentConfig { ..cfg.clone() };
        // Shrink the probe set through a wrapper: call the pieces directly.
        let probes = probe_frames(&small, 10).unwrap();
        let ncp = build_policy(&cfg, Arch::Ncp, 5).unwrap();
        let scores = attention_scores(&ncp, &probes).unwrap();
        assert_eq!(scores.len(), 10);
        for (mass, _) in &scores {
            assert!((0.0..=1.0).contains(mass));
        }

        // Full command on the liquid checkpoint: coefficients present.
        let out_ncp = dir.path().join("causal_ncp");
        let report = cmd_causal(&small, &ncp_path, None, &out_ncp);
        // PROBE_FRAMES worth of probes is heavy for a unit test; accept a
        // stalled probe set only if the error says so.
        match report {
            Ok(r) => {
                assert!(r.coefficients_dir.is_some());
                assert!(out_ncp.join("coefficients/a.csv").exists());
                assert!(out_ncp.join("coefficients/b.csv").exists());
                assert!(out_ncp.join("coefficients/c.csv").exists());
            }
            Err(e) => panic!("causal command failed: {e}"),
        }

        // Non-liquid checkpoint: explicit note instead of coefficients.
        let out_lstm = dir.path().join("causal_lstm");
        let report = cmd_causal(&small, &lstm_path, None, &out_lstm).unwrap();
        assert!(report.coefficients_dir.is_none());
        assert!(report.coefficients_note.is_some());
        assert!(out_lstm.join("coefficients_note.txt").exists());
        assert!(out_lstm.join("attention.csv").exists());
    }
}

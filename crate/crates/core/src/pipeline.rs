//! Training-sample harvesting, per-frame relocalization and sequence metrics.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{wht_descriptor, Keypoint, RgbdFrame};
use crate::forest::{forest_predict, train_forest, Forest, ForestConfig, ForestMode, Query, TrainingSample};
use crate::geometry::{pose_error, CameraPose, Correspondence, Intrinsics};
use crate::ransac::{preemptive_ransac, RansacConfig, RansacMode};

/// Maximum keypoint-to-projection distance for SfM association, in pixels.
pub const SFM_ASSOCIATION_RADIUS: f64 = 1.0;
pub const CORRECT_TRANSLATION_M: f64 = 0.05;
pub const CORRECT_ROTATION_DEG: f64 = 5.0;

/// Samples up to `n_pixels` distinct pixels with valid depth and labels each
/// with its world coordinate under `gt_pose`.
///
/// When fewer valid pixels exist, every one is returned once, in raster order.
pub fn harvest_indoor_samples<R: Rng>(
    frame: &Arc<RgbdFrame>,
    gt_pose: &CameraPose,
    intrinsics: &Intrinsics,
    n_pixels: usize,
    rng: &mut R,
) -> Result<Vec<TrainingSample>> {
    let valid = frame.valid_pixels();
    if valid.is_empty() {
        return Err(Error::EmptyFrame);
    }
    let chosen: Vec<[u32; 2]> = if n_pixels >= valid.len() {
        valid
    } else {
        rand::seq::index::sample(rng, valid.len(), n_pixels)
            .into_iter()
            .map(|i| valid[i])
            .collect()
    };
    chosen
        .into_iter()
        .map(|p| {
            let pixel = Vector2::new(p[0] as f64, p[1] as f64);
            let cam = intrinsics.backproject(pixel, frame.depth(p[0], p[1]))?;
            Ok(TrainingSample {
                pixel,
                descriptor: wht_descriptor(frame, p),
                label: gt_pose.transform_point(&cam),
                frame: Some(Arc::clone(frame)),
            })
        })
        .collect()
}

/// Pairs keypoints with projected SfM points.
///
/// Every keypoint proposes the nearest visible projection within
/// [`SFM_ASSOCIATION_RADIUS`]. Proposals are granted in ascending distance
/// (ties: lower keypoint index) and each point is used at most once; a
/// keypoint whose nearest point is taken stays unpaired.
pub fn associate_sfm_points(
    keypoints: &[Keypoint],
    sfm_points: &[Vector3<f64>],
    gt_pose: &CameraPose,
    intrinsics: &Intrinsics,
) -> Vec<TrainingSample> {
    let mut grid: HashMap<(i64, i64), Vec<(usize, Vector2<f64>)>> = HashMap::new();
    for (i, p) in sfm_points.iter().enumerate() {
        let Ok(px) = intrinsics.project(&gt_pose.inverse_transform_point(p)) else {
            continue;
        };
        if intrinsics.contains(&px) {
            grid.entry(cell(&px)).or_default().push((i, px));
        }
    }

    let mut proposals: Vec<(f64, usize, usize)> = Vec::new();
    for (k, kp) in keypoints.iter().enumerate() {
        let (cx, cy) = cell(&kp.pixel);
        let mut best: Option<(f64, usize)> = None;
        for dy in -1..=1 {
            for dx in -1..=1 {
                for &(i, px) in grid.get(&(cx + dx, cy + dy)).into_iter().flatten() {
                    let d = (px - kp.pixel).norm();
                    if d <= SFM_ASSOCIATION_RADIUS && best.is_none_or(|(bd, bi)| d < bd || (d == bd && i < bi)) {
                        best = Some((d, i));
                    }
                }
            }
        }
        if let Some((d, i)) = best {
            proposals.push((d, k, i));
        }
    }
    proposals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut used = vec![false; sfm_points.len()];
    let mut granted: Vec<(usize, usize)> = Vec::new();
    for (_, k, i) in proposals {
        if !used[i] {
            used[i] = true;
            granted.push((k, i));
        }
    }
    granted.sort_unstable();
    granted
        .into_iter()
        .map(|(k, i)| TrainingSample {
            pixel: keypoints[k].pixel,
            descriptor: keypoints[k].descriptor.values().to_vec(),
            label: sfm_points[i],
            frame: None,
        })
        .collect()
}

fn cell(p: &Vector2<f64>) -> (i64, i64) {
    (p.x.floor() as i64, p.y.floor() as i64)
}

/// Trains an indoor forest. Tree `t` sees its own random draw of
/// `pixels_per_frame` pixels from every frame, seeded by `rng_seed + t`.
pub fn train_indoor_forest(
    frames: &[(Arc<RgbdFrame>, CameraPose)],
    intrinsics: &Intrinsics,
    pixels_per_frame: usize,
    config: &ForestConfig,
) -> Result<Forest> {
    config.validate()?;
    if frames.is_empty() {
        return Err(Error::InvalidInput("no training frames".into()));
    }
    let per_tree = (0..config.tree_count)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed.wrapping_add(t as u64));
            let mut samples = Vec::new();
            for (frame, pose) in frames {
                samples.extend(harvest_indoor_samples(frame, pose, intrinsics, pixels_per_frame, &mut rng)?);
            }
            Ok(samples)
        })
        .collect::<Result<Vec<_>>>()?;
    train_forest(&per_tree, ForestMode::IndoorRgbd, config)
}

/// Trains an outdoor forest on every associated keypoint; all trees share
/// the sample set and differ only by seed.
pub fn train_outdoor_forest(samples: Vec<TrainingSample>, config: &ForestConfig) -> Result<Forest> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no keypoints were associated with SfM points".into()));
    }
    let per_tree = vec![samples; config.tree_count];
    train_forest(&per_tree, ForestMode::OutdoorRgb, config)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelocalizationConfig {
    /// Backtracking leaf budget per tree.
    pub max_leaves: usize,
    /// Query pixels per RGB-D frame.
    pub query_budget: usize,
    /// Outdoor predictions farther than this from their leaf descriptor are dropped.
    pub max_descriptor_distance: f64,
    pub ransac: RansacConfig,
    /// Seeds query-pixel sampling; RANSAC uses `ransac.rng_seed`.
    pub rng_seed: u64,
}

impl RelocalizationConfig {
    pub fn for_mode(mode: ForestMode) -> Self {
        Self {
            max_leaves: 16,
            query_budget: 5000,
            max_descriptor_distance: 0.5,
            ransac: RansacConfig::for_mode(match mode {
                ForestMode::IndoorRgbd => RansacMode::Kabsch3D,
                ForestMode::OutdoorRgb => RansacMode::Pnp2D,
            }),
            rng_seed: 0,
        }
    }

    /// Same settings with both seeds offset by `index`, for per-frame runs.
    pub fn for_frame(&self, index: usize) -> Self {
        let mut cfg = *self;
        cfg.rng_seed = self.rng_seed.wrapping_add(index as u64);
        cfg.ransac.rng_seed = self.ransac.rng_seed.wrapping_add(index as u64);
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelocalizationResult {
    /// `None` when the frame could not be localized.
    pub pose: Option<CameraPose>,
    pub inlier_count: usize,
    pub correspondences_used: usize,
    pub runtime_ms: f64,
}

impl RelocalizationResult {
    pub fn failed(&self) -> bool {
        self.pose.is_none()
    }
}

/// Builds the per-tree camera/world correspondences for an RGB-D frame.
pub fn indoor_correspondences(
    forest: &Forest,
    frame: &RgbdFrame,
    intrinsics: &Intrinsics,
    cfg: &RelocalizationConfig,
) -> Result<Vec<Correspondence>> {
    if forest.mode() != ForestMode::IndoorRgbd {
        return Err(Error::InvalidInput("RGB-D relocalization needs an indoor forest".into()));
    }
    if frame.width() != intrinsics.width || frame.height() != intrinsics.height {
        return Err(Error::InvalidInput(format!(
            "frame is {}x{}, intrinsics expect {}x{}",
            frame.width(),
            frame.height(),
            intrinsics.width,
            intrinsics.height
        )));
    }
    let valid = frame.valid_pixels();
    if valid.is_empty() {
        return Err(Error::EmptyFrame);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let pixels: Vec<[u32; 2]> = if cfg.query_budget >= valid.len() {
        valid
    } else {
        rand::seq::index::sample(&mut rng, valid.len(), cfg.query_budget)
            .into_iter()
            .map(|i| valid[i])
            .collect()
    };

    let per_pixel = |p: &[u32; 2]| -> Result<Vec<Correspondence>> {
        let pixel = Vector2::new(p[0] as f64, p[1] as f64);
        let cam = intrinsics.backproject(pixel, frame.depth(p[0], p[1]))?;
        let descriptor = wht_descriptor(frame, *p);
        let query = Query {
            pixel,
            descriptor: &descriptor,
            frame: Some(frame),
        };
        Ok(forest_predict(forest, &query, cfg.max_leaves)?
            .into_iter()
            .enumerate()
            .map(|(t, pred)| Correspondence::camera(pred.world_point, cam).with_tree(t as u16))
            .collect())
    };
    #[cfg(feature = "parallel")]
    let nested = {
        use rayon::prelude::*;
        pixels.par_iter().map(per_pixel).collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let nested = pixels.iter().map(per_pixel).collect::<Result<Vec<_>>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// Builds pixel/world correspondences for a keypoint set, dropping
/// predictions whose descriptor distance exceeds the configured limit.
pub fn outdoor_correspondences(
    forest: &Forest,
    keypoints: &[Keypoint],
    cfg: &RelocalizationConfig,
) -> Result<Vec<Correspondence>> {
    if forest.mode() != ForestMode::OutdoorRgb {
        return Err(Error::InvalidInput("keypoint relocalization needs an outdoor forest".into()));
    }
    let mut out = Vec::new();
    for kp in keypoints {
        let query = Query {
            pixel: kp.pixel,
            descriptor: kp.descriptor.values(),
            frame: None,
        };
        for (t, pred) in forest_predict(forest, &query, cfg.max_leaves)?.into_iter().enumerate() {
            if pred.descriptor_distance <= cfg.max_descriptor_distance {
                out.push(Correspondence::pixel(pred.world_point, kp.pixel).with_tree(t as u16));
            }
        }
    }
    Ok(out)
}

/// Wall-clock timer; always reads zero on wasm32, which has no clock.
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Stopwatch(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn elapsed_ms(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed().as_secs_f64() * 1e3;
        #[cfg(target_arch = "wasm32")]
        return 0.0;
    }
}

fn solve(
    corr: &[Correspondence],
    mode: RansacMode,
    intrinsics: Option<&Intrinsics>,
    cfg: &RelocalizationConfig,
    start: Stopwatch,
) -> Result<RelocalizationResult> {
    let outcome = match preemptive_ransac(corr, mode, intrinsics, &cfg.ransac) {
        Ok(o) => Some(o),
        Err(Error::RelocalizationFailure { .. } | Error::InsufficientData { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(RelocalizationResult {
        pose: outcome.as_ref().map(|o| o.pose),
        inlier_count: outcome.as_ref().map_or(0, |o| o.inliers.len()),
        correspondences_used: corr.len(),
        runtime_ms: start.elapsed_ms(),
    })
}

/// Estimates the pose of an RGB-D frame. Frames that RANSAC cannot localize
/// come back with `pose: None` rather than an error.
pub fn relocalize_indoor(
    forest: &Forest,
    frame: &RgbdFrame,
    intrinsics: &Intrinsics,
    cfg: &RelocalizationConfig,
) -> Result<RelocalizationResult> {
    let start = Stopwatch::start();
    let corr = indoor_correspondences(forest, frame, intrinsics, cfg)?;
    solve(&corr, RansacMode::Kabsch3D, None, cfg, start)
}

/// Estimates the pose of an RGB image from its keypoints.
pub fn relocalize_outdoor(
    forest: &Forest,
    keypoints: &[Keypoint],
    intrinsics: &Intrinsics,
    cfg: &RelocalizationConfig,
) -> Result<RelocalizationResult> {
    let start = Stopwatch::start();
    let corr = outdoor_correspondences(forest, keypoints, cfg)?;
    solve(&corr, RansacMode::Pnp2D, Some(intrinsics), cfg, start)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceMetrics {
    /// Fraction of all frames within 5 cm and 5°, failures included.
    pub percent_correct: f64,
    /// Lower median over frames that produced a pose; `None` if none did.
    pub median_translational: Option<f64>,
    pub median_rotational: Option<f64>,
    /// `(meters, degrees)` per frame; `None` for failed frames.
    pub per_frame: Vec<Option<(f64, f64)>>,
}

pub fn is_correct(trans_m: f64, rot_deg: f64) -> bool {
    trans_m < CORRECT_TRANSLATION_M && rot_deg < CORRECT_ROTATION_DEG
}

/// Lower median: element `(n−1)/2` of the sorted values.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[(v.len() - 1) / 2])
}

pub fn evaluate_sequence(results: &[RelocalizationResult], gt: &[CameraPose]) -> Result<SequenceMetrics> {
    let estimates: Vec<Option<CameraPose>> = results.iter().map(|r| r.pose).collect();
    evaluate_poses(&estimates, gt)
}

/// [`evaluate_sequence`] on bare pose estimates.
pub fn evaluate_poses(estimates: &[Option<CameraPose>], gt: &[CameraPose]) -> Result<SequenceMetrics> {
    if estimates.len() != gt.len() {
        return Err(Error::InvalidInput(format!(
            "{} results for {} ground-truth poses",
            estimates.len(),
            gt.len()
        )));
    }
    if gt.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate an empty sequence".into()));
    }
    let per_frame: Vec<Option<(f64, f64)>> = estimates
        .iter()
        .zip(gt)
        .map(|(e, t)| e.as_ref().map(|p| pose_error(p, t)))
        .collect();
    let correct = per_frame.iter().flatten().filter(|(t, r)| is_correct(*t, *r)).count();
    let trans: Vec<f64> = per_frame.iter().flatten().map(|e| e.0).collect();
    let rot: Vec<f64> = per_frame.iter().flatten().map(|e| e.1).collect();
    Ok(SequenceMetrics {
        percent_correct: correct as f64 / gt.len() as f64,
        median_translational: lower_median(&trans),
        median_rotational: lower_median(&rot),
        per_frame,
    })
}

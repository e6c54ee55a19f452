//! The synthetic relocalization benchmark: one procedural room, rendered
//! training and test views, and helpers to train and score a forest on it.

use std::sync::Arc;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::features::{wht_descriptor, RgbdFrame};
use crate::forest::{forest_predict, Forest, ForestConfig, ForestMode, Query};
use crate::geometry::{CameraPose, Intrinsics};
use crate::pipeline::{
    evaluate_sequence, relocalize_indoor, train_indoor_forest, RelocalizationConfig, RelocalizationResult,
    SequenceMetrics,
};
use crate::synth::{default_intrinsics, SyntheticScene};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkConfig {
    pub scene_seed: u64,
    pub trajectory_seed: u64,
    pub train_frames: usize,
    pub test_frames: usize,
    /// Training pixels drawn per frame for each tree.
    pub pixels_per_frame: usize,
    pub intrinsics: Intrinsics,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            scene_seed: 0,
            trajectory_seed: 0,
            train_frames: 40,
            test_frames: 20,
            pixels_per_frame: 1000,
            intrinsics: default_intrinsics(),
        }
    }
}

/// A rendered view with its pose and per-pixel world coordinates.
#[derive(Debug, Clone)]
pub struct View {
    pub frame: Arc<RgbdFrame>,
    pub pose: CameraPose,
    pub world_coords: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub config: BenchmarkConfig,
    pub scene: SyntheticScene,
    pub train: Vec<View>,
    pub test: Vec<View>,
}

impl Benchmark {
    pub fn render(config: BenchmarkConfig) -> Result<Self> {
        let scene = SyntheticScene::new(config.scene_seed);
        let (train_poses, test_poses) =
            scene.sample_trajectory(config.train_frames, config.test_frames, config.trajectory_seed)?;
        let render = |poses: &[CameraPose]| -> Result<Vec<View>> {
            poses
                .iter()
                .map(|pose| {
                    let r = scene.render_frame(pose, &config.intrinsics)?;
                    Ok(View {
                        frame: Arc::new(r.frame),
                        pose: *pose,
                        world_coords: r.world_coords,
                    })
                })
                .collect()
        };
        let train = render(&train_poses)?;
        let test = render(&test_poses)?;
        Ok(Self {
            config,
            scene,
            train,
            test,
        })
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.config.intrinsics
    }

    pub fn train_forest(&self, forest: &ForestConfig) -> Result<Forest> {
        let frames: Vec<_> = self.train.iter().map(|v| (Arc::clone(&v.frame), v.pose)).collect();
        train_indoor_forest(&frames, self.intrinsics(), self.config.pixels_per_frame, forest)
    }

    /// Relocalizes every test view with per-frame seeds and scores the run.
    pub fn evaluate(
        &self,
        forest: &Forest,
        reloc: &RelocalizationConfig,
    ) -> Result<(Vec<RelocalizationResult>, SequenceMetrics)> {
        let results = self
            .test
            .iter()
            .enumerate()
            .map(|(i, v)| relocalize_indoor(forest, &v.frame, self.intrinsics(), &reloc.for_frame(i)))
            .collect::<Result<Vec<_>>>()?;
        let gt: Vec<_> = self.test.iter().map(|v| v.pose).collect();
        let metrics = evaluate_sequence(&results, &gt)?;
        Ok((results, metrics))
    }

    /// Fraction of per-tree world predictions within `radius` meters of the
    /// true coordinate, over `pixels_per_view` random valid pixels of every
    /// test view.
    pub fn prediction_inlier_rate(
        &self,
        forest: &Forest,
        max_leaves: usize,
        pixels_per_view: usize,
        radius: f64,
        seed: u64,
    ) -> Result<f64> {
        debug_assert_eq!(forest.mode(), ForestMode::IndoorRgbd);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut hits, mut total) = (0usize, 0usize);
        for view in &self.test {
            let valid = view.frame.valid_pixels();
            for _ in 0..pixels_per_view {
                let p = valid[rng.random_range(0..valid.len())];
                let descriptor = wht_descriptor(&view.frame, p);
                let query = Query {
                    pixel: Vector2::new(p[0] as f64, p[1] as f64),
                    descriptor: &descriptor,
                    frame: Some(&view.frame),
                };
                let truth = view.world_coords[p[1] as usize * view.frame.width() as usize + p[0] as usize];
                for pred in forest_predict(forest, &query, max_leaves)? {
                    total += 1;
                    if (pred.world_point - truth).norm() < radius {
                        hits += 1;
                    }
                }
            }
        }
        Ok(hits as f64 / total.max(1) as f64)
    }
}

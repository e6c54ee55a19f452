#![allow(dead_code)]

use std::sync::Arc;

use btrf::features::wht_descriptor;
use btrf::forest::{build_tree, ForestConfig, ForestMode, Node, Query, RegressionTree, TrainingSample};
use btrf::geometry::CameraPose;
use btrf::pipeline::harvest_indoor_samples;
use btrf::synth::{default_intrinsics, SyntheticScene};
use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DIM: usize = 64;

pub fn random_descriptor<R: Rng>(rng: &mut R) -> Vec<f64> {
    (0..DIM).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_outdoor_samples<R: Rng>(n: usize, rng: &mut R) -> Vec<TrainingSample> {
    (0..n)
        .map(|_| TrainingSample {
            pixel: Vector2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)),
            descriptor: random_descriptor(rng),
            label: Vector3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            ),
            frame: None,
        })
        .collect()
}

/// A descriptor-feature tree grown on `n` random samples with unit leaves,
/// so it has at most `n` leaves.
pub fn random_tree(seed: u64, n: usize) -> RegressionTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = random_outdoor_samples(n, &mut rng);
    let cfg = ForestConfig {
        tree_count: 1,
        min_leaf_samples: 1,
        candidates_per_node: 4,
        thresholds_per_candidate: 4,
        ..ForestConfig::default()
    };
    build_tree(&samples, ForestMode::OutdoorRgb, &cfg, &mut rng).unwrap()
}

pub fn descriptor_query(d: &[f64]) -> Query<'_> {
    Query {
        pixel: Vector2::zeros(),
        descriptor: d,
        frame: None,
    }
}

/// Minimum L2 distance from `descriptor` to any leaf's mean descriptor.
pub fn brute_force_min(tree: &RegressionTree, descriptor: &[f64]) -> f64 {
    tree.leaves()
        .map(|(_, leaf)| {
            leaf.mean_descriptor
                .iter()
                .zip(descriptor)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Root-to-leaf descent written directly against the node arena.
pub fn reference_descent(tree: &RegressionTree, query: &Query<'_>) -> usize {
    let mut id = 0;
    loop {
        match tree.node(id) {
            Node::Leaf(_) => return id,
            Node::Split(s) => {
                let r = query.response(&s.params.selector).unwrap();
                id = if r <= s.params.threshold { s.left } else { s.right };
            }
        }
    }
}

/// A handful of rendered frames with their poses.
pub fn indoor_frames(scene_seed: u64, n: usize) -> Vec<(Arc<btrf::features::RgbdFrame>, CameraPose)> {
    let scene = SyntheticScene::new(scene_seed);
    let k = default_intrinsics();
    let (poses, _) = scene.sample_trajectory(n, 1, scene_seed).unwrap();
    poses
        .iter()
        .map(|p| (Arc::new(scene.render_frame(p, &k).unwrap().frame), *p))
        .collect()
}

pub fn indoor_samples(frames: &[(Arc<btrf::features::RgbdFrame>, CameraPose)], per_frame: usize, seed: u64) -> Vec<TrainingSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = default_intrinsics();
    frames
        .iter()
        .flat_map(|(f, p)| harvest_indoor_samples(f, p, &k, per_frame, &mut rng).unwrap())
        .collect()
}

pub fn indoor_query(frame: &btrf::features::RgbdFrame, x: u32, y: u32) -> (Vector2<f64>, Vec<f64>) {
    (Vector2::new(x as f64, y as f64), wht_descriptor(frame, [x, y]))
}

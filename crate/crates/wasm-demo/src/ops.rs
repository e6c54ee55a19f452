use btrf::benchmark::{Benchmark, BenchmarkConfig};
use btrf::forest::{forest_predict, Forest, ForestConfig, Query};
use btrf::geometry::{pose_error, CameraPose};
use btrf::pipeline::{is_correct, relocalize_indoor, RelocalizationConfig};
use btrf::ransac::{preemptive_ransac, synthetic_3d_fixture, RansacConfig, RansacMode};
use btrf::features::wht_descriptor;
use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// Error (m) at which the heat map saturates.
const ERROR_SCALE: f64 = 0.5;
const INLIER_RADIUS: f64 = 0.1;

pub struct DemoState {
    pub bench: Benchmark,
    pub forest: Option<Forest>,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

impl DemoState {
    pub fn new(scene_seed: u64, train_views: usize, test_views: usize) -> Result<Self, String> {
        let bench = Benchmark::render(BenchmarkConfig {
            scene_seed,
            trajectory_seed: scene_seed,
            train_frames: train_views,
            test_frames: test_views,
            ..BenchmarkConfig::default()
        })
        .map_err(err)?;
        Ok(Self { bench, forest: None })
    }

    pub fn width(&self) -> u32 {
        self.bench.intrinsics().width
    }

    pub fn height(&self) -> u32 {
        self.bench.intrinsics().height
    }

    fn view(&self, index: usize) -> Result<&btrf::benchmark::View, String> {
        self.bench
            .test
            .get(index)
            .ok_or_else(|| format!("no test view {index}"))
    }

    pub fn view_rgba(&self, index: usize) -> Result<Vec<u8>, String> {
        let rgb = self.view(index)?.frame.rgb();
        Ok(rgb.chunks_exact(3).flat_map(|c| [c[0], c[1], c[2], 255]).collect())
    }

    pub fn depth_rgba(&self, index: usize) -> Result<Vec<u8>, String> {
        let depth = self.view(index)?.frame.depth_map();
        let max = depth.iter().cloned().fold(0.0, f64::max).max(1e-9);
        Ok(depth
            .iter()
            .flat_map(|d| {
                let v = (255.0 * (1.0 - d / max)) as u8;
                [v, v, v, 255]
            })
            .collect())
    }

    pub fn train(&mut self, trees: usize, balanced_depth_limit: u32, pixels_per_view: usize) -> Result<String, String> {
        let cfg = ForestConfig {
            tree_count: trees.max(1),
            balanced_depth_limit,
            ..ForestConfig::default()
        };
        let mut bench = self.bench.clone();
        bench.config.pixels_per_frame = pixels_per_view.max(1);
        let forest = bench.train_forest(&cfg).map_err(err)?;
        let leaves: Vec<usize> = forest.trees().iter().map(|t| t.leaf_count()).collect();
        let depths: Vec<u32> = forest.trees().iter().map(|t| t.depth()).collect();
        self.forest = Some(forest);
        Ok(json!({ "leaves": leaves, "depths": depths }).to_string())
    }

    fn forest(&self) -> Result<&Forest, String> {
        self.forest.as_ref().ok_or_else(|| "train a forest first".to_string())
    }

    /// Per-pixel error of the best tree prediction, as a heat map, plus the
    /// fraction of all per-tree predictions within 10 cm.
    pub fn error_map(&self, index: usize, n_max: usize, stride: usize) -> Result<(Vec<u8>, f64), String> {
        let forest = self.forest()?;
        let view = self.view(index)?;
        let (w, h) = (self.width() as usize, self.height() as usize);
        let mut rgba = vec![0u8; w * h * 4];
        let (mut hits, mut total) = (0usize, 0usize);
        for y in (0..h).step_by(stride) {
            for x in (0..w).step_by(stride) {
                let p = [x as u32, y as u32];
                let color = if view.frame.depth(p[0], p[1]) > 0.0 {
                    let d = wht_descriptor(&view.frame, p);
                    let q = Query {
                        pixel: Vector2::new(x as f64, y as f64),
                        descriptor: &d,
                        frame: Some(&view.frame),
                    };
                    let truth = view.world_coords[y * w + x];
                    let preds = forest_predict(forest, &q, n_max).map_err(err)?;
                    let errors: Vec<f64> = preds.iter().map(|p| (p.world_point - truth).norm()).collect();
                    total += errors.len();
                    hits += errors.iter().filter(|&&e| e < INLIER_RADIUS).count();
                    heat(errors.iter().cloned().fold(f64::INFINITY, f64::min))
                } else {
                    [0, 0, 0]
                };
                for yy in y..(y + stride).min(h) {
                    for xx in x..(x + stride).min(w) {
                        let o = (yy * w + xx) * 4;
                        rgba[o..o + 4].copy_from_slice(&[color[0], color[1], color[2], 255]);
                    }
                }
            }
        }
        Ok((rgba, hits as f64 / total.max(1) as f64))
    }

    pub fn relocalize(&self, index: usize, n_max: usize, query_budget: usize) -> Result<String, String> {
        let forest = self.forest()?;
        let view = self.view(index)?;
        let mut cfg = RelocalizationConfig::for_mode(forest.mode()).for_frame(index);
        cfg.max_leaves = n_max.max(1);
        cfg.query_budget = query_budget.max(1);
        let r = relocalize_indoor(forest, &view.frame, self.bench.intrinsics(), &cfg).map_err(err)?;
        Ok(match r.pose {
            Some(pose) => {
                let (t, a) = pose_error(&pose, &view.pose);
                json!({
                    "localized": true,
                    "trans_err_m": t,
                    "rot_err_deg": a,
                    "correct": is_correct(t, a),
                    "inliers": r.inlier_count,
                    "correspondences": r.correspondences_used,
                })
            }
            None => json!({
                "localized": false,
                "inliers": r.inlier_count,
                "correspondences": r.correspondences_used,
            }),
        }
        .to_string())
    }
}

/// Green at zero error through yellow to red at `ERROR_SCALE` and beyond.
fn heat(error: f64) -> [u8; 3] {
    let t = (error / ERROR_SCALE).clamp(0.0, 1.0);
    if t < 0.5 {
        [(510.0 * t) as u8, 200, 40]
    } else {
        [255, (200.0 * (2.0 - 2.0 * t)) as u8, 40]
    }
}

pub fn ransac_trial(count: usize, outlier_ratio: f64, noise_m: f64, seed: u64) -> Result<String, String> {
    if !(0.0..=1.0).contains(&outlier_ratio) {
        return Err("outlier ratio must lie in [0, 1]".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = CameraPose::from_axis_angle(
        Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
    );
    let outliers = (count as f64 * outlier_ratio).round() as usize;
    let corr = synthetic_3d_fixture(&truth, count - outliers, outliers, noise_m.max(0.0), &mut rng);
    let cfg = RansacConfig {
        rng_seed: seed,
        ..RansacConfig::default()
    };
    Ok(match preemptive_ransac(&corr, RansacMode::Kabsch3D, None, &cfg) {
        Ok(out) => {
            let (t, a) = pose_error(&out.pose, &truth);
            let true_inliers = out.inliers.iter().filter(|&&i| i < count - outliers).count();
            json!({
                "localized": true,
                "trans_err_m": t,
                "rot_err_deg": a,
                "inliers": out.inliers.len(),
                "true_inliers_found": true_inliers,
                "planted_inliers": count - outliers,
            })
        }
        Err(e) => json!({ "localized": false, "reason": e.to_string() }),
    }
    .to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ransac_trial_reports() {
        let v: serde_json::Value = serde_json::from_str(&ransac_trial(200, 0.3, 0.0, 1).unwrap()).unwrap();
        assert_eq!(v["localized"], true);
        assert!(v["trans_err_m"].as_f64().unwrap() < 1e-6);
        let v: serde_json::Value = serde_json::from_str(&ransac_trial(5, 1.0, 0.0, 1).unwrap()).unwrap();
        assert_eq!(v["localized"], false);
        assert!(ransac_trial(10, 1.5, 0.0, 1).is_err());
    }

    #[test]
    fn demo_flow() {
        let mut demo = DemoState::new(1, 8, 2).unwrap();
        let n = (demo.width() * demo.height() * 4) as usize;
        assert_eq!(demo.view_rgba(0).unwrap().len(), n);
        assert_eq!(demo.depth_rgba(1).unwrap().len(), n);
        assert!(demo.view_rgba(2).is_err());
        assert!(demo.error_map(0, 1, 8).is_err());
        demo.train(1, 6, 400).unwrap();
        let (map, rate1) = demo.error_map(0, 1, 8).unwrap();
        assert_eq!(map.len(), n);
        let (_, rate16) = demo.error_map(0, 16, 8).unwrap();
        assert!((0.0..=1.0).contains(&rate1) && (0.0..=1.0).contains(&rate16));
        let v: serde_json::Value = serde_json::from_str(&demo.relocalize(0, 16, 500).unwrap()).unwrap();
        assert!(v["correspondences"].as_u64().unwrap() == 500);
    }
}

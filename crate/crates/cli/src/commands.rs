//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use btrf::dataset::{Dataset, DatasetWriter, Split};
use btrf::forest::{read_forest, write_forest, Forest, ForestMode};
use btrf::geometry::{CameraPose, Intrinsics};
use btrf::pipeline::{
    associate_sfm_points, evaluate_poses, is_correct, relocalize_indoor, relocalize_outdoor, train_indoor_forest,
    train_outdoor_forest, RelocalizationResult,
};
use btrf::synth::{LandmarkScene, SyntheticScene};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{mode_label, RunConfig};
use crate::error::{CliError, CliResult};
use crate::report::{budget_path, render_frames, render_summary, sibling, FrameRow, SummaryRow};

fn required<'a>(value: &'a Option<PathBuf>, key: &str) -> CliResult<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("`{key}` is not set (config file or command-line flag)")))
}

fn existing<'a>(value: &'a Option<PathBuf>, key: &str) -> CliResult<&'a Path> {
    let path = required(value, key)?;
    if !path.exists() {
        return Err(CliError::Usage(format!("`{key}` path {} does not exist", path.display())));
    }
    Ok(path)
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| btrf::Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| {
        CliError::Data(btrf::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

/// Writes a synthetic dataset in the standard layout.
pub fn synth(cfg: &RunConfig) -> CliResult<PathBuf> {
    let out = required(&cfg.output, "output")?;
    let s = &cfg.synth;
    let k = Intrinsics::centered(s.focal, s.width, s.height)?;
    let scene = SyntheticScene::new(s.scene_seed);
    let (train, test) = scene.sample_trajectory(s.train_frames, s.test_frames, s.trajectory_seed)?;
    let writer = DatasetWriter::create(out, &k)?;
    match s.mode {
        ForestMode::IndoorRgbd => {
            for (split, poses) in [(Split::Train, &train), (Split::Test, &test)] {
                for (i, pose) in poses.iter().enumerate() {
                    writer.write_rgbd_frame(split, i, &scene.render_frame(pose, &k)?.frame, pose)?;
                }
            }
        }
        ForestMode::OutdoorRgb => {
            let landmarks = LandmarkScene::new(&scene, s.landmarks, s.scene_seed);
            let mut rng = ChaCha8Rng::seed_from_u64(s.trajectory_seed);
            for (split, poses) in [(Split::Train, &train), (Split::Test, &test)] {
                for (i, pose) in poses.iter().enumerate() {
                    let kps = landmarks.observe(pose, &k, s.descriptor_noise, &mut rng)?;
                    writer.write_keypoint_frame(split, i, &kps, pose)?;
                }
            }
            writer.write_points3d(&landmarks.points)?;
        }
    }
    Ok(out.to_path_buf())
}

/// Trains a forest on the training split; writes the model and
/// `<model>.manifest.json`.
pub fn train(cfg: &RunConfig) -> CliResult<Forest> {
    let ds = Dataset::open(existing(&cfg.dataset, "dataset")?)?;
    let model = required(&cfg.model, "model")?;
    let frames: Vec<usize> = ds.frames(Split::Train).iter().step_by(cfg.train_stride).copied().collect();
    if frames.is_empty() {
        return Err(btrf::Error::InvalidInput("the training split is empty".into()).into());
    }
    let k = *ds.intrinsics();
    let forest = match ds.mode() {
        ForestMode::IndoorRgbd => {
            let loaded = frames
                .iter()
                .map(|&i| Ok((Arc::new(ds.load_rgbd(Split::Train, i)?), ds.load_pose(Split::Train, i)?)))
                .collect::<btrf::Result<Vec<_>>>()?;
            train_indoor_forest(&loaded, &k, cfg.pixels_per_frame, &cfg.forest)?
        }
        ForestMode::OutdoorRgb => {
            let points = ds.load_points3d()?;
            let mut samples = Vec::new();
            for &i in &frames {
                let kps = ds.load_keypoints(Split::Train, i)?;
                let pose = ds.load_pose(Split::Train, i)?;
                samples.extend(associate_sfm_points(&kps, &points, &pose, &k));
            }
            train_outdoor_forest(samples, &cfg.forest)?
        }
    };
    write_forest(model, &forest)?;
    write_file(&sibling(model, ".manifest", "json"), &manifest(cfg, &ds, &frames, &forest))?;
    Ok(forest)
}

fn manifest(cfg: &RunConfig, ds: &Dataset, frames: &[usize], forest: &Forest) -> String {
    let trees: Vec<_> = forest
        .trees()
        .iter()
        .enumerate()
        .map(|(t, tree)| {
            let stats = tree.stats();
            json!({
                "tree": t,
                "seed": cfg.forest.rng_seed.wrapping_add(t as u64),
                "node_count": stats.node_count,
                "leaf_count": stats.leaf_count,
                "depth": tree.depth(),
                "leaf_depth_histogram": stats.leaf_depths,
                "objectives_per_level": stats.objectives_per_level.iter().enumerate().map(|(d, [b, v])| json!({
                    "depth": d, "balanced": b, "variance": v,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let value = json!({
        "mode": mode_label(forest.mode()),
        "dataset": ds.root().display().to_string(),
        "training_frames": frames,
        "pixels_per_frame": cfg.pixels_per_frame,
        "config": cfg.render(),
        "trees": trees,
    });
    serde_json::to_string_pretty(&value).expect("manifest serializes") + "\n"
}

/// Estimates test-split poses for every leaf budget in `budgets`, returning
/// `[budget][frame]`. Reads images and keypoints only, never poses.
pub fn estimate(ds: &Dataset, forest: &Forest, cfg: &RunConfig, budgets: &[usize]) -> CliResult<Vec<Vec<RelocalizationResult>>> {
    if forest.mode() != ds.mode() {
        return Err(btrf::Error::InvalidInput(format!(
            "model is {} but dataset is {}",
            mode_label(forest.mode()),
            mode_label(ds.mode())
        ))
        .into());
    }
    let frames = ds.frames(Split::Test);
    if frames.is_empty() {
        return Err(btrf::Error::InvalidInput("the test split is empty".into()).into());
    }
    let k = ds.intrinsics();
    let mut out = vec![Vec::with_capacity(frames.len()); budgets.len()];
    for (n, &index) in frames.iter().enumerate() {
        match ds.mode() {
            ForestMode::IndoorRgbd => {
                let frame = ds.load_rgbd(Split::Test, index)?;
                for (b, &budget) in budgets.iter().enumerate() {
                    let rc = cfg.relocalization(forest.mode(), budget).for_frame(n);
                    out[b].push(relocalize_indoor(forest, &frame, k, &rc)?);
                }
            }
            ForestMode::OutdoorRgb => {
                let kps = ds.load_keypoints(Split::Test, index)?;
                for (b, &budget) in budgets.iter().enumerate() {
                    let rc = cfg.relocalization(forest.mode(), budget).for_frame(n);
                    out[b].push(relocalize_outdoor(forest, &kps, k, &rc)?);
                }
            }
        }
    }
    if !cfg.record_runtime {
        out.iter_mut().flatten().for_each(|r| r.runtime_ms = 0.0);
    }
    Ok(out)
}

/// Outcome of `evaluate`: one summary per budget and the per-frame rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub summaries: Vec<SummaryRow>,
    pub frames: Vec<Vec<FrameRow>>,
}

/// Scores estimates against ground truth; this is the only place test
/// poses are read.
pub fn score(
    ds: &Dataset,
    budgets: &[usize],
    estimates: &[Vec<RelocalizationResult>],
) -> CliResult<(Evaluation, Vec<CameraPose>)> {
    let indices = ds.frames(Split::Test);
    let gt = indices
        .iter()
        .map(|&i| ds.load_pose(Split::Test, i))
        .collect::<btrf::Result<Vec<_>>>()?;
    let mut eval = Evaluation {
        summaries: Vec::new(),
        frames: Vec::new(),
    };
    for (&budget, results) in budgets.iter().zip(estimates) {
        let poses: Vec<_> = results.iter().map(|r| r.pose).collect();
        let m = evaluate_poses(&poses, &gt)?;
        let rows: Vec<FrameRow> = indices
            .iter()
            .zip(results)
            .zip(&m.per_frame)
            .map(|((&frame, r), err)| FrameRow {
                n_max: budget,
                frame,
                trans_err_m: err.map(|e| e.0),
                rot_err_deg: err.map(|e| e.1),
                inliers: r.inlier_count,
                correct: err.is_some_and(|(t, a)| is_correct(t, a)),
                runtime_ms: r.runtime_ms,
            })
            .collect();
        eval.summaries.push(SummaryRow {
            n_max: budget,
            frames: rows.len(),
            percent_correct: m.percent_correct,
            median_trans_err_m: m.median_translational,
            median_rot_err_deg: m.median_rotational,
            mean_runtime_ms: results.iter().map(|r| r.runtime_ms).sum::<f64>() / results.len() as f64,
        });
        eval.frames.push(rows);
    }
    Ok((eval, gt))
}

fn pose_cells(p: &CameraPose) -> String {
    let m = p.to_matrix();
    (0..3)
        .flat_map(|r| (0..4).map(move |c| (r, c)))
        .map(|(r, c)| m[(r, c)].to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn trajectory_csv(budgets: &[usize], frames: &[usize], estimates: &[Vec<RelocalizationResult>], gt: &[CameraPose]) -> String {
    let names = |prefix: &str| {
        (0..3)
            .flat_map(|r| (0..4).map(move |c| format!("{prefix}_{r}{c}")))
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut out = format!("n_max,frame,{},{}\n", names("est"), names("gt"));
    let empty = vec![""; 12].join(",");
    for (&budget, results) in budgets.iter().zip(estimates) {
        for ((&frame, r), truth) in frames.iter().zip(results).zip(gt) {
            let est = r.pose.as_ref().map(pose_cells).unwrap_or_else(|| empty.clone());
            let _ = writeln!(out, "{budget},{frame},{est},{}", pose_cells(truth));
        }
    }
    out
}

/// Relocalizes the test split under every budget in the sweep, then scores.
///
/// With `report` set, writes per-budget frame reports, a summary and a
/// trajectory CSV of estimated and true poses next to it.
pub fn evaluate(cfg: &RunConfig) -> CliResult<Evaluation> {
    let ds = Dataset::open(existing(&cfg.dataset, "dataset")?)?;
    let forest = read_forest(existing(&cfg.model, "model")?)?;
    let estimates = estimate(&ds, &forest, cfg, &cfg.sweep)?;
    let (eval, gt) = score(&ds, &cfg.sweep, &estimates)?;
    if let Some(report) = &cfg.report {
        let single = cfg.sweep.len() == 1;
        let ext = cfg.report_format.extension();
        for (rows, summary) in eval.frames.iter().zip(&eval.summaries) {
            let path = budget_path(report, summary.n_max, single, cfg.report_format);
            write_file(&path, &render_frames(cfg.report_format, rows, summary))?;
        }
        write_file(&sibling(report, "-summary", ext), &render_summary(cfg.report_format, &eval.summaries))?;
        write_file(
            &sibling(report, "-poses", "csv"),
            &trajectory_csv(&cfg.sweep, ds.frames(Split::Test), &estimates, &gt),
        )?;
    }
    if eval.frames.iter().flatten().all(|r| r.trans_err_m.is_none()) {
        return Err(CliError::AllFramesFailed);
    }
    Ok(eval)
}

/// Estimates test-split poses with `max_leaves` and writes each to
/// `<output>/frame-XXXXXX.pose.txt`. Returns one status line per frame.
pub fn relocalize(cfg: &RunConfig) -> CliResult<String> {
    let ds = Dataset::open(existing(&cfg.dataset, "dataset")?)?;
    let forest = read_forest(existing(&cfg.model, "model")?)?;
    let results = estimate(&ds, &forest, cfg, &[cfg.forest.max_leaves])?.remove(0);
    let mut out = String::new();
    for (&index, r) in ds.frames(Split::Test).iter().zip(&results) {
        match &r.pose {
            Some(pose) => {
                if let Some(dir) = &cfg.output {
                    let path = dir.join(format!("{}.pose.txt", btrf::dataset::frame_stem(index)));
                    write_file(&path, &pose.to_string())?;
                }
                let t = pose.translation;
                let _ = writeln!(
                    out,
                    "frame {index}: {} inliers of {}, position ({:.4}, {:.4}, {:.4})",
                    r.inlier_count, r.correspondences_used, t.x, t.y, t.z
                );
            }
            None => {
                let _ = writeln!(out, "frame {index}: failed ({} correspondences)", r.correspondences_used);
            }
        }
    }
    if results.iter().all(|r| r.pose.is_none()) {
        print!("{out}");
        return Err(CliError::AllFramesFailed);
    }
    Ok(out)
}

/// Per-tree statistics with one objective-per-depth table per tree.
pub fn inspect(model: &Path) -> CliResult<String> {
    let forest = read_forest(model)?;
    let c = forest.config();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} forest: {} trees, descriptor length {}, max depth {}, balanced above depth {}, min leaf {}",
        mode_label(forest.mode()),
        forest.trees().len(),
        forest.descriptor_len(),
        c.max_depth,
        c.balanced_depth_limit,
        c.min_leaf_samples
    );
    for (t, tree) in forest.trees().iter().enumerate() {
        let s = tree.stats();
        let _ = writeln!(
            out,
            "\ntree {t}: {} nodes, {} leaves, depth {}",
            s.node_count,
            s.leaf_count,
            tree.depth()
        );
        let _ = writeln!(out, "{:>6} {:>9} {:>9} {:>7}", "depth", "balanced", "variance", "leaves");
        for d in 0..s.leaf_depths.len().max(s.objectives_per_level.len()) {
            let [b, v] = s.objectives_per_level.get(d).copied().unwrap_or([0, 0]);
            let leaves = s.leaf_depths.get(d).copied().unwrap_or(0);
            let _ = writeln!(out, "{d:>6} {b:>9} {v:>9} {leaves:>7}");
        }
    }
    Ok(out)
}

//! `key = value` run configuration with `#` comments.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use btrf::forest::{ForestConfig, ForestMode};
use btrf::pipeline::RelocalizationConfig;
use btrf::ransac::{RansacConfig, RansacMode};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    JsonLines,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Text => "txt",
            ReportFormat::Csv => "csv",
            ReportFormat::JsonLines => "jsonl",
        }
    }

    fn name(self) -> &'static str {
        match self {
            ReportFormat::Text => "text",
            ReportFormat::Csv => "csv",
            ReportFormat::JsonLines => "json-lines",
        }
    }
}

/// Settings for the `synth` subcommand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSettings {
    pub mode: ForestMode,
    pub scene_seed: u64,
    pub trajectory_seed: u64,
    pub train_frames: usize,
    pub test_frames: usize,
    pub width: u32,
    pub height: u32,
    pub focal: f64,
    /// Outdoor only.
    pub landmarks: usize,
    pub descriptor_noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub report_format: ReportFormat,
    pub forest: ForestConfig,
    pub pixels_per_frame: usize,
    pub train_stride: usize,
    pub query_budget: usize,
    pub max_descriptor_distance: f64,
    pub hypothesis_count: usize,
    pub block_size: usize,
    pub inlier_threshold_3d: f64,
    pub inlier_threshold_2d: f64,
    pub min_final_inliers_3d: usize,
    pub min_final_inliers_2d: usize,
    pub ransac_seed: u64,
    pub query_seed: u64,
    pub sweep: Vec<usize>,
    pub record_runtime: bool,
    pub synth: SynthSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        let r3 = RansacConfig::for_mode(RansacMode::Kabsch3D);
        let r2 = RansacConfig::for_mode(RansacMode::Pnp2D);
        let reloc = RelocalizationConfig::for_mode(ForestMode::IndoorRgbd);
        Self {
            dataset: None,
            model: None,
            report: None,
            output: None,
            report_format: ReportFormat::Csv,
            forest: ForestConfig::default(),
            pixels_per_frame: 5000,
            train_stride: 1,
            query_budget: reloc.query_budget,
            max_descriptor_distance: reloc.max_descriptor_distance,
            hypothesis_count: r3.hypothesis_count,
            block_size: r3.block_size,
            inlier_threshold_3d: r3.inlier_threshold_3d,
            inlier_threshold_2d: r3.inlier_threshold_2d,
            min_final_inliers_3d: r3.min_final_inliers,
            min_final_inliers_2d: r2.min_final_inliers,
            ransac_seed: 0,
            query_seed: 0,
            sweep: vec![1, 4, 16],
            record_runtime: true,
            synth: SynthSettings {
                mode: ForestMode::IndoorRgbd,
                scene_seed: 0,
                trajectory_seed: 0,
                train_frames: 40,
                test_frames: 20,
                width: 320,
                height: 240,
                focal: 300.0,
                landmarks: 4000,
                descriptor_noise: 0.02,
            },
        }
    }
}

fn mode_name(m: ForestMode) -> &'static str {
    match m {
        ForestMode::IndoorRgbd => "indoor",
        ForestMode::OutdoorRgb => "outdoor",
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("`{key}`: cannot parse `{value}`: {e}"))
}

fn path_or_none(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| format!("line {}: {e}", n + 1))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        match key {
            "dataset" => self.dataset = path_or_none(v),
            "model" => self.model = path_or_none(v),
            "report" => self.report = path_or_none(v),
            "output" => self.output = path_or_none(v),
            "report_format" => {
                self.report_format = match v {
                    "text" => ReportFormat::Text,
                    "csv" => ReportFormat::Csv,
                    "json-lines" => ReportFormat::JsonLines,
                    _ => return Err(format!("`report_format` must be text, csv or json-lines, got `{v}`")),
                }
            }
            "tree_count" => self.forest.tree_count = parse(key, v)?,
            "max_depth" => self.forest.max_depth = parse(key, v)?,
            "balanced_depth_limit" => self.forest.balanced_depth_limit = parse(key, v)?,
            "min_leaf_samples" => self.forest.min_leaf_samples = parse(key, v)?,
            "candidates_per_node" => self.forest.candidates_per_node = parse(key, v)?,
            "thresholds_per_candidate" => self.forest.thresholds_per_candidate = parse(key, v)?,
            "max_leaves" => self.forest.max_leaves = parse(key, v)?,
            "forest_seed" => self.forest.rng_seed = parse(key, v)?,
            "pixels_per_frame" => self.pixels_per_frame = parse(key, v)?,
            "train_stride" => self.train_stride = parse(key, v)?,
            "query_budget" => self.query_budget = parse(key, v)?,
            "max_descriptor_distance" => self.max_descriptor_distance = parse(key, v)?,
            "hypothesis_count" => self.hypothesis_count = parse(key, v)?,
            "block_size" => self.block_size = parse(key, v)?,
            "inlier_threshold_3d" => self.inlier_threshold_3d = parse(key, v)?,
            "inlier_threshold_2d" => self.inlier_threshold_2d = parse(key, v)?,
            "min_final_inliers_3d" => self.min_final_inliers_3d = parse(key, v)?,
            "min_final_inliers_2d" => self.min_final_inliers_2d = parse(key, v)?,
            "ransac_seed" => self.ransac_seed = parse(key, v)?,
            "query_seed" => self.query_seed = parse(key, v)?,
            "sweep" => {
                self.sweep = v
                    .split(',')
                    .map(|s| parse::<usize>(key, s.trim()))
                    .collect::<Result<_, _>>()?
            }
            "record_runtime" => self.record_runtime = parse(key, v)?,
            "synth_mode" => {
                self.synth.mode = match v {
                    "indoor" => ForestMode::IndoorRgbd,
                    "outdoor" => ForestMode::OutdoorRgb,
                    _ => return Err(format!("`synth_mode` must be indoor or outdoor, got `{v}`")),
                }
            }
            "scene_seed" => self.synth.scene_seed = parse(key, v)?,
            "trajectory_seed" => self.synth.trajectory_seed = parse(key, v)?,
            "train_frames" => self.synth.train_frames = parse(key, v)?,
            "test_frames" => self.synth.test_frames = parse(key, v)?,
            "width" => self.synth.width = parse(key, v)?,
            "height" => self.synth.height = parse(key, v)?,
            "focal" => self.synth.focal = parse(key, v)?,
            "landmarks" => self.synth.landmarks = parse(key, v)?,
            "descriptor_noise" => self.synth.descriptor_noise = parse(key, v)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        self.forest.validate().map_err(|e| e.to_string())?;
        self.ransac(ForestMode::IndoorRgbd).validate().map_err(|e| e.to_string())?;
        if self.sweep.is_empty() || self.sweep.contains(&0) {
            return Err("`sweep` needs one or more leaf budgets ≥ 1".into());
        }
        if self.pixels_per_frame == 0 || self.query_budget == 0 || self.train_stride == 0 {
            return Err("`pixels_per_frame`, `query_budget` and `train_stride` must be positive".into());
        }
        Ok(())
    }

    pub fn ransac(&self, mode: ForestMode) -> RansacConfig {
        RansacConfig {
            hypothesis_count: self.hypothesis_count,
            block_size: self.block_size,
            inlier_threshold_3d: self.inlier_threshold_3d,
            inlier_threshold_2d: self.inlier_threshold_2d,
            rng_seed: self.ransac_seed,
            min_final_inliers: match mode {
                ForestMode::IndoorRgbd => self.min_final_inliers_3d,
                ForestMode::OutdoorRgb => self.min_final_inliers_2d,
            },
        }
    }

    pub fn relocalization(&self, mode: ForestMode, max_leaves: usize) -> RelocalizationConfig {
        RelocalizationConfig {
            max_leaves,
            query_budget: self.query_budget,
            max_descriptor_distance: self.max_descriptor_distance,
            ransac: self.ransac(mode),
            rng_seed: self.query_seed,
        }
    }

    /// The full configuration as a config file; parsing it gives back `self`.
    pub fn render(&self) -> String {
        let f = &self.forest;
        let s = &self.synth;
        let mut out = String::new();
        let mut kv = |key: &str, value: String, comment: &str| {
            let entry = format!("{key} = {value}");
            if comment.is_empty() {
                let _ = writeln!(out, "{entry}");
            } else {
                let _ = writeln!(out, "{entry:<36}# {comment}");
            }
        };
        kv("dataset", show_path(&self.dataset), "dataset root");
        kv("model", show_path(&self.model), "model file");
        kv("report", show_path(&self.report), "evaluation report path");
        kv("output", show_path(&self.output), "synth output / relocalize pose directory");
        kv("report_format", self.report_format.name().into(), "text | csv | json-lines");
        kv("tree_count", f.tree_count.to_string(), "");
        kv("max_depth", f.max_depth.to_string(), "");
        kv("balanced_depth_limit", f.balanced_depth_limit.to_string(), "depths below this use the balanced objective");
        kv("min_leaf_samples", f.min_leaf_samples.to_string(), "");
        kv("candidates_per_node", f.candidates_per_node.to_string(), "");
        kv("thresholds_per_candidate", f.thresholds_per_candidate.to_string(), "");
        kv("max_leaves", f.max_leaves.to_string(), "backtracking leaf budget for relocalize");
        kv("forest_seed", f.rng_seed.to_string(), "tree t uses forest_seed + t");
        kv("pixels_per_frame", self.pixels_per_frame.to_string(), "indoor training pixels per frame and tree");
        kv("train_stride", self.train_stride.to_string(), "use every n-th training frame");
        kv("query_budget", self.query_budget.to_string(), "indoor query pixels per test frame");
        kv("max_descriptor_distance", self.max_descriptor_distance.to_string(), "outdoor prediction filter");
        kv("hypothesis_count", self.hypothesis_count.to_string(), "");
        kv("block_size", self.block_size.to_string(), "");
        kv("inlier_threshold_3d", self.inlier_threshold_3d.to_string(), "meters");
        kv("inlier_threshold_2d", self.inlier_threshold_2d.to_string(), "pixels");
        kv("min_final_inliers_3d", self.min_final_inliers_3d.to_string(), "");
        kv("min_final_inliers_2d", self.min_final_inliers_2d.to_string(), "");
        kv("ransac_seed", self.ransac_seed.to_string(), "frame i uses ransac_seed + i");
        kv("query_seed", self.query_seed.to_string(), "frame i uses query_seed + i");
        let sweep: Vec<String> = self.sweep.iter().map(|n| n.to_string()).collect();
        kv("sweep", sweep.join(","), "leaf budgets for evaluate");
        kv("record_runtime", self.record_runtime.to_string(), "false writes 0 so reports are reproducible");
        kv("synth_mode", mode_name(s.mode).into(), "indoor | outdoor");
        kv("scene_seed", s.scene_seed.to_string(), "");
        kv("trajectory_seed", s.trajectory_seed.to_string(), "");
        kv("train_frames", s.train_frames.to_string(), "");
        kv("test_frames", s.test_frames.to_string(), "");
        kv("width", s.width.to_string(), "");
        kv("height", s.height.to_string(), "");
        kv("focal", s.focal.to_string(), "pixels");
        kv("landmarks", s.landmarks.to_string(), "outdoor synth only");
        kv("descriptor_noise", s.descriptor_noise.to_string(), "outdoor synth only");
        out
    }
}

pub fn mode_label(m: ForestMode) -> &'static str {
    mode_name(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.render()).unwrap(), cfg);
    }

    #[test]
    fn overrides_and_comments() {
        let cfg = RunConfig::parse("# header\ntree_count = 2  # fewer\nsweep = 1, 8\n\nreport_format = json-lines\n").unwrap();
        assert_eq!(cfg.forest.tree_count, 2);
        assert_eq!(cfg.sweep, vec![1, 8]);
        assert_eq!(cfg.report_format, ReportFormat::JsonLines);
    }

    #[test]
    fn custom_values_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.dataset = Some("data/scene".into());
        cfg.synth.mode = ForestMode::OutdoorRgb;
        cfg.inlier_threshold_3d = 0.0375;
        cfg.record_runtime = false;
        assert_eq!(RunConfig::parse(&cfg.render()).unwrap(), cfg);
    }

    #[test]
    fn bad_input() {
        assert!(RunConfig::parse("nope = 1").unwrap_err().contains("unknown key"));
        assert!(RunConfig::parse("tree_count").is_err());
        assert!(RunConfig::parse("tree_count = x").is_err());
        assert!(RunConfig::parse("tree_count = 0").is_err());
        assert!(RunConfig::parse("sweep = 0").is_err());
        assert!(RunConfig::parse("balanced_depth_limit = 30").is_err());
    }
}

//! Regression forests mapping pixels to world coordinates.

mod io;
mod objective;
mod predict;
mod train;

use std::sync::Arc;

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};
use crate::features::{self, Channel, RgbdFrame, EXTERNAL_DESCRIPTOR_LEN, WHT_DESCRIPTOR_LEN};

pub use io::{decode_forest, encode_forest, read_forest, write_forest, FORMAT_VERSION, MODEL_MAGIC};
pub use objective::{balanced_objective, spatial_variance, variance_objective, Objective};
pub use predict::{evaluate_weak_learner, forest_predict, predict_backtracking, predict_greedy, Prediction};
pub use train::{build_tree, choose_split, train_forest, SplitChoice};

/// Feature family and descriptor convention of a forest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ForestMode {
    /// Pixel-comparison features for splits, WHT descriptors at leaves.
    IndoorRgbd = 0,
    /// External descriptor dimensions for splits and leaves.
    OutdoorRgb = 1,
}

impl ForestMode {
    pub fn descriptor_len(self) -> usize {
        match self {
            ForestMode::IndoorRgbd => WHT_DESCRIPTOR_LEN,
            ForestMode::OutdoorRgb => EXTERNAL_DESCRIPTOR_LEN,
        }
    }

    pub(crate) fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(ForestMode::IndoorRgbd),
            1 => Ok(ForestMode::OutdoorRgb),
            _ => Err(Error::Format(format!("unknown forest mode {v}"))),
        }
    }
}

/// The feature a split node thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureSelector {
    /// `I(p, c1) − I(p + offset / D(p), c2)`, offset in pixel·meters.
    PixelPair { offset: [f64; 2], c1: Channel, c2: Channel },
    /// One dimension of the sample descriptor.
    DescriptorDim(u32),
}

/// Split test: go left iff `response ≤ threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakLearnerParams {
    pub selector: FeatureSelector,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestConfig {
    pub tree_count: usize,
    pub max_depth: u32,
    /// Depth below which splits are scored by sample balance.
    pub balanced_depth_limit: u32,
    pub min_leaf_samples: usize,
    pub candidates_per_node: usize,
    pub thresholds_per_candidate: usize,
    /// Leaf budget for backtracking search.
    pub max_leaves: usize,
    pub rng_seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            tree_count: 5,
            max_depth: 25,
            balanced_depth_limit: 6,
            min_leaf_samples: 5,
            candidates_per_node: 64,
            thresholds_per_candidate: 16,
            max_leaves: 16,
            rng_seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidInput(format!("forest config: {m}")));
        if self.tree_count == 0 {
            return fail("tree_count must be at least 1");
        }
        if self.balanced_depth_limit > self.max_depth {
            return fail("balanced_depth_limit exceeds max_depth");
        }
        if self.max_leaves == 0 {
            return fail("max_leaves must be at least 1");
        }
        if self.min_leaf_samples == 0 {
            return fail("min_leaf_samples must be at least 1");
        }
        if self.candidates_per_node == 0 || self.thresholds_per_candidate == 0 {
            return fail("candidate and threshold counts must be at least 1");
        }
        Ok(())
    }
}

/// A labelled pixel: location, descriptor and world coordinate.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub pixel: Vector2<f64>,
    pub descriptor: Vec<f64>,
    pub label: Vector3<f64>,
    /// Source frame, needed for pixel-comparison features.
    pub frame: Option<Arc<RgbdFrame>>,
}

impl TrainingSample {
    pub fn query(&self) -> Query<'_> {
        Query {
            pixel: self.pixel,
            descriptor: &self.descriptor,
            frame: self.frame.as_deref(),
        }
    }
}

/// A test-time sample.
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub pixel: Vector2<f64>,
    pub descriptor: &'a [f64],
    pub frame: Option<&'a RgbdFrame>,
}

impl Query<'_> {
    pub(crate) fn integer_pixel(&self) -> Result<[u32; 2]> {
        let (x, y) = (self.pixel.x.round(), self.pixel.y.round());
        if !(x >= 0.0 && y >= 0.0 && x <= u32::MAX as f64 && y <= u32::MAX as f64) {
            return Err(Error::InvalidInput(format!("pixel {:?} is negative", self.pixel)));
        }
        Ok([x as u32, y as u32])
    }

    /// Raw response of a feature selector.
    pub fn response(&self, selector: &FeatureSelector) -> Result<f64> {
        match *selector {
            FeatureSelector::DescriptorDim(d) => self.descriptor.get(d as usize).copied().ok_or_else(|| {
                Error::InvalidInput(format!(
                    "descriptor dimension {d} out of range for length {}",
                    self.descriptor.len()
                ))
            }),
            FeatureSelector::PixelPair { offset, c1, c2 } => {
                let frame = self.frame.ok_or_else(|| {
                    Error::InvalidInput("pixel-comparison feature needs an RGB-D frame".into())
                })?;
                features::random_feature_response(frame, self.integer_pixel()?, offset, c1, c2)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitNode {
    pub params: WeakLearnerParams,
    pub left: usize,
    pub right: usize,
    pub depth: u32,
    pub objective: Objective,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafNode {
    pub mean_position: Vector3<f64>,
    pub mean_descriptor: Vec<f64>,
    pub sample_count: usize,
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split(SplitNode),
    Leaf(LeafNode),
}

/// Binary tree stored as a pre-order arena; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    mode: ForestMode,
    config: ForestConfig,
}

impl RegressionTree {
    pub(crate) fn from_nodes(nodes: Vec<Node>, mode: ForestMode, config: ForestConfig) -> Self {
        debug_assert!(!nodes.is_empty());
        Self { nodes, mode, config }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn mode(&self) -> ForestMode {
        self.mode
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn leaves(&self) -> impl Iterator<Item = (usize, &LeafNode)> {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match n {
            Node::Leaf(l) => Some((i, l)),
            Node::Split(_) => None,
        })
    }

    pub fn splits(&self) -> impl Iterator<Item = &SplitNode> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split(s) => Some(s),
            Node::Leaf(_) => None,
        })
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    pub fn depth(&self) -> u32 {
        self.leaves().map(|(_, l)| l.depth).max().unwrap_or(0)
    }

    pub fn stats(&self) -> TreeStats {
        let depth = self.depth() as usize;
        let mut leaf_depths = vec![0usize; depth + 1];
        for (_, leaf) in self.leaves() {
            leaf_depths[leaf.depth as usize] += 1;
        }
        let mut objectives = vec![[0usize; 2]; depth.max(1)];
        for split in self.splits() {
            objectives[split.depth as usize][split.objective as usize] += 1;
        }
        TreeStats {
            node_count: self.nodes.len(),
            leaf_count: self.leaf_count(),
            leaf_depths,
            objectives_per_level: objectives,
        }
    }
}

/// Shape summary of a trained tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeStats {
    pub node_count: usize,
    pub leaf_count: usize,
    /// `leaf_depths[d]`: number of leaves at depth `d`.
    pub leaf_depths: Vec<usize>,
    /// `[balanced, variance]` split counts per depth.
    pub objectives_per_level: Vec<[usize; 2]>,
}

/// Independently trained trees sharing a mode and descriptor length.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<RegressionTree>,
    mode: ForestMode,
    config: ForestConfig,
}

impl Forest {
    pub fn new(trees: Vec<RegressionTree>, mode: ForestMode, config: ForestConfig) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidInput("forest needs at least one tree".into()));
        }
        if trees.iter().any(|t| t.mode != mode) {
            return Err(Error::InvalidInput("trees disagree on forest mode".into()));
        }
        Ok(Self { trees, mode, config })
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn mode(&self) -> ForestMode {
        self.mode
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn descriptor_len(&self) -> usize {
        self.mode.descriptor_len()
    }
}

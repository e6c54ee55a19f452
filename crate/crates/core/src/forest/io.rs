//! Versioned binary model container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "BTRF" | version u32 | mode u8 | trees u32 | descriptor_len u32
//! | patch_size u32 | coeffs_per_channel u32 | coeff_order u8
//! | tree_count u32 | max_depth u32 | balanced_depth_limit u32 | min_leaf_samples u32
//! | candidates_per_node u32 | thresholds_per_candidate u32 | max_leaves u32 | rng_seed u64
//! then per tree: node_count u32 followed by nodes in pre-order
//!   split: 0u8 | depth u32 | objective u8 | selector | threshold f64
//!     selector: 0u8 | dx f64 | dy f64 | c1 u8 | c2 u8   (pixel pair)
//!             | 1u8 | dim u32                          (descriptor dimension)
//!   leaf:  1u8 | depth u32 | sample_count u32 | position 3×f64 | descriptor d×f64
//! ```
//!
//! Floats are stored as IEEE-754 binary64, so round trips are bit-exact.

use std::path::Path;

use nalgebra::Vector3;

use super::{
    FeatureSelector, Forest, ForestConfig, ForestMode, LeafNode, Node, Objective, RegressionTree, SplitNode,
    WeakLearnerParams,
};
use crate::error::{Error, Result};
use crate::features::{Channel, COEFFS_PER_CHANNEL, PATCH_SIZE};

pub const MODEL_MAGIC: &[u8; 4] = b"BTRF";
pub const FORMAT_VERSION: u32 = 1;
/// Coefficient ordering id: sequency zig-zag starting at DC.
const COEFF_ORDER_ZIGZAG: u8 = 0;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn count(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::InvalidInput(format!("{v} does not fit in u32")))?;
        self.u32(v);
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!("model truncated at byte {}", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn encode_forest(forest: &Forest) -> Result<Vec<u8>> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MODEL_MAGIC);
    w.u32(FORMAT_VERSION);
    w.u8(forest.mode() as u8);
    w.count(forest.trees().len())?;
    w.count(forest.descriptor_len())?;
    w.count(PATCH_SIZE)?;
    w.count(COEFFS_PER_CHANNEL)?;
    w.u8(COEFF_ORDER_ZIGZAG);
    let c = forest.config();
    w.count(c.tree_count)?;
    w.u32(c.max_depth);
    w.u32(c.balanced_depth_limit);
    w.count(c.min_leaf_samples)?;
    w.count(c.candidates_per_node)?;
    w.count(c.thresholds_per_candidate)?;
    w.count(c.max_leaves)?;
    w.u64(c.rng_seed);

    for tree in forest.trees() {
        w.count(tree.nodes().len())?;
        write_node(&mut w, tree, 0)?;
    }
    Ok(w.0)
}

fn write_node(w: &mut Writer, tree: &RegressionTree, id: usize) -> Result<()> {
    match tree.node(id) {
        Node::Split(s) => {
            w.u8(0);
            w.u32(s.depth);
            w.u8(s.objective as u8);
            match s.params.selector {
                FeatureSelector::PixelPair { offset, c1, c2 } => {
                    w.u8(0);
                    w.f64(offset[0]);
                    w.f64(offset[1]);
                    w.u8(c1 as u8);
                    w.u8(c2 as u8);
                }
                FeatureSelector::DescriptorDim(d) => {
                    w.u8(1);
                    w.u32(d);
                }
            }
            w.f64(s.params.threshold);
            write_node(w, tree, s.left)?;
            write_node(w, tree, s.right)
        }
        Node::Leaf(l) => {
            w.u8(1);
            w.u32(l.depth);
            w.count(l.sample_count)?;
            for v in l.mean_position.iter() {
                w.f64(*v);
            }
            for v in &l.mean_descriptor {
                w.f64(*v);
            }
            Ok(())
        }
    }
}

pub fn decode_forest(bytes: &[u8]) -> Result<Forest> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MODEL_MAGIC {
        return Err(Error::Format("not a BTRF model (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let mode = ForestMode::from_u8(r.u8()?)?;
    let trees = r.u32()? as usize;
    let descriptor_len = r.u32()? as usize;
    if descriptor_len != mode.descriptor_len() {
        return Err(Error::Format(format!(
            "descriptor length {descriptor_len} does not match {mode:?}"
        )));
    }
    let (patch, coeffs, order) = (r.u32()?, r.u32()?, r.u8()?);
    if (patch as usize, coeffs as usize, order) != (PATCH_SIZE, COEFFS_PER_CHANNEL, COEFF_ORDER_ZIGZAG) {
        return Err(Error::Format(format!(
            "descriptor convention (patch {patch}, {coeffs} coefficients, order {order}) is not supported"
        )));
    }
    let config = ForestConfig {
        tree_count: r.u32()? as usize,
        max_depth: r.u32()?,
        balanced_depth_limit: r.u32()?,
        min_leaf_samples: r.u32()? as usize,
        candidates_per_node: r.u32()? as usize,
        thresholds_per_candidate: r.u32()? as usize,
        max_leaves: r.u32()? as usize,
        rng_seed: r.u64()?,
    };
    config
        .validate()
        .map_err(|e| Error::Format(format!("stored config: {e}")))?;

    let mut out = Vec::with_capacity(trees);
    for t in 0..trees {
        let count = r.u32()? as usize;
        let mut nodes = Vec::with_capacity(count.min(1 << 20));
        read_node(&mut r, &mut nodes, 0, descriptor_len)?;
        if nodes.len() != count {
            return Err(Error::Format(format!(
                "tree {t}: header says {count} nodes, stream has {}",
                nodes.len()
            )));
        }
        out.push(RegressionTree::from_nodes(nodes, mode, config));
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Forest::new(out, mode, config)
}

fn read_node(r: &mut Reader<'_>, nodes: &mut Vec<Node>, expected_depth: u32, d: usize) -> Result<usize> {
    let id = nodes.len();
    let tag = r.u8()?;
    let depth = r.u32()?;
    if depth != expected_depth {
        return Err(Error::Format(format!("node {id}: depth {depth}, expected {expected_depth}")));
    }
    match tag {
        0 => {
            let objective = Objective::from_u8(r.u8()?)?;
            let selector = match r.u8()? {
                0 => FeatureSelector::PixelPair {
                    offset: [r.f64()?, r.f64()?],
                    c1: Channel::from_index(r.u8()?)?,
                    c2: Channel::from_index(r.u8()?)?,
                },
                1 => {
                    let dim = r.u32()?;
                    if dim as usize >= d {
                        return Err(Error::Format(format!("node {id}: dimension {dim} out of range")));
                    }
                    FeatureSelector::DescriptorDim(dim)
                }
                other => return Err(Error::Format(format!("node {id}: unknown selector {other}"))),
            };
            let threshold = r.f64()?;
            if !threshold.is_finite() {
                return Err(Error::Format(format!("node {id}: non-finite threshold")));
            }
            // Placeholder until both children are read.
            nodes.push(Node::Leaf(LeafNode {
                mean_position: Vector3::zeros(),
                mean_descriptor: Vec::new(),
                sample_count: 0,
                depth,
            }));
            let left = read_node(r, nodes, depth + 1, d)?;
            let right = read_node(r, nodes, depth + 1, d)?;
            nodes[id] = Node::Split(SplitNode {
                params: WeakLearnerParams { selector, threshold },
                left,
                right,
                depth,
                objective,
            });
        }
        1 => {
            let sample_count = r.u32()? as usize;
            let mean_position = Vector3::new(r.f64()?, r.f64()?, r.f64()?);
            let mean_descriptor = (0..d).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            nodes.push(Node::Leaf(LeafNode {
                mean_position,
                mean_descriptor,
                sample_count,
                depth,
            }));
        }
        other => return Err(Error::Format(format!("node {id}: unknown node tag {other}"))),
    }
    Ok(id)
}

pub fn write_forest(path: impl AsRef<Path>, forest: &Forest) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_forest(forest)?).map_err(|e| Error::io(path, e))
}

pub fn read_forest(path: impl AsRef<Path>) -> Result<Forest> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_forest(&bytes).map_err(|e| Error::file(path, e.to_string()))
}

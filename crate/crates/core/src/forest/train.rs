//! Greedy top-down tree induction.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    FeatureSelector, Forest, ForestConfig, ForestMode, LeafNode, Node, Objective, RegressionTree, SplitNode,
    TrainingSample, WeakLearnerParams,
};
use crate::error::{Error, Result};
use crate::features::{offset_pixel, Channel, RgbdFrame, RANDOM_OFFSET_RANGE};

/// A selected split and the resulting partition (indices into the input).
#[derive(Debug, Clone, PartialEq)]
pub struct SplitChoice {
    pub params: WeakLearnerParams,
    pub objective: Objective,
    pub score: f64,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

/// Per-sample response evaluation with the frame lookups resolved up front.
enum Responder<'a> {
    Pixels(Vec<PixelRef<'a>>),
    Descriptors(&'a [TrainingSample]),
}

struct PixelRef<'a> {
    frame: &'a RgbdFrame,
    pixel: [u32; 2],
    depth: f64,
}

impl<'a> Responder<'a> {
    fn new(samples: &'a [TrainingSample], mode: ForestMode) -> Result<Self> {
        let len = mode.descriptor_len();
        if let Some(bad) = samples.iter().find(|s| s.descriptor.len() != len) {
            return Err(Error::InvalidInput(format!(
                "descriptor length {} does not match {mode:?} ({len})",
                bad.descriptor.len()
            )));
        }
        if let Some(bad) = samples.iter().find(|s| !s.label.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidInput(format!("non-finite label {:?}", bad.label)));
        }
        match mode {
            ForestMode::OutdoorRgb => Ok(Responder::Descriptors(samples)),
            ForestMode::IndoorRgbd => samples
                .iter()
                .map(|s| {
                    let frame = s.frame.as_deref().ok_or_else(|| {
                        Error::InvalidInput("indoor training sample without a frame".into())
                    })?;
                    let pixel = s.query().integer_pixel()?;
                    if !frame.contains(pixel[0] as i64, pixel[1] as i64) {
                        return Err(Error::InvalidInput(format!("pixel {pixel:?} outside its frame")));
                    }
                    let depth = frame.depth(pixel[0], pixel[1]);
                    if !(depth > 0.0) {
                        return Err(Error::InvalidDepth {
                            x: pixel[0] as i64,
                            y: pixel[1] as i64,
                        });
                    }
                    Ok(PixelRef { frame, pixel, depth })
                })
                .collect::<Result<Vec<_>>>()
                .map(Responder::Pixels),
        }
    }

    #[inline]
    fn response(&self, i: usize, selector: &FeatureSelector) -> f64 {
        match (self, selector) {
            (Responder::Descriptors(s), FeatureSelector::DescriptorDim(d)) => s[i].descriptor[*d as usize],
            (Responder::Pixels(p), FeatureSelector::PixelPair { offset, c1, c2 }) => {
                let r = &p[i];
                let [qx, qy] = offset_pixel(r.frame, r.pixel, *offset, r.depth);
                r.frame.color(r.pixel[0], r.pixel[1], *c1) as f64 - r.frame.color(qx, qy, *c2) as f64
            }
            _ => unreachable!("selector family is fixed by the forest mode"),
        }
    }
}

fn random_selector<R: Rng>(mode: ForestMode, rng: &mut R) -> FeatureSelector {
    match mode {
        ForestMode::IndoorRgbd => FeatureSelector::PixelPair {
            offset: [
                rng.random_range(-RANDOM_OFFSET_RANGE..=RANDOM_OFFSET_RANGE),
                rng.random_range(-RANDOM_OFFSET_RANGE..=RANDOM_OFFSET_RANGE),
            ],
            c1: Channel::ALL[rng.random_range(0..3)],
            c2: Channel::ALL[rng.random_range(0..3)],
        },
        ForestMode::OutdoorRgb => FeatureSelector::DescriptorDim(rng.random_range(0..mode.descriptor_len() as u32)),
    }
}

#[derive(Clone, Copy, Default)]
struct Moments {
    count: usize,
    sum: Vector3<f64>,
    sum_sq: f64,
}

impl Moments {
    fn add(&mut self, other: &Moments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    /// Sum of squared deviations from the mean.
    fn scatter(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum_sq - self.sum.norm_squared() / self.count as f64
        }
    }
}

struct Trainer<'a, R> {
    samples: &'a [TrainingSample],
    responder: Responder<'a>,
    mode: ForestMode,
    config: &'a ForestConfig,
    rng: &'a mut R,
    responses: Vec<f64>,
}

impl<R: Rng> Trainer<'_, R> {
    fn choose(&mut self, indices: &[usize], depth: u32) -> Option<SplitChoice> {
        let n = indices.len();
        let objective = Objective::for_depth(depth, self.config.balanced_depth_limit);
        let min_side = self.config.min_leaf_samples;

        // Labels centered on the node mean keep the one-pass scatter accurate.
        let centered: Vec<Vector3<f64>> = if objective == Objective::Variance {
            let mean = indices.iter().map(|&i| self.samples[i].label).sum::<Vector3<f64>>() / n as f64;
            indices.iter().map(|&i| self.samples[i].label - mean).collect()
        } else {
            Vec::new()
        };

        let m = self.config.thresholds_per_candidate;
        let mut best: Option<(f64, WeakLearnerParams)> = None;
        let mut thresholds = vec![0.0; m];
        let mut order: Vec<usize> = (0..m).collect();
        let mut bins = vec![Moments::default(); m + 1];
        let mut scores = vec![0.0; m];

        for _ in 0..self.config.candidates_per_node {
            let selector = random_selector(self.mode, self.rng);
            self.responses.clear();
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in indices {
                let r = self.responder.response(i, &selector);
                lo = lo.min(r);
                hi = hi.max(r);
                self.responses.push(r);
            }
            if !(hi > lo) {
                continue;
            }
            for t in thresholds.iter_mut() {
                *t = self.rng.random_range(lo..hi);
            }
            order.sort_by(|&a, &b| thresholds[a].total_cmp(&thresholds[b]));
            let sorted: Vec<f64> = order.iter().map(|&j| thresholds[j]).collect();

            bins.iter_mut().for_each(|b| *b = Moments::default());
            for (k, &r) in self.responses.iter().enumerate() {
                // Left of every sorted threshold from position `b` on.
                let b = sorted.partition_point(|&t| t < r);
                let bin = &mut bins[b];
                bin.count += 1;
                if objective == Objective::Variance {
                    bin.sum += centered[k];
                    bin.sum_sq += centered[k].norm_squared();
                }
            }

            let mut total = Moments::default();
            for b in &bins {
                total.add(b);
            }
            let mut left = Moments::default();
            for (pos, &j) in order.iter().enumerate() {
                left.add(&bins[pos]);
                let nl = left.count;
                let nr = n - nl;
                scores[j] = if nl < min_side || nr < min_side {
                    f64::INFINITY
                } else {
                    match objective {
                        Objective::Balanced => nl.abs_diff(nr) as f64 / n as f64,
                        Objective::Variance => {
                            let right = Moments {
                                count: nr,
                                sum: total.sum - left.sum,
                                sum_sq: total.sum_sq - left.sum_sq,
                            };
                            (left.scatter() + right.scatter()) / n as f64
                        }
                    }
                };
            }
            // Generation order with strict improvement: first minimum wins.
            for (j, &score) in scores.iter().enumerate() {
                if score.is_finite() && best.as_ref().is_none_or(|(b, _)| score < *b) {
                    best = Some((
                        score,
                        WeakLearnerParams {
                            selector,
                            threshold: thresholds[j],
                        },
                    ));
                }
            }
        }

        let (score, params) = best?;
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for &i in indices {
            if self.responder.response(i, &params.selector) <= params.threshold {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        Some(SplitChoice {
            params,
            objective,
            score,
            left,
            right,
        })
    }

    fn grow(&mut self, nodes: &mut Vec<Node>, indices: Vec<usize>, depth: u32) -> usize {
        let id = nodes.len();
        nodes.push(Node::Leaf(LeafNode {
            mean_position: Vector3::zeros(),
            mean_descriptor: Vec::new(),
            sample_count: 0,
            depth,
        }));
        if depth < self.config.max_depth && indices.len() >= 2 * self.config.min_leaf_samples {
            if let Some(choice) = self.choose(&indices, depth) {
                let left = self.grow(nodes, choice.left, depth + 1);
                let right = self.grow(nodes, choice.right, depth + 1);
                nodes[id] = Node::Split(SplitNode {
                    params: choice.params,
                    left,
                    right,
                    depth,
                    objective: choice.objective,
                });
                return id;
            }
        }
        nodes[id] = Node::Leaf(self.leaf(&indices, depth));
        id
    }

    fn leaf(&self, indices: &[usize], depth: u32) -> LeafNode {
        let n = indices.len() as f64;
        let mut position = Vector3::zeros();
        let mut descriptor = vec![0.0; self.mode.descriptor_len()];
        for &i in indices {
            let s = &self.samples[i];
            position += s.label;
            for (d, v) in descriptor.iter_mut().zip(&s.descriptor) {
                *d += v;
            }
        }
        descriptor.iter_mut().for_each(|d| *d /= n);
        LeafNode {
            mean_position: position / n,
            mean_descriptor: descriptor,
            sample_count: indices.len(),
            depth,
        }
    }
}

/// Picks the best of `candidates_per_node × thresholds_per_candidate` random
/// splits, scored by the balanced objective above `balanced_depth_limit` and
/// by spatial variance below. Both children must keep at least
/// `min_leaf_samples` samples. Returns `None` when no candidate qualifies.
pub fn choose_split<R: Rng>(
    samples: &[TrainingSample],
    depth: u32,
    mode: ForestMode,
    config: &ForestConfig,
    rng: &mut R,
) -> Result<Option<SplitChoice>> {
    config.validate()?;
    if samples.len() < 2 * config.min_leaf_samples {
        return Err(Error::InvalidInput(format!(
            "{} samples cannot be split into two leaves of {}",
            samples.len(),
            config.min_leaf_samples
        )));
    }
    let mut trainer = Trainer {
        samples,
        responder: Responder::new(samples, mode)?,
        mode,
        config,
        rng,
        responses: Vec::with_capacity(samples.len()),
    };
    let indices: Vec<usize> = (0..samples.len()).collect();
    Ok(trainer.choose(&indices, depth))
}

/// Grows one tree until `max_depth`, too few samples to split, or no
/// qualifying split.
pub fn build_tree<R: Rng>(
    samples: &[TrainingSample],
    mode: ForestMode,
    config: &ForestConfig,
    rng: &mut R,
) -> Result<RegressionTree> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidInput("cannot build a tree from zero samples".into()));
    }
    let mut trainer = Trainer {
        samples,
        responder: Responder::new(samples, mode)?,
        mode,
        config,
        rng,
        responses: Vec::with_capacity(samples.len()),
    };
    let mut nodes = Vec::new();
    trainer.grow(&mut nodes, (0..samples.len()).collect(), 0);
    Ok(RegressionTree::from_nodes(nodes, mode, *config))
}

/// Trains tree `t` on `per_tree_samples[t]` with seed `rng_seed + t`.
pub fn train_forest(per_tree_samples: &[Vec<TrainingSample>], mode: ForestMode, config: &ForestConfig) -> Result<Forest> {
    config.validate()?;
    if per_tree_samples.len() != config.tree_count {
        return Err(Error::InvalidInput(format!(
            "{} sample lists for {} trees",
            per_tree_samples.len(),
            config.tree_count
        )));
    }
    let len = mode.descriptor_len();
    for (t, list) in per_tree_samples.iter().enumerate() {
        if list.is_empty() {
            return Err(Error::InvalidInput(format!("tree {t} has no samples")));
        }
        if list.iter().any(|s| s.descriptor.len() != len) {
            return Err(Error::InvalidInput(format!(
                "tree {t} has descriptors whose length differs from {len}"
            )));
        }
    }
    let build = |(t, samples): (usize, &Vec<TrainingSample>)| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed.wrapping_add(t as u64));
        build_tree(samples, mode, config, &mut rng)
    };
    #[cfg(feature = "parallel")]
    let trees = {
        use rayon::prelude::*;
        per_tree_samples.par_iter().enumerate().map(build).collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let trees = per_tree_samples.iter().enumerate().map(build).collect::<Result<Vec<_>>>()?;
    Forest::new(trees, mode, *config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{predict_greedy, variance_objective};
    use nalgebra::Vector2;

    fn outdoor_sample(descriptor: Vec<f64>, label: Vector3<f64>) -> TrainingSample {
        let mut d = descriptor;
        d.resize(64, 0.0);
        TrainingSample {
            pixel: Vector2::zeros(),
            descriptor: d,
            label,
            frame: None,
        }
    }

    fn two_clusters(n: usize) -> Vec<TrainingSample> {
        (0..n)
            .map(|i| {
                let side = (i % 2) as f64;
                let jitter = (i as f64 * 0.37).sin() * 0.01;
                outdoor_sample(
                    vec![side, jitter],
                    Vector3::new(10.0 * side + jitter, 1.0, -2.0 * side),
                )
            })
            .collect()
    }

    fn cfg() -> ForestConfig {
        ForestConfig {
            tree_count: 1,
            min_leaf_samples: 5,
            // Most descriptor dimensions are constant in these fixtures; a
            // large budget makes sure the informative ones get drawn.
            candidates_per_node: 1000,
            ..ForestConfig::default()
        }
    }

    /// Exhaustive minimum of the variance objective over every descriptor
    /// dimension and every cut between consecutive distinct values.
    fn brute_force_min_variance(samples: &[TrainingSample], min_side: usize) -> f64 {
        let mut best = f64::INFINITY;
        for d in 0..64 {
            let mut values: Vec<f64> = samples.iter().map(|s| s.descriptor[d]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for cut in values.windows(2) {
                let t = cut[0];
                let (l, r): (Vec<_>, Vec<_>) = samples.iter().partition(|s| s.descriptor[d] <= t);
                if l.len() < min_side || r.len() < min_side {
                    continue;
                }
                let l: Vec<_> = l.iter().map(|s| s.label).collect();
                let r: Vec<_> = r.iter().map(|s| s.label).collect();
                best = best.min(variance_objective(&l, &r).unwrap());
            }
        }
        best
    }

    #[test]
    fn separates_clusters_with_variance_objective() {
        let samples = two_clusters(40);
        let config = ForestConfig {
            balanced_depth_limit: 0,
            ..cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let choice = choose_split(&samples, 0, ForestMode::OutdoorRgb, &config, &mut rng)
            .unwrap()
            .unwrap();
        assert_eq!(choice.objective, Objective::Variance);
        let l: Vec<_> = choice.left.iter().map(|&i| samples[i].label).collect();
        let r: Vec<_> = choice.right.iter().map(|&i| samples[i].label).collect();
        let achieved = variance_objective(&l, &r).unwrap();
        let oracle = brute_force_min_variance(&samples, 5);
        assert!((achieved - oracle).abs() < 1e-12, "{achieved} vs {oracle}");
        // Within-cluster jitter only.
        assert!(achieved < 1e-3);
        assert_eq!(choice.params.selector, FeatureSelector::DescriptorDim(0));
    }

    #[test]
    fn balanced_objective_prefers_even_split() {
        // Dimension 0 splits 40/60, dimension 1 splits 50/50, the rest are constant.
        let samples: Vec<_> = (0..100)
            .map(|i| {
                outdoor_sample(
                    vec![(i >= 40) as u8 as f64, (i % 2) as f64],
                    Vector3::new(i as f64, 0.0, 0.0),
                )
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let choice = choose_split(&samples, 0, ForestMode::OutdoorRgb, &cfg(), &mut rng)
            .unwrap()
            .unwrap();
        assert_eq!(choice.objective, Objective::Balanced);
        assert_eq!(choice.params.selector, FeatureSelector::DescriptorDim(1));
        assert_eq!(choice.score, 0.0);
        assert_eq!((choice.left.len(), choice.right.len()), (50, 50));
    }

    #[test]
    fn identical_samples_do_not_split() {
        let samples: Vec<_> = (0..20)
            .map(|_| outdoor_sample(vec![0.5; 64], Vector3::new(1.0, 2.0, 3.0)))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(choose_split(&samples, 0, ForestMode::OutdoorRgb, &cfg(), &mut rng)
            .unwrap()
            .is_none());
        let tree = build_tree(&samples, ForestMode::OutdoorRgb, &cfg(), &mut rng).unwrap();
        assert_eq!(tree.nodes().len(), 1);
    }

    #[test]
    fn single_sample_tree() {
        let s = outdoor_sample(vec![0.25; 64], Vector3::new(4.0, 5.0, 6.0));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tree = build_tree(&[s.clone()], ForestMode::OutdoorRgb, &cfg(), &mut rng).unwrap();
        match tree.node(0) {
            Node::Leaf(leaf) => {
                assert_eq!(leaf.mean_position, s.label);
                assert_eq!(leaf.mean_descriptor, s.descriptor);
                assert_eq!(leaf.sample_count, 1);
            }
            Node::Split(_) => panic!("expected a leaf"),
        }
    }

    #[test]
    fn two_cluster_tree_has_centroid_leaves() {
        // Exactly two distinct descriptors, so only one split is possible.
        let samples: Vec<_> = (0..30)
            .map(|i| {
                let side = (i % 2) as f64;
                outdoor_sample(vec![side], Vector3::new(side * 5.0 + (i as f64) * 0.01, 0.0, 0.0))
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tree = build_tree(&samples, ForestMode::OutdoorRgb, &ForestConfig { max_depth: 3, balanced_depth_limit: 1, ..cfg() }, &mut rng).unwrap();
        assert_eq!(tree.leaf_count(), 2);
        for (_, leaf) in tree.leaves() {
            let side = leaf.mean_descriptor[0];
            let members: Vec<_> = samples.iter().filter(|s| s.descriptor[0] == side).collect();
            let centroid = members.iter().map(|s| s.label).sum::<Vector3<f64>>() / members.len() as f64;
            assert!((leaf.mean_position - centroid).norm() <= 1e-9 * centroid.norm().max(1.0));
        }
    }

    #[test]
    fn overfit_tree_returns_training_labels() {
        let samples: Vec<_> = (0..64)
            .map(|i| outdoor_sample(vec![i as f64, (i * 7 % 64) as f64], Vector3::new(i as f64, 0.0, 1.0)))
            .collect();
        let config = ForestConfig {
            min_leaf_samples: 1,
            max_depth: 25,
            ..cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let tree = build_tree(&samples, ForestMode::OutdoorRgb, &config, &mut rng).unwrap();
        for s in &samples {
            let p = predict_greedy(&tree, &s.query()).unwrap();
            assert_eq!(p.world_point, s.label);
            assert_eq!(p.descriptor_distance, 0.0);
        }
    }

    #[test]
    fn forest_rejects_mismatched_inputs() {
        let good = two_clusters(20);
        let mut bad = two_clusters(20);
        bad[3].descriptor.pop();
        let config = ForestConfig { tree_count: 2, ..cfg() };
        assert!(train_forest(&[good.clone(), bad], ForestMode::OutdoorRgb, &config).is_err());
        assert!(train_forest(&[good.clone()], ForestMode::OutdoorRgb, &config).is_err());
        assert!(train_forest(&[good, Vec::new()], ForestMode::OutdoorRgb, &config).is_err());
        assert!(build_tree(&[], ForestMode::OutdoorRgb, &cfg(), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn single_tree_forest_matches_build_tree() {
        let samples = two_clusters(60);
        let config = ForestConfig { rng_seed: 42, ..cfg() };
        let forest = train_forest(&[samples.clone()], ForestMode::OutdoorRgb, &config).unwrap();
        let tree = build_tree(&samples, ForestMode::OutdoorRgb, &config, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(forest.trees()[0], tree);
    }
}

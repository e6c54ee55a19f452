//! Preemptive RANSAC over predicted correspondences.
//!
//! A fixed pool of hypotheses is generated up front from random minimal
//! samples. Observations are consumed in blocks; after each block only the
//! best-scoring half survives, until a single hypothesis is left. That
//! survivor is rescored on every observation and refined on its inliers.

use nalgebra::{Vector2, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{kabsch, p3p_solve, refine_pose_2d3d, CameraPose, Correspondence, Intrinsics, Observation};

const MAX_DRAW_RETRIES: usize = 50;
const REFINE_ROUNDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RansacMode {
    /// Camera-space points against world points.
    Kabsch3D,
    /// Pixels against world points.
    Pnp2D,
}

impl RansacMode {
    pub fn minimal_sample(self) -> usize {
        match self {
            RansacMode::Kabsch3D => 3,
            RansacMode::Pnp2D => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    pub hypothesis_count: usize,
    pub block_size: usize,
    /// Meters.
    pub inlier_threshold_3d: f64,
    /// Pixels.
    pub inlier_threshold_2d: f64,
    pub rng_seed: u64,
    pub min_final_inliers: usize,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self::for_mode(RansacMode::Kabsch3D)
    }
}

impl RansacConfig {
    pub fn for_mode(mode: RansacMode) -> Self {
        Self {
            hypothesis_count: 256,
            block_size: 64,
            inlier_threshold_3d: 0.05,
            inlier_threshold_2d: 3.0,
            rng_seed: 0,
            min_final_inliers: match mode {
                RansacMode::Kabsch3D => 10,
                RansacMode::Pnp2D => 12,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hypothesis_count == 0 || self.block_size == 0 {
            return Err(Error::InvalidInput("RANSAC needs at least one hypothesis and block size ≥ 1".into()));
        }
        if !(self.inlier_threshold_3d > 0.0 && self.inlier_threshold_2d > 0.0) {
            return Err(Error::InvalidInput("RANSAC thresholds must be positive".into()));
        }
        Ok(())
    }

    fn threshold(&self, mode: RansacMode) -> f64 {
        match mode {
            RansacMode::Kabsch3D => self.inlier_threshold_3d,
            RansacMode::Pnp2D => self.inlier_threshold_2d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypothesis {
    pub pose: CameraPose,
    /// Inliers among the observations scored so far.
    pub score: usize,
    pub alive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacOutcome {
    pub pose: CameraPose,
    /// Indices into the input correspondences, ascending.
    pub inliers: Vec<usize>,
    pub hypotheses: usize,
}

/// Residual of one correspondence under a hypothesis: Euclidean distance in
/// meters (3D) or reprojection distance in pixels (2D). Points behind the
/// camera in 2D mode get `+∞`.
pub fn hypothesis_residual(
    pose: &CameraPose,
    c: &Correspondence,
    mode: RansacMode,
    intrinsics: Option<&Intrinsics>,
) -> Result<f64> {
    match (mode, c.observation) {
        (RansacMode::Kabsch3D, Observation::Camera(cam)) => Ok((pose.transform_point(&cam) - c.world).norm()),
        (RansacMode::Pnp2D, Observation::Pixel(px)) => {
            let k = intrinsics.ok_or_else(|| Error::InvalidInput("2D residuals need intrinsics".into()))?;
            Ok(pixel_residual(pose, &c.world, &px, k))
        }
        _ => Err(Error::InvalidInput(format!(
            "{mode:?} cannot score a {:?} observation",
            c.observation
        ))),
    }
}

fn pixel_residual(pose: &CameraPose, world: &Vector3<f64>, px: &Vector2<f64>, k: &Intrinsics) -> f64 {
    k.project(&pose.inverse_transform_point(world))
        .map(|p| (p - px).norm())
        .unwrap_or(f64::INFINITY)
}

/// Number of hypotheses alive after `round` preemption rounds:
/// `⌊K · 2^(−round)⌋`, never below one.
pub fn preemption_schedule(hypothesis_count: usize, round: usize) -> usize {
    let kept = if round >= usize::BITS as usize {
        0
    } else {
        hypothesis_count >> round
    };
    kept.max(1)
}

struct Scorer<'a> {
    corr: &'a [Correspondence],
    mode: RansacMode,
    k: Option<&'a Intrinsics>,
    threshold: f64,
}

impl Scorer<'_> {
    fn residual(&self, pose: &CameraPose, i: usize) -> f64 {
        let c = &self.corr[i];
        match (self.mode, c.observation) {
            (RansacMode::Kabsch3D, Observation::Camera(cam)) => (pose.transform_point(&cam) - c.world).norm(),
            (RansacMode::Pnp2D, Observation::Pixel(px)) => pixel_residual(pose, &c.world, &px, self.k.unwrap()),
            _ => f64::INFINITY,
        }
    }

    fn is_inlier(&self, pose: &CameraPose, i: usize) -> bool {
        self.residual(pose, i) < self.threshold
    }

    fn inliers(&self, pose: &CameraPose) -> Vec<usize> {
        (0..self.corr.len()).filter(|&i| self.is_inlier(pose, i)).collect()
    }

    fn minimal_solve(&self, idx: &[usize]) -> Result<CameraPose> {
        match self.mode {
            RansacMode::Kabsch3D => {
                let cam: Vec<_> = idx.iter().map(|&i| camera_point(&self.corr[i])).collect();
                let world: Vec<_> = idx.iter().map(|&i| self.corr[i].world).collect();
                kabsch(&cam, &world)
            }
            RansacMode::Pnp2D => {
                let world: [Vector3<f64>; 4] = std::array::from_fn(|j| self.corr[idx[j]].world);
                let px: [Vector2<f64>; 4] = std::array::from_fn(|j| pixel_point(&self.corr[idx[j]]));
                p3p_solve(&world, &px, self.k.unwrap())
            }
        }
    }

    /// Least-squares pose on an inlier set.
    fn refit(&self, initial: &CameraPose, inliers: &[usize]) -> Option<CameraPose> {
        match self.mode {
            RansacMode::Kabsch3D => {
                let cam: Vec<_> = inliers.iter().map(|&i| camera_point(&self.corr[i])).collect();
                let world: Vec<_> = inliers.iter().map(|&i| self.corr[i].world).collect();
                kabsch(&cam, &world).ok()
            }
            RansacMode::Pnp2D => {
                let subset: Vec<_> = inliers.iter().map(|&i| self.corr[i]).collect();
                refine_pose_2d3d(initial, &subset, self.k.unwrap())
                    .ok()
                    .filter(|r| !r.degenerate)
                    .map(|r| r.pose)
            }
        }
    }
}

fn camera_point(c: &Correspondence) -> Vector3<f64> {
    match c.observation {
        Observation::Camera(p) => p,
        Observation::Pixel(_) => unreachable!("checked before sampling"),
    }
}

fn pixel_point(c: &Correspondence) -> Vector2<f64> {
    match c.observation {
        Observation::Pixel(p) => p,
        Observation::Camera(_) => unreachable!("checked before sampling"),
    }
}

/// Robust pose from correspondences; see the module docs for the scheme.
///
/// Deterministic for a fixed `cfg.rng_seed`. Every returned inlier has a
/// residual below the mode's threshold under the returned pose.
pub fn preemptive_ransac(
    correspondences: &[Correspondence],
    mode: RansacMode,
    intrinsics: Option<&Intrinsics>,
    cfg: &RansacConfig,
) -> Result<RansacOutcome> {
    cfg.validate()?;
    let needed = mode.minimal_sample();
    if correspondences.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: correspondences.len(),
        });
    }
    if mode == RansacMode::Pnp2D && intrinsics.is_none() {
        return Err(Error::InvalidInput("2D-3D RANSAC needs intrinsics".into()));
    }
    for (i, c) in correspondences.iter().enumerate() {
        let kind_ok = matches!(
            (mode, c.observation),
            (RansacMode::Kabsch3D, Observation::Camera(_)) | (RansacMode::Pnp2D, Observation::Pixel(_))
        );
        if !kind_ok || !c.is_finite() {
            return Err(Error::InvalidInput(format!(
                "correspondence {i} is not a finite {mode:?} observation"
            )));
        }
    }

    let scorer = Scorer {
        corr: correspondences,
        mode,
        k: intrinsics,
        threshold: cfg.threshold(mode),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let n = correspondences.len();

    let mut hypotheses: Vec<Hypothesis> = Vec::with_capacity(cfg.hypothesis_count);
    for _ in 0..cfg.hypothesis_count {
        for _ in 0..MAX_DRAW_RETRIES {
            let idx = rand::seq::index::sample(&mut rng, n, needed).into_vec();
            if let Ok(pose) = scorer.minimal_solve(&idx) {
                hypotheses.push(Hypothesis {
                    pose,
                    score: 0,
                    alive: true,
                });
                break;
            }
        }
    }
    if hypotheses.is_empty() {
        return Err(Error::RelocalizationFailure {
            inliers: 0,
            required: cfg.min_final_inliers,
        });
    }
    let pool = hypotheses.len();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut alive: Vec<usize> = (0..pool).collect();
    let mut round = 0;
    let mut consumed = 0;
    while alive.len() > 1 && consumed < n {
        let block = &order[consumed..(consumed + cfg.block_size).min(n)];
        for &h in &alive {
            let hyp = &mut hypotheses[h];
            hyp.score += block.iter().filter(|&&i| scorer.is_inlier(&hyp.pose, i)).count();
        }
        consumed += block.len();
        round += 1;
        let keep = alive.len().min(preemption_schedule(pool, round));
        // Stable: equal scores keep generation order.
        alive.sort_by(|&a, &b| hypotheses[b].score.cmp(&hypotheses[a].score));
        for &h in &alive[keep..] {
            hypotheses[h].alive = false;
        }
        alive.truncate(keep);
    }
    if alive.len() > 1 {
        alive.sort_by(|&a, &b| hypotheses[b].score.cmp(&hypotheses[a].score));
    }
    let winner = hypotheses[alive[0]];

    let mut pose = winner.pose;
    let mut inliers = scorer.inliers(&pose);
    for _ in 0..REFINE_ROUNDS {
        if inliers.len() < needed {
            break;
        }
        let Some(refined) = scorer.refit(&pose, &inliers) else {
            break;
        };
        let refined_inliers = scorer.inliers(&refined);
        if refined_inliers.len() < inliers.len() {
            break;
        }
        let converged = refined_inliers == inliers;
        pose = refined;
        inliers = refined_inliers;
        if converged {
            break;
        }
    }

    if inliers.len() < cfg.min_final_inliers {
        return Err(Error::RelocalizationFailure {
            inliers: inliers.len(),
            required: cfg.min_final_inliers,
        });
    }
    Ok(RansacOutcome {
        pose,
        inliers,
        hypotheses: pool,
    })
}

/// `n_in` exact correspondences under `truth` followed by `n_out` outliers
/// whose world points are uniform in a box around the scene. Shared by the
/// unit tests and the acceptance suite.
#[doc(hidden)]
pub fn synthetic_3d_fixture<R: Rng>(
    truth: &CameraPose,
    n_in: usize,
    n_out: usize,
    noise: f64,
    rng: &mut R,
) -> Vec<Correspondence> {
    let mut out = Vec::with_capacity(n_in + n_out);
    for i in 0..n_in + n_out {
        let cam = Vector3::new(
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.0..1.0),
            rng.random_range(0.5..4.0),
        );
        let world = if i < n_in {
            truth.transform_point(&cam)
                + Vector3::new(
                    rng.random_range(-noise..=noise),
                    rng.random_range(-noise..=noise),
                    rng.random_range(-noise..=noise),
                )
        } else {
            Vector3::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            )
        };
        out.push(Correspondence::camera(world, cam));
    }
    out
}

//! Procedural RGB-D scenes with exact ground truth.
//!
//! The scene is the inside of an axis-aligned box whose walls are painted
//! with a smooth color field: per channel, a sum of seeded plane waves over
//! world position. Rendering casts one ray per pixel center.

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{Descriptor, Keypoint, RgbdFrame, EXTERNAL_DESCRIPTOR_LEN};
use crate::geometry::{CameraPose, Intrinsics};

pub const WAVES_PER_CHANNEL: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Wave {
    amplitude: f64,
    frequency: Vector3<f64>,
    phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    room_min: Vector3<f64>,
    room_max: Vector3<f64>,
    seed: u64,
    waves: [[Wave; WAVES_PER_CHANNEL]; 3],
}

/// A rendered view and its per-pixel world coordinates (row-major).
#[derive(Debug, Clone)]
pub struct RenderedFrame {
    pub frame: RgbdFrame,
    pub world_coords: Vec<Vector3<f64>>,
}

impl SyntheticScene {
    /// The default 4 × 3 × 2.5 m room with its corner at the origin; z is up.
    pub fn new(seed: u64) -> Self {
        Self::with_room(Vector3::zeros(), Vector3::new(4.0, 3.0, 2.5), seed).expect("default room is valid")
    }

    pub fn with_room(room_min: Vector3<f64>, room_max: Vector3<f64>, seed: u64) -> Result<Self> {
        if !(0..3).all(|i| room_max[i] > room_min[i]) {
            return Err(Error::InvalidInput("room must have positive extent".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves = std::array::from_fn(|_| {
            let raw: [f64; WAVES_PER_CHANNEL] = std::array::from_fn(|_| rng.random_range(0.5..1.0));
            let total: f64 = raw.iter().sum();
            std::array::from_fn(|i| {
                let wavelength = rng.random_range(0.15..1.2);
                Wave {
                    amplitude: raw[i] / total * 120.0,
                    frequency: random_unit(&mut rng) * (std::f64::consts::TAU / wavelength),
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                }
            })
        });
        Ok(Self {
            room_min,
            room_max,
            seed,
            waves,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn room(&self) -> (Vector3<f64>, Vector3<f64>) {
        (self.room_min, self.room_max)
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] > self.room_min[i] && p[i] < self.room_max[i])
    }

    /// RGB color of a world point, each channel in `[8, 248]`.
    pub fn color(&self, p: &Vector3<f64>) -> [f64; 3] {
        self.waves.map(|channel| {
            128.0
                + channel
                    .iter()
                    .map(|w| w.amplitude * (w.frequency.dot(p) + w.phase).sin())
                    .sum::<f64>()
        })
    }

    /// Distance along `dir` from the interior point `origin` to the nearest wall.
    pub fn ray_hit(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let mut best = f64::INFINITY;
        for axis in 0..3 {
            let d = dir[axis];
            let plane = if d > 0.0 {
                self.room_max[axis]
            } else if d < 0.0 {
                self.room_min[axis]
            } else {
                continue;
            };
            let t = (plane - origin[axis]) / d;
            if t > 0.0 && t < best {
                best = t;
            }
        }
        best.is_finite().then_some(best)
    }

    /// Renders color, depth and world coordinates for every pixel.
    pub fn render_frame(&self, pose: &CameraPose, k: &Intrinsics) -> Result<RenderedFrame> {
        let origin = pose.translation;
        if !self.contains(&origin) {
            return Err(Error::InvalidPose(format!(
                "camera at {:?} is outside the room",
                origin.as_slice()
            )));
        }
        let n = k.width as usize * k.height as usize;
        let mut rgb = Vec::with_capacity(3 * n);
        let mut depth = Vec::with_capacity(n);
        let mut world_coords = Vec::with_capacity(n);
        for y in 0..k.height {
            for x in 0..k.width {
                // Unit-depth ray, so the hit distance is the camera z.
                let ray_cam = Vector3::new((x as f64 - k.cx) / k.fx, (y as f64 - k.cy) / k.fy, 1.0);
                let ray = pose.rotation * ray_cam;
                let t = self
                    .ray_hit(&origin, &ray)
                    .ok_or_else(|| Error::InvalidPose("ray escapes the room".into()))?;
                let hit = pose.transform_point(&(ray_cam * t));
                for c in self.color(&hit) {
                    rgb.push(c.round().clamp(0.0, 255.0) as u8);
                }
                depth.push(t);
                world_coords.push(hit);
            }
        }
        Ok(RenderedFrame {
            frame: RgbdFrame::new(k.width, k.height, rgb, depth)?,
            world_coords,
        })
    }

    /// Random training and test poses: positions uniform in an interior
    /// sub-box, each camera aimed at a random point on a vertical wall with
    /// a small roll. The two sets use disjoint random streams.
    pub fn sample_trajectory(&self, n_train: usize, n_test: usize, seed: u64) -> Result<(Vec<CameraPose>, Vec<CameraPose>)> {
        if n_train == 0 || n_test == 0 {
            return Err(Error::InvalidInput("trajectories need at least one pose each".into()));
        }
        let draw = |stream: u64, n: usize| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            (0..n).map(|_| self.random_pose(&mut rng)).collect::<Vec<_>>()
        };
        Ok((draw(1, n_train), draw(2, n_test)))
    }

    fn random_pose<R: Rng>(&self, rng: &mut R) -> CameraPose {
        let size = self.room_max - self.room_min;
        let lo = self.room_min + size.component_mul(&Vector3::new(0.3, 0.3, 0.35));
        let hi = self.room_min + size.component_mul(&Vector3::new(0.7, 0.7, 0.7));
        let position = Vector3::new(
            rng.random_range(lo.x..hi.x),
            rng.random_range(lo.y..hi.y),
            rng.random_range(lo.z..hi.z),
        );
        let u = rng.random_range(0.0..1.0);
        let h = self.room_min.z + size.z * rng.random_range(0.15..0.85);
        let target = match rng.random_range(0..4) {
            0 => Vector3::new(self.room_min.x, self.room_min.y + u * size.y, h),
            1 => Vector3::new(self.room_max.x, self.room_min.y + u * size.y, h),
            2 => Vector3::new(self.room_min.x + u * size.x, self.room_min.y, h),
            _ => Vector3::new(self.room_min.x + u * size.x, self.room_max.y, h),
        };
        let roll = rng.random_range(-10f64..10.0).to_radians();
        look_at(position, target, roll)
    }
}

/// Sparse landmarks on the room walls for the keypoint pipeline. Each
/// landmark carries a fixed 64-D signature; observations perturb it.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkScene {
    pub points: Vec<Vector3<f64>>,
    signatures: Vec<Vec<f64>>,
}

impl LandmarkScene {
    pub fn new(scene: &SyntheticScene, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = scene.room();
        let mut points = Vec::with_capacity(count);
        let mut signatures = Vec::with_capacity(count);
        for _ in 0..count {
            let mut p = Vector3::new(
                rng.random_range(lo.x..hi.x),
                rng.random_range(lo.y..hi.y),
                rng.random_range(lo.z..hi.z),
            );
            let axis = rng.random_range(0..3);
            p[axis] = if rng.random_bool(0.5) { lo[axis] } else { hi[axis] };
            points.push(p);
            signatures.push((0..EXTERNAL_DESCRIPTOR_LEN).map(|_| rng.random_range(0.0..1.0)).collect());
        }
        Self { points, signatures }
    }

    /// Keypoints for every landmark inside the image, in landmark order.
    /// Each descriptor component gets uniform noise in `±noise` before
    /// normalization.
    pub fn observe<R: Rng>(&self, pose: &CameraPose, k: &Intrinsics, noise: f64, rng: &mut R) -> Result<Vec<Keypoint>> {
        let mut out = Vec::new();
        for (p, sig) in self.points.iter().zip(&self.signatures) {
            let Ok(px) = k.project(&pose.inverse_transform_point(p)) else {
                continue;
            };
            if !k.contains(&px) {
                continue;
            }
            let values = sig
                .iter()
                .map(|v| v + if noise > 0.0 { rng.random_range(-noise..=noise) } else { 0.0 })
                .collect();
            out.push(Keypoint {
                pixel: px,
                descriptor: Descriptor::external(values)?,
            });
        }
        Ok(out)
    }
}

/// Camera at `eye` looking at `target`, image y pointing down (world z is up).
pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, roll: f64) -> CameraPose {
    let forward = (target - eye).normalize();
    let up = Vector3::z();
    let mut right = forward.cross(&up);
    if right.norm() < 1e-9 {
        right = Vector3::x();
    }
    let right = right.normalize();
    let down = forward.cross(&right);
    let (s, c) = roll.sin_cos();
    let r = right * c + down * s;
    let d = -right * s + down * c;
    CameraPose {
        rotation: Matrix3::from_columns(&[r, d, forward]),
        translation: eye,
    }
}

fn random_unit<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Intrinsics of the default benchmark: 320 × 240, f = 300, centered.
pub fn default_intrinsics() -> Intrinsics {
    Intrinsics::centered(300.0, 320, 240).expect("valid intrinsics")
}

/// Pixel coordinates of a row-major index.
pub fn pixel_of(index: usize, width: u32) -> Vector2<f64> {
    Vector2::new((index % width as usize) as f64, (index / width as usize) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_k() -> Intrinsics {
        Intrinsics::centered(60.0, 64, 48).unwrap()
    }

    #[test]
    fn principal_ray_hits_facing_wall() {
        let scene = SyntheticScene::new(1);
        let eye = Vector3::new(2.0, 1.5, 1.25);
        let pose = look_at(eye, Vector3::new(4.0, 1.5, 1.25), 0.0);
        let k = Intrinsics::new(50.0, 50.0, 32.0, 24.0, 65, 49).unwrap();
        let r = scene.render_frame(&pose, &k).unwrap();
        let center = 24 * 65 + 32;
        assert_eq!(r.world_coords[center], Vector3::new(4.0, 1.5, 1.25));
        assert_eq!(r.frame.depth(32, 24), 2.0);
    }

    #[test]
    fn backprojection_matches_ground_truth() {
        let scene = SyntheticScene::new(2);
        let k = small_k();
        let (poses, _) = scene.sample_trajectory(5, 1, 3).unwrap();
        for pose in poses {
            let r = scene.render_frame(&pose, &k).unwrap();
            for (i, gt) in r.world_coords.iter().enumerate() {
                let p = pixel_of(i, k.width);
                let d = r.frame.depth(p.x as u32, p.y as u32);
                let world = pose.transform_point(&k.backproject(p, d).unwrap());
                assert!((world - gt).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn brute_force_ray_cast_agrees() {
        let scene = SyntheticScene::new(3);
        let (lo, hi) = scene.room();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..2000 {
            let o = Vector3::new(rng.random_range(0.1..3.9), rng.random_range(0.1..2.9), rng.random_range(0.1..2.4));
            let d = random_unit(&mut rng);
            // All six planes, keep in-bounds hits.
            let mut best = f64::INFINITY;
            for axis in 0..3 {
                for plane in [lo[axis], hi[axis]] {
                    if d[axis] == 0.0 {
                        continue;
                    }
                    let t = (plane - o[axis]) / d[axis];
                    let hit = o + d * t;
                    let inside = (0..3).all(|a| a == axis || (hit[a] >= lo[a] - 1e-9 && hit[a] <= hi[a] + 1e-9));
                    if t > 0.0 && inside && t < best {
                        best = t;
                    }
                }
            }
            assert_eq!(scene.ray_hit(&o, &d), Some(best));
        }
    }

    #[test]
    fn depths_are_bounded_by_the_diagonal() {
        let scene = SyntheticScene::new(5);
        let (lo, hi) = scene.room();
        let diag = (hi - lo).norm();
        let (poses, _) = scene.sample_trajectory(3, 1, 6).unwrap();
        for pose in poses {
            let r = scene.render_frame(&pose, &small_k()).unwrap();
            assert!(r.frame.depth_map().iter().all(|&d| d > 0.0 && d <= diag));
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let k = small_k();
        let a = SyntheticScene::new(7);
        let b = SyntheticScene::new(7);
        let pose = a.sample_trajectory(1, 1, 8).unwrap().0[0];
        let ra = a.render_frame(&pose, &k).unwrap();
        let rb = b.render_frame(&pose, &k).unwrap();
        assert_eq!(ra.frame.rgb(), rb.frame.rgb());
        assert_eq!(ra.frame.depth_map(), rb.frame.depth_map());
    }

    #[test]
    fn trajectories() {
        let scene = SyntheticScene::new(9);
        let (train, test) = scene.sample_trajectory(20, 10, 11).unwrap();
        assert!(train.iter().chain(&test).all(|p| scene.contains(&p.translation)));
        assert!(train.iter().chain(&test).all(|p| CameraPose::new(p.rotation, p.translation).is_ok()));
        let again = scene.sample_trajectory(20, 10, 11).unwrap();
        assert_eq!(again.0, train);
        assert_eq!(again.1, test);
        let min_gap = train
            .iter()
            .flat_map(|a| test.iter().map(move |b| (a.translation - b.translation).norm()))
            .fold(f64::INFINITY, f64::min);
        assert!(min_gap > 0.0);
        assert!(scene.sample_trajectory(0, 1, 0).is_err());
    }

    #[test]
    fn camera_outside_room() {
        let scene = SyntheticScene::new(1);
        let pose = look_at(Vector3::new(-1.0, 1.0, 1.0), Vector3::new(2.0, 1.0, 1.0), 0.0);
        assert!(matches!(scene.render_frame(&pose, &small_k()), Err(Error::InvalidPose(_))));
    }

    #[test]
    fn colors_stay_in_range() {
        let scene = SyntheticScene::new(12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let p = Vector3::new(rng.random_range(0.0..4.0), rng.random_range(0.0..3.0), rng.random_range(0.0..2.5));
            assert!(scene.color(&p).iter().all(|c| (0.0..=255.0).contains(c)));
        }
    }
}

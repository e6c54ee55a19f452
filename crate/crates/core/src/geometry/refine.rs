//! Gauss–Newton polishing of a pose on 2D–3D correspondences.

use nalgebra::{Matrix2x3, Matrix3, Matrix6, Rotation3, SMatrix, Vector2, Vector3, Vector6};

use super::{CameraPose, Intrinsics};
use crate::error::{Error, Result};
use crate::geometry::correspondence::{Correspondence, Observation};

const MAX_ITERATIONS: usize = 20;
const MIN_STEP: f64 = 1e-10;

/// Outcome of [`refine_pose_2d3d`].
#[derive(Debug, Clone, Copy)]
pub struct Refinement {
    pub pose: CameraPose,
    /// Set when the normal equations were singular; `pose` is then the
    /// initial pose.
    pub degenerate: bool,
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
}

/// Applies a 6-vector increment `(ω, v)` on the left of the world-to-camera
/// transform: `x_cam ← exp(ω)·x_cam + v`.
pub fn apply_increment(pose: &CameraPose, delta: &Vector6<f64>) -> CameraPose {
    let world_to_cam = pose.inverse();
    let omega = Vector3::new(delta[0], delta[1], delta[2]);
    let v = Vector3::new(delta[3], delta[4], delta[5]);
    let step = Rotation3::new(omega).into_inner();
    CameraPose {
        rotation: step * world_to_cam.rotation,
        translation: step * world_to_cam.translation + v,
    }
    .inverse()
}

/// Reprojection residual `project(pose⁻¹·world) − pixel` and its Jacobian
/// with respect to the increment of [`apply_increment`] at zero.
/// `None` when the point is not in front of the camera.
pub fn reprojection_jacobian(
    pose: &CameraPose,
    world: &Vector3<f64>,
    pixel: &Vector2<f64>,
    k: &Intrinsics,
) -> Option<(Vector2<f64>, SMatrix<f64, 2, 6>)> {
    let xc = pose.inverse_transform_point(world);
    if !(xc.z > 0.0) {
        return None;
    }
    let projected = k.project(&xc).ok()?;
    let inv_z = 1.0 / xc.z;
    let d_proj = Matrix2x3::new(
        k.fx * inv_z,
        0.0,
        -k.fx * xc.x * inv_z * inv_z,
        0.0,
        k.fy * inv_z,
        -k.fy * xc.y * inv_z * inv_z,
    );
    let mut d_cam = SMatrix::<f64, 3, 6>::zeros();
    d_cam
        .fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(-xc.cross_matrix()));
    d_cam
        .fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&Matrix3::identity());
    Some((projected - pixel, d_proj * d_cam))
}

/// Sum of squared reprojection errors; `None` if any point is behind the camera.
pub fn reprojection_cost(pose: &CameraPose, pairs: &[(Vector3<f64>, Vector2<f64>)], k: &Intrinsics) -> Option<f64> {
    pairs.iter().try_fold(0.0, |acc, (w, p)| {
        let xc = pose.inverse_transform_point(w);
        if !(xc.z > 0.0) {
            return None;
        }
        Some(acc + (k.project(&xc).ok()? - p).norm_squared())
    })
}

/// Minimizes total squared reprojection error starting from `initial`.
///
/// Steps that do not lower the cost are halved and finally rejected, so the
/// returned cost never exceeds the initial one. Only correspondences in
/// front of the initial pose take part.
pub fn refine_pose_2d3d(initial: &CameraPose, inliers: &[Correspondence], k: &Intrinsics) -> Result<Refinement> {
    let pairs = inliers
        .iter()
        .map(|c| match c.observation {
            Observation::Pixel(p) => Ok((c.world, p)),
            Observation::Camera(_) => Err(Error::InvalidInput(
                "2D-3D refinement needs pixel observations".into(),
            )),
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<_> = pairs
        .into_iter()
        .filter(|(w, _)| initial.inverse_transform_point(w).z > 0.0)
        .collect();
    if pairs.len() < 4 {
        return Err(Error::InsufficientPoints {
            needed: 4,
            got: pairs.len(),
        });
    }

    let initial_cost = reprojection_cost(initial, &pairs, k).unwrap_or(f64::INFINITY);
    let mut pose = *initial;
    let mut cost = initial_cost;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = Matrix6::<f64>::zeros();
        let mut jtr = Vector6::<f64>::zeros();
        for (w, p) in &pairs {
            if let Some((r, j)) = reprojection_jacobian(&pose, w, p, k) {
                jtj += j.transpose() * j;
                jtr += j.transpose() * r;
            }
        }
        let eig = jtj.symmetric_eigenvalues();
        let (lo, hi) = eig
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        let solved = if lo > 1e-14 * hi { jtj.cholesky() } else { None };
        let Some(chol) = solved else {
            if iterations == 1 {
                return Ok(Refinement {
                    pose: *initial,
                    degenerate: true,
                    iterations: 0,
                    initial_cost,
                    final_cost: initial_cost,
                });
            }
            break;
        };
        let delta = -chol.solve(&jtr);

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let candidate = apply_increment(&pose, &(delta * scale));
            if let Some(c) = reprojection_cost(&candidate, &pairs, k) {
                if c <= cost {
                    accepted = Some((candidate, c));
                    break;
                }
            }
            scale *= 0.5;
        }
        let Some((next, next_cost)) = accepted else {
            break;
        };
        pose = next;
        cost = next_cost;
        if delta.norm() * scale < MIN_STEP {
            break;
        }
    }

    Ok(Refinement {
        pose,
        degenerate: false,
        iterations,
        initial_cost,
        final_cost: cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pose_error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k() -> Intrinsics {
        Intrinsics::centered(300.0, 320, 240).unwrap()
    }

    fn scene(rng: &mut ChaCha8Rng, truth: &CameraPose, n: usize) -> Vec<Correspondence> {
        let k = k();
        (0..n)
            .map(|_| {
                let px = Vector2::new(rng.random_range(0.0..320.0), rng.random_range(0.0..240.0));
                let cam = k.backproject(px, rng.random_range(1.0..4.0)).unwrap();
                Correspondence::pixel(truth.transform_point(&cam), px)
            })
            .collect()
    }

    fn truth() -> CameraPose {
        CameraPose::from_axis_angle(Vector3::new(0.1, -0.3, 0.2), Vector3::new(0.4, 1.0, -0.2))
    }

    #[test]
    fn fixed_point_at_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = truth();
        let corr = scene(&mut rng, &t, 30);
        let r = refine_pose_2d3d(&t, &corr, &k()).unwrap();
        // Compare matrices directly: acos loses precision near identity.
        assert!((r.pose.rotation - t.rotation).abs().max() < 1e-12);
        assert!((r.pose.translation - t.translation).norm() < 1e-12);
        assert!(r.final_cost <= r.initial_cost);
    }

    #[test]
    fn converges_from_perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = truth();
        let corr = scene(&mut rng, &t, 50);
        let start = CameraPose::from_axis_angle(Vector3::new(0.0, 0.0, 1f64.to_radians()), Vector3::new(0.01, 0.0, 0.0))
            .compose(&t);
        let r = refine_pose_2d3d(&start, &corr, &k()).unwrap();
        let (dt, dr) = pose_error(&r.pose, &t);
        assert!(dt < 1e-6 && dr.to_radians() < 1e-6, "dt={dt} dr={dr}");
        assert!(r.final_cost <= r.initial_cost);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = k();
        let h = 1e-6;
        for _ in 0..100 {
            let pose = CameraPose::from_axis_angle(
                Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            );
            let px = Vector2::new(rng.random_range(0.0..320.0), rng.random_range(0.0..240.0));
            let world = pose.transform_point(&k.backproject(px, rng.random_range(1.0..4.0)).unwrap());
            let obs = px + Vector2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let (_, jac) = reprojection_jacobian(&pose, &world, &obs, &k).unwrap();
            for i in 0..6 {
                let mut d = Vector6::zeros();
                d[i] = h;
                let plus = reprojection_jacobian(&apply_increment(&pose, &d), &world, &obs, &k).unwrap().0;
                let minus = reprojection_jacobian(&apply_increment(&pose, &(-d)), &world, &obs, &k).unwrap().0;
                let numeric = (plus - minus) / (2.0 * h);
                let analytic = jac.column(i);
                let denom = numeric.norm().max(analytic.norm()).max(1e-3);
                assert!((numeric - analytic).norm() / denom < 1e-4, "column {i}");
            }
        }
    }

    #[test]
    fn degenerate_and_insufficient() {
        let k = k();
        let t = CameraPose::identity();
        // Four copies of the same point: rank-deficient normal equations.
        let c = Correspondence::pixel(Vector3::new(0.0, 0.0, 2.0), Vector2::new(k.cx, k.cy));
        let r = refine_pose_2d3d(&t, &[c; 4], &k).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.pose, t);
        assert!(matches!(
            refine_pose_2d3d(&t, &[c; 3], &k),
            Err(Error::InsufficientPoints { .. })
        ));
    }
}

//! Least-squares rigid alignment of paired 3D point sets.

use nalgebra::{Matrix3, Vector3};

use super::CameraPose;
use crate::error::{Error, Result};

/// Relative size of the second singular value of the centered camera points
/// below which the set is treated as collinear.
const RANK_TOL: f64 = 1e-10;

/// Finds the pose minimizing `Σ ‖R·camᵢ + t − worldᵢ‖²`.
///
/// The returned rotation is always proper: a reflection in the SVD solution
/// is corrected by flipping the weakest singular direction.
pub fn kabsch(cam: &[Vector3<f64>], world: &[Vector3<f64>]) -> Result<CameraPose> {
    if cam.len() != world.len() {
        return Err(Error::InvalidInput(format!(
            "point sets differ in size ({} vs {})",
            cam.len(),
            world.len()
        )));
    }
    if cam.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            got: cam.len(),
        });
    }
    let n = cam.len() as f64;
    let cam_mean = cam.iter().sum::<Vector3<f64>>() / n;
    let world_mean = world.iter().sum::<Vector3<f64>>() / n;

    let mut cross = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    for (p, q) in cam.iter().zip(world) {
        let pc = p - cam_mean;
        let qc = q - world_mean;
        cross += pc * qc.transpose();
        scatter += pc * pc.transpose();
    }

    let spread = scatter.symmetric_eigenvalues();
    let mut spread: Vec<f64> = spread.iter().copied().collect();
    spread.sort_by(|a, b| b.total_cmp(a));
    if !(spread[0] > 0.0) || spread[1] <= RANK_TOL * spread[0] {
        return Err(Error::Degenerate("camera points are collinear".into()));
    }

    let svd = cross.svd(true, true);
    let u = svd.u.ok_or_else(|| Error::Degenerate("SVD failed".into()))?;
    let v = svd
        .v_t
        .ok_or_else(|| Error::Degenerate("SVD failed".into()))?
        .transpose();
    // nalgebra does not sort singular values; flip the column paired with
    // the smallest one.
    let weakest = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(2);
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(weakest, weakest)] = -1.0;
    }
    let rotation = v * d * u.transpose();
    let translation = world_mean - rotation * cam_mean;
    Ok(CameraPose {
        rotation,
        translation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(0.5..4.0),
                )
            })
            .collect()
    }

    #[test]
    fn identity_correspondence() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_points(&mut rng, 10);
        let pose = kabsch(&p, &p).unwrap();
        assert_relative_eq!(pose.rotation, Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(pose.translation, Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn recovers_quarter_turn() {
        let truth = CameraPose::from_axis_angle(
            Vector3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2),
            Vector3::new(1.0, 2.0, 3.0),
        );
        let p = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.3, 0.2, 1.0),
        ];
        let q: Vec<_> = p.iter().map(|x| truth.transform_point(x)).collect();
        let pose = kabsch(&p, &q).unwrap();
        assert_relative_eq!(pose.rotation, truth.rotation, epsilon = 1e-9);
        assert_relative_eq!(pose.translation, truth.translation, epsilon = 1e-9);
    }

    #[test]
    fn noisy_monte_carlo() {
        let sigma = 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, sigma).unwrap();
        let truth = CameraPose::from_axis_angle(Vector3::new(0.2, 0.4, -0.1), Vector3::new(0.5, -1.0, 2.0));
        let p = random_points(&mut rng, 100);
        let q: Vec<_> = p
            .iter()
            .map(|x| {
                truth.transform_point(x)
                    + Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng))
            })
            .collect();
        let pose = kabsch(&p, &q).unwrap();
        let rms = (p
            .iter()
            .zip(&q)
            .map(|(a, b)| (pose.transform_point(a) - b).norm_squared())
            .sum::<f64>()
            / p.len() as f64)
            .sqrt();
        assert!(rms <= 3.0 * sigma, "rms {rms}");
        assert!((pose.translation - truth.translation).norm() < 1e-3);
    }

    #[test]
    fn errors() {
        let p = vec![Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0)];
        assert!(matches!(kabsch(&p, &p), Err(Error::InsufficientPoints { .. })));
        let line: Vec<_> = (0..5).map(|i| Vector3::new(i as f64, 2.0 * i as f64, 1.0)).collect();
        assert!(matches!(kabsch(&line, &line), Err(Error::Degenerate(_))));
    }

    #[test]
    fn reflection_inducing_noise_still_yields_rotation() {
        // Nearly planar set mirrored through its plane: the unconstrained
        // optimum is a reflection.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p: Vec<_> = (0..20)
            .map(|_| Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1e-3..1e-3)))
            .collect();
        let q: Vec<_> = p.iter().map(|x| Vector3::new(x.x, x.y, -x.z)).collect();
        let pose = kabsch(&p, &q).unwrap();
        assert!(CameraPose::new(pose.rotation, pose.translation).is_ok());
    }

    #[test]
    fn equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let p = random_points(&mut rng, 8);
            let base = CameraPose::from_axis_angle(
                Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                Vector3::new(rng.random_range(-1.0..1.0), 0.0, 1.0),
            );
            let q: Vec<_> = p
                .iter()
                .map(|x| base.transform_point(x) + Vector3::new(rng.random_range(-0.05..0.05), 0.0, 0.0))
                .collect();
            let a = CameraPose::from_axis_angle(
                Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
                Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
            );
            let aq: Vec<_> = q.iter().map(|x| a.transform_point(x)).collect();
            let lhs = kabsch(&p, &aq).unwrap();
            let rhs = a.compose(&kabsch(&p, &q).unwrap());
            assert_relative_eq!(lhs.rotation, rhs.rotation, epsilon = 1e-9);
            assert_relative_eq!(lhs.translation, rhs.translation, epsilon = 1e-9);
        }
    }
}

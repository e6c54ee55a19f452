//! Minimal perspective-three-point pose solver.
//!
//! Grunert's formulation: with unknown distances `s1, s2, s3` along the three
//! viewing rays and `u = s2/s1`, `v = s3/s1`, the law of cosines for the three
//! triangle sides reduces to a quartic in `v`. Each real positive root gives
//! the camera-frame points, and the pose follows from aligning them with the
//! world points.

use nalgebra::{Matrix4, Vector2, Vector3};

use super::{kabsch, CameraPose, Intrinsics};
use crate::error::{Error, Result};

/// All (up to four) camera-to-world poses consistent with three world points
/// seen along three unit bearing vectors.
pub fn p3p_candidates(world: &[Vector3<f64>; 3], bearings: &[Vector3<f64>; 3]) -> Result<Vec<CameraPose>> {
    let [x1, x2, x3] = world;
    let area = (x2 - x1).cross(&(x3 - x1)).norm();
    let scale = (x2 - x1).norm().max((x3 - x1).norm()).max(f64::MIN_POSITIVE);
    if !(area > 1e-10 * scale * scale) {
        return Err(Error::Degenerate("world points are collinear".into()));
    }
    let [j1, j2, j3] = bearings.map(|b| b.normalize());
    for (a, b) in [(&j1, &j2), (&j1, &j3), (&j2, &j3)] {
        if a.cross(b).norm() < 1e-12 {
            return Err(Error::Degenerate("viewing rays are parallel".into()));
        }
    }

    let a2 = (x2 - x3).norm_squared();
    let b2 = (x1 - x3).norm_squared();
    let c2 = (x1 - x2).norm_squared();
    let cos_a = j2.dot(&j3);
    let cos_b = j1.dot(&j3);
    let cos_g = j1.dot(&j2);

    // Polynomials in v, lowest degree first.
    // w(v) = 1 + v² − 2v·cosβ, so s1² = b² / w(v).
    let w = [1.0, -2.0 * cos_b, 1.0];
    // u² − 2u·cosγ + k1(v) = 0 and u² − 2uv·cosα + k2(v) = 0.
    let k1 = poly_sub(&[1.0], &poly_scale(&w, c2 / b2));
    let k2 = poly_sub(&[0.0, 0.0, 1.0], &poly_scale(&w, a2 / b2));
    // Subtracting gives u = num / den.
    let num = poly_sub(&k1, &k2);
    let den = [2.0 * cos_g, -2.0 * cos_a];
    // Substitute back: num² − 2cosγ·num·den + k1·den² = 0.
    let quartic = poly_add(
        &poly_sub(
            &poly_mul(&num, &num),
            &poly_scale(&poly_mul(&num, &den), 2.0 * cos_g),
        ),
        &poly_mul(&k1, &poly_mul(&den, &den)),
    );

    let mut poses = Vec::new();
    for v in real_roots(&quartic) {
        if !(v > 0.0) {
            continue;
        }
        let d = poly_eval(&den, v);
        if d.abs() < 1e-14 {
            continue;
        }
        let u = poly_eval(&num, v) / d;
        let wv = poly_eval(&w, v);
        if !(u > 0.0) || !(wv > 0.0) {
            continue;
        }
        let s1 = (b2 / wv).sqrt();
        let mut s = Vector3::new(s1, u * s1, v * s1);
        polish_distances(&mut s, [a2, b2, c2], [cos_a, cos_b, cos_g]);
        let cam = [j1 * s[0], j2 * s[1], j3 * s[2]];
        if let Ok(pose) = kabsch(&cam, world) {
            poses.push(pose);
        }
    }
    Ok(poses)
}

/// Solves P3P on the first three pairs and keeps the candidate with the
/// lowest reprojection error on the fourth.
pub fn p3p_solve(world: &[Vector3<f64>; 4], pixels: &[Vector2<f64>; 4], k: &Intrinsics) -> Result<CameraPose> {
    let bearings = [
        k.bearing(pixels[0]),
        k.bearing(pixels[1]),
        k.bearing(pixels[2]),
    ];
    let candidates = p3p_candidates(&[world[0], world[1], world[2]], &bearings)?;
    candidates
        .into_iter()
        .map(|pose| {
            let err = k
                .project(&pose.inverse_transform_point(&world[3]))
                .map(|p| (p - pixels[3]).norm())
                .unwrap_or(f64::INFINITY);
            (pose, err)
        })
        .filter(|(_, err)| err.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(pose, _)| pose)
        .ok_or(Error::NoSolution)
}

/// Newton iterations on the three law-of-cosines equations.
fn polish_distances(s: &mut Vector3<f64>, sides: [f64; 3], cosines: [f64; 3]) {
    let [a2, b2, c2] = sides;
    let [ca, cb, cg] = cosines;
    for _ in 0..3 {
        let (s1, s2, s3) = (s[0], s[1], s[2]);
        let f = Vector3::new(
            s2 * s2 + s3 * s3 - 2.0 * s2 * s3 * ca - a2,
            s1 * s1 + s3 * s3 - 2.0 * s1 * s3 * cb - b2,
            s1 * s1 + s2 * s2 - 2.0 * s1 * s2 * cg - c2,
        );
        let jac = nalgebra::Matrix3::new(
            0.0,
            2.0 * s2 - 2.0 * s3 * ca,
            2.0 * s3 - 2.0 * s2 * ca,
            2.0 * s1 - 2.0 * s3 * cb,
            0.0,
            2.0 * s3 - 2.0 * s1 * cb,
            2.0 * s1 - 2.0 * s2 * cg,
            2.0 * s2 - 2.0 * s1 * cg,
            0.0,
        );
        match jac.lu().solve(&f) {
            Some(step) if step.iter().all(|x| x.is_finite()) => {
                let next = *s - step;
                if next.iter().all(|&x| x > 0.0) {
                    *s = next;
                } else {
                    return;
                }
            }
            _ => return,
        }
    }
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, x) in b.iter().enumerate() {
        out[i] += x;
    }
    out
}

fn poly_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    poly_add(a, &poly_scale(b, -1.0))
}

fn poly_scale(a: &[f64], k: f64) -> Vec<f64> {
    a.iter().map(|x| x * k).collect()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_derivative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c * i as f64)
        .collect()
}

/// Real roots of a polynomial of degree ≤ 4 (coefficients lowest first),
/// from the companion matrix eigenvalues followed by Newton polishing.
fn real_roots(p: &[f64]) -> Vec<f64> {
    let mut coeffs = p.to_vec();
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    while coeffs.len() > 1 && coeffs.last().unwrap().abs() <= 1e-14 * scale {
        coeffs.pop();
    }
    let degree = coeffs.len() - 1;
    let raw: Vec<(f64, f64)> = match degree {
        0 => Vec::new(),
        1 => vec![(-coeffs[0] / coeffs[1], 0.0)],
        _ => {
            let lead = coeffs[degree];
            let mut companion = Matrix4::<f64>::zeros();
            for i in 1..degree {
                companion[(i, i - 1)] = 1.0;
            }
            for i in 0..degree {
                companion[(i, degree - 1)] = -coeffs[i] / lead;
            }
            let block = companion.view((0, 0), (degree, degree)).into_owned();
            block
                .complex_eigenvalues()
                .iter()
                .map(|z| (z.re, z.im))
                .collect()
        }
    };

    let deriv = poly_derivative(&coeffs);
    let mut roots: Vec<f64> = Vec::new();
    for (re, im) in raw {
        if im.abs() > 1e-6 * (1.0 + re.abs()) {
            continue;
        }
        let mut x = re;
        for _ in 0..8 {
            let d = poly_eval(&deriv, x);
            if d == 0.0 {
                break;
            }
            let step = poly_eval(&coeffs, x) / d;
            if !step.is_finite() {
                break;
            }
            x -= step;
            if step.abs() <= 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
        if x.is_finite() && !roots.iter().any(|r| (r - x).abs() <= 1e-12 * (1.0 + x.abs())) {
            roots.push(x);
        }
    }
    roots
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

    fn random_pose(rng: &mut ChaCha8Rng) -> CameraPose {
        CameraPose::from_axis_angle(
            Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        )
    }

    /// World points in front of `pose`, with their exact projections.
    fn visible_points(rng: &mut ChaCha8Rng, pose: &CameraPose, k: &Intrinsics) -> ([Vector3<f64>; 4], [Vector2<f64>; 4]) {
        let mut world = [Vector3::zeros(); 4];
        let mut pixels = [Vector2::zeros(); 4];
        for i in 0..4 {
            let px = Vector2::new(rng.random_range(10.0..310.0), rng.random_range(10.0..230.0));
            let depth = rng.random_range(1.0..5.0);
            let cam = k.backproject(px, depth).unwrap();
            world[i] = pose.transform_point(&cam);
            pixels[i] = k.project(&cam).unwrap();
        }
        (world, pixels)
    }

    #[test]
    fn quartic_roots() {
        // (x−1)(x−2)(x+3)(x−0.5)
        let p = poly_mul(&poly_mul(&[-1.0, 1.0], &[-2.0, 1.0]), &poly_mul(&[3.0, 1.0], &[-0.5, 1.0]));
        let mut r = real_roots(&p);
        r.sort_by(f64::total_cmp);
        let expect = [-3.0, 0.5, 1.0, 2.0];
        for (a, b) in r.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{r:?}");
        }
        // x² + 1 has no real roots.
        assert!(real_roots(&[1.0, 0.0, 1.0]).is_empty());
    }

    #[test]
    fn forward_projection_recovery() {
        let k = k();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let truth = random_pose(&mut rng);
            let (world, pixels) = visible_points(&mut rng, &truth, &k);
            let pose = p3p_solve(&world, &pixels, &k).unwrap();
            let (t, r) = pose_error(&pose, &truth);
            assert!(t < 1e-6 && r.to_radians() < 1e-6, "t={t} r={r}");
        }
    }

    #[test]
    fn scaled_and_translated_world() {
        let k = k();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let truth = random_pose(&mut rng);
        let (world, _) = visible_points(&mut rng, &truth, &k);
        let scale = 3.0;
        let shift = Vector3::new(10.0, -4.0, 2.5);
        let world2 = world.map(|x| x * scale + shift);
        // The same rigid motion applied to the scaled scene: camera center
        // scales and shifts, orientation is unchanged.
        let truth2 = CameraPose {
            rotation: truth.rotation,
            translation: truth.translation * scale + shift,
        };
        let pixels2 = world2.map(|x| k.project(&truth2.inverse_transform_point(&x)).unwrap());
        let pose = p3p_solve(&world2, &pixels2, &k).unwrap();
        let (t, r) = pose_error(&pose, &truth2);
        assert!(t < 1e-6 && r.to_radians() < 1e-6, "t={t} r={r}");
    }

    #[test]
    fn collinear_world_points() {
        let k = k();
        let world = [
            Vector3::new(0.0, 0.0, 2.0),
            Vector3::new(1.0, 0.0, 2.0),
            Vector3::new(2.0, 0.0, 2.0),
            Vector3::new(0.0, 1.0, 2.0),
        ];
        let pixels = world.map(|x| k.project(&x).unwrap());
        assert!(matches!(p3p_solve(&world, &pixels, &k), Err(Error::Degenerate(_))));
    }
}

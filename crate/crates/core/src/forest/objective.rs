//! Split objectives: sample balance near the root, spatial variance below.

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Which objective scored a split node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    Balanced = 0,
    Variance = 1,
}

impl Objective {
    /// Balanced above `balanced_depth_limit`, variance from there down.
    pub fn for_depth(depth: u32, balanced_depth_limit: u32) -> Self {
        if depth < balanced_depth_limit {
            Objective::Balanced
        } else {
            Objective::Variance
        }
    }

    pub(crate) fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Objective::Balanced),
            1 => Ok(Objective::Variance),
            _ => Err(Error::Format(format!("unknown objective id {v}"))),
        }
    }
}

/// `|L − R| / (L + R)`: 0 for an even split, 1 when a side is empty.
pub fn balanced_objective(left_count: usize, right_count: usize) -> Result<f64> {
    let total = left_count + right_count;
    if total == 0 {
        return Err(Error::InvalidInput("balanced objective of an empty split".into()));
    }
    Ok(left_count.abs_diff(right_count) as f64 / total as f64)
}

/// Mean squared distance of the points from their centroid.
pub fn spatial_variance(points: &[Vector3<f64>]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InvalidInput("spatial variance of an empty set".into()));
    }
    let n = points.len() as f64;
    let mean = points.iter().sum::<Vector3<f64>>() / n;
    Ok(points.iter().map(|p| (p - mean).norm_squared()).sum::<f64>() / n)
}

/// Size-weighted variance of the two children.
pub fn variance_objective(left: &[Vector3<f64>], right: &[Vector3<f64>]) -> Result<f64> {
    let total = left.len() + right.len();
    if total == 0 {
        return Err(Error::InvalidInput("variance objective of an empty split".into()));
    }
    let mut score = 0.0;
    for side in [left, right] {
        if !side.is_empty() {
            score += side.len() as f64 / total as f64 * spatial_variance(side)?;
        }
    }
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn balanced_examples() {
        assert_eq!(balanced_objective(50, 50).unwrap(), 0.0);
        assert_eq!(balanced_objective(100, 0).unwrap(), 1.0);
        assert_eq!(balanced_objective(75, 25).unwrap(), 0.5);
        assert!(balanced_objective(0, 0).is_err());
    }

    #[test]
    fn variance_examples() {
        assert_eq!(spatial_variance(&[v(1.0, 2.0, 3.0)]).unwrap(), 0.0);
        assert_eq!(spatial_variance(&[v(0.0, 0.0, 0.0), v(2.0, 0.0, 0.0)]).unwrap(), 1.0);
        assert_eq!(
            spatial_variance(&[v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.0), v(0.0, 6.0, 0.0)]).unwrap(),
            8.0
        );
        assert!(spatial_variance(&[]).is_err());
    }

    #[test]
    fn variance_objective_examples() {
        let o = v(0.0, 0.0, 0.0);
        let t = v(10.0, 0.0, 0.0);
        assert_eq!(variance_objective(&[o, o], &[t, t]).unwrap(), 0.0);
        assert_eq!(variance_objective(&[o, o, t, t], &[]).unwrap(), 25.0);
        assert_eq!(variance_objective(&[o, t], &[o, t]).unwrap(), 25.0);
        assert!(variance_objective(&[], &[]).is_err());
    }

    #[test]
    fn objective_by_depth() {
        assert_eq!(Objective::for_depth(5, 6), Objective::Balanced);
        assert_eq!(Objective::for_depth(6, 6), Objective::Variance);
        assert_eq!(Objective::for_depth(0, 0), Objective::Variance);
    }

    proptest! {
        #[test]
        fn balanced_is_symmetric(a in 0usize..10_000, b in 0usize..10_000) {
            prop_assume!(a + b > 0);
            prop_assert_eq!(balanced_objective(a, b).unwrap(), balanced_objective(b, a).unwrap());
        }
    }
}

use nalgebra::Vector2;

use crate::error::{Error, Result};

pub const EXTERNAL_DESCRIPTOR_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescriptorKind {
    /// Walsh–Hadamard patch descriptor, 60 values.
    Wht60,
    /// Externally extracted local feature (e.g. SIFT), 64 values, unit L2.
    External64,
}

impl DescriptorKind {
    pub fn len(self) -> usize {
        match self {
            DescriptorKind::Wht60 => super::WHT_DESCRIPTOR_LEN,
            DescriptorKind::External64 => EXTERNAL_DESCRIPTOR_LEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    values: Vec<f64>,
    kind: DescriptorKind,
}

impl Descriptor {
    pub fn wht(values: Vec<f64>) -> Result<Self> {
        check_len(&values, DescriptorKind::Wht60)?;
        Ok(Self {
            values,
            kind: DescriptorKind::Wht60,
        })
    }

    /// Normalizes to unit L2 length; a zero vector is rejected.
    pub fn external(mut values: Vec<f64>) -> Result<Self> {
        check_len(&values, DescriptorKind::External64)?;
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidInput(
                "external descriptor has zero or non-finite norm".into(),
            ));
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Ok(Self {
            values,
            kind: DescriptorKind::External64,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn kind(&self) -> DescriptorKind {
        self.kind
    }
}

fn check_len(values: &[f64], kind: DescriptorKind) -> Result<()> {
    if values.len() != kind.len() {
        return Err(Error::InvalidInput(format!(
            "{kind:?} descriptor needs {} values, got {}",
            kind.len(),
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("descriptor has non-finite values".into()));
    }
    Ok(())
}

/// Euclidean distance between descriptors of the same kind.
pub fn descriptor_distance(a: &Descriptor, b: &Descriptor) -> Result<f64> {
    if a.kind != b.kind || a.values.len() != b.values.len() {
        return Err(Error::InvalidInput(format!(
            "cannot compare {:?} with {:?} descriptors",
            a.kind, b.kind
        )));
    }
    Ok(l2_distance(&a.values, &b.values))
}

#[inline]
pub(crate) fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A detected image feature with its external descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    pub pixel: Vector2<f64>,
    pub descriptor: Descriptor,
}

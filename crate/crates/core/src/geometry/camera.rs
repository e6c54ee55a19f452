//! Pinhole camera model.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};

/// Pinhole intrinsics without distortion. Pixel coordinates address pixel
/// centers, so pixel `(0, 0)` is the center of the top-left pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("image size must be non-zero".into()));
        }
        if !(cx >= 0.0 && cx <= width as f64 && cy >= 0.0 && cy <= height as f64) {
            return Err(Error::InvalidInput(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Intrinsics with the principal point at the image center.
    pub fn centered(focal: f64, width: u32, height: u32) -> Result<Self> {
        Self::new(
            focal,
            focal,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
        )
    }

    pub fn backproject(&self, pixel: Vector2<f64>, depth: f64) -> Result<Vector3<f64>> {
        if !(depth > 0.0) {
            return Err(Error::InvalidInput(format!(
                "backprojection needs positive depth, got {depth}"
            )));
        }
        Ok(Vector3::new(
            (pixel.x - self.cx) * depth / self.fx,
            (pixel.y - self.cy) * depth / self.fy,
            depth,
        ))
    }

    pub fn project(&self, point: &Vector3<f64>) -> Result<Vector2<f64>> {
        if !(point.z > 0.0) {
            return Err(Error::BehindCamera);
        }
        Ok(Vector2::new(
            self.fx * point.x / point.z + self.cx,
            self.fy * point.y / point.z + self.cy,
        ))
    }

    /// Unit-length viewing ray through a pixel, camera frame.
    pub fn bearing(&self, pixel: Vector2<f64>) -> Vector3<f64> {
        Vector3::new(
            (pixel.x - self.cx) / self.fx,
            (pixel.y - self.cy) / self.fy,
            1.0,
        )
        .normalize()
    }

    pub fn contains(&self, pixel: &Vector2<f64>) -> bool {
        pixel.x >= -0.5
            && pixel.y >= -0.5
            && pixel.x < self.width as f64 - 0.5
            && pixel.y < self.height as f64 - 0.5
    }
}

/// Text form: `fx fy cx cy width height` on one line.
impl FromStr for Intrinsics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let fields: Vec<&str> = s.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(Error::Format(format!(
                "intrinsics need 6 fields `fx fy cx cy width height`, got {}",
                fields.len()
            )));
        }
        let float = |i: usize| {
            fields[i]
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("intrinsics field {}: {e}", i + 1)))
        };
        let int = |i: usize| {
            fields[i]
                .parse::<u32>()
                .map_err(|e| Error::Format(format!("intrinsics field {}: {e}", i + 1)))
        };
        Intrinsics::new(float(0)?, float(1)?, float(2)?, float(3)?, int(4)?, int(5)?)
    }
}

impl fmt::Display for Intrinsics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {}",
            self.fx, self.fy, self.cx, self.cy, self.width, self.height
        )
    }
}

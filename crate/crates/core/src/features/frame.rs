use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Color channel selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    R = 0,
    G = 1,
    B = 2,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::R, Channel::G, Channel::B];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            0 => Ok(Channel::R),
            1 => Ok(Channel::G),
            2 => Ok(Channel::B),
            _ => Err(Error::InvalidInput(format!("channel index {i} not in 0..3"))),
        }
    }
}

/// An RGB image with a registered metric depth map (0 marks invalid depth).
#[derive(Debug, Clone)]
pub struct RgbdFrame {
    width: u32,
    height: u32,
    rgb: Vec<u8>,
    depth: Vec<f64>,
    integral: OnceLock<super::wht::PatchIntegral>,
}

impl RgbdFrame {
    /// `rgb` is row-major interleaved RGB; `depth` row-major meters.
    pub fn new(width: u32, height: u32, rgb: Vec<u8>, depth: Vec<f64>) -> Result<Self> {
        let n = width as usize * height as usize;
        if n == 0 {
            return Err(Error::InvalidInput("frame has zero size".into()));
        }
        if rgb.len() != 3 * n || depth.len() != n {
            return Err(Error::InvalidInput(format!(
                "frame buffers do not match {width}x{height}: rgb {} depth {}",
                rgb.len(),
                depth.len()
            )));
        }
        if let Some(bad) = depth.iter().find(|d| !(**d >= 0.0) || !d.is_finite()) {
            return Err(Error::InvalidInput(format!("depth value {bad} is not a finite non-negative number")));
        }
        Ok(Self {
            width,
            height,
            rgb,
            depth,
            integral: OnceLock::new(),
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn rgb(&self) -> &[u8] {
        &self.rgb
    }

    pub fn depth_map(&self) -> &[f64] {
        &self.depth
    }

    #[inline]
    pub fn color(&self, x: u32, y: u32, channel: Channel) -> u8 {
        self.rgb[3 * (y as usize * self.width as usize + x as usize) + channel.index()]
    }

    #[inline]
    pub fn depth(&self, x: u32, y: u32) -> f64 {
        self.depth[y as usize * self.width as usize + x as usize]
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64
    }

    /// Pixels with positive depth, raster order.
    pub fn valid_pixels(&self) -> Vec<[u32; 2]> {
        let w = self.width as usize;
        self.depth
            .iter()
            .enumerate()
            .filter(|(_, d)| **d > 0.0)
            .map(|(i, _)| [(i % w) as u32, (i / w) as u32])
            .collect()
    }

    pub(crate) fn patch_integral(&self) -> &super::wht::PatchIntegral {
        self.integral
            .get_or_init(|| super::wht::PatchIntegral::new(self))
    }
}

/// Depth-normalized pixel comparison feature:
/// `I(p, c1) − I(p + offset / D(p), c2)`.
///
/// The offset pixel is rounded to the nearest integer and clamped to the
/// image.
pub fn random_feature_response(
    frame: &RgbdFrame,
    pixel: [u32; 2],
    offset: [f64; 2],
    c1: Channel,
    c2: Channel,
) -> Result<f64> {
    let [x, y] = pixel;
    if x >= frame.width || y >= frame.height {
        return Err(Error::InvalidInput(format!(
            "pixel ({x}, {y}) outside {}x{} frame",
            frame.width, frame.height
        )));
    }
    let d = frame.depth(x, y);
    if !(d > 0.0) {
        return Err(Error::InvalidDepth {
            x: x as i64,
            y: y as i64,
        });
    }
    let [qx, qy] = offset_pixel(frame, pixel, offset, d);
    Ok(frame.color(x, y, c1) as f64 - frame.color(qx, qy, c2) as f64)
}

#[inline]
pub(crate) fn offset_pixel(frame: &RgbdFrame, pixel: [u32; 2], offset: [f64; 2], depth: f64) -> [u32; 2] {
    let qx = (pixel[0] as f64 + offset[0] / depth).round();
    let qy = (pixel[1] as f64 + offset[1] / depth).round();
    [
        qx.clamp(0.0, (frame.width - 1) as f64) as u32,
        qy.clamp(0.0, (frame.height - 1) as f64) as u32,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_from(f: impl Fn(u32, u32) -> [u8; 3], depth: f64, w: u32, h: u32) -> RgbdFrame {
        let mut rgb = Vec::new();
        for y in 0..h {
            for x in 0..w {
                rgb.extend_from_slice(&f(x, y));
            }
        }
        RgbdFrame::new(w, h, rgb, vec![depth; (w * h) as usize]).unwrap()
    }

    #[test]
    fn constant_image_gives_zero() {
        let f = frame_from(|_, _| [40, 90, 200], 1.5, 16, 12);
        for c1 in Channel::ALL {
            let r = random_feature_response(&f, [5, 5], [30.0, -17.0], c1, c1).unwrap();
            assert_eq!(r, 0.0);
        }
    }

    #[test]
    fn direct_subtraction_and_depth_scaled_offset() {
        // Red ramp: value 100 + 4x, so I(p)=120 at x=5 and I(q)=100 at x=0.
        let f = frame_from(|x, _| [(100 + 4 * x) as u8, 0, 0], 2.0, 20, 4);
        let r = random_feature_response(&f, [5, 1], [-10.0, 0.0], Channel::R, Channel::R).unwrap();
        assert_eq!(r, 20.0);
        assert_eq!(offset_pixel(&f, [5, 1], [10.0, 0.0], 2.0), [10, 1]);
    }

    #[test]
    fn invalid_depth() {
        let mut f = frame_from(|_, _| [1, 2, 3], 1.0, 4, 4);
        f.depth[5] = 0.0;
        assert!(matches!(
            random_feature_response(&f, [1, 1], [0.0, 0.0], Channel::R, Channel::G),
            Err(Error::InvalidDepth { x: 1, y: 1 })
        ));
        assert_eq!(f.valid_pixels().len(), 15);
    }

    #[test]
    fn channel_swap_antisymmetry() {
        let f = frame_from(|x, y| [(x * 7 % 256) as u8, (y * 13 % 256) as u8, ((x + y) * 3) as u8], 1.3, 30, 20);
        for (x, y) in [(0, 0), (29, 19), (10, 3)] {
            for c1 in Channel::ALL {
                for c2 in Channel::ALL {
                    let a = random_feature_response(&f, [x, y], [0.0, 0.0], c1, c2).unwrap();
                    let b = random_feature_response(&f, [x, y], [0.0, 0.0], c2, c1).unwrap();
                    assert_eq!(a, -b);
                }
            }
        }
    }

    #[test]
    fn corner_pixels_with_huge_offsets_stay_in_bounds() {
        let f = frame_from(|x, y| [x as u8, y as u8, 0], 0.01, 8, 6);
        for (x, y) in [(0, 0), (7, 0), (0, 5), (7, 5)] {
            for off in [[1e6, 1e6], [-1e6, 1e6], [-1e6, -1e6], [130.0, -130.0]] {
                random_feature_response(&f, [x, y], off, Channel::R, Channel::G).unwrap();
            }
        }
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(RgbdFrame::new(2, 2, vec![0; 11], vec![1.0; 4]).is_err());
        assert!(RgbdFrame::new(2, 2, vec![0; 12], vec![1.0, -1.0, 1.0, 1.0]).is_err());
    }
}

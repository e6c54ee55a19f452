//! On-disk dataset layout shared by real sequences and the synthetic
//! generator.
//!
//! ```text
//! scene/
//!   intrinsics.txt                 fx fy cx cy width height
//!   points3d.txt                   outdoor only: one `x y z` per line
//!   train/ test/
//!     frame-000000.color.png       8-bit RGB (indoor)
//!     frame-000000.depth.png       16-bit grayscale, millimeters, 0 = invalid (indoor)
//!     frame-000000.keys            keypoints (outdoor)
//!     frame-000000.pose.txt        4×4 camera-to-world matrix
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use image::{ImageBuffer, Luma, RgbImage};
use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::features::{read_keypoints, write_keypoints, Keypoint, RgbdFrame};
use crate::forest::ForestMode;
use crate::geometry::{CameraPose, Intrinsics};

pub const INTRINSICS_FILE: &str = "intrinsics.txt";
pub const POINTS_FILE: &str = "points3d.txt";
const COLOR_SUFFIX: &str = ".color.png";
const DEPTH_SUFFIX: &str = ".depth.png";
const KEYS_SUFFIX: &str = ".keys";
const POSE_SUFFIX: &str = ".pose.txt";
const MAX_DEPTH_MM: f64 = u16::MAX as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

pub fn frame_stem(index: usize) -> String {
    format!("frame-{index:06}")
}

/// A dataset directory with its frame lists resolved.
///
/// Ground-truth pose reads are counted so callers can check which stage of
/// a run touched them.
#[derive(Debug)]
pub struct Dataset {
    root: PathBuf,
    mode: ForestMode,
    intrinsics: Intrinsics,
    train: Vec<usize>,
    test: Vec<usize>,
    pose_reads: AtomicUsize,
}

impl Dataset {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        if !root.is_dir() {
            return Err(Error::file(&root, "dataset directory does not exist"));
        }
        let intrinsics = read_intrinsics(root.join(INTRINSICS_FILE))?;
        let (train, train_mode) = list_frames(&root.join(Split::Train.dir_name()))?;
        let (test, test_mode) = list_frames(&root.join(Split::Test.dir_name()))?;
        let mode = match (train_mode, test_mode) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::file(&root, "train and test splits hold different frame kinds"))
            }
            (Some(m), _) | (None, Some(m)) => m,
            (None, None) => return Err(Error::file(&root, "dataset has no frames")),
        };
        Ok(Self {
            root,
            mode,
            intrinsics,
            train,
            test,
            pose_reads: AtomicUsize::new(0),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn mode(&self) -> ForestMode {
        self.mode
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }

    /// Frame indices present in a split, ascending.
    pub fn frames(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    pub fn frame_path(&self, split: Split, index: usize, suffix: &str) -> PathBuf {
        self.root
            .join(split.dir_name())
            .join(format!("{}{suffix}", frame_stem(index)))
    }

    pub fn load_rgbd(&self, split: Split, index: usize) -> Result<RgbdFrame> {
        let frame = read_rgbd(
            self.frame_path(split, index, COLOR_SUFFIX),
            self.frame_path(split, index, DEPTH_SUFFIX),
        )?;
        if frame.width() != self.intrinsics.width || frame.height() != self.intrinsics.height {
            return Err(Error::file(
                self.frame_path(split, index, COLOR_SUFFIX),
                format!(
                    "image is {}x{} but intrinsics say {}x{}",
                    frame.width(),
                    frame.height(),
                    self.intrinsics.width,
                    self.intrinsics.height
                ),
            ));
        }
        Ok(frame)
    }

    pub fn load_keypoints(&self, split: Split, index: usize) -> Result<Vec<Keypoint>> {
        read_keypoints(self.frame_path(split, index, KEYS_SUFFIX))
    }

    pub fn load_pose(&self, split: Split, index: usize) -> Result<CameraPose> {
        self.pose_reads.fetch_add(1, Ordering::Relaxed);
        read_pose(self.frame_path(split, index, POSE_SUFFIX))
    }

    pub fn load_points3d(&self) -> Result<Vec<Vector3<f64>>> {
        read_points3d(self.root.join(POINTS_FILE))
    }

    /// Ground-truth poses read so far through [`Dataset::load_pose`].
    pub fn pose_reads(&self) -> usize {
        self.pose_reads.load(Ordering::Relaxed)
    }
}

fn list_frames(dir: &Path) -> Result<(Vec<usize>, Option<ForestMode>)> {
    if !dir.is_dir() {
        return Ok((Vec::new(), None));
    }
    let mut indoor = BTreeSet::new();
    let mut outdoor = BTreeSet::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(rest) = name.strip_prefix("frame-") else { continue };
        let Some((digits, suffix)) = rest.split_once('.') else { continue };
        let Ok(index) = digits.parse::<usize>() else { continue };
        match &name[name.len() - suffix.len() - 1..] {
            COLOR_SUFFIX => {
                indoor.insert(index);
            }
            KEYS_SUFFIX => {
                outdoor.insert(index);
            }
            _ => {}
        }
    }
    let mode = match (indoor.is_empty(), outdoor.is_empty()) {
        (true, true) => None,
        (false, true) => Some(ForestMode::IndoorRgbd),
        (true, false) => Some(ForestMode::OutdoorRgb),
        (false, false) => return Err(Error::file(dir, "split mixes color images and keypoint files")),
    };
    Ok((indoor.into_iter().chain(outdoor).collect(), mode))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_intrinsics(path: impl AsRef<Path>) -> Result<Intrinsics> {
    let path = path.as_ref();
    read_text(path)?.parse().map_err(|e: Error| Error::file(path, e.to_string()))
}

pub fn write_intrinsics(path: impl AsRef<Path>, k: &Intrinsics) -> Result<()> {
    write_text(path.as_ref(), &format!("{k}\n"))
}

pub fn read_pose(path: impl AsRef<Path>) -> Result<CameraPose> {
    let path = path.as_ref();
    read_text(path)?.parse().map_err(|e: Error| Error::file(path, e.to_string()))
}

pub fn write_pose(path: impl AsRef<Path>, pose: &CameraPose) -> Result<()> {
    write_text(path.as_ref(), &pose.to_string())
}

pub fn read_points3d(path: impl AsRef<Path>) -> Result<Vec<Vector3<f64>>> {
    let path = path.as_ref();
    let mut points = Vec::new();
    for (n, line) in read_text(path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::file(path, format!("line {}: {e}", n + 1)))?;
        if v.len() != 3 || !v.iter().all(|x| x.is_finite()) {
            return Err(Error::file(path, format!("line {}: expected three finite numbers", n + 1)));
        }
        points.push(Vector3::new(v[0], v[1], v[2]));
    }
    Ok(points)
}

pub fn write_points3d(path: impl AsRef<Path>, points: &[Vector3<f64>]) -> Result<()> {
    let text: String = points.iter().map(|p| format!("{:e} {:e} {:e}\n", p.x, p.y, p.z)).collect();
    write_text(path.as_ref(), &text)
}

/// Loads a color/depth PNG pair. Depth is converted from millimeters.
pub fn read_rgbd(color_path: impl AsRef<Path>, depth_path: impl AsRef<Path>) -> Result<RgbdFrame> {
    let (color_path, depth_path) = (color_path.as_ref(), depth_path.as_ref());
    let color = image::open(color_path)
        .map_err(|e| Error::file(color_path, e.to_string()))?
        .into_rgb8();
    let depth = image::open(depth_path)
        .map_err(|e| Error::file(depth_path, e.to_string()))?
        .into_luma16();
    if color.dimensions() != depth.dimensions() {
        return Err(Error::file(
            depth_path,
            format!("depth is {:?} but color is {:?}", depth.dimensions(), color.dimensions()),
        ));
    }
    let (w, h) = color.dimensions();
    let depth_m = depth.into_raw().into_iter().map(|mm| mm as f64 / 1000.0).collect();
    RgbdFrame::new(w, h, color.into_raw(), depth_m).map_err(|e| Error::file(color_path, e.to_string()))
}

/// Writes a color/depth PNG pair; depth is rounded to whole millimeters.
pub fn write_rgbd(color_path: impl AsRef<Path>, depth_path: impl AsRef<Path>, frame: &RgbdFrame) -> Result<()> {
    let (color_path, depth_path) = (color_path.as_ref(), depth_path.as_ref());
    let (w, h) = (frame.width(), frame.height());
    let color = RgbImage::from_raw(w, h, frame.rgb().to_vec())
        .ok_or_else(|| Error::file(color_path, "color buffer does not match frame size"))?;
    let mm = frame
        .depth_map()
        .iter()
        .map(|&d| {
            let mm = (d * 1000.0).round();
            if mm > MAX_DEPTH_MM {
                Err(Error::file(depth_path, format!("depth {d} m exceeds the 16-bit millimeter range")))
            } else {
                Ok(mm as u16)
            }
        })
        .collect::<Result<Vec<u16>>>()?;
    let depth: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(w, h, mm)
        .ok_or_else(|| Error::file(depth_path, "depth buffer does not match frame size"))?;
    color.save(color_path).map_err(|e| Error::file(color_path, e.to_string()))?;
    depth.save(depth_path).map_err(|e| Error::file(depth_path, e.to_string()))
}

/// Creates dataset files under `root`.
#[derive(Debug)]
pub struct DatasetWriter {
    root: PathBuf,
}

impl DatasetWriter {
    pub fn create(root: impl AsRef<Path>, intrinsics: &Intrinsics) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        for split in [Split::Train, Split::Test] {
            let dir = root.join(split.dir_name());
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        write_intrinsics(root.join(INTRINSICS_FILE), intrinsics)?;
        Ok(Self { root })
    }

    fn path(&self, split: Split, index: usize, suffix: &str) -> PathBuf {
        self.root
            .join(split.dir_name())
            .join(format!("{}{suffix}", frame_stem(index)))
    }

    pub fn write_rgbd_frame(&self, split: Split, index: usize, frame: &RgbdFrame, pose: &CameraPose) -> Result<()> {
        write_rgbd(
            self.path(split, index, COLOR_SUFFIX),
            self.path(split, index, DEPTH_SUFFIX),
            frame,
        )?;
        write_pose(self.path(split, index, POSE_SUFFIX), pose)
    }

    pub fn write_keypoint_frame(
        &self,
        split: Split,
        index: usize,
        keypoints: &[Keypoint],
        pose: &CameraPose,
    ) -> Result<()> {
        write_keypoints(self.path(split, index, KEYS_SUFFIX), keypoints)?;
        write_pose(self.path(split, index, POSE_SUFFIX), pose)
    }

    pub fn write_points3d(&self, points: &[Vector3<f64>]) -> Result<()> {
        write_points3d(self.root.join(POINTS_FILE), points)
    }
}

//! Keypoint files: a little-endian binary container (`BKPT`) and a text
//! variant with one `x y v1 … v64` line per keypoint.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector2;

use super::descriptor::{Descriptor, Keypoint, EXTERNAL_DESCRIPTOR_LEN};
use crate::error::{Error, Result};

pub const KEYPOINT_MAGIC: &[u8; 4] = b"BKPT";
pub const KEYPOINT_VERSION: u32 = 1;

pub fn read_keypoints(path: impl AsRef<Path>) -> Result<Vec<Keypoint>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_keypoints(&bytes).map_err(|e| Error::file(path, e.to_string()))
}

/// Parses either format; binary is recognized by its magic.
pub fn parse_keypoints(bytes: &[u8]) -> Result<Vec<Keypoint>> {
    if bytes.starts_with(KEYPOINT_MAGIC) {
        parse_binary(bytes)
    } else {
        let text = std::str::from_utf8(bytes)
            .map_err(|_| Error::Format("keypoint file is neither BKPT binary nor UTF-8 text".into()))?;
        parse_text(text)
    }
}

fn parse_binary(bytes: &[u8]) -> Result<Vec<Keypoint>> {
    let mut cursor = &bytes[4..];
    let mut u32_field = |name: &str| -> Result<u32> {
        let (head, rest) = cursor
            .split_first_chunk::<4>()
            .ok_or_else(|| Error::Format(format!("truncated header field `{name}`")))?;
        cursor = rest;
        Ok(u32::from_le_bytes(*head))
    };
    let version = u32_field("version")?;
    let count = u32_field("count")? as usize;
    let dim = u32_field("d")? as usize;
    if version != KEYPOINT_VERSION {
        return Err(Error::Format(format!("unsupported keypoint version {version}")));
    }
    if dim != EXTERNAL_DESCRIPTOR_LEN {
        return Err(Error::Format(format!("descriptor length {dim}, expected 64")));
    }
    let record = 4 * (2 + dim);
    let body = &bytes[16..];
    if body.len() != count * record {
        return Err(Error::Format(format!(
            "expected {count} records of {record} bytes, found {} bytes",
            body.len()
        )));
    }
    body.chunks_exact(record)
        .map(|chunk| {
            let floats: Vec<f64> = chunk
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect();
            Ok(Keypoint {
                pixel: Vector2::new(floats[0], floats[1]),
                descriptor: Descriptor::external(floats[2..].to_vec())?,
            })
        })
        .collect()
}

fn parse_text(text: &str) -> Result<Vec<Keypoint>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, line)| {
            let values = line
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
            if values.len() != 2 + EXTERNAL_DESCRIPTOR_LEN {
                return Err(Error::Format(format!(
                    "line {}: expected 66 values, got {}",
                    i + 1,
                    values.len()
                )));
            }
            Ok(Keypoint {
                pixel: Vector2::new(values[0], values[1]),
                descriptor: Descriptor::external(values[2..].to_vec())
                    .map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?,
            })
        })
        .collect()
}

pub fn encode_keypoints(keypoints: &[Keypoint]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + keypoints.len() * 4 * 66);
    out.extend_from_slice(KEYPOINT_MAGIC);
    out.extend_from_slice(&KEYPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(keypoints.len() as u32).to_le_bytes());
    out.extend_from_slice(&(EXTERNAL_DESCRIPTOR_LEN as u32).to_le_bytes());
    for kp in keypoints {
        out.extend_from_slice(&(kp.pixel.x as f32).to_le_bytes());
        out.extend_from_slice(&(kp.pixel.y as f32).to_le_bytes());
        for v in kp.descriptor.values() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

pub fn write_keypoints(path: impl AsRef<Path>, keypoints: &[Keypoint]) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&encode_keypoints(keypoints))
        .map_err(|e| Error::io(path, e))
}

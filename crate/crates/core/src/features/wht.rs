//! Walsh–Hadamard patch descriptors.
//!
//! Each channel contributes the first [`COEFFS_PER_CHANNEL`] coefficients of
//! the orthonormal 2D transform of a [`PATCH_SIZE`]² patch, taken in
//! sequency zig-zag order starting at DC. The patch spans
//! `x − 16 ..= x + 15` horizontally (same vertically) and replicates edge
//! pixels beyond the image border.

use std::sync::OnceLock;

use super::frame::{Channel, RgbdFrame};

pub const PATCH_SIZE: usize = 32;
pub const COEFFS_PER_CHANNEL: usize = 20;
pub const WHT_DESCRIPTOR_LEN: usize = 3 * COEFFS_PER_CHANNEL;

const HALF: usize = PATCH_SIZE / 2;
/// Walsh functions of sequency below `BLOCKS` are constant on runs of
/// `BLOCK` samples, so low-order coefficients only need block sums.
const BLOCKS: usize = 8;
const BLOCK: usize = PATCH_SIZE / BLOCKS;

/// In-place orthonormal fast Walsh–Hadamard transform, natural (Hadamard)
/// order. `data.len()` must be a power of two.
pub fn fwht(data: &mut [f64]) {
    let n = data.len();
    assert!(n.is_power_of_two(), "length {n} is not a power of two");
    let mut h = 1;
    while h < n {
        for i in (0..n).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (data[j], data[j + h]);
                data[j] = a + b;
                data[j + h] = a - b;
            }
        }
        h *= 2;
    }
    let scale = 1.0 / (n as f64).sqrt();
    data.iter_mut().for_each(|v| *v *= scale);
}

/// Orthonormal 2D transform of a row-major `n × n` block: rows, then columns.
pub fn fwht_2d(data: &mut [f64], n: usize) {
    assert_eq!(data.len(), n * n);
    for row in data.chunks_mut(n) {
        fwht(row);
    }
    let mut column = vec![0.0; n];
    for c in 0..n {
        for r in 0..n {
            column[r] = data[r * n + c];
        }
        fwht(&mut column);
        for r in 0..n {
            data[r * n + c] = column[r];
        }
    }
}

/// Number of sign changes of each natural-order Hadamard row.
pub fn sequency_of_rows(n: usize) -> Vec<usize> {
    (0..n)
        .map(|row| {
            let sign = |x: usize| (row & x).count_ones() % 2;
            (1..n).filter(|&x| sign(x) != sign(x - 1)).count()
        })
        .collect()
}

/// `result[k]` is the natural-order row with sequency `k`.
pub fn natural_index_by_sequency(n: usize) -> Vec<usize> {
    let seq = sequency_of_rows(n);
    let mut out = vec![0; n];
    for (row, s) in seq.into_iter().enumerate() {
        out[s] = row;
    }
    out
}

/// First `count` `(vertical, horizontal)` sequency pairs in zig-zag order:
/// anti-diagonals of increasing total sequency, alternating direction as in
/// JPEG, beginning `(0,0), (0,1), (1,0), (2,0), (1,1), (0,2)`.
pub fn zigzag(count: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(count);
    let mut s = 0;
    while out.len() < count {
        let rows: Vec<usize> = if s % 2 == 0 {
            (0..=s).rev().collect()
        } else {
            (0..=s).collect()
        };
        for r in rows {
            if out.len() == count {
                break;
            }
            out.push((r, s - r));
        }
        s += 1;
    }
    out
}

fn zigzag_table() -> &'static [(usize, usize)] {
    static TABLE: OnceLock<Vec<(usize, usize)>> = OnceLock::new();
    TABLE.get_or_init(|| zigzag(COEFFS_PER_CHANNEL))
}

/// Truncated descriptor of one channel computed from the full transform.
pub fn patch_coefficients(patch: &[f64]) -> [f64; COEFFS_PER_CHANNEL] {
    let mut data = patch.to_vec();
    fwht_2d(&mut data, PATCH_SIZE);
    let natural = natural_index_by_sequency(PATCH_SIZE);
    let mut out = [0.0; COEFFS_PER_CHANNEL];
    for (o, &(v, u)) in out.iter_mut().zip(zigzag_table()) {
        *o = data[natural[v] * PATCH_SIZE + natural[u]];
    }
    out
}

/// One channel of the edge-replicated patch centered at `pixel`, row-major.
pub fn extract_patch(frame: &RgbdFrame, pixel: [u32; 2], channel: Channel) -> Vec<f64> {
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    let mut out = Vec::with_capacity(PATCH_SIZE * PATCH_SIZE);
    for dy in 0..PATCH_SIZE as i64 {
        let y = (pixel[1] as i64 + dy - HALF as i64).clamp(0, h - 1) as u32;
        for dx in 0..PATCH_SIZE as i64 {
            let x = (pixel[0] as i64 + dx - HALF as i64).clamp(0, w - 1) as u32;
            out.push(frame.color(x, y, channel) as f64);
        }
    }
    out
}

/// Reference descriptor: explicit patch extraction and full transform.
pub fn wht_descriptor_reference(frame: &RgbdFrame, pixel: [u32; 2]) -> Vec<f64> {
    Channel::ALL
        .iter()
        .flat_map(|&c| patch_coefficients(&extract_patch(frame, pixel, c)))
        .collect()
}

/// Sign of each low-sequency Walsh function on each block.
fn block_basis() -> &'static [[f64; BLOCKS]; BLOCKS] {
    static BASIS: OnceLock<[[f64; BLOCKS]; BLOCKS]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let natural = natural_index_by_sequency(PATCH_SIZE);
        let mut basis = [[0.0; BLOCKS]; BLOCKS];
        for (k, row) in basis.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                let x = b * BLOCK;
                *v = if (natural[k] & x).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            }
        }
        basis
    })
}

/// Summed-area tables of the edge-padded color channels.
#[derive(Debug, Clone)]
pub(crate) struct PatchIntegral {
    stride: usize,
    sums: [Vec<u32>; 3],
}

impl PatchIntegral {
    pub(crate) fn new(frame: &RgbdFrame) -> Self {
        let (w, h) = (frame.width() as i64, frame.height() as i64);
        let pw = w as usize + PATCH_SIZE;
        let ph = h as usize + PATCH_SIZE;
        let stride = pw + 1;
        let sums = Channel::ALL.map(|c| {
            let mut table = vec![0u32; stride * (ph + 1)];
            for py in 0..ph {
                let y = (py as i64 - HALF as i64).clamp(0, h - 1) as u32;
                let mut row = 0u32;
                for px in 0..pw {
                    let x = (px as i64 - HALF as i64).clamp(0, w - 1) as u32;
                    row += frame.color(x, y, c) as u32;
                    table[(py + 1) * stride + px + 1] = table[py * stride + px + 1] + row;
                }
            }
            table
        });
        Self { stride, sums }
    }

    /// Sum over padded rows `y0..y1`, columns `x0..x1`.
    #[inline]
    fn rect(&self, c: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> u32 {
        let t = &self.sums[c];
        let s = self.stride;
        t[y1 * s + x1] + t[y0 * s + x0] - t[y0 * s + x1] - t[y1 * s + x0]
    }
}

/// 60-dimensional WHT descriptor of the patch centered at `pixel`.
/// Out-of-bounds pixels are clamped to the nearest image pixel first.
pub fn wht_descriptor(frame: &RgbdFrame, pixel: [u32; 2]) -> Vec<f64> {
    let x = pixel[0].min(frame.width() - 1) as usize;
    let y = pixel[1].min(frame.height() - 1) as usize;
    let integral = frame.patch_integral();
    let basis = block_basis();
    let zz = zigzag_table();
    let norm = 1.0 / PATCH_SIZE as f64;
    let mut out = Vec::with_capacity(WHT_DESCRIPTOR_LEN);
    // In padded coordinates the patch starts exactly at (x, y).
    for c in 0..3 {
        let mut blocks = [[0.0f64; BLOCKS]; BLOCKS];
        for (by, row) in blocks.iter_mut().enumerate() {
            let y0 = y + by * BLOCK;
            for (bx, v) in row.iter_mut().enumerate() {
                let x0 = x + bx * BLOCK;
                *v = integral.rect(c, x0, y0, x0 + BLOCK, y0 + BLOCK) as f64;
            }
        }
        // Horizontal pass for the sequencies in use, then vertical.
        let mut horizontal = [[0.0f64; BLOCKS]; BLOCKS];
        for (by, row) in blocks.iter().enumerate() {
            for u in 0..BLOCKS {
                horizontal[by][u] = row.iter().zip(&basis[u]).map(|(a, b)| a * b).sum();
            }
        }
        for &(v, u) in zz {
            let coeff: f64 = (0..BLOCKS).map(|by| basis[v][by] * horizontal[by][u]).sum();
            out.push(coeff * norm);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_wht_2d(data: &[f64], n: usize) -> Vec<f64> {
        let h = |i: usize, j: usize| {
            if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 }
        };
        let scale = 1.0 / n as f64;
        let mut out = vec![0.0; n * n];
        for u in 0..n {
            for v in 0..n {
                let mut acc = 0.0;
                for r in 0..n {
                    for c in 0..n {
                        acc += h(u, r) * h(v, c) * data[r * n + c];
                    }
                }
                out[u * n + v] = acc * scale;
            }
        }
        out
    }

    fn random_frame(rng: &mut ChaCha8Rng, w: u32, h: u32) -> RgbdFrame {
        let rgb = (0..3 * w * h).map(|_| rng.random::<u8>()).collect();
        RgbdFrame::new(w, h, rgb, vec![1.0; (w * h) as usize]).unwrap()
    }

    #[test]
    fn fast_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let patch: Vec<f64> = (0..PATCH_SIZE * PATCH_SIZE).map(|_| rng.random_range(0.0..255.0)).collect();
            let mut fast = patch.clone();
            fwht_2d(&mut fast, PATCH_SIZE);
            let naive = naive_wht_2d(&patch, PATCH_SIZE);
            for (a, b) in fast.iter().zip(&naive) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let patch: Vec<f64> = (0..PATCH_SIZE * PATCH_SIZE).map(|_| rng.random_range(-100.0..255.0)).collect();
            let energy: f64 = patch.iter().map(|v| v * v).sum();
            let mut t = patch.clone();
            fwht_2d(&mut t, PATCH_SIZE);
            let transformed: f64 = t.iter().map(|v| v * v).sum();
            assert!(((energy - transformed) / energy).abs() < 1e-6);
        }
    }

    #[test]
    fn sequency_is_a_permutation() {
        let mut seq = sequency_of_rows(PATCH_SIZE);
        seq.sort_unstable();
        assert_eq!(seq, (0..PATCH_SIZE).collect::<Vec<_>>());
    }

    #[test]
    fn zigzag_prefix() {
        assert_eq!(
            zigzag(6),
            vec![(0, 0), (0, 1), (1, 0), (2, 0), (1, 1), (0, 2)]
        );
        assert!(zigzag(COEFFS_PER_CHANNEL).iter().all(|&(v, u)| v < BLOCKS && u < BLOCKS));
    }

    #[test]
    fn constant_patch() {
        let v = 77u8;
        let f = RgbdFrame::new(40, 40, vec![v; 3 * 1600], vec![1.0; 1600]).unwrap();
        let d = wht_descriptor(&f, [20, 20]);
        assert_eq!(d.len(), WHT_DESCRIPTOR_LEN);
        for c in 0..3 {
            assert!((d[c * COEFFS_PER_CHANNEL] - 32.0 * v as f64).abs() < 1e-9);
            for k in 1..COEFFS_PER_CHANNEL {
                assert_eq!(d[c * COEFFS_PER_CHANNEL + k], 0.0);
            }
        }
    }

    #[test]
    fn block_path_matches_full_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_frame(&mut rng, 70, 50);
        let mut pixels = vec![[0, 0], [69, 0], [0, 49], [69, 49], [35, 25]];
        pixels.extend((0..30).map(|_| [rng.random_range(0..70), rng.random_range(0..50)]));
        for p in pixels {
            let fast = wht_descriptor(&f, p);
            let reference = wht_descriptor_reference(&f, p);
            for (a, b) in fast.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-9, "pixel {p:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn repeated_queries_are_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_frame(&mut rng, 33, 17);
        assert_eq!(wht_descriptor(&f, [3, 9]), wht_descriptor(&f, [3, 9]));
    }

    #[test]
    fn tiny_frames_are_safe() {
        let f = RgbdFrame::new(1, 1, vec![9, 8, 7], vec![1.0]).unwrap();
        let d = wht_descriptor(&f, [0, 0]);
        assert!((d[0] - 32.0 * 9.0).abs() < 1e-9);
    }
}

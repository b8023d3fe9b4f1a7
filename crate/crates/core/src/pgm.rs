//! Binary PGM (P5, maxval 255) output.

use std::path::Path;

use crate::error::{Error, Result};

pub fn encode(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height, "pixel buffer does not match {width}x{height}");
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn write(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    std::fs::write(path, encode(width, height, pixels)).map_err(|e| Error::io(path, e))
}

/// Quantize a `[0, 1]` intensity; out-of-range values saturate.
pub fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Tile square images into a grid of `rows` × `cols` cells separated by
/// a one-pixel black gutter. Missing cells stay black.
pub fn tile(images: &[Vec<f64>], side: usize, rows: usize, cols: usize) -> (usize, usize, Vec<u8>) {
    let width = cols * side + cols.saturating_sub(1);
    let height = rows * side + rows.saturating_sub(1);
    let mut buf = vec![0u8; width * height];
    for (k, img) in images.iter().enumerate().take(rows * cols) {
        let (r, c) = (k / cols, k % cols);
        let (y0, x0) = (r * (side + 1), c * (side + 1));
        for y in 0..side {
            for x in 0..side {
                buf[(y0 + y) * width + x0 + x] = to_byte(img[y * side + x]);
            }
        }
    }
    (width, height, buf)
}

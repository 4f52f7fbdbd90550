//! Small image buffers plus PPM/PGM export.
//!
//! Images are row-major `f64` planes; color images interleave channels per
//! pixel. Everything in the pipeline is small enough (render cap ~160x120)
//! that double precision costs nothing and keeps the numerics exact.

use std::io::{self, Write};
use std::path::Path;

/// Row-major image; `channels` is 1 (gray / depth / ids) or 3 (RGB).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Image { width, height, channels, data: vec![0.0; width * height * channels] }
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Image { width, height, channels, data: vec![value; width * height * channels] }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.idx(x, y) + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let i = self.idx(x, y) + c;
        self.data[i] = v;
    }

    /// Channel-mean grayscale view; single-channel images are cloned.
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let mut out = Image::new(self.width, self.height, 1);
        for i in 0..self.width * self.height {
            let base = i * self.channels;
            let mut s = 0.0;
            for c in 0..self.channels {
                s += self.data[base + c];
            }
            out.data[i] = s / self.channels as f64;
        }
        out
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Write a color image as binary PPM (P6), clamping values to [0, 1].
pub fn write_ppm(img: &Image, path: &Path) -> io::Result<()> {
    assert_eq!(img.channels, 3, "PPM export needs a 3-channel image");
    let mut buf = Vec::with_capacity(32 + img.width * img.height * 3);
    write!(buf, "P6\n{} {}\n255\n", img.width, img.height)?;
    for v in &img.data {
        buf.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
    }
    std::fs::write(path, buf)
}

/// Write a single-channel image as 16-bit binary PGM (P5).
///
/// Values are mapped by `v * scale` and clamped to [0, 65535]; the scale is
/// recorded in a header comment so readers can invert it.
pub fn write_pgm16(img: &Image, scale: f64, path: &Path) -> io::Result<()> {
    assert_eq!(img.channels, 1, "PGM export needs a 1-channel image");
    let mut buf = Vec::with_capacity(64 + img.width * img.height * 2);
    write!(buf, "P5\n# scale {scale}\n{} {}\n65535\n", img.width, img.height)?;
    for v in &img.data {
        let q = (v * scale).clamp(0.0, 65535.0).round() as u16;
        buf.extend_from_slice(&q.to_be_bytes());
    }
    std::fs::write(path, buf)
}

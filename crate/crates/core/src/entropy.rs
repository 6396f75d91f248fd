//! Shannon entropy of stimulus images, in bits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::pearson;

pub const LEVELS: usize = 256;

#[derive(Debug, Error, PartialEq)]
pub enum EntropyError {
    #[error("image has no pixels")]
    EmptyImage,
    #[error("pixel buffer of {len} bytes does not match {width}x{height}x{channels}")]
    SizeMismatch { width: u32, height: u32, channels: u8, len: usize },
    #[error("unsupported pixel format with {0} channels; expected 8-bit RGB or RGBA")]
    UnsupportedPixelFormat(u8),
    #[error("need at least 3 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("a coordinate has zero variance")]
    DegenerateVariance,
}

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, EntropyError> {
        if pixels.len() != width as usize * height as usize {
            return Err(EntropyError::SizeMismatch { width, height, channels: 1, len: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn intensity_histogram(&self) -> [u64; LEVELS] {
        let mut hist = [0u64; LEVELS];
        for &p in &self.pixels {
            hist[p as usize] += 1;
        }
        hist
    }
}

/// Interleaved 8-bit color image with 3 (RGB) or 4 (RGBA) channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyResult {
    pub bits: f64,
}

pub fn image_entropy(img: &GrayImage) -> Result<EntropyResult, EntropyError> {
    if img.pixels.is_empty() {
        return Err(EntropyError::EmptyImage);
    }
    let n = img.pixels.len() as f64;
    let bits = img
        .intensity_histogram()
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0);
    Ok(EntropyResult { bits })
}

/// Rec. 601 luma, `0.299 R + 0.587 G + 0.114 B`, rounded half away from
/// zero. Alpha is ignored.
pub fn luminance_convert(img: &RgbImage) -> Result<GrayImage, EntropyError> {
    if !(img.channels == 3 || img.channels == 4) {
        return Err(EntropyError::UnsupportedPixelFormat(img.channels));
    }
    let expected = img.width as usize * img.height as usize * img.channels as usize;
    if img.data.len() != expected {
        return Err(EntropyError::SizeMismatch {
            width: img.width,
            height: img.height,
            channels: img.channels,
            len: img.data.len(),
        });
    }
    let pixels = img
        .data
        .chunks_exact(img.channels as usize)
        .map(|px| {
            let y = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::new(img.width, img.height, pixels)
}

/// Pearson r between image entropy and fitted exponent (or any two
/// paired quantities).
pub fn pearson_correlation(pairs: &[(f64, f64)]) -> Result<f64, EntropyError> {
    if pairs.len() < 3 {
        return Err(EntropyError::TooFewPairs(pairs.len()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    pearson(&xs, &ys).ok_or(EntropyError::DegenerateVariance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: u32, h: u32, px: Vec<u8>) -> GrayImage {
        GrayImage::new(w, h, px).unwrap()
    }

    #[test]
    fn constant_image_has_zero_entropy() {
        assert_eq!(image_entropy(&gray(4, 4, vec![37; 16])).unwrap().bits, 0.0);
    }

    #[test]
    fn half_and_half_is_one_bit() {
        let mut px = vec![0u8; 32];
        px[16..].fill(255);
        assert_eq!(image_entropy(&gray(8, 4, px)).unwrap().bits, 1.0);
    }

    #[test]
    fn uniform_histogram_is_eight_bits() {
        let px: Vec<u8> = (0..256 * 256).map(|i| (i % 256) as u8).collect();
        assert_eq!(image_entropy(&gray(256, 256, px)).unwrap().bits, 8.0);
    }

    #[test]
    fn empty_image_rejected() {
        assert_eq!(image_entropy(&gray(0, 0, vec![])).unwrap_err(), EntropyError::EmptyImage);
        assert!(GrayImage::new(2, 2, vec![0; 3]).is_err());
    }

    #[test]
    fn luminance_of_primaries() {
        let img = RgbImage { width: 3, height: 1, channels: 3, data: vec![255, 255, 255, 0, 0, 0, 255, 0, 0] };
        assert_eq!(luminance_convert(&img).unwrap().pixels(), &[255, 0, 76]);
        let rgba = RgbImage { width: 1, height: 1, channels: 4, data: vec![255, 0, 0, 9] };
        assert_eq!(luminance_convert(&rgba).unwrap().pixels(), &[76]);
        let bad = RgbImage { width: 1, height: 1, channels: 2, data: vec![0, 0] };
        assert_eq!(luminance_convert(&bad).unwrap_err(), EntropyError::UnsupportedPixelFormat(2));
    }

    #[test]
    fn pearson_lines_and_symmetric_case() {
        let up: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0 * i as f64 + 1.0)).collect();
        let down: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, -0.5 * i as f64)).collect();
        assert!((pearson_correlation(&up).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson_correlation(&down).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(pearson_correlation(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).unwrap(), 0.0);
    }

    #[test]
    fn pearson_errors() {
        assert_eq!(pearson_correlation(&[(0.0, 1.0), (1.0, 2.0)]).unwrap_err(), EntropyError::TooFewPairs(2));
        assert_eq!(
            pearson_correlation(&[(1.0, 0.0), (1.0, 1.0), (1.0, 2.0)]).unwrap_err(),
            EntropyError::DegenerateVariance
        );
    }
}

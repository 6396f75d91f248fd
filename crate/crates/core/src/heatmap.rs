//! Gaussian fixation heatmaps and the metrics used to compare them.
//!
//! KL divergence and BCE are in nats. A composite loss mixes
//! `alpha * BCE(pred, true) + beta * MSE + gamma * KL(true || pred)`, with
//! BCE and MSE evaluated on max-normalised copies and KL on
//! sum-normalised copies.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::pearson;

pub const DEFAULT_SIZE: u32 = 112;
pub const DEFAULT_SIGMA_PX: f64 = 30.0;
pub const DEFAULT_KL_EPSILON: f64 = 1e-8;
pub const BCE_EPSILON: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum HeatmapError {
    #[error("no gaze points to build a heatmap from")]
    NoPoints,
    #[error("kernel sigma must be finite and > 0, got {0}")]
    InvalidSigma(f64),
    #[error("invalid heatmap dimensions {0}x{1}")]
    InvalidDimensions(u32, u32),
    #[error("heatmap has no positive value")]
    AllZeroMap,
    #[error("heatmap values must be finite and non-negative")]
    InvalidValue,
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("normalization mismatch: {0:?} vs {1:?}")]
    NormalizationMismatch(Normalization, Normalization),
    #[error("a map has zero variance")]
    DegenerateVariance,
    #[error("heatmap binary holds {found} bytes, expected {expected}")]
    TruncatedBinary { expected: usize, found: usize },
    #[error("invalid sidecar: {0}")]
    Sidecar(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Values sum to 1.
    Probability,
    /// Maximum value is 1.
    UnitRange,
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: u32,
    height: u32,
    values: Vec<f64>,
    normalization: Normalization,
}

impl Heatmap {
    /// Raw map from row-major values.
    pub fn from_values(width: u32, height: u32, values: Vec<f64>) -> Result<Self, HeatmapError> {
        if width == 0 || height == 0 || values.len() != width as usize * height as usize {
            return Err(HeatmapError::InvalidDimensions(width, height));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(HeatmapError::InvalidValue);
        }
        Ok(Self { width, height, values, normalization: Normalization::Raw })
    }

    /// Loads values and checks they satisfy the declared normalization.
    pub fn with_normalization(
        width: u32,
        height: u32,
        values: Vec<f64>,
        normalization: Normalization,
    ) -> Result<Self, HeatmapError> {
        let mut h = Self::from_values(width, height, values)?;
        let ok = match normalization {
            Normalization::Raw => true,
            Normalization::Probability => (h.sum() - 1.0).abs() <= 1e-6,
            Normalization::UnitRange => (h.max() - 1.0).abs() <= 1e-6,
        };
        if !ok {
            return Err(HeatmapError::InvalidValue);
        }
        h.normalization = normalization;
        Ok(h)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[(y * self.width + x) as usize]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `(x, y)` of the first maximal cell in row-major order.
    pub fn argmax(&self) -> (u32, u32) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best as u32 % self.width, best as u32 / self.width)
    }

    fn same_shape(&self, other: &Heatmap) -> Result<(), HeatmapError> {
        if self.width != other.width || self.height != other.height {
            return Err(HeatmapError::DimensionMismatch(self.width, self.height, other.width, other.height));
        }
        Ok(())
    }

    /// Row-major little-endian `f32` values.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<(), HeatmapError> {
        let mut buf = Vec::with_capacity(self.values.len() * 4);
        for &v in &self.values {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar { width: self.width, height: self.height, normalization: self.normalization }
    }

    pub fn read_binary<R: Read>(mut input: R, sidecar: &Sidecar) -> Result<Self, HeatmapError> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let expected = sidecar.width as usize * sidecar.height as usize * 4;
        if bytes.len() != expected {
            return Err(HeatmapError::TruncatedBinary { expected, found: bytes.len() });
        }
        let values = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
        let mut h = Self::from_values(sidecar.width, sidecar.height, values)?;
        h.normalization = sidecar.normalization;
        Ok(h)
    }

    /// Binary 16-bit PGM (`P5`), scaled so the maximum maps to 65535.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<(), HeatmapError> {
        write!(out, "P5\n{} {}\n65535\n", self.width, self.height)?;
        let max = self.max();
        let mut buf = Vec::with_capacity(self.values.len() * 2);
        for &v in &self.values {
            let level = if max > 0.0 { (v / max * 65535.0).round() as u16 } else { 0 };
            buf.extend_from_slice(&level.to_be_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }
}

/// JSON metadata stored next to a heatmap binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub width: u32,
    pub height: u32,
    pub normalization: Normalization,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { alpha: 0.4, beta: 0.3, gamma: 0.3 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), HeatmapError> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if ok(self.alpha) && ok(self.beta) && ok(self.gamma) && self.alpha + self.beta + self.gamma > 0.0 {
            Ok(())
        } else {
            Err(HeatmapError::InvalidValue)
        }
    }
}

/// Sums an isotropic Gaussian per point, evaluated at the centres of an
/// `out.0 x out.1` grid laid over the `screen.0 x screen.1` pixel screen,
/// and returns the probability-normalised result.
pub fn build_heatmap(
    points: &[(f64, f64)],
    screen: (u32, u32),
    sigma_px: f64,
    out: (u32, u32),
) -> Result<Heatmap, HeatmapError> {
    let raw = accumulate_kernels(points, screen, sigma_px, out)?;
    normalize(&raw, Normalization::Probability)
}

/// Unnormalised kernel sum behind [`build_heatmap`].
pub fn accumulate_kernels(
    points: &[(f64, f64)],
    screen: (u32, u32),
    sigma_px: f64,
    out: (u32, u32),
) -> Result<Heatmap, HeatmapError> {
    if points.is_empty() {
        return Err(HeatmapError::NoPoints);
    }
    if !(sigma_px.is_finite() && sigma_px > 0.0) {
        return Err(HeatmapError::InvalidSigma(sigma_px));
    }
    let (w, h) = out;
    if w == 0 || h == 0 || screen.0 == 0 || screen.1 == 0 {
        return Err(HeatmapError::InvalidDimensions(w, h));
    }
    let cell_w = screen.0 as f64 / w as f64;
    let cell_h = screen.1 as f64 / h as f64;
    let inv_two_var = 1.0 / (2.0 * sigma_px * sigma_px);

    // The kernel is separable: exp(-(dx^2 + dy^2)/2s^2) = gx * gy.
    let axis = |coord: f64, n: u32, cell: f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let d = coord - (i as f64 + 0.5) * cell;
                (-d * d * inv_two_var).exp()
            })
            .collect()
    };
    let gx: Vec<Vec<f64>> = points.iter().map(|p| axis(p.0, w, cell_w)).collect();
    let gy: Vec<Vec<f64>> = points.iter().map(|p| axis(p.1, h, cell_h)).collect();

    let row = |j: usize| -> Vec<f64> {
        let mut acc = vec![0.0; w as usize];
        for (px, py) in gx.iter().zip(&gy) {
            let wy = py[j];
            if wy == 0.0 {
                continue;
            }
            for (a, &v) in acc.iter_mut().zip(px) {
                *a += wy * v;
            }
        }
        acc
    };

    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..h as usize).into_par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<f64>> = (0..h as usize).map(row).collect();

    Heatmap::from_values(w, h, rows.concat())
}

pub fn normalize(h: &Heatmap, mode: Normalization) -> Result<Heatmap, HeatmapError> {
    let divisor = match mode {
        Normalization::Raw => {
            return Ok(Heatmap { normalization: Normalization::Raw, ..h.clone() });
        }
        Normalization::Probability => h.sum(),
        Normalization::UnitRange => h.max(),
    };
    if divisor.is_nan() || divisor <= 0.0 {
        return Err(HeatmapError::AllZeroMap);
    }
    Ok(Heatmap {
        width: h.width,
        height: h.height,
        values: h.values.iter().map(|v| v / divisor).collect(),
        normalization: mode,
    })
}

fn smoothed_probabilities(h: &Heatmap, epsilon: f64) -> Result<Vec<f64>, HeatmapError> {
    let p = normalize(h, Normalization::Probability)?;
    let total: f64 = p.values.iter().map(|v| v + epsilon).sum();
    Ok(p.values.iter().map(|v| (v + epsilon) / total).collect())
}

/// `KL(true || pred)` in nats, after adding `epsilon` to every cell of both
/// maps and renormalising.
pub fn kl_divergence(h_true: &Heatmap, h_pred: &Heatmap, epsilon: f64) -> Result<f64, HeatmapError> {
    h_true.same_shape(h_pred)?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(HeatmapError::InvalidValue);
    }
    let p = smoothed_probabilities(h_true, epsilon)?;
    let q = smoothed_probabilities(h_pred, epsilon)?;
    let kl: f64 = p.iter().zip(&q).map(|(&a, &b)| a * (a / b).ln()).sum();
    Ok(kl.max(0.0))
}

/// Mean binary cross-entropy with the prediction clamped to
/// `[1e-7, 1 - 1e-7]`. Both maps are expected to hold values in `[0, 1]`.
pub fn bce(h_true: &Heatmap, h_pred: &Heatmap) -> Result<f64, HeatmapError> {
    h_true.same_shape(h_pred)?;
    let n = h_true.values.len() as f64;
    let total: f64 = h_true
        .values
        .iter()
        .zip(&h_pred.values)
        .map(|(&t, &p)| {
            let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / n)
}

pub fn mse(h_true: &Heatmap, h_pred: &Heatmap) -> Result<f64, HeatmapError> {
    h_true.same_shape(h_pred)?;
    if h_true.normalization != h_pred.normalization {
        return Err(HeatmapError::NormalizationMismatch(h_true.normalization, h_pred.normalization));
    }
    let n = h_true.values.len() as f64;
    Ok(h_true.values.iter().zip(&h_pred.values).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeLoss {
    pub bce: f64,
    pub mse: f64,
    pub kl: f64,
    pub total: f64,
}

pub fn composite_loss(h_true: &Heatmap, h_pred: &Heatmap, w: &LossWeights) -> Result<CompositeLoss, HeatmapError> {
    h_true.same_shape(h_pred)?;
    w.validate()?;
    let true_unit = normalize(h_true, Normalization::UnitRange)?;
    let pred_unit = normalize(h_pred, Normalization::UnitRange)?;
    let bce = bce(&true_unit, &pred_unit)?;
    let mse = mse(&true_unit, &pred_unit)?;
    let kl = kl_divergence(h_true, h_pred, DEFAULT_KL_EPSILON)?;
    let total = w.alpha * bce + w.beta * mse + w.gamma * kl;
    Ok(CompositeLoss { bce, mse, kl, total })
}

/// Pearson r over flattened cells.
pub fn pearson_map(h_true: &Heatmap, h_pred: &Heatmap) -> Result<f64, HeatmapError> {
    h_true.same_shape(h_pred)?;
    pearson(&h_true.values, &h_pred.values).ok_or(HeatmapError::DegenerateVariance)
}

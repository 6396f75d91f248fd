//! Step lengths, turning angles and histograms.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Trajectory;

/// Length of the 1920x1080 screen diagonal, rounded up.
pub const SCREEN_DIAGONAL_PX: f64 = 2203.0;
pub const DEFAULT_BINS_PER_DECADE: u32 = 20;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} samples, trajectory has {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("invalid histogram range or bin specification")]
    InvalidRange,
    #[error("logarithmic histogram range must be strictly positive")]
    NonPositiveLogRange,
}

/// Which trajectory a run of steps came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpan {
    pub subject_id: String,
    pub image_id: String,
    pub len: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepSeries {
    pub steps: Vec<f64>,
    pub sources: Vec<SourceSpan>,
}

impl StepSeries {
    /// Untagged series, mostly useful for feeding raw samples to the fitters.
    pub fn from_values(steps: Vec<f64>) -> Self {
        let len = steps.len();
        Self { steps, sources: vec![SourceSpan { subject_id: String::new(), image_id: String::new(), len }] }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Strictly positive steps; zero-length steps cannot enter a power law.
    pub fn positive(&self) -> Vec<f64> {
        self.steps.iter().copied().filter(|&s| s > 0.0).collect()
    }

    pub fn zero_count(&self) -> usize {
        self.steps.iter().filter(|&&s| s == 0.0).count()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TurnSeries {
    pub angles: Vec<f64>,
}

pub fn step_lengths(traj: &Trajectory) -> Result<StepSeries, StatsError> {
    if traj.samples.len() < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, found: traj.samples.len() });
    }
    let steps: Vec<f64> = traj
        .samples
        .windows(2)
        .enumerate()
        .filter(|(i, _)| !traj.pair_spans_gap(*i))
        .map(|(_, w)| (w[1].x_px - w[0].x_px).hypot(w[1].y_px - w[0].y_px))
        .collect();
    let len = steps.len();
    Ok(StepSeries {
        steps,
        sources: vec![SourceSpan { subject_id: traj.subject_id.clone(), image_id: traj.image_id.clone(), len }],
    })
}

/// Signed heading change from `v1` to `v2`, in `(-pi, pi]`.
pub fn signed_turn(v1: (f64, f64), v2: (f64, f64)) -> f64 {
    let cross = v1.0 * v2.1 - v1.1 * v2.0;
    let dot = v1.0 * v2.0 + v1.1 * v2.1;
    let a = cross.atan2(dot);
    if a <= -PI {
        PI
    } else {
        a
    }
}

/// Heading changes at each interior sample.
///
/// Zero is straight continuation, positive is counterclockwise (with the
/// y axis pointing up), and an exact reversal is `+pi`. Triples containing
/// a zero-length displacement or crossing a gap are skipped.
pub fn turning_angles(traj: &Trajectory) -> Result<TurnSeries, StatsError> {
    if traj.samples.len() < 3 {
        return Err(StatsError::TooFewSamples { needed: 3, found: traj.samples.len() });
    }
    let angles = traj
        .samples
        .windows(3)
        .enumerate()
        .filter(|(i, _)| !traj.pair_spans_gap(*i) && !traj.pair_spans_gap(i + 1))
        .filter_map(|(_, w)| {
            let v1 = (w[1].x_px - w[0].x_px, w[1].y_px - w[0].y_px);
            let v2 = (w[2].x_px - w[1].x_px, w[2].y_px - w[1].y_px);
            let degenerate = |v: (f64, f64)| v.0 == 0.0 && v.1 == 0.0;
            (!degenerate(v1) && !degenerate(v2)).then(|| signed_turn(v1, v2))
        })
        .collect();
    Ok(TurnSeries { angles })
}

pub fn pool_steps<'a>(series: impl IntoIterator<Item = &'a StepSeries>) -> StepSeries {
    let mut pooled = StepSeries::default();
    for s in series {
        pooled.steps.extend_from_slice(&s.steps);
        pooled.sources.extend(s.sources.iter().cloned());
    }
    pooled
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Logarithmic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HistogramSpec {
    Linear { bin_width: f64, lo: f64, hi: f64 },
    Logarithmic { bins_per_decade: u32, lo: f64, hi: f64 },
}

impl HistogramSpec {
    /// 1 px bins over the screen diagonal.
    pub fn default_linear_steps() -> Self {
        HistogramSpec::Linear { bin_width: 1.0, lo: 0.0, hi: SCREEN_DIAGONAL_PX }
    }

    pub fn turning_angles(bins: usize) -> Self {
        HistogramSpec::Linear { bin_width: 2.0 * PI / bins as f64, lo: -PI, hi: PI }
    }
}

/// Binned counts. The last bin is closed on the right; every other bin is
/// half-open. Values outside `[edges[0], edges[n]]`, and NaNs, go to
/// `underflow` / `overflow`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub scale: Scale,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn out_of_range(&self) -> u64 {
        self.underflow + self.overflow
    }

    /// Arithmetic midpoints for linear bins, geometric midpoints for
    /// logarithmic bins.
    pub fn centers(&self) -> Vec<f64> {
        self.edges
            .windows(2)
            .map(|e| match self.scale {
                Scale::Linear => 0.5 * (e[0] + e[1]),
                Scale::Logarithmic => (e[0] * e[1]).sqrt(),
            })
            .collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| e[1] - e[0]).collect()
    }

    /// Index of the most populated bin (first one on ties).
    pub fn mode_bin(&self) -> Option<usize> {
        let max = *self.counts.iter().max()?;
        (max > 0).then(|| self.counts.iter().position(|&c| c == max).unwrap())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_lo,bin_hi,count")?;
        for (e, c) in self.edges.windows(2).zip(&self.counts) {
            writeln!(out, "{},{},{}", e[0], e[1], c)?;
        }
        Ok(())
    }
}

fn bin_count(span: f64, unit: f64) -> usize {
    let raw = span / unit;
    let rounded = raw.round();
    if (raw - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded as usize
    } else {
        raw.ceil() as usize
    }
}

pub fn histogram(values: &[f64], spec: &HistogramSpec) -> Result<Histogram, StatsError> {
    let (edges, scale) = match *spec {
        HistogramSpec::Linear { bin_width, lo, hi } => {
            if !(lo.is_finite() && hi.is_finite() && lo < hi && bin_width.is_finite() && bin_width > 0.0) {
                return Err(StatsError::InvalidRange);
            }
            let n = bin_count(hi - lo, bin_width);
            let mut edges: Vec<f64> = (0..=n).map(|k| lo + k as f64 * bin_width).collect();
            if (edges[n] - hi).abs() <= 1e-9 * bin_width {
                edges[n] = hi;
            }
            (edges, Scale::Linear)
        }
        HistogramSpec::Logarithmic { bins_per_decade, lo, hi } => {
            if !(lo.is_finite() && hi.is_finite()) || bins_per_decade == 0 || lo >= hi {
                return Err(StatsError::InvalidRange);
            }
            if lo <= 0.0 {
                return Err(StatsError::NonPositiveLogRange);
            }
            let bpd = bins_per_decade as f64;
            let n = bin_count((hi / lo).log10(), 1.0 / bpd).max(1);
            let edges = (0..=n).map(|k| lo * 10f64.powf(k as f64 / bpd)).collect();
            (edges, Scale::Logarithmic)
        }
    };

    let n = edges.len() - 1;
    let (first, last) = (edges[0], edges[n]);
    let mut counts = vec![0u64; n];
    let (mut underflow, mut overflow) = (0, 0);
    for &v in values {
        if v < first {
            underflow += 1;
        } else if v > last || v.is_nan() {
            overflow += 1;
        } else {
            let idx = edges.partition_point(|&e| e <= v).saturating_sub(1).min(n - 1);
            counts[idx] += 1;
        }
    }
    Ok(Histogram { edges, counts, scale, underflow, overflow })
}

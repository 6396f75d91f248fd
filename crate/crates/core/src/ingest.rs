//! Gaze recordings, stimulus schedules and per-image trajectories.
//!
//! The on-disk format is a plain CSV with the header
//! `subject_id,t_ms,x_px,y_px,valid`, one row per tracker sample, `valid`
//! being `0` or `1`. Schedules are JSON arrays of
//! `{"image_id", "onset_ms", "duration_ms"}` objects.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CSV_HEADER: [&str; 5] = ["subject_id", "t_ms", "x_px", "y_px", "valid"];
pub const DEFAULT_RATE_HZ: f64 = 120.0;
pub const DEFAULT_SCREEN_W: u32 = 1920;
pub const DEFAULT_SCREEN_H: u32 = 1080;
pub const DEFAULT_MARGIN_PX: f64 = 50.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("recording contains no data rows")]
    EmptyRecording,
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: timestamp decreases")]
    NonMonotonicTime { line: u64 },
    #[error("schedule entries {first} and {second} overlap or are out of order")]
    OverlappingSchedule { first: usize, second: usize },
    #[error("schedule entry {index} has non-positive or non-finite timing")]
    InvalidScheduleEntry { index: usize },
    #[error("invalid schedule JSON: {0}")]
    ScheduleJson(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample {
    pub t_ms: f64,
    pub x_px: f64,
    pub y_px: f64,
    pub valid: bool,
}

impl GazeSample {
    pub fn new(t_ms: f64, x_px: f64, y_px: f64) -> Self {
        Self { t_ms, x_px, y_px, valid: true }
    }

    pub fn invalid(t_ms: f64) -> Self {
        Self { t_ms, x_px: f64::NAN, y_px: f64::NAN, valid: false }
    }
}

/// One subject's continuous tracker output.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecording {
    pub subject_id: String,
    pub samples: Vec<GazeSample>,
    pub nominal_rate_hz: f64,
}

impl SessionRecording {
    pub fn new(subject_id: impl Into<String>, samples: Vec<GazeSample>) -> Self {
        Self { subject_id: subject_id.into(), samples, nominal_rate_hz: DEFAULT_RATE_HZ }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    CanonicalCsv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub image_id: String,
    pub onset_ms: f64,
    pub duration_ms: f64,
}

impl ScheduleEntry {
    pub fn end_ms(&self) -> f64 {
        self.onset_ms + self.duration_ms
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StimulusSchedule {
    pub entries: Vec<ScheduleEntry>,
}

impl StimulusSchedule {
    pub fn new(entries: Vec<ScheduleEntry>) -> Self {
        Self { entries }
    }

    /// Slideshow layout: a leading blank, then `image_ms` per image separated
    /// by `blank_ms` blanks.
    pub fn slideshow<S: Into<String>>(image_ids: impl IntoIterator<Item = S>, image_ms: f64, blank_ms: f64) -> Self {
        let entries = image_ids
            .into_iter()
            .enumerate()
            .map(|(i, id)| ScheduleEntry {
                image_id: id.into(),
                onset_ms: blank_ms + i as f64 * (image_ms + blank_ms),
                duration_ms: image_ms,
            })
            .collect();
        Self { entries }
    }

    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        let sched: Self = serde_json::from_str(text)?;
        sched.validate()?;
        Ok(sched)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        for (index, e) in self.entries.iter().enumerate() {
            if !(e.onset_ms.is_finite() && e.duration_ms.is_finite() && e.duration_ms > 0.0) {
                return Err(IngestError::InvalidScheduleEntry { index });
            }
        }
        for (i, pair) in self.entries.windows(2).enumerate() {
            if pair[1].onset_ms < pair[0].end_ms() {
                return Err(IngestError::OverlappingSchedule { first: i, second: i + 1 });
            }
        }
        Ok(())
    }
}

/// Valid gaze samples for one subject viewing one image, times relative to
/// image onset.
///
/// `gaps` holds sorted sample indices `i` such that the pair
/// `(samples[i - 1], samples[i])` straddles removed data. Pairwise and
/// triple-wise statistics never bridge a gap.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub subject_id: String,
    pub image_id: String,
    pub screen_w_px: u32,
    pub screen_h_px: u32,
    pub samples: Vec<GazeSample>,
    pub gaps: Vec<usize>,
}

impl Trajectory {
    pub fn new(subject_id: impl Into<String>, image_id: impl Into<String>, samples: Vec<GazeSample>) -> Self {
        Self {
            subject_id: subject_id.into(),
            image_id: image_id.into(),
            screen_w_px: DEFAULT_SCREEN_W,
            screen_h_px: DEFAULT_SCREEN_H,
            samples,
            gaps: Vec::new(),
        }
    }

    /// Trajectory through `points`, sampled every `dt_ms`.
    pub fn from_points(points: &[(f64, f64)], dt_ms: f64) -> Self {
        let samples = points.iter().enumerate().map(|(i, &(x, y))| GazeSample::new(i as f64 * dt_ms, x, y)).collect();
        Self::new("", "", samples)
    }

    pub fn with_screen(mut self, w: u32, h: u32) -> Self {
        self.screen_w_px = w;
        self.screen_h_px = h;
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// True if the pair `(samples[i], samples[i + 1])` crosses a gap.
    pub fn pair_spans_gap(&self, i: usize) -> bool {
        self.gaps.binary_search(&(i + 1)).is_ok()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples.iter().map(|s| (s.x_px, s.y_px))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub invalid: usize,
    pub out_of_bounds: usize,
}

impl FilterReport {
    pub fn removed(&self) -> usize {
        self.invalid + self.out_of_bounds
    }
}

pub fn parse_recording<R: Read>(input: R, format: RecordFormat) -> Result<SessionRecording, IngestError> {
    match format {
        RecordFormat::CanonicalCsv => parse_canonical_csv(input),
    }
}

fn parse_canonical_csv<R: Read>(input: R) -> Result<SessionRecording, IngestError> {
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(input);

    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(IngestError::EmptyRecording),
        Some(r) => r.map_err(|e| csv_row_error(&e))?,
    };
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(IngestError::MalformedRow {
            line: 1,
            reason: format!("expected header `{}`", CSV_HEADER.join(",")),
        });
    }

    let mut subject_id: Option<String> = None;
    let mut samples = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for record in records {
        let record = record.map_err(|e| csv_row_error(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |reason: String| IngestError::MalformedRow { line, reason };
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != CSV_HEADER.len() {
            return Err(malformed(format!("expected 5 fields, found {}", record.len())));
        }
        match &subject_id {
            None => subject_id = Some(record[0].to_string()),
            Some(s) if s != &record[0] => {
                return Err(malformed(format!("subject `{}` differs from `{}`", &record[0], s)))
            }
            Some(_) => {}
        }
        let num = |idx: usize| -> Result<f64, IngestError> {
            record[idx].parse::<f64>().map_err(|_| malformed(format!("`{}` is not a number", &record[idx])))
        };
        let t_ms = num(1)?;
        if !t_ms.is_finite() || t_ms < 0.0 {
            return Err(malformed(format!("t_ms {t_ms} must be finite and non-negative")));
        }
        let valid = match &record[4] {
            "1" => true,
            "0" => false,
            other => return Err(malformed(format!("valid flag `{other}` not in {{0,1}}"))),
        };
        let (x_px, y_px) = if valid {
            let (x, y) = (num(2)?, num(3)?);
            if !(x.is_finite() && y.is_finite()) {
                return Err(malformed("valid sample with non-finite coordinates".into()));
            }
            (x, y)
        } else {
            let lenient = |idx: usize| record[idx].parse::<f64>().unwrap_or(f64::NAN);
            (lenient(2), lenient(3))
        };
        if t_ms < last_t {
            return Err(IngestError::NonMonotonicTime { line });
        }
        last_t = t_ms;
        samples.push(GazeSample { t_ms, x_px, y_px, valid });
    }

    match subject_id {
        None => Err(IngestError::EmptyRecording),
        Some(subject_id) => Ok(SessionRecording { subject_id, samples, nominal_rate_hz: DEFAULT_RATE_HZ }),
    }
}

fn csv_row_error(e: &csv::Error) -> IngestError {
    IngestError::MalformedRow { line: e.position().map_or(0, |p| p.line()), reason: e.to_string() }
}

/// Writes `rec` in the canonical CSV format. Numbers use the shortest
/// representation that parses back to the same `f64`.
pub fn write_recording<W: Write>(rec: &SessionRecording, out: W) -> Result<(), IngestError> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for s in &rec.samples {
        writer.write_record([
            rec.subject_id.as_str(),
            &s.t_ms.to_string(),
            &s.x_px.to_string(),
            &s.y_px.to_string(),
            if s.valid { "1" } else { "0" },
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Cuts a recording into one trajectory per schedule entry.
///
/// Samples falling in `[onset, onset + duration)` are kept and rebased to
/// the onset; invalid samples inside the window are dropped and leave a gap
/// marker. Entries that run past the end of the recording yield truncated
/// trajectories.
pub fn segment_by_image(rec: &SessionRecording, sched: &StimulusSchedule) -> Result<Vec<Trajectory>, IngestError> {
    sched.validate()?;
    let last_t = rec.samples.last().map_or(f64::NEG_INFINITY, |s| s.t_ms);
    let mut out = Vec::with_capacity(sched.entries.len());
    for entry in &sched.entries {
        if entry.end_ms() > last_t {
            log::warn!(
                "image `{}` ends at {} ms, after the last sample at {} ms; trajectory is truncated",
                entry.image_id,
                entry.end_ms(),
                last_t
            );
        }
        let start = rec.samples.partition_point(|s| s.t_ms < entry.onset_ms);
        let end = rec.samples.partition_point(|s| s.t_ms < entry.end_ms());
        let mut traj = Trajectory::new(rec.subject_id.clone(), entry.image_id.clone(), Vec::new());
        let mut pending_gap = false;
        for s in &rec.samples[start..end] {
            if !s.valid {
                pending_gap = true;
                continue;
            }
            if pending_gap && !traj.samples.is_empty() {
                traj.gaps.push(traj.samples.len());
            }
            pending_gap = false;
            traj.samples.push(GazeSample { t_ms: s.t_ms - entry.onset_ms, ..*s });
        }
        out.push(traj);
    }
    Ok(out)
}

/// Drops invalid and off-screen samples, recording a gap wherever something
/// was removed between two kept samples.
pub fn filter_invalid(traj: &Trajectory, margin_px: f64) -> (Trajectory, FilterReport) {
    let margin = margin_px.max(0.0);
    let (x_lo, x_hi) = (-margin, traj.screen_w_px as f64 + margin);
    let (y_lo, y_hi) = (-margin, traj.screen_h_px as f64 + margin);

    let mut report = FilterReport::default();
    let mut samples = Vec::with_capacity(traj.samples.len());
    let mut gaps = Vec::new();
    let mut pending_gap = false;
    let mut old_gaps = traj.gaps.iter().peekable();
    for (i, s) in traj.samples.iter().enumerate() {
        while old_gaps.next_if(|&&g| g <= i).is_some() {
            pending_gap = true;
        }
        let keep = if !s.valid {
            report.invalid += 1;
            false
        } else if !(x_lo..=x_hi).contains(&s.x_px) || !(y_lo..=y_hi).contains(&s.y_px) {
            report.out_of_bounds += 1;
            false
        } else {
            true
        };
        if !keep {
            pending_gap = true;
            continue;
        }
        if pending_gap && !samples.is_empty() {
            gaps.push(samples.len());
        }
        pending_gap = false;
        samples.push(*s);
    }
    let filtered = Trajectory { samples, gaps, ..traj.clone() };
    (filtered, report)
}

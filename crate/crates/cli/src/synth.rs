//! `synth`: turns a walk config into a canonical gaze CSV.
//!
//! Without a `session` block the output is one continuous trajectory,
//! scheduled as a single image. With one, the walk is laid out as a
//! slideshow: each image gets its own walk (seed offset by image index) and
//! the blanks between images are written as invalid samples.

use std::path::Path;

use anyhow::Context;
use gazeforage::synth::generate_points;
use gazeforage::{generate, GazeSample, ScheduleEntry, SessionRecording, StimulusSchedule, SynthConfig};
use serde::{Deserialize, Serialize};

use crate::error::{require_file, CliResult, StageExt};
use crate::{write_csv_recording, write_file};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionLayout {
    pub subject_id: String,
    pub images: Vec<String>,
    pub image_ms: f64,
    pub blank_ms: f64,
}

impl Default for SessionLayout {
    fn default() -> Self {
        Self { subject_id: "synth".into(), images: vec!["img01".into()], image_ms: 30_000.0, blank_ms: 5_000.0 }
    }
}

/// On-disk synth config. A bare walk config (no `walk` key) is accepted too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthJob {
    #[serde(default)]
    pub walk: SynthConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<SessionLayout>,
}

fn parse_job(text: &str) -> anyhow::Result<SynthJob> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let wrapped = value.as_object().is_some_and(|o| o.contains_key("walk") || o.contains_key("session"));
    if wrapped {
        Ok(serde_json::from_value(value)?)
    } else {
        Ok(SynthJob { walk: serde_json::from_value(value)?, session: None })
    }
}

/// Sample time of grid index `k`; multiplying first keeps whole-ms
/// boundaries exact.
fn grid_ms(k: usize, rate_hz: f64) -> f64 {
    k as f64 * 1000.0 / rate_hz
}

pub fn build(job: &SynthJob) -> CliResult<(SessionRecording, StimulusSchedule)> {
    let walk = &job.walk;
    walk.validate().stage("synth")?;
    let Some(layout) = &job.session else {
        let (traj, _) = generate(walk).stage("synth")?;
        let n = traj.len();
        let samples: Vec<GazeSample> = traj
            .samples
            .iter()
            .enumerate()
            .map(|(k, s)| GazeSample::new(grid_ms(k, walk.rate_hz), s.x_px, s.y_px))
            .collect();
        let rec = SessionRecording { subject_id: "synth".into(), samples, nominal_rate_hz: walk.rate_hz };
        let sched = StimulusSchedule::new(vec![ScheduleEntry {
            image_id: "synth".into(),
            onset_ms: 0.0,
            duration_ms: grid_ms(n, walk.rate_hz),
        }]);
        return Ok((rec, sched));
    };

    if layout.images.is_empty() {
        return Err(anyhow::anyhow!("session lists no images")).stage("synth");
    }
    if !(layout.image_ms > 0.0 && layout.blank_ms >= 0.0) {
        return Err(anyhow::anyhow!("image_ms must be > 0 and blank_ms >= 0")).stage("synth");
    }
    let sched = StimulusSchedule::slideshow(layout.images.iter().cloned(), layout.image_ms, layout.blank_ms);
    let end_ms = sched.entries.last().map_or(0.0, ScheduleEntry::end_ms) + layout.blank_ms;
    let (cx, cy) = (walk.bounds[0] as f64 / 2.0, walk.bounds[1] as f64 / 2.0);

    // Per image: the grid indices that fall inside its window.
    let windows: Vec<(usize, usize)> = sched
        .entries
        .iter()
        .map(|e| {
            let first = (0..).find(|&k| grid_ms(k, walk.rate_hz) >= e.onset_ms).unwrap_or(0);
            let end = (first..).find(|&k| grid_ms(k, walk.rate_hz) >= e.end_ms()).unwrap_or(first);
            (first, end)
        })
        .collect();

    let total = (0..).find(|&k| grid_ms(k, walk.rate_hz) >= end_ms).unwrap_or(0);
    let mut samples: Vec<GazeSample> = (0..total)
        .map(|k| {
            let mut s = GazeSample::invalid(grid_ms(k, walk.rate_hz));
            s.x_px = cx;
            s.y_px = cy;
            s
        })
        .collect();
    for (i, &(first, end)) in windows.iter().enumerate() {
        let cfg = SynthConfig { seed: walk.seed.wrapping_add(i as u64), ..walk.clone() };
        let (traj, _) = generate_points(&cfg, end - first).stage("synth")?;
        for (slot, s) in samples[first..end].iter_mut().zip(&traj.samples) {
            *slot = GazeSample::new(slot.t_ms, s.x_px, s.y_px);
        }
    }
    let rec = SessionRecording { subject_id: layout.subject_id.clone(), samples, nominal_rate_hz: walk.rate_hz };
    Ok((rec, sched))
}

pub fn run(config: &Path, out_csv: &Path, seed: Option<u64>) -> CliResult<()> {
    require_file(config)?;
    let text =
        std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display())).stage("config")?;
    let mut job = parse_job(&text).with_context(|| format!("parsing {}", config.display())).stage("config")?;
    if let Some(seed) = seed {
        job.walk.seed = seed;
    }
    let (rec, sched) = build(&job)?;

    write_csv_recording(out_csv, &rec)?;
    let stem = out_csv.with_extension("");
    let echo = serde_json::to_string_pretty(&job).stage("output")?;
    write_file(&stem.with_extension("config.json"), echo.as_bytes())?;
    write_file(&stem.with_extension("schedule.json"), sched.to_json().as_bytes())?;
    log::info!("wrote {} samples to {}", rec.samples.len(), out_csv.display());
    Ok(())
}

//! `analyze`: ingest -> filter -> step/turn statistics -> fits -> report.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::Context;
use gazeforage::powerlaw::{bootstrap_ci, default_xmin_candidates, select_xmin_fit, FitRecord};
use gazeforage::stats::{Histogram, HistogramSpec, StepSeries, SCREEN_DIAGONAL_PX};
use gazeforage::{
    filter_invalid, fit_loglog_regression, fit_mle, histogram, pool_steps, segment_by_image, step_lengths,
    turning_angles, FilterReport, PowerLawFit, Trajectory, WalkRegime,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliResult, StageExt};
use crate::plot::{Chart, Mark, Series, Ticks};
use crate::{load_recording, load_schedule, write_file};

pub const REPORT_SCHEMA: u32 = 1;
pub const TURN_BINS: usize = 72;
const LOG_HIST_LO: f64 = 0.1;
const CI_LEVEL: f64 = 0.95;

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub per_image: bool,
    pub per_subject: bool,
    pub pooled: bool,
    pub xmin: Option<f64>,
    pub bins_per_decade: u32,
    pub bootstrap: usize,
    pub seed: u64,
    pub margin_px: f64,
    pub images_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptionsEcho {
    pub xmin: Option<f64>,
    pub bins_per_decade: u32,
    pub bootstrap: usize,
    pub ci_level: f64,
    pub seed: u64,
    pub margin_px: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesAnalysis {
    pub n_steps: usize,
    pub n_zero_steps: usize,
    pub n_turns: usize,
    pub steps_linear: Histogram,
    pub steps_log: Option<Histogram>,
    pub turns: Histogram,
    pub mle: Option<FitRecord>,
    pub loglog_regression: Option<FitRecord>,
    pub regime: Option<WalkRegime>,
    pub fit_errors: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub subject_id: String,
    pub image_id: String,
    pub n_samples: usize,
    pub filter: FilterReport,
    pub analysis: SeriesAnalysis,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupReport {
    pub key: String,
    pub n_trajectories: usize,
    pub analysis: SeriesAnalysis,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyPoint {
    pub image_id: String,
    pub entropy_bits: f64,
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropySection {
    pub images: Vec<EntropyPoint>,
    pub pearson_r: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema: u32,
    pub options: OptionsEcho,
    pub trajectories: Vec<TrajectoryReport>,
    pub per_image: Option<Vec<GroupReport>>,
    pub per_subject: Option<Vec<GroupReport>>,
    pub pooled: Option<GroupReport>,
    pub entropy: Option<EntropySection>,
}

/// Gap-aware steps and turns of one trajectory, or of a pool of them.
struct Measured {
    steps: StepSeries,
    turns: Vec<f64>,
}

fn measure(traj: &Trajectory) -> Measured {
    let steps = step_lengths(traj).unwrap_or_else(|_| StepSeries::default());
    let turns = turning_angles(traj).map(|t| t.angles).unwrap_or_default();
    Measured { steps, turns }
}

fn pool<'a>(items: impl IntoIterator<Item = &'a Measured>) -> Measured {
    let items: Vec<&Measured> = items.into_iter().collect();
    Measured {
        steps: pool_steps(items.iter().map(|m| &m.steps)),
        turns: items.iter().flat_map(|m| m.turns.iter().copied()).collect(),
    }
}

struct Fits {
    mle: Result<PowerLawFit, String>,
    regression: Result<PowerLawFit, String>,
    log_hist: Option<Histogram>,
}

fn fit_steps(positive: &[f64], opts: &AnalyzeOptions) -> Fits {
    let mle = match opts.xmin {
        Some(x) => fit_mle(positive, x).map_err(|e| format!("mle: {e}")),
        None => select_xmin_fit(positive, &default_xmin_candidates(positive)).map_err(|e| format!("mle: {e}")),
    }
    .and_then(|mut fit| {
        if opts.bootstrap > 0 {
            let ci = bootstrap_ci(positive, fit.x_min, opts.bootstrap, CI_LEVEL, opts.seed)
                .map_err(|e| format!("bootstrap: {e}"))?;
            fit.ci = Some(ci);
        }
        Ok(fit)
    });

    let max = positive.iter().copied().fold(0.0, f64::max);
    let log_hist = histogram(
        positive,
        &HistogramSpec::Logarithmic {
            bins_per_decade: opts.bins_per_decade,
            lo: LOG_HIST_LO,
            hi: max.max(SCREEN_DIAGONAL_PX),
        },
    )
    .ok();
    let x_min = match (&mle, opts.xmin) {
        (_, Some(x)) => Some(x),
        (Ok(fit), None) => Some(fit.x_min),
        (Err(_), None) => None,
    };
    let regression = match (&log_hist, x_min) {
        (Some(h), Some(x)) => fit_loglog_regression(h, x).map_err(|e| format!("loglog_regression: {e}")),
        _ => Err("loglog_regression: no cutoff available".to_string()),
    };
    Fits { mle, regression, log_hist }
}

fn analyse(m: &Measured, opts: &AnalyzeOptions) -> SeriesAnalysis {
    let positive = m.steps.positive();
    let fits = fit_steps(&positive, opts);
    let steps_linear = histogram(&m.steps.steps, &HistogramSpec::default_linear_steps()).expect("static spec");
    let turns = histogram(&m.turns, &HistogramSpec::turning_angles(TURN_BINS)).expect("static spec");
    let mut fit_errors = Vec::new();
    let mle = fits.mle.map_err(|e| fit_errors.push(e)).ok();
    let regression = fits.regression.map_err(|e| fit_errors.push(e)).ok();
    SeriesAnalysis {
        n_steps: m.steps.len(),
        n_zero_steps: m.steps.zero_count(),
        n_turns: m.turns.len(),
        steps_linear,
        steps_log: fits.log_hist,
        turns,
        regime: mle.as_ref().map(PowerLawFit::regime),
        mle: mle.map(|f| f.to_record()),
        loglog_regression: regression.map(|f| f.to_record()),
        fit_errors,
    }
}

/// Groups indices by key, preserving first-appearance order.
fn group_by<K: Ord + Clone>(keys: &[K]) -> Vec<(K, Vec<usize>)> {
    let mut order: Vec<K> = Vec::new();
    let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        groups
            .entry(k.clone())
            .or_insert_with(|| {
                order.push(k.clone());
                Vec::new()
            })
            .push(i);
    }
    order
        .into_iter()
        .map(|k| {
            let idx = groups.remove(&k).unwrap();
            (k, idx)
        })
        .collect()
}

pub struct AnalyzeOutput {
    pub report: AnalysisReport,
}

pub fn run(gaze: &[PathBuf], schedule: &Path, opts: &AnalyzeOptions, out_dir: &Path) -> CliResult<AnalyzeOutput> {
    let sched = load_schedule(schedule)?;
    let mut trajectories = Vec::new();
    for path in gaze {
        let rec = load_recording(path)?;
        let segs = segment_by_image(&rec, &sched)
            .with_context(|| format!("segmenting {}", path.display()))
            .stage("segment")?;
        trajectories.extend(segs);
    }

    let filtered: Vec<(Trajectory, FilterReport)> =
        trajectories.par_iter().map(|t| filter_invalid(t, opts.margin_px)).collect();
    let measured: Vec<Measured> = filtered.par_iter().map(|(t, _)| measure(t)).collect();

    let per_traj: Vec<TrajectoryReport> = filtered
        .par_iter()
        .zip(measured.par_iter())
        .map(|((t, report), m)| TrajectoryReport {
            subject_id: t.subject_id.clone(),
            image_id: t.image_id.clone(),
            n_samples: t.len(),
            filter: *report,
            analysis: analyse(m, opts),
        })
        .collect();

    let grouped = |keys: Vec<String>| -> Vec<GroupReport> {
        group_by(&keys)
            .into_par_iter()
            .map(|(key, idx)| GroupReport {
                key,
                n_trajectories: idx.len(),
                analysis: analyse(&pool(idx.iter().map(|&i| &measured[i])), opts),
            })
            .collect()
    };

    let need_images = opts.per_image || opts.images_dir.is_some();
    let per_image = need_images.then(|| grouped(filtered.iter().map(|(t, _)| t.image_id.clone()).collect()));
    let per_subject = opts.per_subject.then(|| grouped(filtered.iter().map(|(t, _)| t.subject_id.clone()).collect()));

    let pooled_measure = pool(measured.iter());
    let pooled =
        GroupReport { key: "pooled".into(), n_trajectories: measured.len(), analysis: analyse(&pooled_measure, opts) };
    if pooled.analysis.mle.is_none() {
        return Err(anyhow::anyhow!("{}", pooled.analysis.fit_errors.join("; "))).stage("fit");
    }

    let entropy = match &opts.images_dir {
        None => None,
        Some(dir) => Some(entropy_section(
            dir,
            &sched.entries.iter().map(|e| e.image_id.clone()).collect::<Vec<_>>(),
            per_image.as_deref().unwrap_or(&[]),
        )?),
    };

    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display())).stage("output")?;
    write_plots(&pooled.analysis, &pooled_measure, out_dir)?;

    let no_flags = !(opts.per_image || opts.per_subject || opts.pooled);
    let report = AnalysisReport {
        schema: REPORT_SCHEMA,
        options: OptionsEcho {
            xmin: opts.xmin,
            bins_per_decade: opts.bins_per_decade,
            bootstrap: opts.bootstrap,
            ci_level: CI_LEVEL,
            seed: opts.seed,
            margin_px: opts.margin_px,
        },
        trajectories: per_traj,
        per_image: if opts.per_image { per_image } else { None },
        per_subject,
        pooled: (opts.pooled || no_flags).then_some(pooled),
        entropy,
    };
    let json = serde_json::to_string_pretty(&report).stage("output")?;
    write_file(&out_dir.join("report.json"), json.as_bytes())?;
    Ok(AnalyzeOutput { report })
}

fn entropy_section(dir: &Path, image_ids: &[String], per_image: &[GroupReport]) -> CliResult<EntropySection> {
    let mut images = Vec::new();
    for id in image_ids {
        let Some(path) = ["png", "jpg", "jpeg"].iter().map(|ext| dir.join(format!("{id}.{ext}"))).find(|p| p.is_file())
        else {
            log::warn!("no stimulus image for `{id}` in {}", dir.display());
            continue;
        };
        let bits = crate::entropy_of_file(&path)?;
        let mu = per_image.iter().find(|g| &g.key == id).and_then(|g| g.analysis.mle.as_ref()).map(|f| f.mu);
        images.push(EntropyPoint { image_id: id.clone(), entropy_bits: bits, mu });
    }
    let pairs: Vec<(f64, f64)> = images.iter().filter_map(|p| p.mu.map(|mu| (p.entropy_bits, mu))).collect();
    let pearson_r = gazeforage::pearson_correlation(&pairs).ok();
    Ok(EntropySection { images, pearson_r })
}

fn write_plots(a: &SeriesAnalysis, m: &Measured, out_dir: &Path) -> CliResult<()> {
    let lin = &a.steps_linear;
    let mut chart = Chart::new("Step length distribution", "step length (px)", "count");
    let mut points: Vec<(f64, f64)> = lin.centers().into_iter().zip(lin.counts.iter().map(|&c| c as f64)).collect();
    let last_nonzero = lin.counts.iter().rposition(|&c| c > 0).unwrap_or(0);
    points.truncate(last_nonzero + 1);
    chart.series.push(Series { name: "steps".into(), mark: Mark::Line, color: "steelblue", points });
    if let Some(mode) = lin.mode_bin() {
        chart.notes.push(format!("mode bin [{}, {}) px", lin.edges[mode], lin.edges[mode + 1]));
    }
    write_file(&out_dir.join("steps_linear.svg"), chart.render().as_bytes())?;

    let mut chart = Chart::new("Step length distribution (log-log)", "step length (px)", "density (count / px)");
    chart.x_ticks = Ticks::Decades;
    chart.y_ticks = Ticks::Decades;
    if let Some(h) = &a.steps_log {
        let pts: Vec<(f64, f64)> = h
            .centers()
            .iter()
            .zip(h.widths())
            .zip(&h.counts)
            .filter(|(_, &c)| c > 0)
            .map(|((&x, w), &c)| (x.log10(), (c as f64 / w).log10()))
            .collect();
        chart.series.push(Series { name: "density".into(), mark: Mark::Points, color: "black", points: pts.clone() });
        if let Some(fit) = &a.loglog_regression {
            let tail: Vec<(f64, f64)> = h
                .centers()
                .iter()
                .zip(h.widths())
                .zip(&h.counts)
                .filter(|((&x, _), &c)| c > 0 && x >= fit.x_min)
                .map(|((&x, w), &c)| (x.ln(), (c as f64 / w).ln()))
                .collect();
            // intercept of the fitted line in natural-log space
            let n = tail.len() as f64;
            let intercept =
                tail.iter().map(|p| p.1).sum::<f64>() / n + fit.mu * tail.iter().map(|p| p.0).sum::<f64>() / n;
            let (x0, x1) = (fit.x_min.log10(), tail.last().map_or(fit.x_min, |p| p.0.exp()).log10());
            let line =
                [x0, x1].map(|lx| (lx, (intercept - fit.mu * lx * std::f64::consts::LN_10) / std::f64::consts::LN_10));
            chart.series.push(Series { name: "fit".into(), mark: Mark::Line, color: "crimson", points: line.to_vec() });
            chart.notes.push(format!("log-log slope {:.3} (mu = {:.3})", -fit.mu, fit.mu));
        }
        if let Some(fit) = &a.mle {
            chart.notes.push(format!("MLE mu = {:.3}, x_min = {:.2} px", fit.mu, fit.x_min));
        }
    }
    write_file(&out_dir.join("steps_loglog.svg"), chart.render().as_bytes())?;

    let t = &a.turns;
    let mut chart = Chart::new("Turning angle distribution", "turning angle (rad)", "count");
    chart.x_range = Some((-PI, PI));
    let pts = t.centers().into_iter().zip(t.counts.iter().map(|&c| c as f64)).collect();
    chart.series.push(Series { name: "turns".into(), mark: Mark::Bars, color: "seagreen", points: pts });
    chart.notes.push(format!("{} turns", m.turns.len()));
    write_file(&out_dir.join("turns.svg"), chart.render().as_bytes())?;
    Ok(())
}

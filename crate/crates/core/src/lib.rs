//! Levy-walk analysis of eye-gaze trajectories.
//!
//! The crate is organised as a pipeline:
//!
//! * [`ingest`] parses canonical gaze CSV recordings and cuts them into
//!   per-image [`Trajectory`] values using a stimulus schedule.
//! * [`stats`] turns trajectories into step-length and turning-angle series
//!   and bins them into linear or logarithmic histograms.
//! * [`powerlaw`] estimates the tail exponent `mu` of step-length
//!   distributions (log-log regression and maximum likelihood), selects the
//!   lower cutoff, bootstraps confidence intervals and classifies the walk.
//! * [`entropy`] computes Shannon entropy of stimulus images.
//! * [`synth`] generates bounded two-phase Levy walks that are statistically
//!   matched to gaze data.
//! * [`heatmap`] builds Gaussian fixation heatmaps and compares them with
//!   BCE / MSE / KL metrics.

pub mod entropy;
pub mod heatmap;
pub mod ingest;
mod numeric;
pub mod powerlaw;
pub mod stats;
pub mod synth;

pub use entropy::{image_entropy, luminance_convert, pearson_correlation, EntropyResult, GrayImage, RgbImage};
pub use heatmap::{build_heatmap, composite_loss, Heatmap, LossWeights, Normalization};
pub use ingest::{
    filter_invalid, parse_recording, segment_by_image, FilterReport, GazeSample, RecordFormat, ScheduleEntry,
    SessionRecording, StimulusSchedule, Trajectory,
};
pub use powerlaw::{classify, fit_loglog_regression, fit_mle, FitMethod, PowerLawFit, WalkRegime};
pub use stats::{
    histogram, pool_steps, step_lengths, turning_angles, Histogram, HistogramSpec, StepSeries, TurnSeries,
};
pub use synth::{generate, sample_step, sample_turn, AngleModel, FixationModel, SynthConfig};

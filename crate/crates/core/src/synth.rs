//! Bounded two-phase Levy walks.
//!
//! A walk alternates fixation phases, made of a geometric number of
//! half-normal micro-steps in uniform directions, with single saccades whose
//! length follows a (possibly truncated) Pareto law `p(l) ~ l^-mu` and whose
//! heading turns relative to the previous saccade according to an
//! [`AngleModel`].
//!
//! Every draw comes from one of three ChaCha20 streams (saccade lengths,
//! micro-steps, turns) derived from the configured seed, so a config fully
//! determines the output.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{GazeSample, Trajectory, DEFAULT_RATE_HZ, DEFAULT_SCREEN_H, DEFAULT_SCREEN_W};
use crate::stats::{SourceSpan, StepSeries};

/// Placement attempts before a step falls back to reflecting off the walls.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 100;

const STREAM_SACCADE: u64 = 0;
const STREAM_MICRO: u64 = 1;
const STREAM_TURN: u64 = 2;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("exponent mu must exceed 1, got {0}")]
    InvalidExponent(f64),
    #[error("step bounds invalid: l_min = {l_min}, l_max = {l_max:?}")]
    InvalidStepBounds { l_min: f64, l_max: Option<f64> },
    #[error("uniform variate {0} outside [0, 1)")]
    InvalidUniform(f64),
    #[error("invalid synthesis config: {0}")]
    InvalidConfig(String),
    #[error("bounds {w}x{h} are too small for steps of at least {l_min} px")]
    InfeasibleBounds { w: u32, h: u32, l_min: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixationModel {
    pub micro_sigma_px: f64,
    pub dwell_geom_p: f64,
}

impl Default for FixationModel {
    fn default() -> Self {
        Self { micro_sigma_px: 3.0, dwell_geom_p: 0.05 }
    }
}

/// Mixture of wrapped Gaussians centred on 0 (straight), pi (reversal)
/// and +-pi/2 (the remaining mass, split evenly).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AngleModel {
    pub p_straight: f64,
    pub p_reverse: f64,
    pub sigma_rad: f64,
}

impl Default for AngleModel {
    fn default() -> Self {
        Self { p_straight: 0.3, p_reverse: 0.1, sigma_rad: 0.15 }
    }
}

impl AngleModel {
    pub fn validate(&self) -> Result<(), SynthError> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !(prob(self.p_straight) && prob(self.p_reverse) && self.p_straight + self.p_reverse <= 1.0) {
            return Err(SynthError::InvalidConfig("angle probabilities must lie in [0,1] and sum to <= 1".into()));
        }
        if !(self.sigma_rad.is_finite() && self.sigma_rad >= 0.0) {
            return Err(SynthError::InvalidConfig("sigma_rad must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub mu: f64,
    pub l_min: f64,
    pub l_max: Option<f64>,
    /// Number of saccades to emit.
    pub n_steps: usize,
    /// Screen `[width, height]` in px.
    pub bounds: [u32; 2],
    /// `None` disables the fixation phase entirely.
    pub fixation_model: Option<FixationModel>,
    pub angle_model: AngleModel,
    pub rate_hz: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            mu: 2.0,
            l_min: 20.0,
            l_max: Some(2000.0),
            n_steps: 200,
            bounds: [DEFAULT_SCREEN_W, DEFAULT_SCREEN_H],
            fixation_model: Some(FixationModel::default()),
            angle_model: AngleModel::default(),
            rate_hz: DEFAULT_RATE_HZ,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.mu.is_finite() && self.mu > 1.0) {
            return Err(SynthError::InvalidExponent(self.mu));
        }
        check_step_bounds(self.l_min, self.l_max)?;
        if let Some(f) = &self.fixation_model {
            if !(f.micro_sigma_px.is_finite() && f.micro_sigma_px >= 0.0) {
                return Err(SynthError::InvalidConfig("micro_sigma_px must be finite and >= 0".into()));
            }
            if !(f.dwell_geom_p > 0.0 && f.dwell_geom_p <= 1.0) {
                return Err(SynthError::InvalidConfig("dwell_geom_p must lie in (0, 1]".into()));
            }
        }
        self.angle_model.validate()?;
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(SynthError::InvalidConfig("rate_hz must be > 0".into()));
        }
        let [w, h] = self.bounds;
        if w == 0 || h == 0 || (w as f64).hypot(h as f64) <= self.l_min {
            return Err(SynthError::InfeasibleBounds { w, h, l_min: self.l_min });
        }
        Ok(())
    }
}

fn check_step_bounds(l_min: f64, l_max: Option<f64>) -> Result<(), SynthError> {
    let ok = l_min.is_finite() && l_min > 0.0 && l_max.is_none_or(|m| m > l_min && !m.is_nan());
    if ok {
        Ok(())
    } else {
        Err(SynthError::InvalidStepBounds { l_min, l_max })
    }
}

/// Inverse-CDF draw from `p(l) ~ l^-mu` on `[l_min, l_max]` (or
/// `[l_min, inf)` when `l_max` is `None`).
pub fn sample_step(mu: f64, l_min: f64, l_max: Option<f64>, u: f64) -> Result<f64, SynthError> {
    if !(mu.is_finite() && mu > 1.0) {
        return Err(SynthError::InvalidExponent(mu));
    }
    check_step_bounds(l_min, l_max)?;
    if !(0.0..1.0).contains(&u) {
        return Err(SynthError::InvalidUniform(u));
    }
    Ok(pareto_inverse(mu, l_min, l_max, u))
}

fn pareto_inverse(mu: f64, l_min: f64, l_max: Option<f64>, u: f64) -> f64 {
    let k = 1.0 - mu;
    match l_max {
        None => l_min * (1.0 - u).powf(1.0 / k),
        Some(l_max) if l_max.is_infinite() => l_min * (1.0 - u).powf(1.0 / k),
        Some(l_max) => {
            let tail = 1.0 - (l_max / l_min).powf(k);
            (l_min * (1.0 - u * tail).powf(1.0 / k)).min(l_max)
        }
    }
}

/// Maps any angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

pub fn sample_turn<R: Rng + ?Sized>(model: &AngleModel, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let center = if u < model.p_straight {
        0.0
    } else if u < model.p_straight + model.p_reverse {
        PI
    } else if rng.random_bool(0.5) {
        FRAC_PI_2
    } else {
        -FRAC_PI_2
    };
    if model.sigma_rad == 0.0 {
        return wrap_angle(center);
    }
    let z: f64 = StandardNormal.sample(rng);
    wrap_angle(center + model.sigma_rad * z)
}

fn reflect_into(v: f64, extent: f64) -> f64 {
    let r = v.rem_euclid(2.0 * extent);
    if r > extent {
        2.0 * extent - r
    } else {
        r
    }
}

struct Walker<'a> {
    cfg: &'a SynthConfig,
    width: f64,
    height: f64,
    pos: (f64, f64),
    heading: f64,
    saccade_rng: ChaCha20Rng,
    micro_rng: ChaCha20Rng,
    turn_rng: ChaCha20Rng,
    points: Vec<(f64, f64)>,
    /// (index of the saccade's end point, realized length)
    saccades: Vec<(usize, f64)>,
}

impl<'a> Walker<'a> {
    fn new(cfg: &'a SynthConfig) -> Self {
        let stream = |s: u64| {
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            rng.set_stream(s);
            rng
        };
        let (width, height) = (cfg.bounds[0] as f64, cfg.bounds[1] as f64);
        let mut turn_rng = stream(STREAM_TURN);
        let heading = turn_rng.random_range(-PI..PI);
        let pos = (width / 2.0, height / 2.0);
        Self {
            cfg,
            width,
            height,
            pos,
            heading,
            saccade_rng: stream(STREAM_SACCADE),
            micro_rng: stream(STREAM_MICRO),
            turn_rng,
            points: vec![pos],
            saccades: Vec::new(),
        }
    }

    fn inside(&self, p: (f64, f64)) -> bool {
        (0.0..=self.width).contains(&p.0) && (0.0..=self.height).contains(&p.1)
    }

    fn endpoint(&self, heading: f64, len: f64) -> (f64, f64) {
        (self.pos.0 + len * heading.cos(), self.pos.1 + len * heading.sin())
    }

    /// Last resort once placement attempts run out: the step is traced with
    /// specular reflections off the screen edges.
    fn reflected(&self, p: (f64, f64)) -> (f64, f64) {
        (reflect_into(p.0, self.width), reflect_into(p.1, self.height))
    }

    fn advance(&mut self, to: (f64, f64)) -> f64 {
        let len = (to.0 - self.pos.0).hypot(to.1 - self.pos.1);
        self.pos = to;
        self.points.push(to);
        len
    }

    fn fixation(&mut self) {
        let Some(model) = self.cfg.fixation_model else { return };
        let dwell = Geometric::new(model.dwell_geom_p).expect("validated dwell probability");
        let k = dwell.sample(&mut self.micro_rng);
        for _ in 0..k {
            let mut target = self.pos;
            for attempt in 0..MAX_PLACEMENT_ATTEMPTS {
                let z: f64 = StandardNormal.sample(&mut self.micro_rng);
                let len = (model.micro_sigma_px * z).abs();
                let dir = self.micro_rng.random_range(-PI..PI);
                target = self.endpoint(dir, len);
                if self.inside(target) {
                    break;
                }
                if attempt + 1 == MAX_PLACEMENT_ATTEMPTS {
                    target = self.reflected(target);
                }
            }
            self.advance(target);
        }
    }

    fn saccade(&mut self) {
        let u: f64 = self.saccade_rng.random();
        let len = pareto_inverse(self.cfg.mu, self.cfg.l_min, self.cfg.l_max, u);
        let mut heading = self.heading;
        let mut target = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            heading = wrap_angle(self.heading + sample_turn(&self.cfg.angle_model, &mut self.turn_rng));
            let p = self.endpoint(heading, len);
            if self.inside(p) {
                target = Some(p);
                break;
            }
        }
        let target = target.unwrap_or_else(|| {
            let p = self.reflected(self.endpoint(heading, len));
            let (dx, dy) = (p.0 - self.pos.0, p.1 - self.pos.1);
            if dx != 0.0 || dy != 0.0 {
                heading = dy.atan2(dx);
            }
            p
        });
        self.heading = heading;
        let realized = self.advance(target);
        self.saccades.push((self.points.len() - 1, realized));
    }

    fn into_outputs(self, n_points: usize) -> (Trajectory, StepSeries) {
        let dt = 1000.0 / self.cfg.rate_hz;
        let samples: Vec<GazeSample> = self
            .points
            .iter()
            .take(n_points)
            .enumerate()
            .map(|(i, &(x, y))| GazeSample::new(i as f64 * dt, x, y))
            .collect();
        let steps: Vec<f64> = self.saccades.iter().filter(|(end, _)| *end < n_points).map(|&(_, l)| l).collect();
        let traj = Trajectory::new("synth", "synth", samples).with_screen(self.cfg.bounds[0], self.cfg.bounds[1]);
        let len = steps.len();
        let series = StepSeries {
            steps,
            sources: vec![SourceSpan { subject_id: traj.subject_id.clone(), image_id: traj.image_id.clone(), len }],
        };
        (traj, series)
    }
}

/// Runs the walk until `config.n_steps` saccades have been emitted.
///
/// Returns the full trajectory (fixational micro-steps included) and the
/// realized saccade lengths.
pub fn generate(config: &SynthConfig) -> Result<(Trajectory, StepSeries), SynthError> {
    config.validate()?;
    let mut walker = Walker::new(config);
    for _ in 0..config.n_steps {
        walker.fixation();
        walker.saccade();
    }
    let n = walker.points.len();
    Ok(walker.into_outputs(n))
}

/// Runs the walk until it holds exactly `n_points` samples, ignoring
/// `n_steps`. Saccades cut off by the truncation are dropped from the
/// returned series.
pub fn generate_points(config: &SynthConfig, n_points: usize) -> Result<(Trajectory, StepSeries), SynthError> {
    config.validate()?;
    let mut walker = Walker::new(config);
    while walker.points.len() < n_points {
        walker.fixation();
        walker.saccade();
    }
    Ok(walker.into_outputs(n_points))
}

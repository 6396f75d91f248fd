//! Power-law tail fitting for step-length distributions.
//!
//! `mu` is always the exponent of the density, `p(l) ~ l^-mu`, so it equals
//! the negated slope of a log-log frequency plot once counts are divided by
//! bin width.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{least_squares, quantile_sorted};
use crate::stats::{Histogram, Scale};

/// Smallest tail accepted by [`select_xmin`].
pub const MIN_TAIL: usize = 50;
pub const MIN_BOOTSTRAP: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("fewer than 3 non-empty histogram bins at or above x_min")]
    InsufficientTailBins,
    #[error("regression requires a logarithmic histogram")]
    NotLogarithmic,
    #[error("x_min must be finite and > 0, got {0}")]
    InvalidXmin(f64),
    #[error("tail above x_min has {0} samples; at least 2 are needed")]
    EmptyTail(usize),
    #[error("all tail samples equal x_min; exponent undefined")]
    DegenerateTail,
    #[error("no candidate x_min leaves a tail of at least {MIN_TAIL} samples")]
    NoViableCandidate,
    #[error("bootstrap needs B >= {MIN_BOOTSTRAP} and 0 < level < 1")]
    InvalidBootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    LoglogRegression,
    Mle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkRegime {
    Ballistic,
    Levy,
    GaussianLike,
}

impl WalkRegime {
    pub fn from_mu(mu: f64) -> Self {
        if mu <= 1.0 {
            WalkRegime::Ballistic
        } else if mu <= 3.0 {
            WalkRegime::Levy
        } else {
            WalkRegime::GaussianLike
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawFit {
    pub mu: f64,
    pub x_min: f64,
    pub method: FitMethod,
    pub n_tail: usize,
    pub ks_stat: f64,
    pub ci: Option<(f64, f64)>,
}

impl PowerLawFit {
    pub fn regime(&self) -> WalkRegime {
        classify(self)
    }

    pub fn to_record(&self) -> FitRecord {
        FitRecord {
            mu: self.mu,
            x_min: self.x_min,
            method: self.method,
            n_tail: self.n_tail,
            ks: self.ks_stat,
            ci: self.ci.map(|(lo, hi)| [lo, hi]),
            regime: self.regime(),
        }
    }
}

/// JSON form of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub mu: f64,
    pub x_min: f64,
    pub method: FitMethod,
    pub n_tail: usize,
    pub ks: f64,
    pub ci: Option<[f64; 2]>,
    pub regime: WalkRegime,
}

pub fn classify(fit: &PowerLawFit) -> WalkRegime {
    WalkRegime::from_mu(fit.mu)
}

fn check_xmin(x_min: f64) -> Result<(), FitError> {
    if x_min.is_finite() && x_min > 0.0 {
        Ok(())
    } else {
        Err(FitError::InvalidXmin(x_min))
    }
}

/// CDF of the continuous power law above `x_min`.
fn pareto_cdf(x: f64, x_min: f64, mu: f64) -> f64 {
    1.0 - (x / x_min).powf(1.0 - mu)
}

/// Least-squares fit of `log(count / width)` against `log(center)` over the
/// non-empty bins whose center is at least `x_min`.
pub fn fit_loglog_regression(hist: &Histogram, x_min: f64) -> Result<PowerLawFit, FitError> {
    check_xmin(x_min)?;
    if hist.scale != Scale::Logarithmic {
        return Err(FitError::NotLogarithmic);
    }
    let centers = hist.centers();
    let widths = hist.widths();
    let tail: Vec<usize> = (0..hist.counts.len()).filter(|&i| centers[i] >= x_min).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = tail
        .iter()
        .filter(|&&i| hist.counts[i] > 0)
        .map(|&i| (centers[i].ln(), (hist.counts[i] as f64 / widths[i]).ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(FitError::InsufficientTailBins);
    }
    let (_, slope) = least_squares(&xs, &ys);
    let mu = -slope;

    let n_tail: u64 = tail.iter().map(|&i| hist.counts[i]).sum();
    let ks_stat = binned_ks(hist, &tail, n_tail, mu);
    Ok(PowerLawFit { mu, x_min, method: FitMethod::LoglogRegression, n_tail: n_tail as usize, ks_stat, ci: None })
}

/// KS distance evaluated at the upper edges of the tail bins, with the
/// fitted law anchored at the lower edge of the first tail bin.
fn binned_ks(hist: &Histogram, tail: &[usize], n_tail: u64, mu: f64) -> f64 {
    if mu <= 1.0 || n_tail == 0 {
        return 1.0;
    }
    let anchor = hist.edges[tail[0]];
    let mut cum = 0u64;
    let mut d: f64 = 0.0;
    for &i in tail {
        cum += hist.counts[i];
        let emp = cum as f64 / n_tail as f64;
        d = d.max((emp - pareto_cdf(hist.edges[i + 1], anchor, mu)).abs());
    }
    d.clamp(0.0, 1.0)
}

/// Continuous power-law maximum-likelihood fit on the samples `>= x_min`.
pub fn fit_mle(steps: &[f64], x_min: f64) -> Result<PowerLawFit, FitError> {
    check_xmin(x_min)?;
    let mut tail: Vec<f64> = steps.iter().copied().filter(|&l| l >= x_min && l.is_finite()).collect();
    tail.sort_by(f64::total_cmp);
    fit_sorted_tail(&tail, x_min)
}

fn mle_exponent(tail: &[f64], x_min: f64) -> Result<f64, FitError> {
    if tail.len() < 2 {
        return Err(FitError::EmptyTail(tail.len()));
    }
    let log_sum: f64 = tail.iter().map(|&l| (l / x_min).ln()).sum();
    if log_sum <= 0.0 {
        return Err(FitError::DegenerateTail);
    }
    Ok(1.0 + tail.len() as f64 / log_sum)
}

fn fit_sorted_tail(tail: &[f64], x_min: f64) -> Result<PowerLawFit, FitError> {
    let mu = mle_exponent(tail, x_min)?;
    let n = tail.len() as f64;
    let ks_stat = tail
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let cdf = pareto_cdf(l, x_min, mu);
            (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max)
        .clamp(0.0, 1.0);
    Ok(PowerLawFit { mu, x_min, method: FitMethod::Mle, n_tail: tail.len(), ks_stat, ci: None })
}

/// Empirical 50th..99th percentiles of the positive steps, deduplicated.
pub fn default_xmin_candidates(steps: &[f64]) -> Vec<f64> {
    let mut pos: Vec<f64> = steps.iter().copied().filter(|&s| s > 0.0 && s.is_finite()).collect();
    if pos.is_empty() {
        return Vec::new();
    }
    pos.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = (50..=99).map(|p| quantile_sorted(&pos, p as f64 / 100.0)).collect();
    out.dedup();
    out
}

/// Picks the candidate cutoff whose MLE fit has the smallest KS distance.
/// Candidates leaving fewer than [`MIN_TAIL`] samples are ignored; ties go
/// to the smaller cutoff.
pub fn select_xmin(steps: &[f64], candidates: &[f64]) -> Result<f64, FitError> {
    select_xmin_fit(steps, candidates).map(|f| f.x_min)
}

pub fn select_xmin_fit(steps: &[f64], candidates: &[f64]) -> Result<PowerLawFit, FitError> {
    let mut sorted: Vec<f64> = steps.iter().copied().filter(|l| l.is_finite() && *l > 0.0).collect();
    sorted.sort_by(f64::total_cmp);
    let mut cands: Vec<f64> = candidates.iter().copied().filter(|c| c.is_finite() && *c > 0.0).collect();
    cands.sort_by(f64::total_cmp);
    cands.dedup();

    let mut best: Option<PowerLawFit> = None;
    for x_min in cands {
        let start = sorted.partition_point(|&l| l < x_min);
        let tail = &sorted[start..];
        if tail.len() < MIN_TAIL {
            continue;
        }
        let Ok(fit) = fit_sorted_tail(tail, x_min) else { continue };
        if best.as_ref().is_none_or(|b| fit.ks_stat < b.ks_stat) {
            best = Some(fit);
        }
    }
    best.ok_or(FitError::NoViableCandidate)
}

/// Percentile bootstrap interval for the MLE exponent at fixed `x_min`.
///
/// Resample `b` draws from its own ChaCha stream keyed by `(seed, b)`, so
/// the interval does not depend on evaluation order or thread count.
pub fn bootstrap_ci(
    steps: &[f64],
    x_min: f64,
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64), FitError> {
    if resamples < MIN_BOOTSTRAP || !(level > 0.0 && level < 1.0) {
        return Err(FitError::InvalidBootstrap);
    }
    check_xmin(x_min)?;
    let tail: Vec<f64> = steps.iter().copied().filter(|&l| l >= x_min && l.is_finite()).collect();
    mle_exponent(&tail, x_min)?;

    let one = |b: usize| -> f64 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let n = tail.len();
        let log_sum: f64 = (0..n).map(|_| (tail[rng.random_range(0..n)] / x_min).ln()).sum();
        if log_sum > 0.0 {
            1.0 + n as f64 / log_sum
        } else {
            f64::INFINITY
        }
    };

    #[cfg(feature = "parallel")]
    let mut estimates: Vec<f64> = {
        use rayon::prelude::*;
        (0..resamples).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let mut estimates: Vec<f64> = (0..resamples).map(one).collect();

    estimates.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&estimates, alpha), quantile_sorted(&estimates, 1.0 - alpha)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn closed_form_mle() {
        let fit = fit_mle(&[3.0 * E, 3.0 * E, 3.0 * E, 3.0 * E], 3.0).unwrap();
        assert!((fit.mu - 2.0).abs() < 1e-15, "{}", fit.mu);
        assert_eq!(fit.n_tail, 4);
    }

    #[test]
    fn mle_errors() {
        assert_eq!(fit_mle(&[1.0, 1.0, 1.0], 1.0).unwrap_err(), FitError::DegenerateTail);
        assert_eq!(fit_mle(&[0.5, 5.0], 1.0).unwrap_err(), FitError::EmptyTail(1));
        assert_eq!(fit_mle(&[], 1.0).unwrap_err(), FitError::EmptyTail(0));
        assert!(matches!(fit_mle(&[1.0, 2.0], 0.0), Err(FitError::InvalidXmin(_))));
    }

    #[test]
    fn regime_boundaries() {
        assert_eq!(WalkRegime::from_mu(2.38), WalkRegime::Levy);
        assert_eq!(WalkRegime::from_mu(3.49), WalkRegime::GaussianLike);
        assert_eq!(WalkRegime::from_mu(1.0), WalkRegime::Ballistic);
        assert_eq!(WalkRegime::from_mu(0.5), WalkRegime::Ballistic);
        assert_eq!(WalkRegime::from_mu(3.0), WalkRegime::Levy);
        assert_eq!(WalkRegime::from_mu(3.0 + 1e-9), WalkRegime::GaussianLike);
    }

    #[test]
    fn single_candidate_selection() {
        let steps: Vec<f64> = (1..=200).map(|i| 1.0 + i as f64 * 0.37).collect();
        assert_eq!(select_xmin(&steps, &[2.0]).unwrap(), 2.0);
        assert_eq!(select_xmin(&steps, &[1000.0]).unwrap_err(), FitError::NoViableCandidate);
    }

    #[test]
    fn bootstrap_preconditions() {
        let steps: Vec<f64> = (1..=500).map(|i| 1.0 + i as f64).collect();
        assert_eq!(bootstrap_ci(&steps, 1.0, 1, 0.95, 0).unwrap_err(), FitError::InvalidBootstrap);
        assert_eq!(bootstrap_ci(&steps, 1.0, 200, 1.0, 0).unwrap_err(), FitError::InvalidBootstrap);
        assert_eq!(bootstrap_ci(&[1.0, 1.0], 1.0, 200, 0.9, 0).unwrap_err(), FitError::DegenerateTail);
    }

    #[test]
    fn record_json_shape() {
        let fit = PowerLawFit {
            mu: 2.5,
            x_min: 4.0,
            method: FitMethod::LoglogRegression,
            n_tail: 10,
            ks_stat: 0.1,
            ci: Some((2.0, 3.0)),
        };
        let v = serde_json::to_value(fit.to_record()).unwrap();
        assert_eq!(v["method"], "loglog_regression");
        assert_eq!(v["regime"], "levy");
        assert_eq!(v["ci"][1], 3.0);
        assert_eq!(v["ks"], 0.1);
        let fit = PowerLawFit { mu: 3.49, ci: None, ..fit };
        let v = serde_json::to_value(fit.to_record()).unwrap();
        assert_eq!(v["regime"], "gaussian_like");
        assert!(v["ci"].is_null());
    }

    #[test]
    fn regression_requires_log_scale() {
        let h = crate::stats::histogram(
            &[1.0, 2.0],
            &crate::stats::HistogramSpec::Linear { bin_width: 1.0, lo: 0.0, hi: 4.0 },
        )
        .unwrap();
        assert_eq!(fit_loglog_regression(&h, 1.0).unwrap_err(), FitError::NotLogarithmic);
    }
}

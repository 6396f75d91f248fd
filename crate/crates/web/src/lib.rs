//! wasm-bindgen bindings for the browser demo in `www/`.
//!
//! Each export is a thin wrapper over a plain Rust function so the logic can
//! be tested natively; errors cross the boundary as JS exceptions.

use gazeforage::powerlaw::{default_xmin_candidates, select_xmin_fit};
use gazeforage::{build_heatmap, histogram, turning_angles, HistogramSpec, SynthConfig, Trajectory};
use wasm_bindgen::prelude::*;

/// Result of [`synthesize`]: the walk plus the power-law fit of its
/// saccade lengths.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Walk {
    xs: Vec<f64>,
    ys: Vec<f64>,
    mu_hat: f64,
    x_min: f64,
    regime: String,
}

#[wasm_bindgen]
impl Walk {
    pub fn xs(&self) -> Vec<f64> {
        self.xs.clone()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.ys.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn mu_hat(&self) -> f64 {
        self.mu_hat
    }

    #[wasm_bindgen(getter)]
    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    #[wasm_bindgen(getter)]
    pub fn regime(&self) -> String {
        self.regime.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn n_points(&self) -> usize {
        self.xs.len()
    }
}

pub fn synthesize_walk(mu: f64, n_steps: usize, fixations: bool, seed: u64) -> Result<Walk, String> {
    let mut cfg = SynthConfig { mu, n_steps, seed, ..SynthConfig::default() };
    if !fixations {
        cfg.fixation_model = None;
    }
    let (traj, saccades) = gazeforage::generate(&cfg).map_err(|e| e.to_string())?;
    let candidates = default_xmin_candidates(&saccades.steps);
    let fit = select_xmin_fit(&saccades.steps, &candidates).map_err(|e| e.to_string())?;
    let regime = regime_name(fit.regime());
    let (xs, ys) = traj.points().unzip();
    Ok(Walk { xs, ys, mu_hat: fit.mu, x_min: fit.x_min, regime })
}

fn regime_name(regime: gazeforage::WalkRegime) -> String {
    match regime {
        gazeforage::WalkRegime::Ballistic => "ballistic",
        gazeforage::WalkRegime::Levy => "levy",
        gazeforage::WalkRegime::GaussianLike => "gaussian_like",
    }
    .into()
}

fn zip_points(xs: &[f64], ys: &[f64]) -> Result<Vec<(f64, f64)>, String> {
    if xs.len() != ys.len() {
        return Err(format!("xs has {} values but ys has {}", xs.len(), ys.len()));
    }
    Ok(xs.iter().copied().zip(ys.iter().copied()).collect())
}

/// Probability heatmap, row-major, `out_w * out_h` cells.
pub fn heatmap_values(
    xs: &[f64],
    ys: &[f64],
    screen_w: u32,
    screen_h: u32,
    sigma_px: f64,
    out_w: u32,
    out_h: u32,
) -> Result<Vec<f64>, String> {
    let points = zip_points(xs, ys)?;
    let map = build_heatmap(&points, (screen_w, screen_h), sigma_px, (out_w, out_h)).map_err(|e| e.to_string())?;
    Ok(map.values().to_vec())
}

/// Counts of turning angles in `bins` equal bins over `[-pi, pi]`.
pub fn turn_counts(xs: &[f64], ys: &[f64], bins: usize) -> Result<Vec<f64>, String> {
    let points = zip_points(xs, ys)?;
    let turns = turning_angles(&Trajectory::from_points(&points, 1.0)).map_err(|e| e.to_string())?;
    let hist = histogram(&turns.angles, &HistogramSpec::turning_angles(bins)).map_err(|e| e.to_string())?;
    Ok(hist.counts.iter().map(|&c| c as f64).collect())
}

fn js(err: String) -> JsError {
    JsError::new(&err)
}

#[wasm_bindgen]
pub fn synthesize(mu: f64, n_steps: usize, fixations: bool, seed: u64) -> Result<Walk, JsError> {
    synthesize_walk(mu, n_steps, fixations, seed).map_err(js)
}

#[wasm_bindgen]
pub fn heatmap(
    xs: &[f64],
    ys: &[f64],
    screen_w: u32,
    screen_h: u32,
    sigma_px: f64,
    out_w: u32,
    out_h: u32,
) -> Result<Vec<f64>, JsError> {
    heatmap_values(xs, ys, screen_w, screen_h, sigma_px, out_w, out_h).map_err(js)
}

#[wasm_bindgen]
pub fn turn_histogram(xs: &[f64], ys: &[f64], bins: usize) -> Result<Vec<f64>, JsError> {
    turn_counts(xs, ys, bins).map_err(js)
}

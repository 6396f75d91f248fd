//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Reference values are computed here, independently of the
//! library, wherever that is possible.

use std::f64::consts::{FRAC_PI_2, PI};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use gazeforage::heatmap::{bce, kl_divergence, normalize, DEFAULT_KL_EPSILON};
use gazeforage::ingest::write_recording;
use gazeforage::stats::{signed_turn, Scale};
use gazeforage::{
    build_heatmap, classify, composite_loss, fit_loglog_regression, fit_mle, generate, histogram, image_entropy,
    turning_angles, FitMethod, GrayImage, Heatmap, Histogram, HistogramSpec, LossWeights, Normalization, PowerLawFit,
    SessionRecording, SynthConfig, Trajectory, WalkRegime,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn pareto(n: usize, mu: f64, x_min: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| x_min * (1.0 - rng.random::<f64>()).powf(-1.0 / (mu - 1.0))).collect()
}

fn estimator_recovery() -> Outcome {
    let mut report = Vec::new();
    for (i, mu) in [1.5, 2.0, 2.5, 3.0].into_iter().enumerate() {
        let xs = pareto(100_000, mu, 1.0, 1000 + i as u64);
        let start = Instant::now();
        let fit = fit_mle(&xs, 1.0).map_err(|e| e.to_string())?;
        let took = start.elapsed();
        let tol = if mu == 2.0 { 0.02 } else { 0.05 };
        check((fit.mu - mu).abs() <= tol, format!("mu {mu}: estimated {:.4}, tolerance {tol}", fit.mu))?;
        check(took < Duration::from_secs(2), format!("mu {mu}: fit took {took:?}"))?;
        report.push(format!("{mu}->{:.4}", fit.mu));
    }
    Ok(report.join(", "))
}

fn regression_fixture() -> Outcome {
    // Counts are the exact integral of C l^-2 over each geometric bin.
    let edges: Vec<f64> = (0..=30).map(|k| 10f64.powf(k as f64 / 10.0)).collect();
    let counts = edges.windows(2).map(|e| (1e12 * (1.0 / e[0] - 1.0 / e[1])).round() as u64).collect();
    let exact = Histogram { edges, counts, scale: Scale::Logarithmic, underflow: 0, overflow: 0 };
    let fit = fit_loglog_regression(&exact, 1.0).map_err(|e| e.to_string())?;
    check((fit.mu - 2.0).abs() <= 1e-6, format!("exact fixture gave {}", fit.mu))?;

    let xs = pareto(1_000_000, 2.0, 1.0, 7);
    let hi = xs.iter().copied().fold(1.0, f64::max);
    let hist =
        histogram(&xs, &HistogramSpec::Logarithmic { bins_per_decade: 20, lo: 1.0, hi }).map_err(|e| e.to_string())?;
    let sampled = fit_loglog_regression(&hist, 1.0).map_err(|e| e.to_string())?;
    check((sampled.mu - 2.0).abs() <= 0.25, format!("1e6 samples gave {}", sampled.mu))?;
    Ok(format!("exact {:.9}, sampled {:.4}", fit.mu, sampled.mu))
}

fn regime_classification() -> Outcome {
    let fit = |mu: f64| PowerLawFit { mu, x_min: 1.0, method: FitMethod::Mle, n_tail: 1, ks_stat: 0.0, ci: None };
    let cases = [
        (2.38, WalkRegime::Levy),
        (3.49, WalkRegime::GaussianLike),
        (1.0, WalkRegime::Ballistic),
        (3.0, WalkRegime::Levy),
        (3.0 + 1e-9, WalkRegime::GaussianLike),
    ];
    for (mu, want) in cases {
        let got = classify(&fit(mu));
        check(got == want, format!("mu {mu}: {got:?}, expected {want:?}"))?;
    }
    Ok("5 cases".into())
}

fn csv_bytes(traj: &Trajectory) -> Vec<u8> {
    let mut out = Vec::new();
    write_recording(&SessionRecording::new(traj.subject_id.clone(), traj.samples.clone()), &mut out)
        .expect("in-memory write");
    out
}

fn synthesis_round_trip() -> Outcome {
    let cfg = SynthConfig {
        mu: 2.0,
        l_min: 5.0,
        l_max: Some(2000.0),
        n_steps: 100_000,
        fixation_model: None,
        seed: 2024,
        ..SynthConfig::default()
    };
    let (traj, steps) = generate(&cfg).map_err(|e| e.to_string())?;
    let fit = fit_mle(&steps.steps, 5.0).map_err(|e| e.to_string())?;
    check((fit.mu - 2.0).abs() <= 0.05, format!("estimated {:.4}", fit.mu))?;
    let [w, h] = cfg.bounds.map(f64::from);
    let outside = traj.samples.iter().filter(|s| !(0.0..=w).contains(&s.x_px) || !(0.0..=h).contains(&s.y_px)).count();
    check(outside == 0, format!("{outside} points outside the screen"))?;
    let (again, _) = generate(&cfg).map_err(|e| e.to_string())?;
    check(csv_bytes(&traj) == csv_bytes(&again), "rerun with the same seed differs")?;
    Ok(format!("mu {:.4}, {} points in bounds, reproducible", fit.mu, traj.len()))
}

fn entropy_exact() -> Outcome {
    let bits = |w: u32, h: u32, px: Vec<u8>| -> Result<f64, String> {
        let img = GrayImage::new(w, h, px).map_err(|e| e.to_string())?;
        Ok(image_entropy(&img).map_err(|e| e.to_string())?.bits)
    };
    let constant = bits(10, 10, vec![128; 100])?;
    let uniform = bits(16, 16, (0..=255).collect())?;
    let halves = bits(8, 2, (0..16).map(|i| if i % 8 < 4 { 0 } else { 255 }).collect())?;
    check(constant.abs() <= 1e-12, format!("constant image: {constant}"))?;
    check((uniform - 8.0).abs() <= 1e-12, format!("uniform histogram: {uniform}"))?;
    check((halves - 1.0).abs() <= 1e-12, format!("half black/white: {halves}"))?;
    Ok(format!("{constant}, {uniform}, {halves} bits"))
}

fn turning_angles_exact() -> Outcome {
    check(signed_turn((1.0, 0.0), (2.0, 0.0)) == 0.0, "collinear")?;
    check(signed_turn((1.0, 0.0), (0.0, 1.0)) == FRAC_PI_2, "perpendicular left")?;
    check(signed_turn((1.0, 0.0), (-1.0, 0.0)) == PI, "reversal")?;
    check(signed_turn((0.0, -3.0), (0.0, 1.0)) == PI, "reversal along y")?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 1_000_002;
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3))).collect();
    let series = turning_angles(&Trajectory::from_points(&pts, 1.0)).map_err(|e| e.to_string())?;
    check(series.angles.len() == n - 2, format!("{} angles from {} triples", series.angles.len(), n - 2))?;
    let bad = series.angles.iter().filter(|a| !(**a > -PI && **a <= PI)).count();
    check(bad == 0, format!("{bad} angles outside (-pi, pi]"))?;
    Ok(format!("exact cases and {} random triples", n - 2))
}

/// Dense Gaussian evaluation at cell centers, normalized to unit mass.
fn brute_force_map(points: &[(f64, f64)], screen: (f64, f64), sigma: f64, size: (usize, usize)) -> Vec<f64> {
    let (cw, ch) = (screen.0 / size.0 as f64, screen.1 / size.1 as f64);
    let mut v = vec![0.0; size.0 * size.1];
    for y in 0..size.1 {
        for x in 0..size.0 {
            let (cx, cy) = ((x as f64 + 0.5) * cw, (y as f64 + 0.5) * ch);
            v[y * size.0 + x] = points
                .iter()
                .map(|&(px, py)| (-((cx - px).powi(2) + (cy - py).powi(2)) / (2.0 * sigma * sigma)).exp())
                .sum();
        }
    }
    let total: f64 = v.iter().sum();
    v.iter().map(|x| x / total).collect()
}

fn heatmap_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let pts: Vec<(f64, f64)> =
        (0..10).map(|_| (rng.random_range(0.0..1920.0), rng.random_range(0.0..1080.0))).collect();
    let map = build_heatmap(&pts, (1920, 1080), 30.0, (112, 112)).map_err(|e| e.to_string())?;
    let oracle = brute_force_map(&pts, (1920.0, 1080.0), 30.0, (112, 112));
    let worst = map.values().iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(worst <= 1e-6, format!("max cell error {worst:e}"))?;
    check((map.sum() - 1.0).abs() <= 1e-6, format!("mass {}", map.sum()))?;

    let center = build_heatmap(&[(960.0, 540.0)], (1920, 1080), 30.0, (112, 112)).map_err(|e| e.to_string())?;
    let (w, h) = (center.width(), center.height());
    let mut asym: f64 = 0.0;
    for y in 0..h {
        for x in 0..w {
            asym = asym.max((center.get(x, y) - center.get(w - 1 - x, h - 1 - y)).abs());
        }
    }
    check(asym <= 1e-9, format!("rotation asymmetry {asym:e}"))?;
    Ok(format!("max cell error {worst:.1e}, rotation asymmetry {asym:.1e}"))
}

fn bce_oracle(t: &[f64], p: &[f64]) -> f64 {
    let eps = 1e-7;
    t.iter()
        .zip(p)
        .map(|(&t, &p)| {
            let p = p.clamp(eps, 1.0 - eps);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / t.len() as f64
}

fn metrics() -> Outcome {
    let prob =
        |v: Vec<f64>| Heatmap::with_normalization(2, 1, v, Normalization::Probability).map_err(|e| e.to_string());
    let kl = kl_divergence(&prob(vec![0.5, 0.5])?, &prob(vec![0.25, 0.75])?, DEFAULT_KL_EPSILON)
        .map_err(|e| e.to_string())?;
    check((kl - 0.14384).abs() <= 1e-4, format!("hand KL {kl}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let pts: Vec<(f64, f64)> =
        (0..25).map(|_| (rng.random_range(0.0..1920.0), rng.random_range(0.0..1080.0))).collect();
    let h = build_heatmap(&pts, (1920, 1080), 40.0, (64, 64)).map_err(|e| e.to_string())?;
    let self_kl = kl_divergence(&h, &h, DEFAULT_KL_EPSILON).map_err(|e| e.to_string())?;
    check(self_kl <= 1e-12, format!("KL(h, h) = {self_kl:e}"))?;

    let loss = composite_loss(&h, &h, &LossWeights::default()).map_err(|e| e.to_string())?;
    let max = h.values().iter().copied().fold(0.0, f64::max);
    let unit: Vec<f64> = h.values().iter().map(|v| v / max).collect();
    let want = 0.4 * bce_oracle(&unit, &unit);
    check((loss.total - want).abs() <= 1e-9, format!("composite {} vs 0.4 BCE {}", loss.total, want))?;

    let half = Heatmap::from_values(4, 4, vec![0.5; 16]).map_err(|e| e.to_string())?;
    let b = bce(&half, &half).map_err(|e| e.to_string())?;
    check((b - 2f64.ln()).abs() <= 1e-9, format!("BCE(0.5, 0.5) = {b}"))?;
    // the library's own unit-range copy must agree with the oracle's
    let lib_unit = normalize(&h, Normalization::UnitRange).map_err(|e| e.to_string())?;
    check(lib_unit.values() == unit.as_slice(), "unit-range copies differ")?;
    Ok(format!("KL {kl:.5}, composite {:.6}", loss.total))
}

fn pipeline_end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = dir.path();
    let cfg = p.join("cfg.json");
    std::fs::write(&cfg, r#"{"walk": {"mu": 2.2, "seed": 9}, "session": {"images": ["img01", "img02"]}}"#)
        .map_err(|e| e.to_string())?;
    let exe = env!("CARGO_BIN_EXE_gazeforage");
    let start = Instant::now();
    let run = |args: &[&std::ffi::OsStr]| -> Result<(), String> {
        let out = Command::new(exe).args(args).env("GAZEFORAGE_LOG", "error").output().map_err(|e| e.to_string())?;
        check(out.status.success(), format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)))
    };
    let csv = p.join("gaze.csv");
    run(&["synth".as_ref(), cfg.as_os_str(), "--out".as_ref(), csv.as_os_str()])?;
    let out_dir = p.join("out");
    run(&[
        "analyze".as_ref(),
        csv.as_os_str(),
        "--schedule".as_ref(),
        p.join("gaze.schedule.json").as_os_str(),
        "--per-image".as_ref(),
        "--pooled".as_ref(),
        "--out-dir".as_ref(),
        out_dir.as_os_str(),
    ])?;
    let took = start.elapsed();
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let lens: Vec<u64> = report["trajectories"]
        .as_array()
        .ok_or("no trajectories")?
        .iter()
        .filter_map(|t| t["n_samples"].as_u64())
        .collect();
    check(lens == [3600, 3600], format!("trajectory lengths {lens:?}"))?;
    let regime = &report["pooled"]["analysis"]["mle"]["regime"];
    check(regime == "levy", format!("pooled regime {regime}"))?;
    check(took < Duration::from_secs(30), format!("took {took:?}"))?;
    let mu = report["pooled"]["analysis"]["mle"]["mu"].as_f64().unwrap_or(f64::NAN);
    Ok(format!("2 x 3600 samples, pooled mu {mu:.3} (levy) in {:.2} s", took.as_secs_f64()))
}

fn window_mass(angles: &[f64], center: f64, half: f64) -> f64 {
    let hits = angles
        .iter()
        .filter(|&&a| {
            let d = (a - center).rem_euclid(2.0 * PI);
            d <= half || d >= 2.0 * PI - half
        })
        .count();
    hits as f64 / angles.len() as f64
}

fn turn_structure() -> Outcome {
    let cfg = SynthConfig { n_steps: 50_000, fixation_model: None, seed: 31, ..SynthConfig::default() };
    let (traj, _) = generate(&cfg).map_err(|e| e.to_string())?;
    let turns = turning_angles(&traj).map_err(|e| e.to_string())?.angles;
    let uniform = 0.4 / (2.0 * PI);
    let mut ratios = Vec::new();
    for (name, c) in [("0", 0.0), ("+pi/2", FRAC_PI_2), ("-pi/2", -FRAC_PI_2), ("pi", PI)] {
        let m = window_mass(&turns, c, 0.2);
        check(m > uniform, format!("window {name}: mass {m:.4} <= uniform {uniform:.4}"))?;
        ratios.push(format!("{name} x{:.2}", m / uniform));
    }
    Ok(ratios.join(", "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("estimator recovery", estimator_recovery),
        ("regression fixture", regression_fixture),
        ("regime classification", regime_classification),
        ("synthesis round trip", synthesis_round_trip),
        ("entropy", entropy_exact),
        ("turning angles", turning_angles_exact),
        ("heatmap correctness", heatmap_correctness),
        ("metrics", metrics),
        ("pipeline end-to-end", pipeline_end_to_end),
        ("turning-angle synthesis", turn_structure),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use gazeforage::heatmap::{pearson_map, Sidecar, DEFAULT_SIGMA_PX, DEFAULT_SIZE};
use gazeforage::ingest::{write_recording, DEFAULT_MARGIN_PX};
use gazeforage::stats::DEFAULT_BINS_PER_DECADE;
use gazeforage::{
    build_heatmap, composite_loss, filter_invalid, image_entropy, luminance_convert, parse_recording, segment_by_image,
    Heatmap, LossWeights, RecordFormat, RgbImage, SessionRecording, StimulusSchedule,
};

mod analyze;
mod error;
mod plot;
mod synth;

use error::{require_file, CliResult, StageExt};

#[derive(Parser, Debug)]
#[command(name = "gazeforage", version, about = "Levy-walk statistics for eye-gaze trajectories")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Directory for all written outputs.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value_t = DEFAULT_SIGMA_PX)]
    sigma_px: f64,
    /// Fixed power-law cutoff in px; selected by KS distance when absent.
    #[arg(long, global = true)]
    xmin: Option<f64>,
    #[arg(long, global = true, default_value_t = DEFAULT_BINS_PER_DECADE)]
    bins_per_decade: u32,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Step-length, turning-angle and power-law analysis of gaze recordings.
    Analyze {
        /// One or more canonical gaze CSV files.
        #[arg(required = true)]
        gaze: Vec<PathBuf>,
        /// Schedule JSON describing image onsets.
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        per_image: bool,
        #[arg(long)]
        per_subject: bool,
        #[arg(long)]
        pooled: bool,
        /// Bootstrap resamples for the MLE interval (0 disables).
        #[arg(long, default_value_t = 200)]
        bootstrap: usize,
        #[arg(long, default_value_t = DEFAULT_MARGIN_PX)]
        margin_px: f64,
        /// Directory holding `<image_id>.png|jpg` stimuli for entropy.
        #[arg(long)]
        images: Option<PathBuf>,
    },
    /// Generate a synthetic gaze session from a JSON config.
    Synth {
        config: PathBuf,
        /// Output CSV; defaults to `<out-dir>/gaze.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a fixation heatmap for one image.
    Heatmap {
        #[arg(required = true)]
        gaze: Vec<PathBuf>,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        image_id: String,
        #[arg(long, default_value_t = DEFAULT_SIZE)]
        width: u32,
        #[arg(long, default_value_t = DEFAULT_SIZE)]
        height: u32,
    },
    /// Compare two heatmaps (BCE, MSE, KL and their weighted sum).
    Compare {
        heatmap_true: PathBuf,
        heatmap_pred: PathBuf,
        #[arg(long, default_value_t = 0.4)]
        alpha: f64,
        #[arg(long, default_value_t = 0.3)]
        beta: f64,
        #[arg(long, default_value_t = 0.3)]
        gamma: f64,
    },
    /// Shannon entropy of image files.
    Entropy {
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GAZEFORAGE_LOG", "warn")).init();
    let cli = Cli::parse();
    if cli.common.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.common.jobs).build_global() {
            log::warn!("could not size worker pool: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let common = cli.common;
    match cli.command {
        Command::Analyze { schedule, gaze, per_image, per_subject, pooled, bootstrap, margin_px, images } => {
            let opts = analyze::AnalyzeOptions {
                per_image,
                per_subject,
                pooled,
                xmin: common.xmin,
                bins_per_decade: common.bins_per_decade,
                bootstrap,
                seed: common.seed.unwrap_or(0),
                margin_px,
                images_dir: images,
            };
            let out = analyze::run(&gaze, &schedule, &opts, &common.out_dir)?;
            if let Some(p) = &out.report.pooled {
                if let Some(fit) = &p.analysis.mle {
                    println!(
                        "pooled: mu = {:.4} (x_min = {:.3}, n_tail = {}), regime {:?}",
                        fit.mu, fit.x_min, fit.n_tail, fit.regime
                    );
                }
            }
            Ok(())
        }
        Command::Synth { config, out } => {
            let csv = out.unwrap_or_else(|| common.out_dir.join("gaze.csv"));
            synth::run(&config, &csv, common.seed)
        }
        Command::Heatmap { schedule, gaze, image_id, width, height } => {
            cmd_heatmap(&schedule, &gaze, &image_id, common.sigma_px, (width, height), &common.out_dir)
        }
        Command::Compare { heatmap_true, heatmap_pred, alpha, beta, gamma } => {
            cmd_compare(&heatmap_true, &heatmap_pred, LossWeights { alpha, beta, gamma }, &common.out_dir)
        }
        Command::Entropy { images } => cmd_entropy(&images, &common.out_dir),
    }
}

pub(crate) fn load_recording(path: &Path) -> CliResult<SessionRecording> {
    require_file(path)?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display())).stage("ingest")?;
    parse_recording(BufReader::new(file), RecordFormat::CanonicalCsv)
        .with_context(|| format!("parsing {}", path.display()))
        .stage("ingest")
}

pub(crate) fn load_schedule(path: &Path) -> CliResult<StimulusSchedule> {
    require_file(path)?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).stage("ingest")?;
    StimulusSchedule::from_json(&text).with_context(|| format!("parsing {}", path.display())).stage("ingest")
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).stage("output")?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display())).stage("output")
}

pub(crate) fn write_csv_recording(path: &Path, rec: &SessionRecording) -> CliResult<()> {
    let mut buf = Vec::new();
    write_recording(rec, &mut buf).stage("output")?;
    write_file(path, &buf)
}

pub(crate) fn entropy_of_file(path: &Path) -> CliResult<f64> {
    require_file(path)?;
    let img = image::open(path).with_context(|| format!("decoding {}", path.display())).stage("entropy")?;
    let rgb = img.to_rgb8();
    let rgb = RgbImage { width: rgb.width(), height: rgb.height(), channels: 3, data: rgb.into_raw() };
    let gray = luminance_convert(&rgb).stage("entropy")?;
    Ok(image_entropy(&gray).stage("entropy")?.bits)
}

fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

fn cmd_heatmap(
    schedule: &Path,
    gaze: &[PathBuf],
    image_id: &str,
    sigma_px: f64,
    size: (u32, u32),
    out_dir: &Path,
) -> CliResult<()> {
    let sched = load_schedule(schedule)?;
    let mut points = Vec::new();
    let mut screen = None;
    for path in gaze {
        let rec = load_recording(path)?;
        for traj in segment_by_image(&rec, &sched).stage("segment")?.into_iter().filter(|t| t.image_id == image_id) {
            let (kept, _) = filter_invalid(&traj, 0.0);
            screen.get_or_insert((kept.screen_w_px, kept.screen_h_px));
            points.extend(kept.points());
        }
    }
    let screen = screen.unwrap_or((gazeforage::ingest::DEFAULT_SCREEN_W, gazeforage::ingest::DEFAULT_SCREEN_H));
    let map = build_heatmap(&points, screen, sigma_px, size)
        .with_context(|| format!("image `{image_id}`"))
        .stage("heatmap")?;

    let bin_path = out_dir.join(format!("{image_id}.heatmap.bin"));
    let mut bin = Vec::new();
    map.write_binary(&mut bin).stage("output")?;
    write_file(&bin_path, &bin)?;
    let sidecar = serde_json::to_string(&map.sidecar()).stage("output")?;
    write_file(&sidecar_path(&bin_path), sidecar.as_bytes())?;
    let mut pgm = Vec::new();
    map.write_pgm(&mut pgm).stage("output")?;
    write_file(&out_dir.join(format!("{image_id}.pgm")), &pgm)?;
    println!("{}", bin_path.display());
    Ok(())
}

fn load_heatmap(path: &Path) -> CliResult<Heatmap> {
    require_file(path)?;
    let side = sidecar_path(path);
    require_file(&side)?;
    let sidecar: Sidecar = serde_json::from_str(&std::fs::read_to_string(&side).stage("compare")?)
        .with_context(|| format!("parsing {}", side.display()))
        .stage("compare")?;
    let file = File::open(path).stage("compare")?;
    Heatmap::read_binary(BufReader::new(file), &sidecar)
        .with_context(|| format!("reading {}", path.display()))
        .stage("compare")
}

fn cmd_compare(a: &Path, b: &Path, weights: LossWeights, out_dir: &Path) -> CliResult<()> {
    let (ha, hb) = (load_heatmap(a)?, load_heatmap(b)?);
    let loss = composite_loss(&ha, &hb, &weights).stage("compare")?;
    let pearson = pearson_map(&ha, &hb).ok();
    let metrics = serde_json::json!({
        "schema": analyze::REPORT_SCHEMA,
        "weights": weights,
        "bce": loss.bce,
        "mse": loss.mse,
        "kl": loss.kl,
        "composite": loss.total,
        "pearson": pearson,
    });
    let text = serde_json::to_string_pretty(&metrics).stage("output")?;
    write_file(&out_dir.join("metrics.json"), text.as_bytes())?;
    println!("{text}");
    Ok(())
}

fn cmd_entropy(images: &[PathBuf], out_dir: &Path) -> CliResult<()> {
    for p in images {
        require_file(p)?;
    }
    let mut csv = String::from("image_id,entropy_bits\n");
    for p in images {
        let bits = entropy_of_file(p)?;
        let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        csv.push_str(&format!("{id},{bits}\n"));
    }
    write_file(&out_dir.join("entropy.csv"), csv.as_bytes())?;
    print!("{csv}");
    Ok(())
}

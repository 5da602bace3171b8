use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use scisim::config::{scene_from_file, AppConfig};
use scisim::detect::{detect_measurement, detection_rate, write_detections};
use scisim::error::{Error, Result};
use scisim::reconstruct::{gap_tv, psnr};
use scisim::rl::agent::{load_qtable, save_qtable, train, QTable};
use scisim::runner::fixtures::TwoRegimeEnv;
use scisim::runner::{
    compare, fmt_sig, run_adaptive, run_fixed, write_comparison_csv, write_episode_csv, EpisodeLog,
};
use scisim::sensing::{generate_masks, load_masks, save_masks, sense_normalized, MaskStack};
use scisim::video::{generate_scene, load_frames, save_frames, save_scene, FrameSequence, GroundTruthTrack};

/// Adaptive video snapshot compressive imaging simulator.
#[derive(Parser)]
#[command(name = "scisim", version, about)]
struct Cli {
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Configuration file (`key = value` under [section] headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene description into frames plus a ground-truth track.
    Generate {
        /// Scene description file ([scene] and [object] sections).
        #[arg(long)]
        spec: PathBuf,
        /// Output directory for frames, track, and manifest.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate and persist a binary mask stack.
    Masks {
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 20)]
        bmax: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sense a video into normalized measurements (saved as frames).
    Sense {
        #[arg(long)]
        b: usize,
        #[arg(long)]
        video: Option<PathBuf>,
        #[arg(long)]
        masks: Option<PathBuf>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct every window of a video at a fixed ratio and report PSNR.
    Reconstruct {
        #[arg(long)]
        b: usize,
        #[arg(long)]
        video: Option<PathBuf>,
        #[arg(long)]
        masks: Option<PathBuf>,
        #[arg(long)]
        sigma: Option<f64>,
        /// Output directory; each measurement window gets its own manifest.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the blob detector on every normalized measurement and dump boxes.
    Detect {
        #[arg(long)]
        b: usize,
        #[arg(long)]
        video: Option<PathBuf>,
        #[arg(long)]
        masks: Option<PathBuf>,
        #[arg(long)]
        sigma: Option<f64>,
        /// Detection dump file (`measurement_index confidence x y w h`).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the adaptation policy on the synthetic two-regime environment.
    Train {
        /// Q-table output file.
        #[arg(long)]
        out: PathBuf,
        /// Per-episode return curve CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Adaptive capture over a video with a trained policy.
    Run {
        #[arg(long)]
        video: Option<PathBuf>,
        #[arg(long)]
        masks: Option<PathBuf>,
        #[arg(long)]
        qtable: Option<PathBuf>,
        /// Episode log CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fixed-ratio baseline sweep over every B in the state space.
    Baseline {
        #[arg(long)]
        video: Option<PathBuf>,
        #[arg(long)]
        masks: Option<PathBuf>,
        /// Directory for the per-ratio episode log CSVs.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Adaptive run plus full fixed sweep, reduced to a comparison report.
    Compare {
        #[arg(long)]
        video: Option<PathBuf>,
        #[arg(long)]
        masks: Option<PathBuf>,
        #[arg(long)]
        qtable: Option<PathBuf>,
        /// Comparison report CSV.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => AppConfig::from_file(path)?,
        None => AppConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
        cfg.train.seed = seed;
    }

    match cli.command {
        Command::Generate { spec, out } => cmd_generate(&cfg, cli.seed, &spec, &out),
        Command::Masks { height, width, bmax, out } => cmd_masks(&cfg, height, width, bmax, &out),
        Command::Sense { b, video, masks, sigma, out } => {
            cmd_sense(&cfg, b, video, masks, sigma, &out)
        }
        Command::Reconstruct { b, video, masks, sigma, out } => {
            cmd_reconstruct(&cfg, b, video, masks, sigma, &out)
        }
        Command::Detect { b, video, masks, sigma, out } => {
            cmd_detect(&cfg, b, video, masks, sigma, &out)
        }
        Command::Train { out, curve } => cmd_train(&cfg, &out, curve.as_deref()),
        Command::Run { video, masks, qtable, out } => cmd_run(&cfg, video, masks, qtable, &out),
        Command::Baseline { video, masks, out_dir } => cmd_baseline(&cfg, video, masks, &out_dir),
        Command::Compare { video, masks, qtable, out } => cmd_compare(&cfg, video, masks, qtable, &out),
    }
}

fn resolve(flag: Option<PathBuf>, config_path: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.or_else(|| config_path.clone()).ok_or_else(|| {
        Error::validation(format!("no {what} given; pass --{what} or set [paths] {what} in the config"))
    })
}

fn load_video(path: &Path) -> Result<(FrameSequence, Option<GroundTruthTrack>)> {
    load_frames(path)
}

fn load_video_with_track(path: &Path) -> Result<(FrameSequence, GroundTruthTrack)> {
    let (video, track) = load_frames(path)?;
    let track = track.ok_or_else(|| {
        Error::validation(format!(
            "{}: manifest has no ground-truth track; adaptive runs need one",
            path.display()
        ))
    })?;
    Ok((video, track))
}

fn check_masks(masks: &MaskStack, cfg: &AppConfig) -> Result<()> {
    masks.validate_prefixes(cfg.run.states.values())
}

fn cmd_generate(_cfg: &AppConfig, seed_override: Option<u64>, spec_path: &Path, out: &Path) -> Result<()> {
    let mut spec = scene_from_file(spec_path)?;
    if let Some(seed) = seed_override {
        spec.seed = seed;
    }
    let (video, track) = generate_scene(&spec)?;
    let manifest = save_scene(&video, Some(&track), out)?;
    println!(
        "generated {} frames ({}x{}) -> {}",
        video.len(),
        video.width(),
        video.height(),
        manifest.display()
    );
    Ok(())
}

fn cmd_masks(cfg: &AppConfig, height: usize, width: usize, bmax: usize, out: &Path) -> Result<()> {
    let masks = generate_masks(height, width, bmax, cfg.run.seed, cfg.run.states.values())?;
    save_masks(&masks, out)?;
    println!("wrote {} ({}x{}x{}, seed {})", out.display(), height, width, bmax, cfg.run.seed);
    Ok(())
}

/// Windows of `b` frames covering as much of the video as possible.
fn full_windows(video_len: usize, b: usize) -> impl Iterator<Item = usize> {
    (0..video_len / b).map(move |w| w * b)
}

fn cmd_sense(
    cfg: &AppConfig,
    b: usize,
    video: Option<PathBuf>,
    masks: Option<PathBuf>,
    sigma: Option<f64>,
    out: &Path,
) -> Result<()> {
    use rand::SeedableRng;
    let video_path = resolve(video, &cfg.paths.video, "video")?;
    let masks_path = resolve(masks, &cfg.paths.masks, "masks")?;
    let (video, _) = load_video(&video_path)?;
    let masks = load_masks(&masks_path)?;
    check_masks(&masks, cfg)?;
    let sigma = sigma.unwrap_or(cfg.run.sigma);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let mut frames = Vec::new();
    for start in full_windows(video.len(), b) {
        let cube = video.window(start, b)?;
        let (_, norm) = sense_normalized(&cube, &masks, b, sigma, start, &mut rng)?;
        frames.push(norm.ybar.mapv(|v| v.clamp(0.0, 1.0)));
    }
    if frames.is_empty() {
        return Err(Error::validation(format!("video has {} frames, fewer than B = {b}", video.len())));
    }
    let count = frames.len();
    let seq = FrameSequence::new(frames, video.fps() / b as f64, format!("{}-normalized-b{b}", video.name()))?;
    let manifest = save_frames(&seq, out)?;
    println!("sensed {count} measurements at B = {b} -> {}", manifest.display());
    Ok(())
}

fn cmd_reconstruct(
    cfg: &AppConfig,
    b: usize,
    video: Option<PathBuf>,
    masks: Option<PathBuf>,
    sigma: Option<f64>,
    out: &Path,
) -> Result<()> {
    use rand::SeedableRng;
    let video_path = resolve(video, &cfg.paths.video, "video")?;
    let masks_path = resolve(masks, &cfg.paths.masks, "masks")?;
    let (video, _) = load_video(&video_path)?;
    let masks = load_masks(&masks_path)?;
    check_masks(&masks, cfg)?;
    let sigma = sigma.unwrap_or(cfg.run.sigma);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let mut all_psnr = Vec::new();
    let mut windows = 0usize;
    for start in full_windows(video.len(), b) {
        let cube = video.window(start, b)?;
        let (m, _) = sense_normalized(&cube, &masks, b, sigma, start, &mut rng)?;
        let rec = gap_tv(&m, &masks, &cfg.run.recon)?;
        let report = psnr(&[rec.cube.clone()], &[cube])?;
        let frames: Vec<_> = (0..b).map(|k| rec.cube.frame(k).to_owned()).collect();
        let seq = FrameSequence::new(frames, video.fps(), format!("window-{windows:03}"))?;
        save_frames(&seq, &out.join(format!("window_{windows:03}")))?;
        println!(
            "window {windows:03} frames {start}..{}: psnr {} dB ({} iters)",
            start + b - 1,
            fmt_sig(report.psnr_db),
            rec.iterations
        );
        all_psnr.push(report.psnr_db);
        windows += 1;
    }
    if windows == 0 {
        return Err(Error::validation(format!("video has {} frames, fewer than B = {b}", video.len())));
    }
    let mean = all_psnr.iter().sum::<f64>() / all_psnr.len() as f64;
    println!("reconstructed {windows} windows at B = {b}, mean psnr {} dB", fmt_sig(mean));
    Ok(())
}

fn cmd_detect(
    cfg: &AppConfig,
    b: usize,
    video: Option<PathBuf>,
    masks: Option<PathBuf>,
    sigma: Option<f64>,
    out: &Path,
) -> Result<()> {
    use rand::SeedableRng;
    let video_path = resolve(video, &cfg.paths.video, "video")?;
    let masks_path = resolve(masks, &cfg.paths.masks, "masks")?;
    let (video, track) = load_video(&video_path)?;
    let masks = load_masks(&masks_path)?;
    check_masks(&masks, cfg)?;
    let sigma = sigma.unwrap_or(cfg.run.sigma);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let mut per_measurement = Vec::new();
    let mut normalized = Vec::new();
    let mut starts = Vec::new();
    for start in full_windows(video.len(), b) {
        let cube = video.window(start, b)?;
        let (_, norm) = sense_normalized(&cube, &masks, b, sigma, start, &mut rng)?;
        per_measurement.push(detect_measurement(&norm, &cfg.run.detector)?);
        normalized.push(norm);
        starts.push(start);
    }
    if per_measurement.is_empty() {
        return Err(Error::validation(format!("video has {} frames, fewer than B = {b}", video.len())));
    }
    write_detections(&per_measurement, out)?;
    let total: usize = per_measurement.iter().map(Vec::len).sum();
    println!("detected {total} boxes over {} measurements -> {}", per_measurement.len(), out.display());
    if let Some(track) = track {
        let gt_windows: Vec<_> = starts.iter().map(|&s| track.window_hulls(s, b)).collect();
        let rate = detection_rate(&normalized, &gt_windows, &cfg.run.detector)?;
        println!("detection rate (pooled average precision): {}", fmt_sig(rate));
    }
    Ok(())
}

fn cmd_train(cfg: &AppConfig, out: &Path, curve: Option<&Path>) -> Result<()> {
    let mut env = TwoRegimeEnv::new(
        cfg.run.states.clone(),
        cfg.run.transition,
        cfg.run.reward,
    )
    .with_psnr(cfg.run.with_psnr_shaping);
    let result = train(&mut env, &cfg.train)?;
    save_qtable(&result.q, out)?;
    println!(
        "trained {} episodes ({} entries) -> {}",
        result.episode_returns.len(),
        result.q.len(),
        out.display()
    );
    if let Some(curve_path) = curve {
        let mut csv = String::from("episode,return\n");
        for (i, r) in result.episode_returns.iter().enumerate() {
            csv.push_str(&format!("{i},{}\n", fmt_sig(*r)));
        }
        std::fs::write(curve_path, csv).map_err(|e| Error::io_path(curve_path, e))?;
        println!("return curve -> {}", curve_path.display());
    }
    if let Some(last) = result.episode_returns.last() {
        let window = result.episode_returns.len().min(50);
        let tail: f64 =
            result.episode_returns[result.episode_returns.len() - window..].iter().sum::<f64>() / window as f64;
        println!("final episode return {}, mean of last {window}: {}", fmt_sig(*last), fmt_sig(tail));
    }
    Ok(())
}

fn print_summary(label: &str, log: &EpisodeLog) {
    let mean_ms = if log.steps.is_empty() {
        0.0
    } else {
        log.steps.iter().map(|s| s.elapsed.as_secs_f64()).sum::<f64>() / log.steps.len() as f64 * 1e3
    };
    println!(
        "{label}: steps {} mean_b {} rate {} psnr {} frames {} dropped {} ({} ms/step)",
        log.steps.len(),
        fmt_sig(log.summary.mean_b),
        fmt_sig(log.summary.mean_detection_rate),
        log.summary.mean_psnr_db.map(fmt_sig).unwrap_or_else(|| "-".into()),
        log.summary.total_frames,
        log.summary.dropped_frames,
        fmt_sig(mean_ms),
    );
}

fn load_policy(cfg: &AppConfig, qtable: Option<PathBuf>) -> Result<QTable> {
    let path = resolve(qtable, &cfg.paths.qtable, "qtable")?;
    load_qtable(&path)
}

fn cmd_run(
    cfg: &AppConfig,
    video: Option<PathBuf>,
    masks: Option<PathBuf>,
    qtable: Option<PathBuf>,
    out: &Path,
) -> Result<()> {
    let video_path = resolve(video, &cfg.paths.video, "video")?;
    let masks_path = resolve(masks, &cfg.paths.masks, "masks")?;
    let (video, track) = load_video_with_track(&video_path)?;
    let masks = load_masks(&masks_path)?;
    let q = load_policy(cfg, qtable)?;
    let log = run_adaptive(&video, &track, &masks, &q, &cfg.run)?;
    write_episode_csv(&log, out)?;
    print_summary("adaptive", &log);
    println!("episode log -> {}", out.display());
    Ok(())
}

fn cmd_baseline(
    cfg: &AppConfig,
    video: Option<PathBuf>,
    masks: Option<PathBuf>,
    out_dir: &Path,
) -> Result<()> {
    let video_path = resolve(video, &cfg.paths.video, "video")?;
    let masks_path = resolve(masks, &cfg.paths.masks, "masks")?;
    let (video, track) = load_video_with_track(&video_path)?;
    let masks = load_masks(&masks_path)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io_path(out_dir, e))?;
    for &b in cfg.run.states.values() {
        let log = run_fixed(&video, &track, &masks, b, &cfg.run)?;
        let path = out_dir.join(format!("baseline_b{b:02}.csv"));
        write_episode_csv(&log, &path)?;
        print_summary(&format!("fixed B={b:>2}"), &log);
    }
    Ok(())
}

fn cmd_compare(
    cfg: &AppConfig,
    video: Option<PathBuf>,
    masks: Option<PathBuf>,
    qtable: Option<PathBuf>,
    out: &Path,
) -> Result<()> {
    let video_path = resolve(video, &cfg.paths.video, "video")?;
    let masks_path = resolve(masks, &cfg.paths.masks, "masks")?;
    let (video, track) = load_video_with_track(&video_path)?;
    let masks = load_masks(&masks_path)?;
    let q = load_policy(cfg, qtable)?;

    let adaptive = run_adaptive(&video, &track, &masks, &q, &cfg.run)?;
    print_summary("adaptive", &adaptive);
    let mut fixed = Vec::new();
    for &b in cfg.run.states.values() {
        let log = run_fixed(&video, &track, &masks, b, &cfg.run)?;
        print_summary(&format!("fixed B={b:>2}"), &log);
        fixed.push(log);
    }
    let report = compare(&adaptive, &fixed)?;
    write_comparison_csv(&report, out)?;
    for f in &report.fixed {
        if f.nearest {
            println!(
                "vs nearest fixed B={}: delta psnr {} dB, delta detection rate {}",
                f.b,
                f.delta_psnr_db.map(fmt_sig).unwrap_or_else(|| "-".into()),
                fmt_sig(f.delta_detection_rate),
            );
        }
    }
    println!("comparison -> {}", out.display());
    Ok(())
}

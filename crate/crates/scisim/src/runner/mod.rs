//! The capture loop: sense a batch of windows at the current compression
//! ratio, score detection on the measurements, optionally reconstruct and
//! score PSNR, ask the policy for an action, log the reward, and move to
//! the next ratio. Fixed-ratio baselines run the identical loop with the
//! action pinned to Keep.

pub mod fixtures;

use std::collections::HashMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::detect::{detection_rate, DetectorConfig};
use crate::error::{Error, Result};
use crate::reconstruct::{gap_tv, psnr, ReconstructionConfig};
use crate::rl::agent::{Observation, PsnrBand, QTable};
use crate::rl::env::{reward, step, Action, RewardConfig, StateSpace, TransitionModel};
use crate::sensing::{sense_normalized, MaskStack};
use crate::video::{FrameSequence, GroundTruthTrack, VideoCube};

/// Maps an observation to an action. Implemented by the learned Q-table,
/// by materialized policy tables, and by the constant Keep policy used for
/// fixed-ratio baselines.
pub trait Policy {
    fn action(&self, obs: &Observation) -> Action;
}

impl Policy for QTable {
    fn action(&self, obs: &Observation) -> Action {
        self.greedy_action(obs)
    }
}

impl Policy for HashMap<Observation, Action> {
    fn action(&self, obs: &Observation) -> Action {
        self.get(obs).copied().unwrap_or(Action::Decrease)
    }
}

/// The baseline policy: never adapt.
pub struct KeepPolicy;

impl Policy for KeepPolicy {
    fn action(&self, _obs: &Observation) -> Action {
        Action::Keep
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialB {
    /// Uniform over the state space, drawn from the run seed.
    Random,
    /// Start at a specific ratio (must be in the state space).
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub states: StateSpace,
    pub transition: TransitionModel,
    pub reward: RewardConfig,
    pub detector: DetectorConfig,
    pub recon: ReconstructionConfig,
    /// Measurements per detection-rate window; the window spans
    /// `batch_size * B` source frames.
    pub batch_size: usize,
    pub initial_b: InitialB,
    pub with_reconstruction: bool,
    /// Include PSNR in observations and reward modulation (training only;
    /// requires reconstruction).
    pub with_psnr_shaping: bool,
    /// Noise level on the normalized measurement scale.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            states: StateSpace::default(),
            transition: TransitionModel::default(),
            reward: RewardConfig::default(),
            detector: DetectorConfig::default(),
            recon: ReconstructionConfig::default(),
            batch_size: 4,
            initial_b: InitialB::Random,
            with_reconstruction: false,
            with_psnr_shaping: false,
            sigma: 0.0,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.transition.validate()?;
        self.reward.validate()?;
        self.detector.validate()?;
        self.recon.validate()?;
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size must be >= 1"));
        }
        if self.sigma < 0.0 {
            return Err(Error::validation("sigma must be non-negative"));
        }
        if self.with_psnr_shaping && !self.with_reconstruction {
            return Err(Error::validation("psnr shaping requires reconstruction"));
        }
        if let InitialB::Fixed(b) = self.initial_b {
            self.states.index_of(b)?;
        }
        Ok(())
    }
}

/// One adaptation step of the capture loop.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub first_frame: usize,
    pub last_frame: usize,
    pub b: usize,
    pub action: Action,
    pub next_b: usize,
    pub reward: f64,
    pub detection_rate: f64,
    pub psnr_db: Option<f64>,
    /// Wall clock for the step; kept out of the CSV so logs stay
    /// byte-reproducible.
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Total frames consumed divided by measurement count.
    pub mean_b: f64,
    /// Frame-weighted mean of the per-step detection rates, matching a
    /// per-frame average over the source stream.
    pub mean_detection_rate: f64,
    /// Frame-weighted mean PSNR over all reconstructed frames.
    pub mean_psnr_db: Option<f64>,
    pub total_frames: usize,
    pub measurements: usize,
    pub frames_per_measurement: f64,
    /// Trailing frames that could not fill a batch at the final ratio.
    pub dropped_frames: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub video_name: String,
    pub mask_id: String,
    /// Set by fixed-ratio runs.
    pub fixed_b: Option<usize>,
    pub steps: Vec<StepRecord>,
    pub summary: RunSummary,
}

/// Adaptive capture over a full video. The final partial batch is dropped
/// and reported in the summary.
pub fn run_adaptive(
    video: &FrameSequence,
    track: &GroundTruthTrack,
    masks: &MaskStack,
    policy: &dyn Policy,
    cfg: &RunConfig,
) -> Result<EpisodeLog> {
    run_loop(video, track, masks, policy, cfg, None)
}

/// Non-adaptive baseline: the same loop with the action pinned to Keep and
/// the ratio fixed at `b`.
pub fn run_fixed(
    video: &FrameSequence,
    track: &GroundTruthTrack,
    masks: &MaskStack,
    b: usize,
    cfg: &RunConfig,
) -> Result<EpisodeLog> {
    let cfg = RunConfig { initial_b: InitialB::Fixed(b), ..cfg.clone() };
    run_loop(video, track, masks, &KeepPolicy, &cfg, Some(b))
}

fn run_loop(
    video: &FrameSequence,
    track: &GroundTruthTrack,
    masks: &MaskStack,
    policy: &dyn Policy,
    cfg: &RunConfig,
    fixed_b: Option<usize>,
) -> Result<EpisodeLog> {
    cfg.validate()?;
    if track.len() != video.len() {
        return Err(Error::validation(format!(
            "track covers {} frames but video has {}",
            track.len(),
            video.len()
        )));
    }
    if masks.height() != video.height() || masks.width() != video.width() {
        return Err(Error::validation(format!(
            "masks are {}x{} but video is {}x{}",
            masks.height(),
            masks.width(),
            video.height(),
            video.width()
        )));
    }
    masks.validate_prefixes(cfg.states.values())?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state_idx = match cfg.initial_b {
        InitialB::Random => rng.gen_range(0..cfg.states.len()),
        InitialB::Fixed(b) => cfg.states.index_of(b)?,
    };
    if video.len() < cfg.batch_size * cfg.states.value(state_idx) {
        return Err(Error::validation(format!(
            "video has {} frames, shorter than one batch of {} at B = {}",
            video.len(),
            cfg.batch_size * cfg.states.value(state_idx),
            cfg.states.value(state_idx)
        )));
    }

    let mut steps: Vec<StepRecord> = Vec::new();
    let mut cursor = 0usize;
    let mut psnr_frame_sum = 0.0;
    let mut psnr_frame_count = 0usize;

    loop {
        let b = cfg.states.value(state_idx);
        let window_frames = cfg.batch_size * b;
        if cursor + window_frames > video.len() {
            break;
        }
        let t0 = Instant::now();

        let mut normalized = Vec::with_capacity(cfg.batch_size);
        let mut measurements = Vec::with_capacity(cfg.batch_size);
        let mut gt_windows = Vec::with_capacity(cfg.batch_size);
        let mut truth_cubes: Vec<VideoCube> = Vec::with_capacity(cfg.batch_size);
        for w in 0..cfg.batch_size {
            let start = cursor + w * b;
            let cube = video.window(start, b)?;
            let (m, norm) = sense_normalized(&cube, masks, b, cfg.sigma, start, &mut rng)?;
            normalized.push(norm);
            measurements.push(m);
            gt_windows.push(track.window_hulls(start, b));
            if cfg.with_reconstruction {
                truth_cubes.push(cube);
            }
        }

        let rate = detection_rate(&normalized, &gt_windows, &cfg.detector)?;

        let psnr_db = if cfg.with_reconstruction {
            // Measurements in a batch are independent; reconstruct them in
            // parallel. No randomness is involved, so results are identical
            // to the sequential order.
            let recons = measurements
                .par_iter()
                .map(|m| gap_tv(m, masks, &cfg.recon).map(|r| r.cube))
                .collect::<Result<Vec<_>>>()?;
            let report = psnr(&recons, &truth_cubes)?;
            psnr_frame_sum += report.per_frame_psnr.iter().sum::<f64>();
            psnr_frame_count += report.per_frame_psnr.len();
            Some(report.psnr_db)
        } else {
            None
        };

        let band = if cfg.with_psnr_shaping {
            psnr_db.map(|p| PsnrBand::classify(&cfg.reward, p))
        } else {
            None
        };
        let obs = Observation::new(state_idx, rate, band);
        let action = policy.action(&obs);
        let shaping_psnr = if cfg.with_psnr_shaping { psnr_db } else { None };
        let r = reward(&cfg.states, state_idx, action, rate, shaping_psnr, &cfg.reward);
        let next_idx = step(&cfg.states, state_idx, action, &cfg.transition, &mut rng);

        steps.push(StepRecord {
            first_frame: cursor,
            last_frame: cursor + window_frames - 1,
            b,
            action,
            next_b: cfg.states.value(next_idx),
            reward: r,
            detection_rate: rate,
            psnr_db,
            elapsed: t0.elapsed(),
        });
        cursor += window_frames;
        state_idx = next_idx;
    }

    let measurements = steps.len() * cfg.batch_size;
    let total_frames = cursor;
    let mean_b = if measurements > 0 { total_frames as f64 / measurements as f64 } else { 0.0 };
    let mean_rate = if total_frames == 0 {
        0.0
    } else {
        steps
            .iter()
            .map(|s| s.detection_rate * (s.last_frame - s.first_frame + 1) as f64)
            .sum::<f64>()
            / total_frames as f64
    };
    let mean_psnr = (psnr_frame_count > 0).then(|| psnr_frame_sum / psnr_frame_count as f64);

    Ok(EpisodeLog {
        video_name: video.name().to_string(),
        mask_id: masks.identity(),
        fixed_b,
        steps,
        summary: RunSummary {
            mean_b,
            mean_detection_rate: mean_rate,
            mean_psnr_db: mean_psnr,
            total_frames,
            measurements,
            frames_per_measurement: mean_b,
            dropped_frames: video.len() - total_frames,
        },
    })
}

/// One fixed-ratio entry of a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedComparison {
    pub b: usize,
    pub summary: RunSummary,
    /// adaptive minus fixed, when both sides have PSNR.
    pub delta_psnr_db: Option<f64>,
    pub delta_detection_rate: f64,
    pub nearest: bool,
}

/// Adaptive run against a sweep of fixed baselines over the same video and
/// masks. Headline deltas are against the fixed ratio nearest the adaptive
/// mean B; deltas against every other baseline are also listed.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub video_name: String,
    pub adaptive: RunSummary,
    pub nearest_b: usize,
    pub fixed: Vec<FixedComparison>,
}

pub fn compare(adaptive: &EpisodeLog, fixed: &[EpisodeLog]) -> Result<ComparisonReport> {
    if fixed.is_empty() {
        return Err(Error::validation("comparison needs at least one fixed baseline"));
    }
    for log in fixed {
        if log.video_name != adaptive.video_name {
            return Err(Error::validation(format!(
                "baseline over video {:?} cannot be compared with adaptive run over {:?}",
                log.video_name, adaptive.video_name
            )));
        }
        if log.mask_id != adaptive.mask_id {
            return Err(Error::validation("logs were produced with different masks"));
        }
    }

    let mut entries: Vec<(usize, &EpisodeLog)> = fixed
        .iter()
        .map(|log| (log.fixed_b.unwrap_or(log.summary.mean_b.round() as usize), log))
        .collect();
    entries.sort_by_key(|&(b, _)| b);
    for pair in entries.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::validation(format!("duplicate fixed baseline at B = {}", pair[0].0)));
        }
    }

    let nearest_b = entries
        .iter()
        .map(|&(b, _)| b)
        .min_by(|&a, &b| {
            let da = (a as f64 - adaptive.summary.mean_b).abs();
            let db = (b as f64 - adaptive.summary.mean_b).abs();
            da.total_cmp(&db).then(a.cmp(&b))
        })
        .unwrap();

    let fixed_entries = entries
        .into_iter()
        .map(|(b, log)| {
            let delta_psnr = match (adaptive.summary.mean_psnr_db, log.summary.mean_psnr_db) {
                (Some(a), Some(f)) => Some(a - f),
                _ => None,
            };
            FixedComparison {
                b,
                summary: log.summary.clone(),
                delta_psnr_db: delta_psnr,
                delta_detection_rate: adaptive.summary.mean_detection_rate
                    - log.summary.mean_detection_rate,
                nearest: b == nearest_b,
            }
        })
        .collect();

    Ok(ComparisonReport {
        video_name: adaptive.video_name.clone(),
        adaptive: adaptive.summary.clone(),
        nearest_b,
        fixed: fixed_entries,
    })
}

/// Formats a float with 6 significant digits, the precision of every
/// numeric CSV field.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..6).contains(&exp) {
        let s = format!("{x:.5e}");
        // Trim trailing zeros in the mantissa: "1.50000e-7" -> "1.5e-7".
        match s.split_once('e') {
            Some((mantissa, e)) => {
                let trimmed = mantissa.trim_end_matches('0').trim_end_matches('.');
                format!("{trimmed}e{e}")
            }
            None => s,
        }
    } else {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    }
}

const EPISODE_CSV_HEADER: &str =
    "first_frame,last_frame,b,action,next_b,reward,detection_rate,psnr_db";

/// One header row plus one row per step. Wall-clock timings are
/// deliberately omitted so identical runs emit identical bytes.
pub fn episode_csv(log: &EpisodeLog) -> String {
    let mut out = String::from(EPISODE_CSV_HEADER);
    out.push('\n');
    for s in &log.steps {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            s.first_frame,
            s.last_frame,
            s.b,
            s.action.name(),
            s.next_b,
            fmt_sig(s.reward),
            fmt_sig(s.detection_rate),
            s.psnr_db.map(fmt_sig).unwrap_or_default(),
        ));
    }
    out
}

pub fn write_episode_csv(log: &EpisodeLog, path: &Path) -> Result<()> {
    std::fs::write(path, episode_csv(log)).map_err(|e| Error::io_path(path, e))
}

pub fn comparison_csv(report: &ComparisonReport) -> String {
    let mut out = String::from(
        "run,b,mean_b,mean_detection_rate,mean_psnr_db,total_frames,measurements,delta_psnr_db,delta_detection_rate,nearest\n",
    );
    let summary_cols = |s: &RunSummary| {
        format!(
            "{},{},{},{},{}",
            fmt_sig(s.mean_b),
            fmt_sig(s.mean_detection_rate),
            s.mean_psnr_db.map(fmt_sig).unwrap_or_default(),
            s.total_frames,
            s.measurements
        )
    };
    out.push_str(&format!("adaptive,,{},,,\n", summary_cols(&report.adaptive)));
    for f in &report.fixed {
        out.push_str(&format!(
            "fixed,{},{},{},{},{}\n",
            f.b,
            summary_cols(&f.summary),
            f.delta_psnr_db.map(fmt_sig).unwrap_or_default(),
            fmt_sig(f.delta_detection_rate),
            f.nearest
        ));
    }
    out
}

pub fn write_comparison_csv(report: &ComparisonReport, path: &Path) -> Result<()> {
    std::fs::write(path, comparison_csv(report)).map_err(|e| Error::io_path(path, e))
}

//! Plain-text configuration: `key = value` lines grouped under bracketed
//! section names that mirror the config struct fields. Unknown sections,
//! unknown keys, and duplicate keys are all hard errors. `#` starts a
//! comment.

use std::path::{Path, PathBuf};

use crate::detect::DetectorConfig;
use crate::error::{Error, Result};
use crate::reconstruct::ReconstructionConfig;
use crate::rl::agent::TrainConfig;
use crate::rl::env::{RewardConfig, StateSpace, TransitionModel};
use crate::runner::{InitialB, RunConfig};
use crate::video::{MotionSegment, ObjectSpec, SceneSpec, Shape};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathsConfig {
    pub video: Option<PathBuf>,
    pub masks: Option<PathBuf>,
    pub qtable: Option<PathBuf>,
}

/// Everything the CLI reads from `--config`.
#[derive(Debug, Clone, PartialEq)]
pub struct AppConfig {
    pub run: RunConfig,
    pub train: TrainConfig,
    pub paths: PathsConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self { run: RunConfig::default(), train: TrainConfig::default(), paths: PathsConfig::default() }
    }
}

struct RawSection {
    name: String,
    line: usize,
    entries: Vec<(String, String, usize)>,
}

fn parse_sections(text: &str) -> Result<Vec<RawSection>> {
    let mut sections: Vec<RawSection> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::validation(format!("line {line_no}: unterminated section header")))?
                .trim();
            if name.is_empty() {
                return Err(Error::validation(format!("line {line_no}: empty section name")));
            }
            sections.push(RawSection { name: name.to_string(), line: line_no, entries: Vec::new() });
        } else if let Some((key, value)) = line.split_once('=') {
            let section = sections
                .last_mut()
                .ok_or_else(|| Error::validation(format!("line {line_no}: key outside any [section]")))?;
            section.entries.push((key.trim().to_string(), value.trim().to_string(), line_no));
        } else {
            return Err(Error::validation(format!(
                "line {line_no}: expected `[section]` or `key = value`, got {line:?}"
            )));
        }
    }
    Ok(sections)
}

/// Pulls typed values out of one section, then rejects leftovers.
struct SectionReader {
    name: String,
    entries: Vec<(String, String, usize)>,
}

impl SectionReader {
    fn new(section: RawSection) -> Self {
        Self { name: section.name, entries: section.entries }
    }

    fn take(&mut self, key: &str) -> Result<Option<String>> {
        let mut found = None;
        let mut i = 0;
        while i < self.entries.len() {
            if self.entries[i].0 == key {
                let (_, value, line) = self.entries.remove(i);
                if found.is_some() {
                    return Err(Error::validation(format!(
                        "line {line}: duplicate key `{key}` in [{}]",
                        self.name
                    )));
                }
                found = Some(value);
            } else {
                i += 1;
            }
        }
        Ok(found)
    }

    fn take_all(&mut self, key: &str) -> Vec<String> {
        let mut values = Vec::new();
        self.entries.retain(|(k, v, _)| {
            if k == key {
                values.push(v.clone());
                false
            } else {
                true
            }
        });
        values
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key)? {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::validation(format!("[{}] {key}: cannot parse {v:?}", self.name))),
        }
    }

    fn parse_bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.take(key)?.as_deref() {
            None => Ok(None),
            Some("true") => Ok(Some(true)),
            Some("false") => Ok(Some(false)),
            Some(v) => Err(Error::validation(format!("[{}] {key}: expected true or false, got {v:?}", self.name))),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some((key, _, line)) = self.entries.first() {
            return Err(Error::validation(format!("line {line}: unknown key `{key}` in [{}]", self.name)));
        }
        Ok(())
    }
}

fn require<T>(section: &str, key: &str, v: Option<T>) -> Result<T> {
    v.ok_or_else(|| Error::validation(format!("[{section}] is missing required key `{key}`")))
}

impl AppConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io_path(path, e))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = AppConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for section in parse_sections(text)? {
            if seen.contains(&section.name) {
                return Err(Error::validation(format!(
                    "line {}: duplicate section [{}]",
                    section.line, section.name
                )));
            }
            seen.push(section.name.clone());
            let mut r = SectionReader::new(section);
            match r.name.as_str() {
                "states" => {
                    let raw = r.take("values")?;
                    let raw = require("states", "values", raw)?;
                    let values: Result<Vec<usize>> = raw
                        .split_whitespace()
                        .map(|t| {
                            t.parse::<usize>()
                                .map_err(|_| Error::validation(format!("[states] values: bad entry {t:?}")))
                        })
                        .collect();
                    cfg.run.states = StateSpace::new(values?)?;
                }
                "transition" => {
                    let mut t = TransitionModel::default();
                    if let Some(v) = r.parse("alpha")? {
                        t.alpha = v;
                    }
                    if let Some(v) = r.parse("beta")? {
                        t.beta = v;
                    }
                    t.validate()?;
                    cfg.run.transition = t;
                }
                "reward" => {
                    let mut w = RewardConfig::default();
                    if let Some(v) = r.parse("drth")? {
                        w.drth = v;
                    }
                    if let Some(v) = r.take("psnrth")? {
                        w.psnrth = if v == "none" {
                            None
                        } else {
                            Some(v.parse().map_err(|_| {
                                Error::validation(format!("[reward] psnrth: cannot parse {v:?}"))
                            })?)
                        };
                    }
                    if let Some(v) = r.parse("r1")? {
                        w.r1 = v;
                    }
                    if let Some(v) = r.parse("r2")? {
                        w.r2 = v;
                    }
                    if let Some(v) = r.parse("lambda1")? {
                        w.lambda1 = v;
                    }
                    if let Some(v) = r.parse("lambda2")? {
                        w.lambda2 = v;
                    }
                    if let Some(v) = r.parse("psnr_low")? {
                        w.psnr_low = v;
                    }
                    if let Some(v) = r.parse("psnr_high")? {
                        w.psnr_high = v;
                    }
                    w.validate()?;
                    cfg.run.reward = w;
                }
                "detector" => {
                    let mut d = DetectorConfig::default();
                    if let Some(v) = r.parse("threshold")? {
                        d.threshold = v;
                    }
                    if let Some(v) = r.parse("min_area")? {
                        d.min_area = v;
                    }
                    if let Some(v) = r.parse("iou_thresh")? {
                        d.iou_thresh = v;
                    }
                    d.validate()?;
                    cfg.run.detector = d;
                }
                "reconstruction" => {
                    let mut c = ReconstructionConfig::default();
                    if let Some(v) = r.parse("max_iters")? {
                        c.max_iters = v;
                    }
                    if let Some(v) = r.parse("tv_weight")? {
                        c.tv_weight = v;
                    }
                    if let Some(v) = r.parse("tv_inner_iters")? {
                        c.tv_inner_iters = v;
                    }
                    if let Some(v) = r.parse("tol")? {
                        c.tol = v;
                    }
                    c.validate()?;
                    cfg.run.recon = c;
                }
                "run" => {
                    if let Some(v) = r.parse("batch_size")? {
                        cfg.run.batch_size = v;
                    }
                    if let Some(v) = r.take("initial_b")? {
                        cfg.run.initial_b = if v == "random" {
                            InitialB::Random
                        } else {
                            InitialB::Fixed(v.parse().map_err(|_| {
                                Error::validation(format!("[run] initial_b: expected `random` or a ratio, got {v:?}"))
                            })?)
                        };
                    }
                    if let Some(v) = r.parse_bool("with_reconstruction")? {
                        cfg.run.with_reconstruction = v;
                    }
                    if let Some(v) = r.parse_bool("with_psnr_shaping")? {
                        cfg.run.with_psnr_shaping = v;
                    }
                    if let Some(v) = r.parse("sigma")? {
                        cfg.run.sigma = v;
                    }
                    if let Some(v) = r.parse("seed")? {
                        cfg.run.seed = v;
                    }
                }
                "train" => {
                    if let Some(v) = r.parse("episodes")? {
                        cfg.train.episodes = v;
                    }
                    if let Some(v) = r.parse("steps_per_episode")? {
                        cfg.train.steps_per_episode = v;
                    }
                    if let Some(v) = r.parse("learning_rate")? {
                        cfg.train.learning_rate = v;
                    }
                    if let Some(v) = r.parse("discount")? {
                        cfg.train.discount = v;
                    }
                    if let Some(v) = r.parse("epsilon_start")? {
                        cfg.train.epsilon_start = v;
                    }
                    if let Some(v) = r.parse("epsilon_end")? {
                        cfg.train.epsilon_end = v;
                    }
                    if let Some(v) = r.parse("seed")? {
                        cfg.train.seed = v;
                    }
                    cfg.train.validate()?;
                }
                "paths" => {
                    cfg.paths.video = r.take("video")?.map(PathBuf::from);
                    cfg.paths.masks = r.take("masks")?.map(PathBuf::from);
                    cfg.paths.qtable = r.take("qtable")?.map(PathBuf::from);
                }
                other => {
                    return Err(Error::validation(format!("unknown section [{other}]")));
                }
            }
            r.finish()?;
        }
        cfg.run.validate()?;
        Ok(cfg)
    }
}

/// Scene description file: one `[scene]` section followed by zero or more
/// `[object]` sections. Objects take `position = x y` and repeatable
/// `velocity = frames vx vy` lines.
pub fn scene_from_file(path: &Path) -> Result<SceneSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io_path(path, e))?;
    scene_from_text(&text)
}

pub fn scene_from_text(text: &str) -> Result<SceneSpec> {
    let sections = parse_sections(text)?;
    let mut spec: Option<SceneSpec> = None;
    for section in sections {
        let mut r = SectionReader::new(section);
        match r.name.as_str() {
            "scene" => {
                if spec.is_some() {
                    return Err(Error::validation("duplicate [scene] section"));
                }
                let width = r.parse("width")?;
                let width = require("scene", "width", width)?;
                let height = r.parse("height")?;
                let height = require("scene", "height", height)?;
                let duration = r.parse("duration")?;
                let duration = require("scene", "duration", duration)?;
                let background = r.parse("background")?;
                let background = require("scene", "background", background)?;
                let s = SceneSpec {
                    name: r.take("name")?.unwrap_or_else(|| "scene".to_string()),
                    width,
                    height,
                    duration,
                    seed: r.parse("seed")?.unwrap_or(0),
                    fps: r.parse("fps")?.unwrap_or(30.0),
                    background,
                    texture: r.parse("texture")?.unwrap_or(0.0),
                    objects: Vec::new(),
                };
                spec = Some(s);
            }
            "object" => {
                let spec = spec
                    .as_mut()
                    .ok_or_else(|| Error::validation("[object] must come after [scene]"))?;
                let shape = match r.take("shape")?.as_deref() {
                    None | Some("rectangle") => Shape::Rectangle,
                    Some("disc") => Shape::Disc,
                    Some(v) => {
                        return Err(Error::validation(format!(
                            "[object] shape: expected rectangle or disc, got {v:?}"
                        )))
                    }
                };
                let size = r.parse("size")?;
                let size = require("object", "size", size)?;
                let intensity = r.parse("intensity")?;
                let intensity = require("object", "intensity", intensity)?;
                let position = r.take("position")?;
                let position = require("object", "position", position)?;
                let coords: Vec<&str> = position.split_whitespace().collect();
                if coords.len() != 2 {
                    return Err(Error::validation("[object] position: expected `x y`"));
                }
                let x: f64 = coords[0]
                    .parse()
                    .map_err(|_| Error::validation(format!("[object] position x: bad value {:?}", coords[0])))?;
                let y: f64 = coords[1]
                    .parse()
                    .map_err(|_| Error::validation(format!("[object] position y: bad value {:?}", coords[1])))?;
                let mut motion = Vec::new();
                for v in r.take_all("velocity") {
                    let parts: Vec<&str> = v.split_whitespace().collect();
                    if parts.len() != 3 {
                        return Err(Error::validation(
                            "[object] velocity: expected `frames vx vy`".to_string(),
                        ));
                    }
                    motion.push(MotionSegment {
                        frames: parts[0].parse().map_err(|_| {
                            Error::validation(format!("[object] velocity frames: bad value {:?}", parts[0]))
                        })?,
                        vx: parts[1].parse().map_err(|_| {
                            Error::validation(format!("[object] velocity vx: bad value {:?}", parts[1]))
                        })?,
                        vy: parts[2].parse().map_err(|_| {
                            Error::validation(format!("[object] velocity vy: bad value {:?}", parts[2]))
                        })?,
                    });
                }
                spec.objects.push(ObjectSpec { shape, size, intensity, x, y, motion });
            }
            other => {
                return Err(Error::validation(format!("unknown section [{other}] in scene file")));
            }
        }
        r.finish()?;
    }
    let spec = spec.ok_or_else(|| Error::validation("scene file must contain a [scene] section"))?;
    spec.validate()?;
    Ok(spec)
}

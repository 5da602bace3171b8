//! Grayscale video sequences: synthetic scene generation with exact
//! ground-truth tracks, retiming (freeze / skip), and persistence as
//! binary PGM frames plus a plain-text manifest.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::detect::BoundingBox;
use crate::error::{Error, Result};

/// A single grayscale frame, `(height, width)`, pixel values in `[0,1]`.
pub type Frame = Array2<f64>;

/// An ordered grayscale video with uniform frame dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    fps: f64,
    name: String,
}

impl FrameSequence {
    /// Validates: length >= 1, uniform dimensions, pixels in `[0,1]`.
    pub fn new(frames: Vec<Frame>, fps: f64, name: impl Into<String>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::validation("frame sequence must contain at least one frame"));
        }
        let dim = frames[0].dim();
        if dim.0 == 0 || dim.1 == 0 {
            return Err(Error::validation("frames must have nonzero dimensions"));
        }
        for (i, f) in frames.iter().enumerate() {
            if f.dim() != dim {
                return Err(Error::validation(format!(
                    "frame {} has dimensions {}x{}, expected {}x{}",
                    i,
                    f.dim().0,
                    f.dim().1,
                    dim.0,
                    dim.1
                )));
            }
            if f.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::validation(format!("frame {i} has pixel values outside [0,1]")));
            }
        }
        Ok(Self { frames, fps, name: name.into() })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn height(&self) -> usize {
        self.frames[0].dim().0
    }

    pub fn width(&self) -> usize {
        self.frames[0].dim().1
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, i: usize) -> &Frame {
        &self.frames[i]
    }

    /// A contiguous block of `count` frames starting at `start`.
    pub fn window(&self, start: usize, count: usize) -> Result<VideoCube> {
        if start + count > self.frames.len() {
            return Err(Error::validation(format!(
                "window [{start}, {}) exceeds sequence length {}",
                start + count,
                self.frames.len()
            )));
        }
        VideoCube::from_frames(&self.frames[start..start + count])
    }
}

/// A block of B frames, the unit sensed into one measurement.
/// Axes: `(frame, row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoCube {
    data: Array3<f64>,
}

impl VideoCube {
    pub fn from_array(data: Array3<f64>) -> Result<Self> {
        let (b, h, w) = data.dim();
        if b == 0 || h == 0 || w == 0 {
            return Err(Error::validation("video cube must have nonzero dimensions"));
        }
        Ok(Self { data })
    }

    pub fn from_frames(frames: &[Frame]) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::validation("video cube needs at least one frame"));
        }
        let (h, w) = frames[0].dim();
        let mut data = Array3::zeros((frames.len(), h, w));
        for (b, f) in frames.iter().enumerate() {
            if f.dim() != (h, w) {
                return Err(Error::validation("video cube frames must share dimensions"));
            }
            data.index_axis_mut(ndarray::Axis(0), b).assign(f);
        }
        Ok(Self { data })
    }

    pub fn frame_count(&self) -> usize {
        self.data.dim().0
    }

    pub fn height(&self) -> usize {
        self.data.dim().1
    }

    pub fn width(&self) -> usize {
        self.data.dim().2
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn frame(&self, b: usize) -> ArrayView2<'_, f64> {
        self.data.index_axis(ndarray::Axis(0), b)
    }

    /// Flattened in frame-major, then row-major order: `[vec(X_1); ...; vec(X_B)]`.
    pub fn flatten(&self) -> Vec<f64> {
        self.data.iter().copied().collect()
    }
}

/// Object geometry for the scene generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Rectangle,
    Disc,
}

/// One piece of an object's piecewise-constant motion, in pixels/frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSegment {
    pub frames: usize,
    pub vx: f64,
    pub vy: f64,
}

/// A moving object: `size`x`size` footprint at constant intensity.
/// `x`/`y` are the initial top-left corner; once the motion segments are
/// exhausted the object holds still.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub shape: Shape,
    pub size: usize,
    pub intensity: f64,
    pub x: f64,
    pub y: f64,
    pub motion: Vec<MotionSegment>,
}

/// Full description of a synthetic scene; `generate_scene` is a pure
/// function of this value.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub duration: usize,
    pub seed: u64,
    pub fps: f64,
    /// Constant background intensity in `[0,1]`.
    pub background: f64,
    /// Amplitude of static per-pixel uniform texture added to the background.
    pub texture: f64,
    pub objects: Vec<ObjectSpec>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::validation("scene width must be positive"));
        }
        if self.height == 0 {
            return Err(Error::validation("scene height must be positive"));
        }
        if self.duration == 0 {
            return Err(Error::validation("scene duration must be at least 1 frame"));
        }
        if !(0.0..=1.0).contains(&self.background) {
            return Err(Error::validation("scene background must lie in [0,1]"));
        }
        if self.texture < 0.0 {
            return Err(Error::validation("scene texture amplitude must be non-negative"));
        }
        for (i, obj) in self.objects.iter().enumerate() {
            if obj.size == 0 {
                return Err(Error::validation(format!("object {i} size must be positive")));
            }
            if obj.size >= self.width || obj.size >= self.height {
                return Err(Error::validation(format!("object {i} size must be smaller than the frame")));
            }
            if !(0.0..=1.0).contains(&obj.intensity) {
                return Err(Error::validation(format!("object {i} intensity must lie in [0,1]")));
            }
        }
        Ok(())
    }
}

/// A ground-truth box with the identity of the object it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackedBox {
    pub object_id: usize,
    pub rect: BoundingBox,
}

/// Per-frame ground-truth boxes, one per visible object, clipped to the
/// frame bounds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthTrack {
    pub per_frame: Vec<Vec<TrackedBox>>,
}

impl GroundTruthTrack {
    pub fn len(&self) -> usize {
        self.per_frame.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_frame.is_empty()
    }

    /// Per-object bounding hulls over the frame window `[start, start+count)`.
    ///
    /// The hull of an object's per-frame boxes is the ground-truth label for
    /// a measurement covering those frames: it is exactly the motion-blur
    /// footprint the object leaves in the coded measurement. Objects not
    /// visible anywhere in the window contribute no hull. Output is sorted
    /// by object id.
    pub fn window_hulls(&self, start: usize, count: usize) -> Vec<BoundingBox> {
        let end = (start + count).min(self.per_frame.len());
        let mut by_object: Vec<(usize, usize, usize, usize, usize)> = Vec::new();
        for frame in &self.per_frame[start.min(end)..end] {
            for tb in frame {
                let (x0, y0) = (tb.rect.x, tb.rect.y);
                let (x1, y1) = (tb.rect.x + tb.rect.w, tb.rect.y + tb.rect.h);
                match by_object.iter_mut().find(|e| e.0 == tb.object_id) {
                    Some(e) => {
                        e.1 = e.1.min(x0);
                        e.2 = e.2.min(y0);
                        e.3 = e.3.max(x1);
                        e.4 = e.4.max(y1);
                    }
                    None => by_object.push((tb.object_id, x0, y0, x1, y1)),
                }
            }
        }
        by_object.sort_by_key(|e| e.0);
        by_object
            .into_iter()
            .map(|(_, x0, y0, x1, y1)| BoundingBox { x: x0, y: y0, w: x1 - x0, h: y1 - y0 })
            .collect()
    }
}

/// Renders a synthetic scene. Deterministic: the same spec (including
/// seed) produces bit-identical frames and track.
pub fn generate_scene(spec: &SceneSpec) -> Result<(FrameSequence, GroundTruthTrack)> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Static background texture, fixed across frames.
    let mut background = Array2::from_elem((h, w), spec.background);
    if spec.texture > 0.0 {
        for p in background.iter_mut() {
            *p = (*p + rng.gen_range(-spec.texture..=spec.texture)).clamp(0.0, 1.0);
        }
    }

    // Per-object motion state.
    let mut pos: Vec<(f64, f64)> = spec.objects.iter().map(|o| (o.x, o.y)).collect();
    let mut seg_idx = vec![0usize; spec.objects.len()];
    let mut seg_left: Vec<usize> =
        spec.objects.iter().map(|o| o.motion.first().map_or(0, |s| s.frames)).collect();

    let mut frames = Vec::with_capacity(spec.duration);
    let mut track = Vec::with_capacity(spec.duration);
    for _t in 0..spec.duration {
        let mut frame = background.clone();
        let mut boxes = Vec::new();
        for (id, obj) in spec.objects.iter().enumerate() {
            if let Some(rect) = draw_object(&mut frame, obj, pos[id]) {
                boxes.push(TrackedBox { object_id: id, rect });
            }
            // Advance along the motion segments; hold still when exhausted.
            while seg_left[id] == 0 && seg_idx[id] < obj.motion.len() {
                seg_idx[id] += 1;
                seg_left[id] = obj.motion.get(seg_idx[id]).map_or(0, |s| s.frames);
            }
            if let Some(seg) = obj.motion.get(seg_idx[id]) {
                if seg_left[id] > 0 {
                    pos[id].0 += seg.vx;
                    pos[id].1 += seg.vy;
                    seg_left[id] -= 1;
                }
            }
        }
        frames.push(frame);
        track.push(boxes);
    }

    let seq = FrameSequence::new(frames, spec.fps, spec.name.clone())?;
    Ok((seq, GroundTruthTrack { per_frame: track }))
}

/// Draws one object and returns the exact extent of the drawn pixels,
/// or `None` when the object is entirely off-frame.
fn draw_object(frame: &mut Frame, obj: &ObjectSpec, (x, y): (f64, f64)) -> Option<BoundingBox> {
    let (h, w) = frame.dim();
    let left = x.round() as i64;
    let top = y.round() as i64;
    let size = obj.size as i64;
    let (mut min_r, mut min_c) = (usize::MAX, usize::MAX);
    let (mut max_r, mut max_c) = (0usize, 0usize);
    let mut drawn = false;

    let r0 = top.max(0);
    let r1 = (top + size).min(h as i64);
    let c0 = left.max(0);
    let c1 = (left + size).min(w as i64);
    if r0 >= r1 || c0 >= c1 {
        return None;
    }

    let radius = obj.size as f64 / 2.0;
    let cx = left as f64 + radius;
    let cy = top as f64 + radius;
    for r in r0..r1 {
        for c in c0..c1 {
            let inside = match obj.shape {
                Shape::Rectangle => true,
                Shape::Disc => {
                    let dx = (c as f64 + 0.5) - cx;
                    let dy = (r as f64 + 0.5) - cy;
                    dx * dx + dy * dy <= radius * radius
                }
            };
            if inside {
                frame[(r as usize, c as usize)] = obj.intensity;
                drawn = true;
                min_r = min_r.min(r as usize);
                max_r = max_r.max(r as usize);
                min_c = min_c.min(c as usize);
                max_c = max_c.max(c as usize);
            }
        }
    }
    drawn.then(|| BoundingBox {
        x: min_c,
        y: min_r,
        w: max_c - min_c + 1,
        h: max_r - min_r + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetimeMode {
    Normal,
    Freeze,
    Skip,
}

/// One retiming segment over source frames `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetimeSegment {
    pub start: usize,
    pub end: usize,
    pub mode: RetimeMode,
    pub factor: usize,
}

/// An ordered, contiguous, non-overlapping cover of a source subrange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetimePlan {
    pub segments: Vec<RetimeSegment>,
}

impl RetimePlan {
    pub fn validate(&self, source_len: usize) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::validation("retime plan must contain at least one segment"));
        }
        let mut expected_start = None;
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.start >= seg.end {
                return Err(Error::validation(format!("retime segment {i} has empty range")));
            }
            if seg.factor == 0 {
                return Err(Error::validation(format!("retime segment {i} factor must be >= 1")));
            }
            if seg.mode == RetimeMode::Normal && seg.factor != 1 {
                return Err(Error::validation(format!("retime segment {i}: normal mode requires factor 1")));
            }
            if let Some(exp) = expected_start {
                if seg.start != exp {
                    return Err(Error::validation(format!(
                        "retime segment {i} starts at {} but previous segment ends at {exp}",
                        seg.start
                    )));
                }
            }
            if seg.end > source_len {
                return Err(Error::validation(format!(
                    "retime segment {i} ends at {} beyond source length {source_len}",
                    seg.end
                )));
            }
            expected_start = Some(seg.end);
        }
        Ok(())
    }
}

/// Retimes a sequence and its track: freeze repeats each frame
/// `factor` times, skip keeps every `factor`-th frame.
pub fn retime(
    seq: &FrameSequence,
    track: &GroundTruthTrack,
    plan: &RetimePlan,
) -> Result<(FrameSequence, GroundTruthTrack)> {
    plan.validate(seq.len())?;
    if track.len() != seq.len() {
        return Err(Error::validation(format!(
            "track length {} does not match sequence length {}",
            track.len(),
            seq.len()
        )));
    }

    let mut frames = Vec::new();
    let mut boxes = Vec::new();
    for seg in &plan.segments {
        match seg.mode {
            RetimeMode::Normal => {
                for i in seg.start..seg.end {
                    frames.push(seq.frame(i).clone());
                    boxes.push(track.per_frame[i].clone());
                }
            }
            RetimeMode::Freeze => {
                for i in seg.start..seg.end {
                    for _ in 0..seg.factor {
                        frames.push(seq.frame(i).clone());
                        boxes.push(track.per_frame[i].clone());
                    }
                }
            }
            RetimeMode::Skip => {
                for i in (seg.start..seg.end).step_by(seg.factor) {
                    frames.push(seq.frame(i).clone());
                    boxes.push(track.per_frame[i].clone());
                }
            }
        }
    }
    let out = FrameSequence::new(frames, seq.fps(), seq.name().to_string())?;
    Ok((out, GroundTruthTrack { per_frame: boxes }))
}

// ---------------------------------------------------------------------------
// Persistence: binary PGM frames + plain-text manifest + track file.
// ---------------------------------------------------------------------------

/// Serializes one frame as a binary PGM (magic `P5`, maxval 255).
/// Pixels quantize as round(255*p), rounding half up.
fn write_pgm(path: &Path, frame: &Frame) -> Result<()> {
    let (h, w) = frame.dim();
    let mut bytes = Vec::with_capacity(32 + h * w);
    bytes.extend_from_slice(format!("P5\n{w} {h}\n255\n").as_bytes());
    for p in frame.iter() {
        bytes.push((255.0 * p).round() as u8);
    }
    fs::write(path, bytes).map_err(|e| Error::io_path(path, e))
}

fn read_pgm(path: &Path) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| Error::io_path(path, e))?;
    let mut pos = 0usize;
    let mut next_token = |bytes: &[u8]| -> Result<String> {
        // Skip whitespace and '#' comments.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::io(format!("{}: malformed PGM header", path.display())));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = next_token(&bytes)?;
    if magic != "P5" {
        return Err(Error::io(format!("{}: malformed PGM header: magic {magic:?}, expected \"P5\"", path.display())));
    }
    let parse = |tok: String, what: &str| -> Result<usize> {
        tok.parse::<usize>()
            .map_err(|_| Error::io(format!("{}: malformed PGM header: bad {what} {tok:?}", path.display())))
    };
    let w = parse(next_token(&bytes)?, "width")?;
    let h = parse(next_token(&bytes)?, "height")?;
    let maxval = parse(next_token(&bytes)?, "maxval")?;
    if maxval != 255 {
        return Err(Error::io(format!("{}: unsupported PGM maxval {maxval}, expected 255", path.display())));
    }
    if w == 0 || h == 0 {
        return Err(Error::io(format!("{}: PGM dimensions must be nonzero", path.display())));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    if bytes.len() < pos + w * h {
        return Err(Error::io(format!("{}: PGM raster truncated", path.display())));
    }
    let mut frame = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            frame[(r, c)] = bytes[pos + r * w + c] as f64 / 255.0;
        }
    }
    Ok(frame)
}

/// Writes per-frame PGM files plus a manifest listing them in order.
/// Returns the manifest path.
pub fn save_frames(seq: &FrameSequence, dir: &Path) -> Result<PathBuf> {
    save_scene(seq, None, dir)
}

/// Like `save_frames` but also persists the track and references it from
/// the manifest.
pub fn save_scene(seq: &FrameSequence, track: Option<&GroundTruthTrack>, dir: &Path) -> Result<PathBuf> {
    if seq.is_empty() {
        return Err(Error::validation("cannot save an empty frame sequence"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io_path(dir, e))?;

    let manifest_path = dir.join("manifest.txt");
    let mut manifest = String::new();
    manifest.push_str(&format!(
        "frames {} {} {} {}\n",
        seq.len(),
        seq.width(),
        seq.height(),
        seq.fps()
    ));
    if let Some(t) = track {
        if t.len() != seq.len() {
            return Err(Error::validation("track length does not match sequence length"));
        }
        save_track(t, &dir.join("track.txt"))?;
        manifest.push_str("track track.txt\n");
    }
    for (i, frame) in seq.frames().iter().enumerate() {
        let name = format!("frame_{i:04}.pgm");
        write_pgm(&dir.join(&name), frame)?;
        manifest.push_str(&name);
        manifest.push('\n');
    }
    fs::write(&manifest_path, manifest).map_err(|e| Error::io_path(&manifest_path, e))?;
    Ok(manifest_path)
}

/// Loads a sequence (and track, when the manifest references one).
pub fn load_frames(manifest_path: &Path) -> Result<(FrameSequence, Option<GroundTruthTrack>)> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io_path(manifest_path, e))?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut lines = text.lines();

    let header = lines
        .next()
        .ok_or_else(|| Error::io(format!("{}: empty manifest", manifest_path.display())))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "frames" {
        return Err(Error::io(format!(
            "{}: malformed manifest header, expected `frames <count> <width> <height> <fps>`",
            manifest_path.display()
        )));
    }
    let count: usize = fields[1]
        .parse()
        .map_err(|_| Error::io(format!("{}: bad frame count", manifest_path.display())))?;
    let width: usize = fields[2]
        .parse()
        .map_err(|_| Error::io(format!("{}: bad width", manifest_path.display())))?;
    let height: usize = fields[3]
        .parse()
        .map_err(|_| Error::io(format!("{}: bad height", manifest_path.display())))?;
    let fps: f64 = fields[4]
        .parse()
        .map_err(|_| Error::io(format!("{}: bad fps", manifest_path.display())))?;

    let mut entries: Vec<&str> = Vec::with_capacity(count);
    let mut track_path: Option<PathBuf> = None;
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("track ") {
            track_path = Some(dir.join(rest.trim()));
        } else {
            entries.push(line);
        }
    }
    if entries.len() != count {
        return Err(Error::io(format!(
            "{}: manifest lists {} frames but header declares {count}",
            manifest_path.display(),
            entries.len()
        )));
    }

    let mut frames = Vec::with_capacity(count);
    for entry in entries {
        let frame = read_pgm(&dir.join(entry))?;
        if frame.dim() != (height, width) {
            return Err(Error::io(format!(
                "{entry}: frame is {}x{}, manifest declares {width}x{height}",
                frame.dim().1,
                frame.dim().0
            )));
        }
        frames.push(frame);
    }
    let seq = FrameSequence::new(frames, fps, manifest_stem(manifest_path))?;
    let track = match track_path {
        Some(p) => Some(load_track(&p, count)?),
        None => None,
    };
    Ok((seq, track))
}

fn manifest_stem(path: &Path) -> String {
    path.parent()
        .and_then(|d| d.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "video".to_string())
}

/// Track file: one `frame_index object_id x y w h` record per line.
pub fn save_track(track: &GroundTruthTrack, path: &Path) -> Result<()> {
    let mut out = String::new();
    for (frame_idx, boxes) in track.per_frame.iter().enumerate() {
        for tb in boxes {
            out.push_str(&format!(
                "{frame_idx} {} {} {} {} {}\n",
                tb.object_id, tb.rect.x, tb.rect.y, tb.rect.w, tb.rect.h
            ));
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io_path(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io_path(path, e))
}

pub fn load_track(path: &Path, num_frames: usize) -> Result<GroundTruthTrack> {
    let text = fs::read_to_string(path).map_err(|e| Error::io_path(path, e))?;
    let mut per_frame = vec![Vec::new(); num_frames];
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(Error::io(format!(
                "{}:{}: expected `frame_index object_id x y w h`",
                path.display(),
                ln + 1
            )));
        }
        let nums: Result<Vec<usize>> = fields
            .iter()
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| Error::io(format!("{}:{}: bad integer {s:?}", path.display(), ln + 1)))
            })
            .collect();
        let nums = nums?;
        if nums[0] >= num_frames {
            return Err(Error::io(format!(
                "{}:{}: frame index {} out of range ({} frames)",
                path.display(),
                ln + 1,
                nums[0],
                num_frames
            )));
        }
        if nums[4] == 0 || nums[5] == 0 {
            return Err(Error::io(format!("{}:{}: box must have positive extent", path.display(), ln + 1)));
        }
        per_frame[nums[0]].push(TrackedBox {
            object_id: nums[1],
            rect: BoundingBox { x: nums[2], y: nums[3], w: nums[4], h: nums[5] },
        });
    }
    Ok(GroundTruthTrack { per_frame })
}

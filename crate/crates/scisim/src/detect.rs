//! Object detection directly on normalized measurements, scored with
//! IoU-matched average precision.
//!
//! The detector is a contrast blob finder: background is the median pixel,
//! foreground is any pixel deviating from it by more than a threshold,
//! detections are 4-connected components. Detection confidence is the mean
//! contrast of the component, so confidence falls exactly when compression
//! smears a moving object across the measurement.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::sensing::NormalizedMeasurement;

/// Axis-aligned pixel box; `w` and `h` count pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BoundingBox {
    pub fn area(&self) -> usize {
        self.w * self.h
    }
}

/// A detected box with a ranking confidence in `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub confidence: f64,
}

/// Outcome of matching detections against ground truths at one threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// `(detection index, ground-truth index, iou)` per matched pair.
    pub pairs: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Contrast threshold against the median background, in `(0,1)`.
    pub threshold: f64,
    /// Minimum component area in pixels.
    pub min_area: usize,
    /// IoU threshold for a detection to count as a true positive.
    pub iou_thresh: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { threshold: 0.3, min_area: 4, iou_thresh: 0.5 }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.threshold) || self.threshold == 0.0 {
            return Err(Error::validation("detector threshold must lie in (0,1)"));
        }
        if self.min_area == 0 {
            return Err(Error::validation("detector min_area must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.iou_thresh) || self.iou_thresh == 0.0 {
            return Err(Error::validation("iou threshold must lie in (0,1]"));
        }
        Ok(())
    }
}

/// Intersection over union of two pixel boxes; 0 when disjoint.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix0 = a.x.max(b.x);
    let iy0 = a.y.max(b.y);
    let ix1 = (a.x + a.w).min(b.x + b.w);
    let iy1 = (a.y + a.h).min(b.y + b.h);
    if ix1 <= ix0 || iy1 <= iy0 {
        return 0.0;
    }
    let inter = ((ix1 - ix0) * (iy1 - iy0)) as f64;
    let union = (a.area() + b.area()) as f64 - inter;
    inter / union
}

/// Thresholded connected-component detection on a grayscale image.
///
/// Background level is the median pixel; pixels with `|p - median| >
/// threshold` are foreground; 4-connected components of area >= `min_area`
/// become detections whose box is the component extent and whose confidence
/// is `min(1, mean contrast / (2 * threshold))`.
pub fn blob_detect(img: &Array2<f64>, threshold: f64, min_area: usize) -> Result<Vec<Detection>> {
    if !(0.0..1.0).contains(&threshold) || threshold == 0.0 {
        return Err(Error::validation("threshold must lie in (0,1)"));
    }
    if min_area == 0 {
        return Err(Error::validation("min_area must be >= 1"));
    }

    let (h, w) = img.dim();
    let mut sorted: Vec<f64> = img.iter().copied().collect();
    sorted.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };

    let foreground: Vec<bool> = img.iter().map(|&p| (p - median).abs() > threshold).collect();
    let mut visited = vec![false; h * w];
    let mut detections = Vec::new();
    let mut stack = Vec::new();

    for start in 0..h * w {
        if !foreground[start] || visited[start] {
            continue;
        }
        // Flood-fill one 4-connected component.
        stack.push(start);
        visited[start] = true;
        let (mut min_r, mut min_c, mut max_r, mut max_c) = (h, w, 0usize, 0usize);
        let mut area = 0usize;
        let mut contrast_sum = 0.0;
        while let Some(idx) = stack.pop() {
            let (r, c) = (idx / w, idx % w);
            area += 1;
            contrast_sum += (img[(r, c)] - median).abs();
            min_r = min_r.min(r);
            max_r = max_r.max(r);
            min_c = min_c.min(c);
            max_c = max_c.max(c);
            let mut visit = |rr: usize, cc: usize| {
                let nidx = rr * w + cc;
                if foreground[nidx] && !visited[nidx] {
                    visited[nidx] = true;
                    stack.push(nidx);
                }
            };
            if r > 0 {
                visit(r - 1, c);
            }
            if r + 1 < h {
                visit(r + 1, c);
            }
            if c > 0 {
                visit(r, c - 1);
            }
            if c + 1 < w {
                visit(r, c + 1);
            }
        }
        if area >= min_area {
            let confidence = (contrast_sum / area as f64 / (2.0 * threshold)).min(1.0);
            detections.push(Detection {
                bbox: BoundingBox { x: min_c, y: min_r, w: max_c - min_c + 1, h: max_r - min_r + 1 },
                confidence,
            });
        }
    }
    Ok(detections)
}

pub fn detect_measurement(m: &NormalizedMeasurement, cfg: &DetectorConfig) -> Result<Vec<Detection>> {
    blob_detect(&m.ybar, cfg.threshold, cfg.min_area)
}

/// Sort order for ranked detections: confidence descending, ties by
/// ascending box x then y.
fn ranked_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .total_cmp(&dets[a].confidence)
            .then(dets[a].bbox.x.cmp(&dets[b].bbox.x))
            .then(dets[a].bbox.y.cmp(&dets[b].bbox.y))
    });
    order
}

/// Greedy confidence-ranked matching. Each detection claims the unmatched
/// ground truth of highest IoU when that IoU exceeds `iou_thresh`; duplicate
/// detections of an already-claimed ground truth count as false positives.
pub fn match_detections(
    dets: &[Detection],
    gts: &[BoundingBox],
    iou_thresh: f64,
) -> Result<MatchResult> {
    if !(0.0..=1.0).contains(&iou_thresh) || iou_thresh == 0.0 {
        return Err(Error::validation("iou threshold must lie in (0,1]"));
    }
    let mut gt_taken = vec![false; gts.len()];
    let mut pairs = Vec::new();
    for det_idx in ranked_order(dets) {
        let mut best: Option<(usize, f64)> = None;
        for (gt_idx, gt) in gts.iter().enumerate() {
            if gt_taken[gt_idx] {
                continue;
            }
            let v = iou(&dets[det_idx].bbox, gt);
            if best.map_or(true, |(_, bv)| v > bv) {
                best = Some((gt_idx, v));
            }
        }
        if let Some((gt_idx, v)) = best {
            if v > iou_thresh {
                gt_taken[gt_idx] = true;
                pairs.push((det_idx, gt_idx, v));
            }
        }
    }
    let tp = pairs.len();
    Ok(MatchResult {
        true_positives: tp,
        false_positives: dets.len() - tp,
        false_negatives: gts.len() - tp,
        pairs,
    })
}

/// Average precision over a pooled batch, all-point interpolation.
///
/// `groups` pairs each measurement's detections with its ground truths;
/// matching is per measurement, ranking and the precision/recall curve are
/// global. With zero ground truths in the batch the score is defined as 1
/// when there are also zero detections and 0 otherwise.
pub fn average_precision(
    groups: &[(Vec<Detection>, Vec<BoundingBox>)],
    iou_thresh: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&iou_thresh) || iou_thresh == 0.0 {
        return Err(Error::validation("iou threshold must lie in (0,1]"));
    }
    let total_gts: usize = groups.iter().map(|(_, g)| g.len()).sum();
    let total_dets: usize = groups.iter().map(|(d, _)| d.len()).sum();
    if total_gts == 0 {
        return Ok(if total_dets == 0 { 1.0 } else { 0.0 });
    }
    if total_dets == 0 {
        return Ok(0.0);
    }

    // Global ranking: confidence desc, then box x, y, then group index.
    let mut ranked: Vec<(usize, usize)> = Vec::with_capacity(total_dets);
    for (g, (dets, _)) in groups.iter().enumerate() {
        for d in 0..dets.len() {
            ranked.push((g, d));
        }
    }
    ranked.sort_by(|&(ga, da), &(gb, db)| {
        let a = &groups[ga].0[da];
        let b = &groups[gb].0[db];
        b.confidence
            .total_cmp(&a.confidence)
            .then(a.bbox.x.cmp(&b.bbox.x))
            .then(a.bbox.y.cmp(&b.bbox.y))
            .then(ga.cmp(&gb))
    });

    let mut gt_taken: Vec<Vec<bool>> = groups.iter().map(|(_, g)| vec![false; g.len()]).collect();
    let mut tp_flags = Vec::with_capacity(total_dets);
    for &(g, d) in &ranked {
        let det = &groups[g].0[d];
        let gts = &groups[g].1;
        let mut best: Option<(usize, f64)> = None;
        for (gt_idx, gt) in gts.iter().enumerate() {
            if gt_taken[g][gt_idx] {
                continue;
            }
            let v = iou(&det.bbox, gt);
            if best.map_or(true, |(_, bv)| v > bv) {
                best = Some((gt_idx, v));
            }
        }
        match best {
            Some((gt_idx, v)) if v > iou_thresh => {
                gt_taken[g][gt_idx] = true;
                tp_flags.push(true);
            }
            _ => tp_flags.push(false),
        }
    }

    // Cumulative precision/recall, then area under the precision envelope.
    let mut points = Vec::with_capacity(total_dets);
    let (mut tp, mut fp) = (0usize, 0usize);
    for &is_tp in &tp_flags {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        points.push((tp as f64 / total_gts as f64, tp as f64 / (tp + fp) as f64));
    }
    let mut envelope = vec![0.0; points.len()];
    let mut running = 0.0f64;
    for i in (0..points.len()).rev() {
        running = running.max(points[i].1);
        envelope[i] = running;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (i, &(recall, _)) in points.iter().enumerate() {
        if recall > prev_recall {
            ap += (recall - prev_recall) * envelope[i];
            prev_recall = recall;
        }
    }
    Ok(ap)
}

/// Batch detection rate: blob-detect every normalized measurement, pool,
/// and return the average precision. This is the signal the adaptation
/// policy consumes; the window it covers is `BatchSize * B` source frames.
pub fn detection_rate(
    measurements: &[NormalizedMeasurement],
    gt_windows: &[Vec<BoundingBox>],
    cfg: &DetectorConfig,
) -> Result<f64> {
    cfg.validate()?;
    if measurements.len() != gt_windows.len() {
        return Err(Error::validation(format!(
            "{} measurements but {} ground-truth windows",
            measurements.len(),
            gt_windows.len()
        )));
    }
    let mut groups = Vec::with_capacity(measurements.len());
    for (m, gts) in measurements.iter().zip(gt_windows) {
        groups.push((detect_measurement(m, cfg)?, gts.clone()));
    }
    average_precision(&groups, cfg.iou_thresh)
}

/// Audit dump: one `measurement_index confidence x y w h` line per detection.
pub fn write_detections(per_measurement: &[Vec<Detection>], path: &Path) -> Result<()> {
    let mut out = String::new();
    for (i, dets) in per_measurement.iter().enumerate() {
        for d in dets {
            out.push_str(&format!(
                "{i} {} {} {} {} {}\n",
                d.confidence, d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h
            ));
        }
    }
    fs::write(path, out).map_err(|e| Error::io_path(path, e))
}

//! Evaluation suite: pixel precision/recall, PoLiS, maximum tangent-angle
//! error, IoU-thresholded AP/AR, and per-scene aggregation.

use crate::geometry::{closest_point_on_ring, Point2, PolygonRing};
use crate::raster::{iou, rasterize, rasterize_union, BinaryMask, RasterError};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("mask dimensions mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("IoU threshold {0} outside (0, 1]")]
    BadThreshold(f64),
    #[error("threshold list is empty")]
    EmptyThresholds,
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// A scored polygon prediction.
#[derive(Debug, Clone)]
pub struct Detection {
    pub ring: PolygonRing,
    pub score: f64,
}

/// Nearest-point search domain for PoLiS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NearestMode {
    /// Minimum over the continuous boundary (the reference definition).
    Boundary,
    /// Minimum over the vertex set only, kept for comparison.
    Vertices,
}

/// Per-matched-instance vector metrics.
#[derive(Debug, Clone, Serialize)]
pub struct PerInstance {
    pub polis: f64,
    pub mta: f64,
    pub iou: f64,
}

/// Scene-level evaluation summary. `polis_mean`/`mta_mean` are absent when
/// nothing matched at the instance-matching IoU.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub polis_mean: Option<f64>,
    pub mta_mean: Option<f64>,
    pub ap: f64,
    pub ar: f64,
    pub per_instance: Vec<PerInstance>,
}

/// Evaluation settings: the raster grid, the AP/AR threshold sweep, and
/// the single threshold used to pair instances for PoLiS/MTA.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub raster_height: usize,
    pub raster_width: usize,
    pub iou_thresholds: Vec<f64>,
    pub match_iou: f64,
}

impl EvalConfig {
    pub fn new(raster_height: usize, raster_width: usize) -> Self {
        Self {
            raster_height,
            raster_width,
            iou_thresholds: default_thresholds(),
            match_iou: 0.5,
        }
    }
}

/// The standard sweep 0.50:0.95 in steps of 0.05.
pub fn default_thresholds() -> Vec<f64> {
    (0..10).map(|i| 0.5 + 0.05 * i as f64).collect()
}

/// Pixel precision and recall of a predicted mask against ground truth.
///
/// Conventions: with no predicted positives, precision is 1.0 when the
/// ground truth is also empty and 0.0 otherwise; recall is 1.0 when the
/// ground truth is empty.
pub fn pixel_pr(pred: &BinaryMask, gt: &BinaryMask) -> Result<(f64, f64), MetricsError> {
    if pred.height() != gt.height() || pred.width() != gt.width() {
        return Err(MetricsError::DimensionMismatch(
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width(),
        ));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fne = 0usize;
    for (p, g) in pred.bits().iter().zip(gt.bits()) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fne += 1,
            _ => {}
        }
    }
    let precision = if tp + fp == 0 {
        if tp + fne == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fne == 0 {
        1.0
    } else {
        tp as f64 / (tp + fne) as f64
    };
    Ok((precision, recall))
}

fn min_dist(p: Point2, ring: &PolygonRing, mode: NearestMode) -> f64 {
    match mode {
        NearestMode::Boundary => closest_point_on_ring(p, ring).distance,
        NearestMode::Vertices => ring
            .vertices()
            .iter()
            .map(|v| v.dist(p))
            .fold(f64::INFINITY, f64::min),
    }
}

/// PoLiS with an explicit nearest-point mode.
pub fn polis_with_mode(p: &PolygonRing, q: &PolygonRing, mode: NearestMode) -> f64 {
    let forward: f64 = p
        .vertices()
        .iter()
        .map(|v| min_dist(*v, q, mode))
        .sum::<f64>()
        / (2.0 * p.len() as f64);
    let backward: f64 = q
        .vertices()
        .iter()
        .map(|v| min_dist(*v, p, mode))
        .sum::<f64>()
        / (2.0 * q.len() as f64);
    forward + backward
}

/// Symmetric polygon dissimilarity: mean distance from each ring's
/// vertices to the other ring's continuous boundary, averaged both ways.
pub fn polis(p: &PolygonRing, q: &PolygonRing) -> f64 {
    polis_with_mode(p, q, NearestMode::Boundary)
}

fn unit_tangent(ring: &PolygonRing, edge: usize) -> Option<Point2> {
    let (a, b) = ring.edge(edge);
    let d = b - a;
    let n = d.norm();
    if n < 1e-12 {
        None
    } else {
        Some(d * (1.0 / n))
    }
}

/// Index of the vertex of `q` nearest to `p`; ties keep the lowest index.
fn nearest_vertex(p: Point2, q: &PolygonRing) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, v) in q.vertices().iter().enumerate() {
        let d = p.dist(*v);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Angle between two direction vectors in [0°, 180°]. atan2 keeps the
/// result exact at 0 where acos of a rounded dot product would not.
pub(crate) fn tangent_angle_deg(a: Point2, b: Point2) -> f64 {
    a.cross(b).abs().atan2(a.dot(b)).to_degrees()
}

/// Maximum tangent-angle error in degrees.
///
/// Tangents live at vertices (the difference of consecutive vertices):
/// each vertex of `p` compares its tangent against the tangent of the
/// nearest vertex of `q`, and the maximum angle over vertices is
/// returned. Vertices with a degenerate outgoing edge are skipped.
pub fn max_tangent(p: &PolygonRing, q: &PolygonRing) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..p.len() {
        let Some(tp) = unit_tangent(p, i) else {
            continue;
        };
        let k = nearest_vertex(p.vertices()[i], q);
        let Some(tq) = unit_tangent(q, k) else {
            continue;
        };
        worst = worst.max(tangent_angle_deg(tp, tq));
    }
    worst
}

fn validate_thresholds(thresholds: &[f64]) -> Result<(), MetricsError> {
    if thresholds.is_empty() {
        return Err(MetricsError::EmptyThresholds);
    }
    for &t in thresholds {
        if !(t > 0.0 && t <= 1.0) {
            return Err(MetricsError::BadThreshold(t));
        }
    }
    Ok(())
}

/// Detection indices ordered by (score desc, index asc).
fn score_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap()
            .then(a.cmp(&b))
    });
    order
}

/// Greedy matching at one threshold: detections in score order claim the
/// unmatched ground truth with the highest IoU at or above the threshold.
/// Returns per-detection hit flags (in score order) and the match count.
fn match_at_threshold(
    iou_matrix: &[Vec<f64>],
    order: &[usize],
    n_gts: usize,
    threshold: f64,
) -> (Vec<bool>, usize) {
    let mut gt_taken = vec![false; n_gts];
    let mut hits = Vec::with_capacity(order.len());
    let mut matched = 0;
    for &d in order {
        let mut best: Option<(f64, usize)> = None;
        for g in 0..n_gts {
            if gt_taken[g] {
                continue;
            }
            let v = iou_matrix[d][g];
            if v >= threshold && best.is_none_or(|(bv, _)| v > bv) {
                best = Some((v, g));
            }
        }
        if let Some((_, g)) = best {
            gt_taken[g] = true;
            matched += 1;
            hits.push(true);
        } else {
            hits.push(false);
        }
    }
    (hits, matched)
}

/// 101-point interpolated average precision from per-detection hit flags
/// (already in score order).
fn average_precision(hits: &[bool], n_gts: usize) -> f64 {
    if n_gts == 0 {
        return 0.0;
    }
    let mut tp = 0usize;
    let mut curve: Vec<(f64, f64)> = Vec::with_capacity(hits.len()); // (recall, precision)
    for (k, &hit) in hits.iter().enumerate() {
        if hit {
            tp += 1;
        }
        curve.push((tp as f64 / n_gts as f64, tp as f64 / (k + 1) as f64));
    }
    // Precision envelope: best precision at recall ≥ r.
    let mut total = 0.0;
    for i in 0..=100 {
        let r = i as f64 / 100.0;
        let p = curve
            .iter()
            .filter(|(rec, _)| *rec >= r - 1e-12)
            .map(|(_, prec)| *prec)
            .fold(0.0, f64::max);
        total += p;
    }
    total / 101.0
}

fn iou_matrix(
    dets: &[Detection],
    gts: &[PolygonRing],
    height: usize,
    width: usize,
) -> Result<Vec<Vec<f64>>, MetricsError> {
    let gt_masks: Vec<BinaryMask> = gts
        .iter()
        .map(|g| rasterize(g, height, width))
        .collect::<Result<_, _>>()?;
    let mut matrix = Vec::with_capacity(dets.len());
    for d in dets {
        let dm = rasterize(&d.ring, height, width)?;
        let row = gt_masks
            .iter()
            .map(|gm| iou(&dm, gm))
            .collect::<Result<Vec<f64>, _>>()?;
        matrix.push(row);
    }
    Ok(matrix)
}

/// COCO-style AP/AR over an IoU threshold sweep with greedy score-ordered
/// matching on raster IoU. Both empty → (1, 1) by convention; detections
/// against an empty ground truth score 0.
pub fn ap_ar(
    dets: &[Detection],
    gts: &[PolygonRing],
    raster_size: (usize, usize),
    thresholds: &[f64],
) -> Result<(f64, f64), MetricsError> {
    validate_thresholds(thresholds)?;
    if gts.is_empty() {
        return Ok(if dets.is_empty() { (1.0, 1.0) } else { (0.0, 0.0) });
    }
    if dets.is_empty() {
        return Ok((0.0, 0.0));
    }
    let matrix = iou_matrix(dets, gts, raster_size.0, raster_size.1)?;
    let order = score_order(dets);
    let mut ap_sum = 0.0;
    let mut ar_sum = 0.0;
    for &t in thresholds {
        let (hits, matched) = match_at_threshold(&matrix, &order, gts.len(), t);
        ap_sum += average_precision(&hits, gts.len());
        ar_sum += matched as f64 / gts.len() as f64;
    }
    Ok((ap_sum / thresholds.len() as f64, ar_sum / thresholds.len() as f64))
}

/// Full per-scene evaluation: pixel P/R on union masks, AP/AR over the
/// threshold sweep, and PoLiS/MTA on instances matched at `cfg.match_iou`.
pub fn evaluate_scene(
    dets: &[Detection],
    gts: &[PolygonRing],
    cfg: &EvalConfig,
) -> Result<MetricsReport, MetricsError> {
    validate_thresholds(&cfg.iou_thresholds)?;
    let (h, w) = (cfg.raster_height, cfg.raster_width);
    let det_rings: Vec<PolygonRing> = dets.iter().map(|d| d.ring.clone()).collect();
    let pred_mask = rasterize_union(&det_rings, h, w)?;
    let gt_mask = rasterize_union(gts, h, w)?;
    let (precision, recall) = pixel_pr(&pred_mask, &gt_mask)?;
    let (ap, ar) = ap_ar(dets, gts, (h, w), &cfg.iou_thresholds)?;

    let mut per_instance = Vec::new();
    if !dets.is_empty() && !gts.is_empty() {
        let matrix = iou_matrix(dets, gts, h, w)?;
        let order = score_order(dets);
        let mut gt_taken = vec![false; gts.len()];
        for &d in &order {
            let mut best: Option<(f64, usize)> = None;
            for g in 0..gts.len() {
                if gt_taken[g] {
                    continue;
                }
                let v = matrix[d][g];
                if v >= cfg.match_iou && best.is_none_or(|(bv, _)| v > bv) {
                    best = Some((v, g));
                }
            }
            if let Some((v, g)) = best {
                gt_taken[g] = true;
                per_instance.push(PerInstance {
                    polis: polis(&dets[d].ring, &gts[g]),
                    mta: max_tangent(&dets[d].ring, &gts[g]),
                    iou: v,
                });
            }
        }
    }
    let (polis_mean, mta_mean) = if per_instance.is_empty() {
        (None, None)
    } else {
        let n = per_instance.len() as f64;
        (
            Some(per_instance.iter().map(|p| p.polis).sum::<f64>() / n),
            Some(per_instance.iter().map(|p| p.mta).sum::<f64>() / n),
        )
    };
    Ok(MetricsReport {
        precision,
        recall,
        polis_mean,
        mta_mean,
        ap,
        ar,
        per_instance,
    })
}

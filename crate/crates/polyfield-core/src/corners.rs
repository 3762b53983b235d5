//! Corner extraction and dynamic polygon initialization.
//!
//! The initializer fuses two prediction channels: a mask, whose largest
//! component is contour-traced and simplified, and a set of scored corner
//! detections that snap onto that contour. Contour vertices far from every
//! snapped corner are kept as "missing corners", so the output vertex
//! count adapts to the building instead of being fixed.

use crate::geometry::{
    closest_point_on_segment, simplify_dp_ring, Point2, PolygonRing,
};
use crate::raster::{BinaryMask, ProbGrid};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InitError {
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("contour degenerate: fewer than 3 vertices")]
    DegenerateContour,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CornerKind {
    Convex,
    Concave,
}

/// A scored, typed corner detection at image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    pub position: Point2,
    pub kind: CornerKind,
    pub score: f64,
}

/// A set of corner detections; after [`nms_corners`] all pairwise
/// distances exceed the suppression radius.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CornerSet {
    corners: Vec<Corner>,
}

impl CornerSet {
    pub fn new(corners: Vec<Corner>) -> Self {
        Self { corners }
    }

    pub fn corners(&self) -> &[Corner] {
        &self.corners
    }

    pub fn len(&self) -> usize {
        self.corners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corners.is_empty()
    }
}

/// Knobs for polygon initialization. The defaults match the reference
/// pipeline settings used throughout the tests.
#[derive(Debug, Clone, Copy)]
pub struct InitConfig {
    /// Douglas–Peucker tolerance for contour simplification (px).
    pub epsilon: f64,
    /// Corner suppression radius (px).
    pub nms_radius: f64,
    /// Contour vertices farther than this from every snapped corner are
    /// inserted as missing corners (px).
    pub missing_dist: f64,
    /// Heatmap threshold for corner extraction.
    pub score_threshold: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            nms_radius: 3.0,
            missing_dist: 3.0,
            score_threshold: 0.5,
        }
    }
}

/// Strict 8-neighborhood local maxima at or above `score_threshold`, one
/// scan per map; corners land at pixel centers.
pub fn corners_from_heatmap(
    convex_map: &ProbGrid,
    concave_map: &ProbGrid,
    score_threshold: f64,
) -> CornerSet {
    assert!(
        (0.0..1.0).contains(&score_threshold) && score_threshold > 0.0,
        "score threshold must lie in (0, 1)"
    );
    assert!(
        convex_map.height() == concave_map.height() && convex_map.width() == concave_map.width(),
        "corner maps must share dimensions"
    );
    let mut corners = Vec::new();
    for (map, kind) in [
        (convex_map, CornerKind::Convex),
        (concave_map, CornerKind::Concave),
    ] {
        let (h, w) = (map.height() as isize, map.width() as isize);
        for i in 0..h {
            for j in 0..w {
                let v = map.get(i as usize, j as usize);
                if v < score_threshold {
                    continue;
                }
                let mut strict_max = true;
                'nbrs: for di in -1..=1 {
                    for dj in -1..=1 {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let (ni, nj) = (i + di, j + dj);
                        if ni < 0 || nj < 0 || ni >= h || nj >= w {
                            continue;
                        }
                        if map.get(ni as usize, nj as usize) >= v {
                            strict_max = false;
                            break 'nbrs;
                        }
                    }
                }
                if strict_max {
                    corners.push(Corner {
                        position: Point2::new(j as f64 + 0.5, i as f64 + 0.5),
                        kind,
                        score: v,
                    });
                }
            }
        }
    }
    CornerSet::new(corners)
}

fn nms_order(a: &Corner, b: &Corner) -> std::cmp::Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap()
        .then(a.position.y.partial_cmp(&b.position.y).unwrap())
        .then(a.position.x.partial_cmp(&b.position.x).unwrap())
}

/// Greedy score-descending suppression: a corner within `radius` of an
/// already kept corner is dropped. Ties break by (score desc, y asc, x asc).
pub fn nms_corners(set: &CornerSet, radius: f64) -> CornerSet {
    assert!(radius > 0.0, "nms radius must be positive");
    let mut sorted: Vec<Corner> = set.corners.clone();
    sorted.sort_by(nms_order);
    let mut kept: Vec<Corner> = Vec::new();
    for c in sorted {
        if kept
            .iter()
            .all(|k| k.position.dist(c.position) > radius)
        {
            kept.push(c);
        }
    }
    CornerSet::new(kept)
}

const NEIGHBORS_CLOCKWISE: [(isize, isize); 8] = [
    (0, -1),  // W
    (-1, -1), // NW
    (-1, 0),  // N
    (-1, 1),  // NE
    (0, 1),   // E
    (1, 1),   // SE
    (1, 0),   // S
    (1, -1),  // SW
];

/// Largest 8-connected foreground component, as a mask of the same size.
pub fn largest_component(mask: &BinaryMask) -> Option<BinaryMask> {
    let (h, w) = (mask.height(), mask.width());
    let mut label = vec![usize::MAX; h * w];
    let mut sizes: Vec<usize> = Vec::new();
    for start in 0..h * w {
        if !mask.bits()[start] || label[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut queue = vec![start];
        label[start] = id;
        let mut size = 0;
        while let Some(p) = queue.pop() {
            size += 1;
            let (i, j) = (p / w, p % w);
            for (di, dj) in NEIGHBORS_CLOCKWISE {
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if ni < 0 || nj < 0 || ni >= h as isize || nj >= w as isize {
                    continue;
                }
                let q = ni as usize * w + nj as usize;
                if mask.bits()[q] && label[q] == usize::MAX {
                    label[q] = id;
                    queue.push(q);
                }
            }
        }
        sizes.push(size);
    }
    let best = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?
        .0;
    let bits = label.iter().map(|&l| l == best).collect();
    Some(BinaryMask::from_bits(h, w, bits).expect("mask dims valid"))
}

/// Moore-neighbor tracing (8-connectivity) of the outer contour, with
/// Jacob's stopping criterion. Emits boundary pixel centers as a closed
/// ordered loop; interior holes are ignored.
pub fn trace_contour(mask: &BinaryMask) -> Result<Vec<Point2>, InitError> {
    let (h, w) = (mask.height() as isize, mask.width() as isize);
    let is_fg = |i: isize, j: isize| -> bool {
        i >= 0 && j >= 0 && i < h && j < w && mask.get(i as usize, j as usize)
    };
    let mut start = None;
    'scan: for i in 0..h {
        for j in 0..w {
            if is_fg(i, j) {
                start = Some((i, j));
                break 'scan;
            }
        }
    }
    let start = start.ok_or(InitError::EmptyMask)?;
    let center = |(i, j): (isize, isize)| Point2::new(j as f64 + 0.5, i as f64 + 0.5);

    // Entry came from the west neighbor, which is background or outside
    // because the start is the first foreground pixel in scan order.
    // Termination: the (pixel, backtrack) state repeating means the trace
    // has closed its cycle. This covers Jacob's criterion and also stops
    // on degenerate one-pixel-wide shapes.
    let mut contour = vec![center(start)];
    let mut current = start;
    let mut backtrack_dir = 0usize; // index into NEIGHBORS_CLOCKWISE pointing at the backtrack
    let mut seen = std::collections::HashSet::new();
    seen.insert((start, backtrack_dir));
    let max_steps = (4 * h * w) as usize;
    for _ in 0..max_steps {
        let mut found = None;
        for k in 1..=8 {
            let dir = (backtrack_dir + k) % 8;
            let (di, dj) = NEIGHBORS_CLOCKWISE[dir];
            if is_fg(current.0 + di, current.1 + dj) {
                found = Some((dir, (current.0 + di, current.1 + dj)));
                break;
            }
        }
        let Some((dir, next)) = found else {
            break; // isolated pixel
        };
        // New backtrack: the checked neighbor just before the hit, seen
        // from the next pixel.
        let prev_dir = (dir + 7) % 8;
        let (pdi, pdj) = NEIGHBORS_CLOCKWISE[prev_dir];
        let back_pixel = (current.0 + pdi, current.1 + pdj);
        let mut back_dir = 0;
        for (idx, (di, dj)) in NEIGHBORS_CLOCKWISE.iter().enumerate() {
            if (next.0 + di, next.1 + dj) == back_pixel {
                back_dir = idx;
                break;
            }
        }
        current = next;
        backtrack_dir = back_dir;
        if !seen.insert((current, backtrack_dir)) {
            break;
        }
        contour.push(center(current));
    }
    if contour.len() >= 2 && contour[0].dist(*contour.last().unwrap()) < 1e-9 {
        contour.pop();
    }
    Ok(contour)
}

struct Snapped {
    arc: f64,
    point: Point2,
    score: f64,
}

fn arc_position(ring: &PolygonRing, p: Point2) -> (f64, Point2) {
    let mut best = (f64::INFINITY, 0.0, p);
    let mut walked = 0.0;
    for i in 0..ring.len() {
        let (a, b) = ring.edge(i);
        let (q, t) = closest_point_on_segment(p, a, b);
        let d = p.dist(q);
        if d < best.0 {
            best = (d, walked + t * a.dist(b), q);
        }
        walked += a.dist(b);
    }
    (best.1, best.2)
}

/// Dynamic polygon initialization for one region of interest.
///
/// Traces the largest component's outer contour, simplifies it, snaps the
/// (already suppressed) corners to the contour, orders them by arc length,
/// and inserts simplified-contour vertices far from every corner. Falls
/// back to the simplified contour when the fused ring degenerates.
pub fn init_polygon(
    mask: &BinaryMask,
    corners: &CornerSet,
    cfg: &InitConfig,
) -> Result<PolygonRing, InitError> {
    let component = largest_component(mask).ok_or(InitError::EmptyMask)?;
    let contour = trace_contour(&component)?;
    let traced = PolygonRing::new(contour).map_err(|_| InitError::DegenerateContour)?;
    let simplified = simplify_dp_ring(&traced, cfg.epsilon);
    if corners.is_empty() {
        return Ok(simplified);
    }

    let mut snapped: Vec<Snapped> = Vec::with_capacity(corners.len());
    for c in corners.corners() {
        let (arc, point) = arc_position(&simplified, c.position);
        snapped.push(Snapped {
            arc,
            point,
            score: c.score,
        });
    }
    // Corners landing on the same contour point collapse to the best score.
    snapped.sort_by(|a, b| a.arc.partial_cmp(&b.arc).unwrap());
    let mut dedup: Vec<Snapped> = Vec::with_capacity(snapped.len());
    for s in snapped {
        match dedup.last_mut() {
            Some(last) if last.point.dist(s.point) <= 1e-9 => {
                if s.score > last.score {
                    *last = s;
                }
            }
            _ => dedup.push(s),
        }
    }

    // Missing corners: simplified-contour vertices far from every snapped
    // corner, kept at their own arc positions.
    let mut entries: Vec<(f64, Point2)> = dedup.iter().map(|s| (s.arc, s.point)).collect();
    let mut walked = 0.0;
    for i in 0..simplified.len() {
        let v = simplified.vertices()[i];
        if dedup.iter().all(|s| s.point.dist(v) > cfg.missing_dist) {
            entries.push((walked, v));
        }
        let (a, b) = simplified.edge(i);
        walked += a.dist(b);
    }
    entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let fused = PolygonRing::new(entries.into_iter().map(|(_, p)| p).collect());
    match fused {
        Ok(ring) if ring.is_simple() || !simplified.is_simple() => Ok(ring),
        _ => Ok(simplified),
    }
}

/// Scene-level wrapper: initialize one polygon per connected component
/// (components smaller than 3 px are skipped), handing each component the
/// corners nearest to it.
pub fn init_scene_polygons(
    mask: &BinaryMask,
    corners: &CornerSet,
    cfg: &InitConfig,
) -> Result<Vec<PolygonRing>, InitError> {
    let (h, w) = (mask.height(), mask.width());
    let mut remaining = mask.clone();
    let mut components: Vec<BinaryMask> = Vec::new();
    while let Some(comp) = largest_component(&remaining) {
        for i in 0..h {
            for j in 0..w {
                if comp.get(i, j) {
                    remaining.set(i, j, false);
                }
            }
        }
        // Specks below 3 px cannot carry a ring.
        if comp.count_ones() >= 3 {
            components.push(comp);
        }
    }
    if components.is_empty() {
        return Err(InitError::EmptyMask);
    }
    // Assign each corner to the nearest component (by nearest foreground
    // pixel center), capped at twice the suppression radius.
    let cap = 2.0 * cfg.nms_radius;
    let mut per_component: Vec<Vec<Corner>> = vec![Vec::new(); components.len()];
    for c in corners.corners() {
        let mut best = (f64::INFINITY, 0usize);
        for (idx, comp) in components.iter().enumerate() {
            for i in 0..h {
                for j in 0..w {
                    if comp.get(i, j) {
                        let d = c
                            .position
                            .dist(Point2::new(j as f64 + 0.5, i as f64 + 0.5));
                        if d < best.0 {
                            best = (d, idx);
                        }
                    }
                }
            }
        }
        if best.0 <= cap {
            per_component[best.1].push(*c);
        }
    }
    let mut rings = Vec::with_capacity(components.len());
    for (comp, cs) in components.iter().zip(per_component) {
        match init_polygon(comp, &CornerSet::new(cs), cfg) {
            Ok(r) => rings.push(r),
            Err(InitError::DegenerateContour) => continue,
            Err(e) => return Err(e),
        }
    }
    if rings.is_empty() {
        Err(InitError::DegenerateContour)
    } else {
        Ok(rings)
    }
}

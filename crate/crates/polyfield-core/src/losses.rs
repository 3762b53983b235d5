//! Training losses: mask BCE, vertex L1, the orthogonality regularizer,
//! and their analytic gradients. Every gradient here is checked against
//! central finite differences in the tests.

use crate::geometry::{Point2, PolygonRing};
use crate::raster::{BinaryMask, ProbGrid};
use thiserror::Error;

/// Edges shorter than this are skipped by the orthogonality terms.
const DEGENERATE_EDGE: f64 = 1e-12;

/// Default probability clamp for [`mask_bce`].
pub const DEFAULT_CLAMP_EPS: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("vertex count mismatch: {0} vs {1}")]
    CountMismatch(usize, usize),
    #[error("grid dimensions mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("clamp epsilon {0} outside (0, 0.5)")]
    BadEps(f64),
}

/// Non-negative weights combining the four loss components.
#[derive(Debug, Clone, Copy)]
pub struct LossWeights {
    pub w_mask: f64,
    pub w_afm: f64,
    pub w_vertex: f64,
    pub w_ortho: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_mask: 1.0,
            w_afm: 1.0,
            w_vertex: 1.0,
            w_ortho: 1.0,
        }
    }
}

/// The scalar values the weights combine.
#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    pub mask: f64,
    pub afm: f64,
    pub vertex: f64,
    pub ortho: f64,
}

/// Vertex correspondence mode for [`vertex_l1`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexAlign {
    /// Index i of the prediction pairs with index i of the ground truth.
    Fixed,
    /// The ground-truth start index rotates to minimize the sum.
    Cyclic,
}

/// Mean binary cross-entropy between a probability grid and a 0/1 mask,
/// with probabilities clamped to [eps, 1−eps].
pub fn mask_bce(pred: &ProbGrid, gt: &BinaryMask, clamp_eps: f64) -> Result<f64, LossError> {
    if !(0.0..0.5).contains(&clamp_eps) || clamp_eps == 0.0 {
        return Err(LossError::BadEps(clamp_eps));
    }
    if pred.height() != gt.height() || pred.width() != gt.width() {
        return Err(LossError::DimensionMismatch(
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width(),
        ));
    }
    let n = (pred.height() * pred.width()) as f64;
    let mut acc = 0.0;
    for (p, &y) in pred.values().iter().zip(gt.bits()) {
        let p = p.clamp(clamp_eps, 1.0 - clamp_eps);
        acc -= if y { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(acc / n)
}

/// ∂mask_bce/∂pred, flattened row-major. Zero where the clamp is active.
pub fn mask_bce_grad(
    pred: &ProbGrid,
    gt: &BinaryMask,
    clamp_eps: f64,
) -> Result<Vec<f64>, LossError> {
    if !(0.0..0.5).contains(&clamp_eps) || clamp_eps == 0.0 {
        return Err(LossError::BadEps(clamp_eps));
    }
    if pred.height() != gt.height() || pred.width() != gt.width() {
        return Err(LossError::DimensionMismatch(
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width(),
        ));
    }
    let n = (pred.height() * pred.width()) as f64;
    Ok(pred
        .values()
        .iter()
        .zip(gt.bits())
        .map(|(&p, &y)| {
            if p <= clamp_eps || p >= 1.0 - clamp_eps {
                0.0
            } else if y {
                -1.0 / p / n
            } else {
                1.0 / (1.0 - p) / n
            }
        })
        .collect())
}

/// Geometric L1 distance between corresponding vertices:
/// Σᵢ (|xᵢ − xᵢ'| + |yᵢ − yᵢ'|). Counts must already match; resample with
/// [`resample_ring`] first when they do not.
pub fn vertex_l1(
    pred: &PolygonRing,
    gt: &PolygonRing,
    align: VertexAlign,
) -> Result<f64, LossError> {
    let n = pred.len();
    if n != gt.len() {
        return Err(LossError::CountMismatch(n, gt.len()));
    }
    let sum_at = |offset: usize| -> f64 {
        (0..n)
            .map(|i| {
                let p = pred.vertices()[i];
                let g = gt.vertices()[(i + offset) % n];
                (p.x - g.x).abs() + (p.y - g.y).abs()
            })
            .sum()
    };
    Ok(match align {
        VertexAlign::Fixed => sum_at(0),
        VertexAlign::Cyclic => (0..n)
            .map(sum_at)
            .fold(f64::INFINITY, f64::min),
    })
}

/// Arc-length resampling to exactly `n` vertices, starting at vertex 0.
///
/// For n at or above the current count every original vertex survives and
/// the extras subdivide edges proportionally to their length (so the
/// traversed perimeter is preserved); for n below the count the points are
/// placed at uniform arc-length intervals.
pub fn resample_ring(ring: &PolygonRing, n: usize) -> PolygonRing {
    assert!(n >= 3, "resample target must be at least 3");
    let m = ring.len();
    if n == m {
        return ring.clone();
    }
    let lengths: Vec<f64> = (0..m)
        .map(|i| {
            let (a, b) = ring.edge(i);
            a.dist(b)
        })
        .collect();
    let perimeter: f64 = lengths.iter().sum();
    let mut pts: Vec<Point2> = Vec::with_capacity(n);
    if n > m {
        let extra = n - m;
        let mut alloc = vec![0usize; m];
        let mut fracs: Vec<(f64, usize)> = Vec::with_capacity(m);
        let mut assigned = 0;
        for i in 0..m {
            let quota = extra as f64 * lengths[i] / perimeter;
            alloc[i] = quota.floor() as usize;
            assigned += alloc[i];
            fracs.push((quota - quota.floor(), i));
        }
        // Largest remainder, ties by edge index.
        fracs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, i) in fracs.iter().take(extra - assigned) {
            alloc[i] += 1;
        }
        for i in 0..m {
            let (a, b) = ring.edge(i);
            pts.push(a);
            for j in 1..=alloc[i] {
                let t = j as f64 / (alloc[i] + 1) as f64;
                pts.push(a + (b - a) * t);
            }
        }
    } else {
        let step = perimeter / n as f64;
        let mut edge = 0;
        let mut consumed = 0.0;
        for k in 0..n {
            let target = k as f64 * step;
            while edge < m - 1 && consumed + lengths[edge] < target {
                consumed += lengths[edge];
                edge += 1;
            }
            let (a, b) = ring.edge(edge);
            let t = if lengths[edge] > 0.0 {
                ((target - consumed) / lengths[edge]).clamp(0.0, 1.0)
            } else {
                0.0
            };
            pts.push(a + (b - a) * t);
        }
    }
    PolygonRing::new(pts).expect("resampled ring stays valid")
}

fn perp(v: Point2) -> Point2 {
    Point2::new(-v.y, v.x)
}

/// Per-ring orthogonality penalty on a raw vertex loop: mean over
/// vertices of sin²(2Δθ), with Δθ the turn between consecutive edge
/// directions. Zero exactly when all turns are multiples of 90°;
/// invariant to rotation, translation, and uniform scaling. Vertices
/// touching a degenerate edge are skipped.
pub(crate) fn ortho_points(pts: &[Point2]) -> f64 {
    let n = pts.len();
    let mut acc = 0.0;
    let mut m = 0usize;
    for k in 0..n {
        let e_prev = pts[k] - pts[(k + n - 1) % n];
        let e_next = pts[(k + 1) % n] - pts[k];
        if e_prev.norm() < DEGENERATE_EDGE || e_next.norm() < DEGENERATE_EDGE {
            continue;
        }
        let dtheta = e_prev.cross(e_next).atan2(e_prev.dot(e_next));
        acc += (2.0 * dtheta).sin().powi(2);
        m += 1;
    }
    if m == 0 {
        0.0
    } else {
        acc / m as f64
    }
}

/// Gradient of [`ortho_points`] with respect to each vertex, scaled by
/// `1/scale` (callers average over rings by passing the ring count).
pub(crate) fn ortho_points_grad(pts: &[Point2], scale: f64) -> Vec<[f64; 2]> {
    let n = pts.len();
    let mut grad = vec![[0.0; 2]; n];
    let mut terms: Vec<usize> = Vec::with_capacity(n);
    for k in 0..n {
        let e_prev = pts[k] - pts[(k + n - 1) % n];
        let e_next = pts[(k + 1) % n] - pts[k];
        if e_prev.norm() >= DEGENERATE_EDGE && e_next.norm() >= DEGENERATE_EDGE {
            terms.push(k);
        }
    }
    if terms.is_empty() {
        return grad;
    }
    let m = terms.len() as f64;
    for &k in &terms {
        let e_prev = pts[k] - pts[(k + n - 1) % n];
        let e_next = pts[(k + 1) % n] - pts[k];
        let dtheta = e_prev.cross(e_next).atan2(e_prev.dot(e_next));
        // d/dΔθ of sin²(2Δθ).
        let coeff = 2.0 * (4.0 * dtheta).sin() / (m * scale);
        let dp = perp(e_prev) * (1.0 / e_prev.dot(e_prev));
        let dn = perp(e_next) * (1.0 / e_next.dot(e_next));
        // Δθ = φ(e_next) − φ(e_prev).
        let add = |g: &mut [f64; 2], v: Point2, s: f64| {
            g[0] += s * v.x;
            g[1] += s * v.y;
        };
        add(&mut grad[(k + 1) % n], dn, coeff);
        add(&mut grad[k], dn, -coeff);
        add(&mut grad[k], dp, -coeff);
        add(&mut grad[(k + n - 1) % n], dp, coeff);
    }
    grad
}

/// (1/N) Σⱼ over rings of the per-ring right-angle penalty.
pub fn ortho_loss(rings: &[PolygonRing]) -> f64 {
    if rings.is_empty() {
        return 0.0;
    }
    rings.iter().map(|r| ortho_points(r.vertices())).sum::<f64>() / rings.len() as f64
}

/// Analytic ∂ortho_loss/∂vertex for every ring, one (dx, dy) per vertex.
pub fn ortho_loss_grad(rings: &[PolygonRing]) -> Vec<Vec<[f64; 2]>> {
    let n_rings = rings.len().max(1) as f64;
    rings
        .iter()
        .map(|ring| ortho_points_grad(ring.vertices(), n_rings))
        .collect()
}

/// Weighted sum of the four components.
pub fn total_loss(parts: LossParts, weights: LossWeights) -> f64 {
    weights.w_mask * parts.mask
        + weights.w_afm * parts.afm
        + weights.w_vertex * parts.vertex
        + weights.w_ortho * parts.ortho
}

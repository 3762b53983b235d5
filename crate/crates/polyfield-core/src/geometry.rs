//! Exact 2-D polygon primitives.
//!
//! Coordinates are pixels in image space (x right, y down). A
//! [`PolygonRing`] is an ordered, implicitly closed vertex loop stored
//! counter-clockwise by signed area; orientation language elsewhere in the
//! crate always means "signed area > 0", independent of how the y axis is
//! drawn.

use thiserror::Error;

/// Consecutive vertices closer than this collapse to one point. Well below
/// any raster quantization.
pub const DUP_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("polygon ring needs at least 3 distinct vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polyline needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),
}

/// A point in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(&self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dot(&self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z component of the cross product, treating both as vectors.
    pub fn cross(&self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// An open, ordered chain of at least two finite points.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Point2>,
}

impl Polyline {
    pub fn new(points: Vec<Point2>) -> Result<Self, GeometryError> {
        for (i, p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(GeometryError::NonFinite(i));
            }
        }
        if points.len() < 2 {
            return Err(GeometryError::TooFewPoints(points.len()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    /// Douglas–Peucker simplification; endpoints always survive.
    pub fn simplify(&self, epsilon: f64) -> Polyline {
        Polyline {
            points: simplify_dp(&self.points, epsilon),
        }
    }
}

/// Closed vertex loop, stored counter-clockwise (signed area > 0) after
/// construction. Construction collapses consecutive duplicates (within
/// [`DUP_EPS`]) and an explicit closing vertex; it does not enforce
/// simplicity, which callers check with [`PolygonRing::is_simple`] where
/// it matters.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonRing {
    vertices: Vec<Point2>,
}

impl PolygonRing {
    pub fn new(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        for (i, p) in vertices.iter().enumerate() {
            if !p.is_finite() {
                return Err(GeometryError::NonFinite(i));
            }
        }
        let mut pts: Vec<Point2> = Vec::with_capacity(vertices.len());
        for p in vertices {
            if pts.last().is_none_or(|q| q.dist(p) > DUP_EPS) {
                pts.push(p);
            }
        }
        // Drop an explicit closing vertex.
        while pts.len() > 1 && pts[0].dist(*pts.last().unwrap()) <= DUP_EPS {
            pts.pop();
        }
        if pts.len() < 3 {
            return Err(GeometryError::TooFewVertices(pts.len()));
        }
        if signed_area(&pts) < 0.0 {
            pts.reverse();
        }
        Ok(Self { vertices: pts })
    }

    /// Build from an already clean loop, preserving vertex order and
    /// count. Used by refinement, whose contract is to move vertices
    /// without adding, removing, or reordering them.
    pub(crate) fn from_loop_unnormalized(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        for (i, p) in vertices.iter().enumerate() {
            if !p.is_finite() {
                return Err(GeometryError::NonFinite(i));
            }
        }
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Directed edge i: (v_i, v_{i+1 mod n}).
    pub fn edge(&self, i: usize) -> (Point2, Point2) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let (a, b) = self.edge(i);
                a.dist(b)
            })
            .sum()
    }

    pub fn is_simple(&self) -> bool {
        is_simple(&self.vertices)
    }

    pub fn centroid(&self) -> Point2 {
        let n = self.len() as f64;
        let (sx, sy) = self
            .vertices
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Point2::new(sx / n, sy / n)
    }

    /// Same loop translated by (dx, dy).
    pub fn translated(&self, dx: f64, dy: f64) -> PolygonRing {
        PolygonRing {
            vertices: self
                .vertices
                .iter()
                .map(|p| Point2::new(p.x + dx, p.y + dy))
                .collect(),
        }
    }
}

/// Shoelace signed area of a closed loop; positive iff counter-clockwise.
/// A degenerate collinear loop returns 0.
pub fn signed_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Whether segments (p1,p2) and (p3,p4) share any point.
pub fn segments_intersect(p1: Point2, p2: Point2, p3: Point2, p4: Point2) -> bool {
    let d1 = orient(p3, p4, p1);
    let d2 = orient(p3, p4, p2);
    let d3 = orient(p1, p2, p3);
    let d4 = orient(p1, p2, p4);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(p3, p4, p1))
        || (d2 == 0.0 && on_segment(p3, p4, p2))
        || (d3 == 0.0 && on_segment(p1, p2, p3))
        || (d4 == 0.0 && on_segment(p1, p2, p4))
}

/// True iff no two non-adjacent edges of the closed loop intersect and no
/// adjacent edges fold back onto each other.
pub fn is_simple(pts: &[Point2]) -> bool {
    let n = pts.len();
    if n < 3 {
        return false;
    }
    let edge = |i: usize| (pts[i], pts[(i + 1) % n]);
    for i in 0..n {
        let (a1, a2) = edge(i);
        for j in (i + 1)..n {
            let (b1, b2) = edge(j);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Shared endpoint is fine; a collinear fold-back (spike) is not.
                let (shared, pa, pb) = if j == i + 1 {
                    (a2, a1, b2)
                } else {
                    (a1, b1, a2)
                };
                let u = pa - shared;
                let v = pb - shared;
                if u.cross(v) == 0.0 && u.dot(v) > 0.0 {
                    return false;
                }
            } else if segments_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

/// Nearest point on a segment to `p`, returned with its parameter t in [0,1].
pub fn closest_point_on_segment(p: Point2, a: Point2, b: Point2) -> (Point2, f64) {
    let d = b - a;
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return (a, 0.0);
    }
    let t = ((p - a).dot(d) / len2).clamp(0.0, 1.0);
    (a + d * t, t)
}

/// Result of a nearest-boundary query against a ring.
#[derive(Debug, Clone, Copy)]
pub struct ClosestPoint {
    pub point: Point2,
    pub edge: usize,
    pub distance: f64,
}

/// Globally nearest point on the ring's boundary to `p`. Ties between
/// edges keep the lowest edge index.
pub fn closest_point_on_ring(p: Point2, ring: &PolygonRing) -> ClosestPoint {
    let mut best = ClosestPoint {
        point: ring.vertices()[0],
        edge: 0,
        distance: f64::INFINITY,
    };
    for i in 0..ring.len() {
        let (a, b) = ring.edge(i);
        let (q, _t) = closest_point_on_segment(p, a, b);
        let d = p.dist(q);
        if d < best.distance {
            best = ClosestPoint {
                point: q,
                edge: i,
                distance: d,
            };
        }
    }
    best
}

fn perp_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let (q, _) = closest_point_on_segment(p, a, b);
    p.dist(q)
}

fn dp_recurse(pts: &[Point2], epsilon: f64, keep: &mut Vec<Point2>) {
    let n = pts.len();
    if n < 3 {
        if n == 2 {
            keep.push(pts[1]);
        }
        return;
    }
    let (mut max_d, mut idx) = (0.0, 0);
    for i in 1..n - 1 {
        let d = perp_distance(pts[i], pts[0], pts[n - 1]);
        if d > max_d {
            max_d = d;
            idx = i;
        }
    }
    if max_d > epsilon {
        dp_recurse(&pts[..=idx], epsilon, keep);
        dp_recurse(&pts[idx..], epsilon, keep);
    } else {
        keep.push(pts[n - 1]);
    }
}

/// Douglas–Peucker on an open chain; endpoints always survive, every
/// removed point stays within `epsilon` of the simplified chain.
pub fn simplify_dp(points: &[Point2], epsilon: f64) -> Vec<Point2> {
    assert!(epsilon >= 0.0, "epsilon must be non-negative");
    if points.len() <= 2 {
        return points.to_vec();
    }
    let mut keep = vec![points[0]];
    dp_recurse(points, epsilon, &mut keep);
    keep
}

/// Ring variant: splits the loop at its farthest-point pair and simplifies
/// both halves, so no vertex is privileged as an endpoint. Degenerate
/// results (fewer than 3 survivors) fall back to the input ring.
pub fn simplify_dp_ring(ring: &PolygonRing, epsilon: f64) -> PolygonRing {
    assert!(epsilon >= 0.0, "epsilon must be non-negative");
    let pts = ring.vertices();
    let n = pts.len();
    if n <= 3 {
        return ring.clone();
    }
    let (mut bi, mut bj, mut best) = (0, 0, -1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = pts[i].dist(pts[j]);
            if d > best {
                best = d;
                bi = i;
                bj = j;
            }
        }
    }
    let first: Vec<Point2> = pts[bi..=bj].to_vec();
    let mut second: Vec<Point2> = pts[bj..].to_vec();
    second.extend_from_slice(&pts[..=bi]);
    let mut out = simplify_dp(&first, epsilon);
    let tail = simplify_dp(&second, epsilon);
    out.extend_from_slice(&tail[1..tail.len().saturating_sub(1)]);
    match PolygonRing::new(out) {
        Ok(r) => r,
        Err(_) => ring.clone(),
    }
}

/// Signed exterior turn angle at vertex i, in degrees, in (−180, 180].
/// Positive is a left turn, i.e. convex on a CCW ring.
pub fn turn_angle(ring: &PolygonRing, i: usize) -> f64 {
    let n = ring.len();
    let prev = ring.vertices()[(i + n - 1) % n];
    let curr = ring.vertices()[i];
    let next = ring.vertices()[(i + 1) % n];
    let d1 = curr - prev;
    let d2 = next - curr;
    let angle = d1.cross(d2).atan2(d1.dot(d2)).to_degrees();
    // atan2 yields (−180, 180]; map −180 to +180 so the range contract holds.
    if angle == -180.0 {
        180.0
    } else {
        angle
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn ring(pts: &[(f64, f64)]) -> PolygonRing {
        PolygonRing::new(pts.iter().map(|&(x, y)| Point2::new(x, y)).collect()).unwrap()
    }

    fn unit_square() -> PolygonRing {
        ring(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
    }

    /// Star-shaped loop around a center: simple by construction. Redraws
    /// until the angular gaps (including the wraparound) are comfortable.
    fn random_star(rng: &mut StdRng, n: usize, scale: f64) -> PolygonRing {
        let cx = rng.gen_range(5.0..15.0);
        let cy = rng.gen_range(5.0..15.0);
        loop {
            let mut angles: Vec<f64> = (0..n)
                .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
                .collect();
            angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let wrap = std::f64::consts::TAU - (angles[n - 1] - angles[0]);
            let min_gap = angles
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(wrap, f64::min);
            if min_gap < 1e-2 {
                continue;
            }
            let pts = angles
                .iter()
                .map(|&a| {
                    let r = rng.gen_range(0.3..1.0) * scale;
                    Point2::new(cx + r * a.cos(), cy + r * a.sin())
                })
                .collect();
            return PolygonRing::new(pts).unwrap();
        }
    }

    #[test]
    fn signed_area_unit_square() {
        assert_eq!(unit_square().signed_area(), 1.0);
    }

    #[test]
    fn signed_area_collinear_is_zero() {
        let pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0),
        ];
        assert_eq!(signed_area(&pts), 0.0);
        // Degenerate rings are constructible; orientation stays as given.
        assert!(PolygonRing::new(pts).is_ok());
    }

    #[test]
    fn signed_area_l_shape_matches_trapezoid_oracle() {
        let pts: Vec<Point2> = [(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)]
            .iter()
            .map(|&(x, y)| Point2::new(x, y))
            .collect();
        // Independent oracle: trapezoid form of the shoelace sum.
        let n = pts.len();
        let mut oracle = 0.0;
        for i in 0..n {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            oracle -= 0.5 * (b.x - a.x) * (b.y + a.y);
        }
        assert!((signed_area(&pts) - oracle).abs() < 1e-12);
        assert!((signed_area(&pts) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn signed_area_reversal_antisymmetry() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(3..20);
            let r = random_star(&mut rng, n, 4.0);
            let mut rev = r.vertices().to_vec();
            rev.reverse();
            assert!((signed_area(rev.as_slice()) + r.signed_area()).abs() < 1e-9);
        }
    }

    #[test]
    fn simple_square_and_bowtie() {
        assert!(unit_square().is_simple());
        let bowtie = ring(&[(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)]);
        assert!(!bowtie.is_simple());
    }

    /// Brute-force oracle with an independent intersection predicate
    /// (parametric solve instead of orientation tests).
    fn is_simple_oracle(pts: &[Point2]) -> bool {
        let n = pts.len();
        let seg = |i: usize| (pts[i], pts[(i + 1) % n]);
        let hits = |a: Point2, b: Point2, c: Point2, d: Point2| -> bool {
            let r = b - a;
            let s = d - c;
            let denom = r.cross(s);
            let qp = c - a;
            if denom != 0.0 {
                let t = qp.cross(s) / denom;
                let u = qp.cross(r) / denom;
                (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)
            } else if qp.cross(r) == 0.0 {
                // Collinear: overlapping parameter ranges?
                let rr = r.dot(r);
                if rr == 0.0 {
                    return on_segment(c, d, a);
                }
                let t0 = qp.dot(r) / rr;
                let t1 = t0 + s.dot(r) / rr;
                t0.max(t1) >= 0.0 && t0.min(t1) <= 1.0
            } else {
                false
            }
        };
        for i in 0..n {
            let (a1, a2) = seg(i);
            for j in (i + 1)..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    let (shared, pa, pb) = if j == i + 1 {
                        (a2, a1, seg(j).1)
                    } else {
                        (a1, seg(j).0, a2)
                    };
                    let u = pa - shared;
                    let v = pb - shared;
                    if u.cross(v) == 0.0 && u.dot(v) > 0.0 {
                        return false;
                    }
                    continue;
                }
                let (b1, b2) = seg(j);
                if hits(a1, a2, b1, b2) {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn is_simple_agrees_with_pairwise_oracle() {
        let mut rng = StdRng::seed_from_u64(11);
        let mut nonsimple_seen = 0;
        for k in 0..100 {
            let n = rng.gen_range(4..16);
            let pts: Vec<Point2> = if k % 2 == 0 {
                random_star(&mut rng, n, 5.0).vertices().to_vec()
            } else {
                // Unconstrained loops: frequently self-intersecting.
                (0..rng.gen_range(4..10))
                    .map(|_| Point2::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)))
                    .collect()
            };
            if !is_simple(&pts) {
                nonsimple_seen += 1;
            }
            assert_eq!(is_simple(&pts), is_simple_oracle(&pts), "loop {k}: {pts:?}");
        }
        assert!(nonsimple_seen > 5, "corpus never exercised the false branch");
    }

    #[test]
    fn closest_point_at_vertex_and_interior() {
        let r = ring(&[(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)]);
        let hit = closest_point_on_ring(Point2::new(0.0, 0.0), &r);
        assert_eq!(hit.distance, 0.0);
        assert_eq!(hit.point, Point2::new(0.0, 0.0));

        let interior = closest_point_on_ring(Point2::new(1.0, 1.0), &r);
        assert!((interior.distance - 1.0).abs() < 1e-12);
    }

    /// Dense-sampling oracle: scan many points per edge, then ternary-refine
    /// around the best sample (point-to-segment distance is convex in the
    /// edge parameter). Uses only distance evaluations.
    fn closest_dist_oracle(p: Point2, ring: &PolygonRing, samples: usize) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..ring.len() {
            let (a, b) = ring.edge(i);
            let at = |t: f64| p.dist(a + (b - a) * t);
            let mut bt = 0.0;
            let mut bd = at(0.0);
            for s in 1..samples {
                let t = s as f64 / (samples - 1) as f64;
                let d = at(t);
                if d < bd {
                    bd = d;
                    bt = t;
                }
            }
            let (mut lo, mut hi) = (
                (bt - 1.0 / (samples - 1) as f64).max(0.0),
                (bt + 1.0 / (samples - 1) as f64).min(1.0),
            );
            for _ in 0..200 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if at(m1) <= at(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            best = best.min(at(0.5 * (lo + hi)));
        }
        best
    }

    #[test]
    fn closest_point_matches_dense_sampling_oracle() {
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..1000 {
            let n_r = rng.gen_range(3..12);
            let r = random_star(&mut rng, n_r, 4.0);
            let p = Point2::new(rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0));
            let got = closest_point_on_ring(p, &r).distance;
            let want = closest_dist_oracle(p, &r, 10_000);
            assert!((got - want).abs() < 1e-6, "got {got} want {want}");
        }
    }

    #[test]
    fn closest_distance_bounded_by_vertex_distances() {
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..200 {
            let n_r = rng.gen_range(3..12);
            let r = random_star(&mut rng, n_r, 4.0);
            let p = Point2::new(rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0));
            let d = closest_point_on_ring(p, &r).distance;
            for v in r.vertices() {
                assert!(d <= p.dist(*v) + 1e-12);
            }
        }
    }

    #[test]
    fn simplify_drops_near_collinear_point() {
        let pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.001),
            Point2::new(2.0, 0.0),
        ];
        let out = simplify_dp(&pts, 0.01);
        assert_eq!(out, vec![Point2::new(0.0, 0.0), Point2::new(2.0, 0.0)]);
    }

    #[test]
    fn simplify_ring_recovers_square_corners() {
        let r = ring(&[
            (0.0, 0.0),
            (0.5, 0.0),
            (1.0, 0.0),
            (1.0, 0.5),
            (1.0, 1.0),
            (0.5, 1.0),
            (0.0, 1.0),
            (0.0, 0.5),
        ]);
        let s = simplify_dp_ring(&r, 0.01);
        assert_eq!(s.len(), 4);
        assert!((s.signed_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simplify_removed_points_stay_within_epsilon() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..20 {
            // Noisy circle.
            let n = 100;
            let pts: Vec<Point2> = (0..n)
                .map(|i| {
                    let a = i as f64 / n as f64 * std::f64::consts::TAU;
                    let r = 10.0 + rng.gen_range(-0.3..0.3);
                    Point2::new(20.0 + r * a.cos(), 20.0 + r * a.sin())
                })
                .collect();
            let original = PolygonRing::new(pts).unwrap();
            let eps = rng.gen_range(0.05..1.5);
            let simplified = simplify_dp_ring(&original, eps);
            for p in original.vertices() {
                let d = closest_point_on_ring(*p, &simplified).distance;
                assert!(d <= eps + 1e-9, "point strayed {d} > {eps}");
            }
        }
    }

    #[test]
    fn simplify_eps_zero_is_identity_without_collinear_triples() {
        let mut rng = StdRng::seed_from_u64(29);
        for _ in 0..20 {
            let n_r = rng.gen_range(4..16);
            let r = random_star(&mut rng, n_r, 4.0);
            let s = simplify_dp_ring(&r, 0.0);
            assert_eq!(r.len(), s.len());
        }
    }

    #[test]
    fn turn_angles_square_and_l_shape() {
        let sq = unit_square();
        for i in 0..4 {
            assert!((turn_angle(&sq, i) - 90.0).abs() < 1e-12);
        }
        let l = ring(&[(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)]);
        let angles: Vec<f64> = (0..l.len()).map(|i| turn_angle(&l, i)).collect();
        let reflex = angles.iter().filter(|a| (*a + 90.0).abs() < 1e-9).count();
        let convex = angles.iter().filter(|a| (*a - 90.0).abs() < 1e-9).count();
        assert_eq!(reflex, 1);
        assert_eq!(convex, 5);
    }

    #[test]
    fn turn_angles_sum_to_360_on_simple_ccw_rings() {
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..50 {
            let n_r = rng.gen_range(3..24);
            let r = random_star(&mut rng, n_r, 4.0);
            let total: f64 = (0..r.len()).map(|i| turn_angle(&r, i)).sum();
            assert!((total - 360.0).abs() < 1e-6, "sum {total}");
        }
    }

    #[test]
    fn constructor_dedups_and_normalizes() {
        let r = PolygonRing::new(vec![
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 1.0 + 1e-12),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap();
        assert_eq!(r.len(), 4);
        assert!(r.signed_area() > 0.0);
    }

    #[test]
    fn constructor_rejects_degenerate_input() {
        assert!(matches!(
            PolygonRing::new(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)]),
            Err(GeometryError::TooFewVertices(_))
        ));
        assert!(matches!(
            PolygonRing::new(vec![
                Point2::new(0.0, 0.0),
                Point2::new(f64::NAN, 0.0),
                Point2::new(1.0, 1.0)
            ]),
            Err(GeometryError::NonFinite(1))
        ));
    }
}

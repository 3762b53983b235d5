//! Binary masks, probability and feature grids, rasterization, sampling.
//!
//! Pixel (row i, col j) covers the unit square [j, j+1) × [i, i+1) and has
//! its center at (j + 0.5, i + 0.5) in image coordinates. Rasterization and
//! attraction-field encoding use that center convention. Grid *sampling*
//! ([`bilinear_sample`]) works in lattice-index coordinates with node (i, j)
//! at (x = j, y = i); callers converting from image space subtract 0.5 per
//! axis (see `afm::sample_field`).

use crate::geometry::{closest_point_on_segment, Point2, PolygonRing};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("grid dimensions mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("grid dimensions must be at least 1x1")]
    EmptyGrid,
    #[error("probability value {0} outside [0, 1] at index {1}")]
    OutOfRange(f64, usize),
    #[error("value buffer length {0} does not match {1}x{2}x{3}")]
    BadLength(usize, usize, usize, usize),
}

/// Row-major boolean grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize) -> Result<Self, RasterError> {
        if height == 0 || width == 0 {
            return Err(RasterError::EmptyGrid);
        }
        Ok(Self {
            height,
            width,
            bits: vec![false; height * width],
        })
    }

    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Result<Self, RasterError> {
        if height == 0 || width == 0 {
            return Err(RasterError::EmptyGrid);
        }
        if bits.len() != height * width {
            return Err(RasterError::BadLength(bits.len(), height, width, 1));
        }
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Union in place; dimensions must match.
    pub fn or_assign(&mut self, other: &BinaryMask) -> Result<(), RasterError> {
        if self.height != other.height || self.width != other.width {
            return Err(RasterError::DimensionMismatch(
                self.height,
                self.width,
                other.height,
                other.width,
            ));
        }
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
        Ok(())
    }

    /// Foreground pixels with a background 4-neighbor or on the grid edge.
    pub fn boundary_pixels(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.height {
            for j in 0..self.width {
                if !self.get(i, j) {
                    continue;
                }
                let at_edge = i == 0 || j == 0 || i + 1 == self.height || j + 1 == self.width;
                let exposed = at_edge
                    || !self.get(i - 1, j)
                    || !self.get(i + 1, j)
                    || !self.get(i, j - 1)
                    || !self.get(i, j + 1);
                if exposed {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Row-major grid of probabilities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbGrid {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ProbGrid {
    pub fn new(height: usize, width: usize) -> Result<Self, RasterError> {
        if height == 0 || width == 0 {
            return Err(RasterError::EmptyGrid);
        }
        Ok(Self {
            height,
            width,
            values: vec![0.0; height * width],
        })
    }

    pub fn from_values(height: usize, width: usize, values: Vec<f64>) -> Result<Self, RasterError> {
        if height == 0 || width == 0 {
            return Err(RasterError::EmptyGrid);
        }
        if values.len() != height * width {
            return Err(RasterError::BadLength(values.len(), height, width, 1));
        }
        if let Some((i, &v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v) || !v.is_finite())
        {
            return Err(RasterError::OutOfRange(v, i));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!((0.0..=1.0).contains(&value), "probability out of range");
        self.values[row * self.width + col] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// H×W×C grid of finite reals, row-major with channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    height: usize,
    width: usize,
    channels: usize,
    values: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(height: usize, width: usize, channels: usize) -> Result<Self, RasterError> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(RasterError::EmptyGrid);
        }
        Ok(Self {
            height,
            width,
            channels,
            values: vec![0.0; height * width * channels],
        })
    }

    pub fn from_values(
        height: usize,
        width: usize,
        channels: usize,
        values: Vec<f64>,
    ) -> Result<Self, RasterError> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(RasterError::EmptyGrid);
        }
        if values.len() != height * width * channels {
            return Err(RasterError::BadLength(values.len(), height, width, channels));
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(RasterError::OutOfRange(v, i));
        }
        Ok(Self {
            height,
            width,
            channels,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.values[(row * self.width + col) * self.channels + channel]
    }

    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: f64) {
        self.values[(row * self.width + col) * self.channels + channel] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Bilinear interpolation over the C channels of `grid` at lattice-index
/// coordinates `p` (node (i, j) sits at x = j, y = i). Coordinates outside
/// [0, W−1] × [0, H−1] clamp to the border; clamping is the defined
/// behavior, not an error.
pub fn bilinear_sample(grid: &FeatureGrid, p: Point2) -> Vec<f64> {
    let x = p.x.clamp(0.0, (grid.width - 1) as f64);
    let y = p.y.clamp(0.0, (grid.height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(grid.width - 1);
    let y1 = (y0 + 1).min(grid.height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let mut out = Vec::with_capacity(grid.channels);
    for c in 0..grid.channels {
        let v00 = grid.get(y0, x0, c);
        let v01 = grid.get(y0, x1, c);
        let v10 = grid.get(y1, x0, c);
        let v11 = grid.get(y1, x1, c);
        out.push(
            v00 * (1.0 - fx) * (1.0 - fy)
                + v01 * fx * (1.0 - fy)
                + v10 * (1.0 - fx) * fy
                + v11 * fx * fy,
        );
    }
    out
}

/// Whether `p` lies inside the ring by the even-odd rule; points on the
/// boundary (within 1e-9 px) count as inside.
pub fn point_in_ring(p: Point2, ring: &PolygonRing) -> bool {
    let n = ring.len();
    for i in 0..n {
        let (a, b) = ring.edge(i);
        let (q, _) = closest_point_on_segment(p, a, b);
        if p.dist(q) <= 1e-9 {
            return true;
        }
    }
    let mut inside = false;
    for i in 0..n {
        let (a, b) = ring.edge(i);
        if (a.y > p.y) != (b.y > p.y) {
            let x_int = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_int {
                inside = !inside;
            }
        }
    }
    inside
}

/// Rasterize by the pixel-center rule: pixel (i, j) is set iff its center
/// (j + 0.5, i + 0.5) lies inside the ring, boundary ties resolved inside.
pub fn rasterize(ring: &PolygonRing, height: usize, width: usize) -> Result<BinaryMask, RasterError> {
    let mut mask = BinaryMask::new(height, width)?;
    let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
    let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in ring.vertices() {
        min_x = min_x.min(v.x);
        min_y = min_y.min(v.y);
        max_x = max_x.max(v.x);
        max_y = max_y.max(v.y);
    }
    let row_lo = (min_y - 1.0).floor().max(0.0) as usize;
    let row_hi = ((max_y + 1.0).ceil() as usize).min(height);
    let col_lo = (min_x - 1.0).floor().max(0.0) as usize;
    let col_hi = ((max_x + 1.0).ceil() as usize).min(width);
    for i in row_lo..row_hi {
        for j in col_lo..col_hi {
            let center = Point2::new(j as f64 + 0.5, i as f64 + 0.5);
            if point_in_ring(center, ring) {
                mask.set(i, j, true);
            }
        }
    }
    Ok(mask)
}

/// Union rasterization of several rings.
pub fn rasterize_union(
    rings: &[PolygonRing],
    height: usize,
    width: usize,
) -> Result<BinaryMask, RasterError> {
    let mut mask = BinaryMask::new(height, width)?;
    for ring in rings {
        let m = rasterize(ring, height, width)?;
        mask.or_assign(&m)?;
    }
    Ok(mask)
}

/// Intersection-over-union of two equally sized masks; 1.0 when both are
/// empty.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64, RasterError> {
    if a.height != b.height || a.width != b.width {
        return Err(RasterError::DimensionMismatch(
            a.height, a.width, b.height, b.width,
        ));
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (x, y) in a.bits.iter().zip(&b.bits) {
        inter += (*x && *y) as usize;
        union += (*x || *y) as usize;
    }
    if union == 0 {
        Ok(1.0)
    } else {
        Ok(inter as f64 / union as f64)
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

    #[test]
    fn bilinear_exact_on_grid_points() {
        let mut g = FeatureGrid::new(3, 4, 2).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                g.set(i, j, 0, (i * 4 + j) as f64);
                g.set(i, j, 1, -(i as f64));
            }
        }
        for i in 0..3 {
            for j in 0..4 {
                let v = bilinear_sample(&g, Point2::new(j as f64, i as f64));
                assert_eq!(v[0], (i * 4 + j) as f64);
                assert_eq!(v[1], -(i as f64));
            }
        }
    }

    #[test]
    fn bilinear_block_center_and_constant_field() {
        let mut g = FeatureGrid::new(2, 2, 1).unwrap();
        g.set(0, 0, 0, 0.0);
        g.set(0, 1, 0, 0.0);
        g.set(1, 0, 0, 1.0);
        g.set(1, 1, 0, 1.0);
        let v = bilinear_sample(&g, Point2::new(0.5, 0.5));
        assert!((v[0] - 0.5).abs() < 1e-12);

        let c = FeatureGrid::from_values(4, 4, 1, vec![2.5; 16]).unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..50 {
            let p = Point2::new(rng.gen_range(-2.0..6.0), rng.gen_range(-2.0..6.0));
            assert!((bilinear_sample(&c, p)[0] - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn bilinear_bounded_by_support_cells() {
        let mut rng = StdRng::seed_from_u64(5);
        let vals: Vec<f64> = (0..25).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let g = FeatureGrid::from_values(5, 5, 1, vals).unwrap();
        for _ in 0..500 {
            let p = Point2::new(rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0));
            let v = bilinear_sample(&g, p)[0];
            let x0 = p.x.floor() as usize;
            let y0 = p.y.floor() as usize;
            let support = [
                g.get(y0, x0, 0),
                g.get(y0, (x0 + 1).min(4), 0),
                g.get((y0 + 1).min(4), x0, 0),
                g.get((y0 + 1).min(4), (x0 + 1).min(4), 0),
            ];
            let lo = support.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = support.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn rasterize_full_cover_and_small_rect() {
        let full = ring(&[(-1.0, -1.0), (7.0, -1.0), (7.0, 7.0), (-1.0, 7.0)]);
        let m = rasterize(&full, 6, 6).unwrap();
        assert_eq!(m.count_ones(), 36);

        let r = ring(&[(1.0, 1.0), (4.0, 1.0), (4.0, 4.0), (1.0, 4.0)]);
        let m = rasterize(&r, 6, 6).unwrap();
        // Oracle: enumerate all 36 centers with the point-in-polygon test
        // done by direct coordinate comparison for this axis-aligned box.
        let mut expected = 0;
        for i in 0..6 {
            for j in 0..6 {
                let (cx, cy) = (j as f64 + 0.5, i as f64 + 0.5);
                let inside = (1.0..=4.0).contains(&cx) && (1.0..=4.0).contains(&cy);
                assert_eq!(m.get(i, j), inside, "pixel ({i},{j})");
                expected += inside as usize;
            }
        }
        assert_eq!(expected, 9);
        assert_eq!(m.count_ones(), 9);
    }

    #[test]
    fn rasterize_orientation_independent() {
        let r = ring(&[(1.2, 0.7), (8.9, 1.4), (9.3, 7.1), (2.0, 8.2)]);
        let mut rev = r.vertices().to_vec();
        rev.reverse();
        let r2 = PolygonRing::new(rev).unwrap();
        assert_eq!(rasterize(&r, 10, 10).unwrap(), rasterize(&r2, 10, 10).unwrap());
    }

    #[test]
    fn rasterize_pixel_count_tracks_area() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..3 {
            let cx = rng.gen_range(200.0..300.0);
            let cy = rng.gen_range(200.0..300.0);
            let n = rng.gen_range(5..14);
            let poly = loop {
                let mut angles: Vec<f64> = (0..n)
                    .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
                    .collect();
                angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let wrap = std::f64::consts::TAU - (angles[n - 1] - angles[0]);
                let min_gap = angles
                    .windows(2)
                    .map(|w| w[1] - w[0])
                    .fold(wrap, f64::min);
                if min_gap < 5e-2 {
                    continue;
                }
                let pts: Vec<Point2> = angles
                    .iter()
                    .map(|&a| {
                        let rad = rng.gen_range(40.0..120.0);
                        Point2::new(cx + rad * a.cos(), cy + rad * a.sin())
                    })
                    .collect();
                break PolygonRing::new(pts).unwrap();
            };
            let mask = rasterize(&poly, 512, 512).unwrap();
            let count = mask.count_ones() as f64;
            let area = poly.signed_area();
            assert!(
                (count - area).abs() <= 2.0 * poly.perimeter(),
                "count {count} vs area {area}, perimeter {}",
                poly.perimeter()
            );
        }
    }

    #[test]
    fn iou_cases() {
        let a = BinaryMask::from_bits(1, 4, vec![true, true, false, false]).unwrap();
        assert_eq!(iou(&a, &a).unwrap(), 1.0);

        let b = BinaryMask::from_bits(1, 4, vec![false, false, true, true]).unwrap();
        assert_eq!(iou(&a, &b).unwrap(), 0.0);

        // 2x1-px rectangles overlapping in one pixel: |∩|=1, |∪|=3.
        let c = BinaryMask::from_bits(1, 4, vec![false, true, true, false]).unwrap();
        assert!((iou(&a, &c).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(iou(&a, &c).unwrap(), iou(&c, &a).unwrap());

        let empty = BinaryMask::new(1, 4).unwrap();
        assert_eq!(iou(&empty, &empty).unwrap(), 1.0);

        let tall = BinaryMask::new(2, 4).unwrap();
        assert!(iou(&a, &tall).is_err());
    }
}

//! Attraction field maps: dense per-pixel vectors to the nearest polygon
//! boundary, the discrepancy losses trained against them, and a vote-based
//! decoder that recovers boundary evidence from a field.

use crate::geometry::{closest_point_on_segment, Point2, PolygonRing};
use crate::raster::BinaryMask;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AfmError {
    #[error("field dimensions mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("attraction field needs at least one ring")]
    EmptyScene,
    #[error("field dimensions must be at least 1x1")]
    EmptyGrid,
    #[error("vector buffer length {0} does not match {1}x{2}")]
    BadLength(usize, usize, usize),
    #[error("non-finite vector at index {0}")]
    NonFinite(usize),
}

/// Per-pixel (dx, dy) grid; pixel center + vector reaches the nearest
/// boundary point for encoded fields.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractionField {
    height: usize,
    width: usize,
    vectors: Vec<[f64; 2]>,
}

impl AttractionField {
    pub fn new(height: usize, width: usize) -> Result<Self, AfmError> {
        if height == 0 || width == 0 {
            return Err(AfmError::EmptyGrid);
        }
        Ok(Self {
            height,
            width,
            vectors: vec![[0.0, 0.0]; height * width],
        })
    }

    pub fn from_vectors(
        height: usize,
        width: usize,
        vectors: Vec<[f64; 2]>,
    ) -> Result<Self, AfmError> {
        if height == 0 || width == 0 {
            return Err(AfmError::EmptyGrid);
        }
        if vectors.len() != height * width {
            return Err(AfmError::BadLength(vectors.len(), height, width));
        }
        if let Some(i) = vectors
            .iter()
            .position(|v| !v[0].is_finite() || !v[1].is_finite())
        {
            return Err(AfmError::NonFinite(i));
        }
        Ok(Self {
            height,
            width,
            vectors,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, row: usize, col: usize) -> [f64; 2] {
        self.vectors[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: [f64; 2]) {
        self.vectors[row * self.width + col] = v;
    }

    pub fn vectors(&self) -> &[[f64; 2]] {
        &self.vectors
    }
}

/// Which discrepancy the field loss measures. The squared-norm form is the
/// default; the L1 form is kept alongside it because both appear in
/// practice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AfmLossMode {
    SqL2,
    L1,
}

/// Ground-truth field for a set of rings: each pixel center maps to the
/// nearest point on the union of ring boundaries.
pub fn encode_afm(
    rings: &[PolygonRing],
    height: usize,
    width: usize,
) -> Result<AttractionField, AfmError> {
    if rings.is_empty() {
        return Err(AfmError::EmptyScene);
    }
    if height == 0 || width == 0 {
        return Err(AfmError::EmptyGrid);
    }
    let edges: Vec<(Point2, Point2)> = rings
        .iter()
        .flat_map(|r| (0..r.len()).map(move |i| r.edge(i)))
        .collect();
    // Pixels are independent, so row-parallel evaluation is bit-identical
    // to the sequential order.
    let rows: Vec<Vec<[f64; 2]>> = (0..height)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::with_capacity(width);
            for j in 0..width {
                let center = Point2::new(j as f64 + 0.5, i as f64 + 0.5);
                let mut best_d = f64::INFINITY;
                let mut best = center;
                for &(a, b) in &edges {
                    let (q, _) = closest_point_on_segment(center, a, b);
                    let d = center.dist(q);
                    if d < best_d {
                        best_d = d;
                        best = q;
                    }
                }
                row.push([best.x - center.x, best.y - center.y]);
            }
            row
        })
        .collect();
    Ok(AttractionField {
        height,
        width,
        vectors: rows.into_iter().flatten().collect(),
    })
}

fn check_dims(pred: &AttractionField, gt: &AttractionField) -> Result<(), AfmError> {
    if pred.height != gt.height || pred.width != gt.width {
        return Err(AfmError::DimensionMismatch(
            pred.height,
            pred.width,
            gt.height,
            gt.width,
        ));
    }
    Ok(())
}

/// Mean per-pixel discrepancy between predicted and ground-truth vectors.
pub fn afm_loss(
    pred: &AttractionField,
    gt: &AttractionField,
    mode: AfmLossMode,
) -> Result<f64, AfmError> {
    check_dims(pred, gt)?;
    let n = (pred.height * pred.width) as f64;
    let mut acc = 0.0;
    for (p, g) in pred.vectors.iter().zip(&gt.vectors) {
        let dx = p[0] - g[0];
        let dy = p[1] - g[1];
        acc += match mode {
            AfmLossMode::SqL2 => dx * dx + dy * dy,
            AfmLossMode::L1 => dx.abs() + dy.abs(),
        };
    }
    Ok(acc / n)
}

/// ∂loss/∂pred, same shape as the field. The L1 mode returns the
/// subgradient sign(residual)/N, zero at exact agreement.
pub fn afm_loss_grad(
    pred: &AttractionField,
    gt: &AttractionField,
    mode: AfmLossMode,
) -> Result<AttractionField, AfmError> {
    check_dims(pred, gt)?;
    let n = (pred.height * pred.width) as f64;
    let vectors = pred
        .vectors
        .iter()
        .zip(&gt.vectors)
        .map(|(p, g)| {
            let dx = p[0] - g[0];
            let dy = p[1] - g[1];
            match mode {
                AfmLossMode::SqL2 => [2.0 * dx / n, 2.0 * dy / n],
                AfmLossMode::L1 => [signum0(dx) / n, signum0(dy) / n],
            }
        })
        .collect();
    Ok(AttractionField {
        height: pred.height,
        width: pred.width,
        vectors,
    })
}

fn signum0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Vote-accumulation decoder: every pixel is displaced by its vector and
/// votes for the cell it lands in; cells collecting at least
/// `vote_threshold` votes are marked as boundary evidence.
pub fn decode_afm(field: &AttractionField, vote_threshold: usize) -> BinaryMask {
    let mut votes = vec![0usize; field.height * field.width];
    for i in 0..field.height {
        for j in 0..field.width {
            let v = field.get(i, j);
            let x = j as f64 + 0.5 + v[0];
            let y = i as f64 + 0.5 + v[1];
            let col = (x.floor() as isize).clamp(0, field.width as isize - 1) as usize;
            let row = (y.floor() as isize).clamp(0, field.height as isize - 1) as usize;
            votes[row * field.width + col] += 1;
        }
    }
    let bits = votes.into_iter().map(|v| v >= vote_threshold).collect();
    BinaryMask::from_bits(field.height, field.width, bits).expect("field dims are valid")
}

/// Bilinear sample of the field at image coordinates `p` (the vector
/// lattice sits at pixel centers, so sampling shifts by half a pixel).
pub fn sample_field(field: &AttractionField, p: Point2) -> [f64; 2] {
    sample_field_with_jacobian(field, p).0
}

/// Field value and its spatial Jacobian at image coordinates `p`.
/// Returns (value, d value / d x, d value / d y); derivatives are of the
/// interpolant, undefined exactly on cell boundaries where the bilinear
/// patches meet.
pub fn sample_field_with_jacobian(
    field: &AttractionField,
    p: Point2,
) -> ([f64; 2], [f64; 2], [f64; 2]) {
    let raw_x = p.x - 0.5;
    let raw_y = p.y - 0.5;
    let x = raw_x.clamp(0.0, (field.width - 1) as f64);
    let y = raw_y.clamp(0.0, (field.height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(field.width - 1);
    let y1 = (y0 + 1).min(field.height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    // Beyond the border the interpolant is constant in that coordinate.
    let x_active = (raw_x == x) as usize as f64;
    let y_active = (raw_y == y) as usize as f64;
    let mut value = [0.0; 2];
    let mut ddx = [0.0; 2];
    let mut ddy = [0.0; 2];
    for c in 0..2 {
        let v00 = field.get(y0, x0)[c];
        let v01 = field.get(y0, x1)[c];
        let v10 = field.get(y1, x0)[c];
        let v11 = field.get(y1, x1)[c];
        value[c] = v00 * (1.0 - fx) * (1.0 - fy)
            + v01 * fx * (1.0 - fy)
            + v10 * (1.0 - fx) * fy
            + v11 * fx * fy;
        ddx[c] = ((v01 - v00) * (1.0 - fy) + (v11 - v10) * fy) * x_active;
        ddy[c] = ((v10 - v00) * (1.0 - fx) + (v11 - v01) * fx) * y_active;
    }
    (value, ddx, ddy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::rasterize_union;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn ring(pts: &[(f64, f64)]) -> PolygonRing {
        PolygonRing::new(pts.iter().map(|&(x, y)| Point2::new(x, y)).collect()).unwrap()
    }

    fn field_from(vals: &[[f64; 2]], h: usize, w: usize) -> AttractionField {
        AttractionField::from_vectors(h, w, vals.to_vec()).unwrap()
    }

    #[test]
    fn encode_zero_on_boundary_and_spec_vector() {
        // Center (2.5, 1.5) lies on the bottom edge of this ring.
        let r = ring(&[(1.5, 1.5), (4.5, 1.5), (4.5, 4.5), (1.5, 4.5)]);
        let f = encode_afm(&[r], 6, 6).unwrap();
        let v = f.get(1, 2);
        assert!(v[0].abs() < 1e-12 && v[1].abs() < 1e-12);

        let r = ring(&[(1.0, 1.0), (4.0, 1.0), (4.0, 4.0), (1.0, 4.0)]);
        let f = encode_afm(&[r], 6, 6).unwrap();
        let v = f.get(0, 2); // center (2.5, 0.5), nearest boundary (2.5, 1.0)
        assert!((v[0] - 0.0).abs() < 1e-12);
        assert!((v[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn encode_rejects_empty_scene() {
        assert!(matches!(encode_afm(&[], 4, 4), Err(AfmError::EmptyScene)));
    }

    /// Dense boundary-sampling oracle with local ternary refinement;
    /// distance evaluations only.
    fn min_boundary_dist_oracle(p: Point2, rings: &[PolygonRing], samples: usize) -> f64 {
        let mut best = f64::INFINITY;
        for r in rings {
            for i in 0..r.len() {
                let (a, b) = r.edge(i);
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
                let step = 1.0 / (samples - 1) as f64;
                let (mut lo, mut hi) = ((bt - step).max(0.0), (bt + step).min(1.0));
                for _ in 0..100 {
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
        }
        best
    }

    fn random_scene(rng: &mut StdRng) -> Vec<PolygonRing> {
        let n_rings = rng.gen_range(1..3);
        (0..n_rings)
            .map(|k| {
                let cx = 4.0 + 8.0 * k as f64 + rng.gen_range(-1.0..1.0);
                let cy = rng.gen_range(5.0..11.0);
                let n = rng.gen_range(3..8);
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
                    if min_gap < 5e-2 {
                        continue;
                    }
                    let pts = angles
                        .iter()
                        .map(|&a| {
                            let r = rng.gen_range(1.0..3.4);
                            Point2::new(cx + r * a.cos(), cy + r * a.sin())
                        })
                        .collect();
                    return PolygonRing::new(pts).unwrap();
                }
            })
            .collect()
    }

    #[test]
    fn encode_matches_dense_sampling_everywhere() {
        let mut rng = StdRng::seed_from_u64(41);
        for _ in 0..3 {
            let rings = random_scene(&mut rng);
            let f = encode_afm(&rings, 16, 16).unwrap();
            for i in 0..16 {
                for j in 0..16 {
                    let center = Point2::new(j as f64 + 0.5, i as f64 + 0.5);
                    let v = f.get(i, j);
                    let got = (v[0] * v[0] + v[1] * v[1]).sqrt();
                    let want = min_boundary_dist_oracle(center, &rings, 10_000);
                    assert!((got - want).abs() < 1e-4, "pixel ({i},{j}): {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn encoded_vector_tips_lie_on_boundary() {
        let mut rng = StdRng::seed_from_u64(43);
        for _ in 0..100 {
            let rings = random_scene(&mut rng);
            let f = encode_afm(&rings, 16, 16).unwrap();
            for i in 0..16 {
                for j in 0..16 {
                    let v = f.get(i, j);
                    let tip = Point2::new(j as f64 + 0.5 + v[0], i as f64 + 0.5 + v[1]);
                    let d = rings
                        .iter()
                        .map(|r| crate::geometry::closest_point_on_ring(tip, r).distance)
                        .fold(f64::INFINITY, f64::min);
                    assert!(d < 1e-6, "tip {d} px off boundary");
                }
            }
        }
    }

    #[test]
    fn loss_single_pixel_arithmetic() {
        let gt = field_from(&[[0.0, 0.0]], 1, 1);
        let pred = field_from(&[[3.0, 4.0]], 1, 1);
        assert_eq!(afm_loss(&pred, &gt, AfmLossMode::SqL2).unwrap(), 25.0);
        assert_eq!(afm_loss(&pred, &gt, AfmLossMode::L1).unwrap(), 7.0);
        assert_eq!(afm_loss(&gt, &gt, AfmLossMode::SqL2).unwrap(), 0.0);
        assert_eq!(afm_loss(&gt, &gt, AfmLossMode::L1).unwrap(), 0.0);
    }

    #[test]
    fn loss_matches_scalar_loop_oracle() {
        let mut rng = StdRng::seed_from_u64(47);
        for _ in 0..20 {
            let h = rng.gen_range(1..6);
            let w = rng.gen_range(1..6);
            let mk = |rng: &mut StdRng| {
                let v: Vec<[f64; 2]> = (0..h * w)
                    .map(|_| [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)])
                    .collect();
                field_from(&v, h, w)
            };
            let pred = mk(&mut rng);
            let gt = mk(&mut rng);
            let mut sq = 0.0;
            let mut l1 = 0.0;
            for i in 0..h {
                for j in 0..w {
                    let p = pred.get(i, j);
                    let g = gt.get(i, j);
                    sq += (p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2);
                    l1 += (p[0] - g[0]).abs() + (p[1] - g[1]).abs();
                }
            }
            let n = (h * w) as f64;
            assert!((afm_loss(&pred, &gt, AfmLossMode::SqL2).unwrap() - sq / n).abs() < 1e-9);
            assert!((afm_loss(&pred, &gt, AfmLossMode::L1).unwrap() - l1 / n).abs() < 1e-9);
        }
    }

    #[test]
    fn loss_dimension_mismatch_errors() {
        let a = AttractionField::new(2, 2).unwrap();
        let b = AttractionField::new(2, 3).unwrap();
        assert!(afm_loss(&a, &b, AfmLossMode::SqL2).is_err());
        assert!(afm_loss_grad(&a, &b, AfmLossMode::L1).is_err());
    }

    #[test]
    fn grad_zero_at_agreement_and_l1_signs() {
        let gt = field_from(&[[1.0, -2.0], [0.5, 0.0]], 1, 2);
        let g = afm_loss_grad(&gt, &gt, AfmLossMode::SqL2).unwrap();
        assert!(g.vectors().iter().all(|v| v == &[0.0, 0.0]));

        let pred = field_from(&[[2.0, -3.0], [0.0, 0.0]], 1, 2);
        let g = afm_loss_grad(&pred, &gt, AfmLossMode::L1).unwrap();
        assert_eq!(g.get(0, 0), [0.5, -0.5]);
        assert_eq!(g.get(0, 1), [-0.5, 0.0]);
    }

    #[test]
    fn grad_matches_central_differences() {
        let mut rng = StdRng::seed_from_u64(53);
        let h = 1e-5;
        for mode in [AfmLossMode::SqL2, AfmLossMode::L1] {
            for _ in 0..10 {
                let rows = rng.gen_range(1..4);
                let cols = rng.gen_range(1..4);
                let gt = field_from(
                    &(0..rows * cols)
                        .map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
                        .collect::<Vec<_>>(),
                    rows,
                    cols,
                );
                // Keep residuals away from the L1 kink.
                let pred = field_from(
                    &gt.vectors()
                        .iter()
                        .map(|v| {
                            let mut d = [0.0; 2];
                            for (c, dst) in d.iter_mut().enumerate() {
                                let off: f64 = rng.gen_range(0.1..1.5);
                                *dst = v[c] + off * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                            }
                            d
                        })
                        .collect::<Vec<_>>(),
                    rows,
                    cols,
                );
                let grad = afm_loss_grad(&pred, &gt, mode).unwrap();
                for idx in 0..rows * cols {
                    for c in 0..2 {
                        let mut plus = pred.clone();
                        let mut minus = pred.clone();
                        let mut vp = plus.vectors[idx];
                        let mut vm = minus.vectors[idx];
                        vp[c] += h;
                        vm[c] -= h;
                        plus.vectors[idx] = vp;
                        minus.vectors[idx] = vm;
                        let fd = (afm_loss(&plus, &gt, mode).unwrap()
                            - afm_loss(&minus, &gt, mode).unwrap())
                            / (2.0 * h);
                        let a = grad.vectors[idx][c];
                        assert!(
                            crate::testutil::grad_rel_err(a, fd) < 1e-4,
                            "mode {mode:?} idx {idx} c {c}: {a} vs {fd}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn decode_round_trip_marks_boundary() {
        let rings = vec![
            ring(&[(2.5, 2.5), (12.5, 2.5), (12.5, 9.5), (2.5, 9.5)]),
            ring(&[(20.5, 14.5), (28.5, 14.5), (28.5, 24.5), (20.5, 24.5)]),
        ];
        let f = encode_afm(&rings, 32, 32).unwrap();
        let decoded = decode_afm(&f, 1);
        let mask = rasterize_union(&rings, 32, 32).unwrap();
        let boundary = mask.boundary_pixels();
        let hit = boundary
            .iter()
            .filter(|&&(i, j)| decoded.get(i, j))
            .count();
        assert!(
            hit as f64 >= 0.99 * boundary.len() as f64,
            "recall {}/{}",
            hit,
            boundary.len()
        );
    }

    #[test]
    fn decode_zero_field_and_huge_threshold() {
        let f = AttractionField::new(5, 7).unwrap();
        let all = decode_afm(&f, 1);
        assert_eq!(all.count_ones(), 35);
        let none = decode_afm(&f, 36);
        assert_eq!(none.count_ones(), 0);
    }

    #[test]
    fn sample_field_matches_lattice_and_jacobian_fd() {
        let mut rng = StdRng::seed_from_u64(59);
        let vals: Vec<[f64; 2]> = (0..36)
            .map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
            .collect();
        let f = field_from(&vals, 6, 6);
        // At a pixel center the sample is the stored vector.
        assert_eq!(sample_field(&f, Point2::new(2.5, 3.5)), f.get(3, 2));
        // Jacobian against central differences, away from cell boundaries.
        for _ in 0..100 {
            let p = Point2::new(rng.gen_range(1.1..4.9), rng.gen_range(1.1..4.9));
            let p = Point2::new(
                p.x.floor() + rng.gen_range(0.55..0.95),
                p.y.floor() + rng.gen_range(0.55..0.95),
            );
            let (_, ddx, ddy) = sample_field_with_jacobian(&f, p);
            let h = 1e-5;
            for c in 0..2 {
                let fx = (sample_field(&f, Point2::new(p.x + h, p.y))[c]
                    - sample_field(&f, Point2::new(p.x - h, p.y))[c])
                    / (2.0 * h);
                let fy = (sample_field(&f, Point2::new(p.x, p.y + h))[c]
                    - sample_field(&f, Point2::new(p.x, p.y - h))[c])
                    / (2.0 * h);
                assert!((ddx[c] - fx).abs() < 1e-6);
                assert!((ddy[c] - fy).abs() < 1e-6);
            }
        }
    }
}

//! Iterative polygon refinement.
//!
//! Two refiners share the same contract (move vertices, never add or
//! remove them):
//!
//! * [`gcn_refine`]: the forward pass of a cyclic graph convolution with
//!   loadable weights. Sample features at the current vertices, propagate
//!   through the layer stack, read per-vertex offsets from the head,
//!   clamp, apply, repeat for a fixed number of steps.
//! * [`energy_refine`]: a desk-scale stand-in for a trained refiner that
//!   descends E(V) = meanᵢ ‖field(vᵢ)‖² + λ·ortho(V) with backtracking
//!   line search, so the energy sequence is non-increasing by
//!   construction.

use crate::afm::{sample_field_with_jacobian, AttractionField};
use crate::geometry::{Point2, PolygonRing};
use crate::losses::{ortho_points, ortho_points_grad};
use crate::raster::{bilinear_sample, FeatureGrid};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("failed to read weights file {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to write weights file {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed weights file {path}: {source}")]
    Malformed {
        path: String,
        source: serde_json::Error,
    },
    #[error("dimension chain broken at layer {layer}: {detail}")]
    DimensionChain { layer: usize, detail: String },
    #[error("graph feature dimension {got} does not match expected {expected}")]
    FeatureDim { got: usize, expected: usize },
    #[error("{got} weight stacks provided for {steps} refinement steps")]
    StepCount { got: usize, steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }
}

/// One graph-convolution layer: h′ᵢ = act(W_self·hᵢ + W_nbr·mean(hᵢ₋₁, hᵢ₊₁) + bias).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnLayer {
    /// out_dim × in_dim, row per output.
    pub w_self: Vec<Vec<f64>>,
    pub w_nbr: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Linear head mapping final features to a 2-vector offset per vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnHead {
    pub w: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// A full refinement stack; the same stack is reused for every step when
/// weights are shared across steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnWeights {
    pub layers: Vec<GcnLayer>,
    pub head: GcnHead,
}

fn matrix_dims(m: &[Vec<f64>]) -> Option<(usize, usize)> {
    let rows = m.len();
    let cols = m.first()?.len();
    if m.iter().any(|r| r.len() != cols) {
        return None;
    }
    Some((rows, cols))
}

impl GcnWeights {
    /// Check the internal dimension chain; errors carry the offending
    /// layer index (the head counts as the last index).
    pub fn validate(&self) -> Result<(), RefineError> {
        let mut dim: Option<usize> = None;
        for (i, layer) in self.layers.iter().enumerate() {
            let (rows, cols) = matrix_dims(&layer.w_self).ok_or_else(|| {
                RefineError::DimensionChain {
                    layer: i,
                    detail: "w_self rows have unequal lengths".into(),
                }
            })?;
            let (nrows, ncols) = matrix_dims(&layer.w_nbr).ok_or_else(|| {
                RefineError::DimensionChain {
                    layer: i,
                    detail: "w_nbr rows have unequal lengths".into(),
                }
            })?;
            if (nrows, ncols) != (rows, cols) {
                return Err(RefineError::DimensionChain {
                    layer: i,
                    detail: format!("w_nbr is {nrows}x{ncols}, expected {rows}x{cols}"),
                });
            }
            if layer.bias.len() != rows {
                return Err(RefineError::DimensionChain {
                    layer: i,
                    detail: format!("bias length {} != {rows}", layer.bias.len()),
                });
            }
            if let Some(d) = dim {
                if cols != d {
                    return Err(RefineError::DimensionChain {
                        layer: i,
                        detail: format!("input dim {cols} != previous output dim {d}"),
                    });
                }
            }
            dim = Some(rows);
        }
        let head_idx = self.layers.len();
        let (hrows, hcols) = matrix_dims(&self.head.w).ok_or_else(|| {
            RefineError::DimensionChain {
                layer: head_idx,
                detail: "head rows have unequal lengths".into(),
            }
        })?;
        if hrows != 2 {
            return Err(RefineError::DimensionChain {
                layer: head_idx,
                detail: format!("head must emit 2 outputs, emits {hrows}"),
            });
        }
        if self.head.bias.len() != 2 {
            return Err(RefineError::DimensionChain {
                layer: head_idx,
                detail: format!("head bias length {} != 2", self.head.bias.len()),
            });
        }
        if let Some(d) = dim {
            if hcols != d {
                return Err(RefineError::DimensionChain {
                    layer: head_idx,
                    detail: format!("head input dim {hcols} != previous output dim {d}"),
                });
            }
        }
        Ok(())
    }

    /// Feature dimension the first layer (or head) expects.
    pub fn input_dim(&self) -> usize {
        self.layers
            .first()
            .map(|l| l.w_self[0].len())
            .unwrap_or_else(|| self.head.w[0].len())
    }
}

/// Write weights as a JSON document. f64 values serialize as the shortest
/// decimal that parses back to the identical bits, so round trips are
/// lossless.
pub fn save_weights(weights: &GcnWeights, path: impl AsRef<Path>) -> Result<(), RefineError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(weights).expect("weights always serialize");
    std::fs::write(path, text + "\n").map_err(|source| RefineError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Load and validate a weights file; dimension errors name the layer.
pub fn load_weights(path: impl AsRef<Path>) -> Result<GcnWeights, RefineError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| RefineError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let weights: GcnWeights =
        serde_json::from_str(&text).map_err(|source| RefineError::Malformed {
            path: path.display().to_string(),
            source,
        })?;
    weights.validate()?;
    Ok(weights)
}

/// A ring plus per-vertex features; adjacency is the implicit cycle
/// i−1 ↔ i ↔ i+1.
#[derive(Debug, Clone, PartialEq)]
pub struct RingGraph {
    pub vertices: PolygonRing,
    pub features: Vec<Vec<f64>>,
}

/// Refinement knobs. `share_step_weights` records whether one weight
/// stack is reused across the GCN steps ([`gcn_refine`]) or a separate
/// stack per step is supplied ([`gcn_refine_steps`]).
#[derive(Debug, Clone, Copy)]
pub struct RefineConfig {
    pub steps: usize,
    pub offset_clamp: f64,
    pub lr: f64,
    pub iters: usize,
    pub lambda_ortho: f64,
    pub share_step_weights: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            steps: 3,
            offset_clamp: 8.0,
            lr: 0.05,
            iters: 1000,
            lambda_ortho: 2.0,
            share_step_weights: true,
        }
    }
}

/// Per-vertex feature: the feature map sampled at the vertex, concatenated
/// with normalized coordinates (x/W, y/H).
pub fn build_graph(ring: &PolygonRing, fmap: &FeatureGrid) -> RingGraph {
    let w = fmap.width() as f64;
    let h = fmap.height() as f64;
    let features = ring
        .vertices()
        .iter()
        .map(|v| {
            let mut f = bilinear_sample(fmap, *v);
            f.push(v.x / w);
            f.push(v.y / h);
            f
        })
        .collect();
    RingGraph {
        vertices: ring.clone(),
        features,
    }
}

fn matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum())
        .collect()
}

/// One propagation step over the cycle graph.
pub fn gcn_layer(graph: &RingGraph, layer: &GcnLayer) -> Result<RingGraph, RefineError> {
    let in_dim = layer.w_self.first().map(|r| r.len()).unwrap_or(0);
    let n = graph.features.len();
    let features = (0..n)
        .map(|i| {
            let h = &graph.features[i];
            if h.len() != in_dim {
                return Err(RefineError::FeatureDim {
                    got: h.len(),
                    expected: in_dim,
                });
            }
            let prev = &graph.features[(i + n - 1) % n];
            let next = &graph.features[(i + 1) % n];
            let nbr: Vec<f64> = prev
                .iter()
                .zip(next)
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            let own = matvec(&layer.w_self, h);
            let agg = matvec(&layer.w_nbr, &nbr);
            Ok(own
                .iter()
                .zip(&agg)
                .zip(&layer.bias)
                .map(|((a, b), c)| layer.activation.apply(a + b + c))
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>, _>>()?;
    Ok(RingGraph {
        vertices: graph.vertices.clone(),
        features,
    })
}

fn apply_offsets(ring: &PolygonRing, offsets: &[[f64; 2]], clamp: f64) -> PolygonRing {
    let pts = ring
        .vertices()
        .iter()
        .zip(offsets)
        .map(|(v, o)| {
            Point2::new(
                v.x + o[0].clamp(-clamp, clamp),
                v.y + o[1].clamp(-clamp, clamp),
            )
        })
        .collect();
    PolygonRing::from_loop_unnormalized(pts).expect("vertex count is preserved")
}

fn gcn_step(
    ring: &PolygonRing,
    fmap: &FeatureGrid,
    weights: &GcnWeights,
    clamp: f64,
) -> Result<PolygonRing, RefineError> {
    let expected = fmap.channels() + 2;
    if weights.input_dim() != expected {
        return Err(RefineError::FeatureDim {
            got: weights.input_dim(),
            expected,
        });
    }
    let mut graph = build_graph(ring, fmap);
    for layer in &weights.layers {
        graph = gcn_layer(&graph, layer)?;
    }
    let offsets: Vec<[f64; 2]> = graph
        .features
        .iter()
        .map(|h| {
            let o = matvec(&weights.head.w, h);
            [o[0] + weights.head.bias[0], o[1] + weights.head.bias[1]]
        })
        .collect();
    Ok(apply_offsets(ring, &offsets, clamp))
}

/// Multi-step refinement reusing one weight stack per step. Deterministic:
/// identical inputs give bit-identical outputs.
pub fn gcn_refine(
    ring: &PolygonRing,
    fmap: &FeatureGrid,
    weights: &GcnWeights,
    cfg: &RefineConfig,
) -> Result<PolygonRing, RefineError> {
    assert!(cfg.steps >= 1, "need at least one refinement step");
    assert!(cfg.offset_clamp > 0.0, "offset clamp must be positive");
    weights.validate()?;
    let mut current = ring.clone();
    for _ in 0..cfg.steps {
        current = gcn_step(&current, fmap, weights, cfg.offset_clamp)?;
    }
    Ok(current)
}

/// Multi-step refinement with a separate stack per step (the unshared
/// configuration); `per_step.len()` must equal `cfg.steps`.
pub fn gcn_refine_steps(
    ring: &PolygonRing,
    fmap: &FeatureGrid,
    per_step: &[GcnWeights],
    cfg: &RefineConfig,
) -> Result<PolygonRing, RefineError> {
    if per_step.len() != cfg.steps {
        return Err(RefineError::StepCount {
            got: per_step.len(),
            steps: cfg.steps,
        });
    }
    let mut current = ring.clone();
    for weights in per_step {
        weights.validate()?;
        current = gcn_step(&current, fmap, weights, cfg.offset_clamp)?;
    }
    Ok(current)
}

/// Data term of the refinement energy: the mean squared attraction-vector
/// magnitude sampled at the vertices. This is the field discrepancy
/// evaluated at vertex locations with a zero predicted vector, so driving
/// it down pulls vertices onto the encoded boundary.
pub fn attraction_energy(pts: &[Point2], field: &AttractionField) -> f64 {
    let n = pts.len() as f64;
    pts.iter()
        .map(|p| {
            let (v, _, _) = sample_field_with_jacobian(field, *p);
            v[0] * v[0] + v[1] * v[1]
        })
        .sum::<f64>()
        / n
}

/// Analytic gradient of [`attraction_energy`] per vertex.
pub fn attraction_energy_grad(pts: &[Point2], field: &AttractionField) -> Vec<[f64; 2]> {
    let n = pts.len() as f64;
    pts.iter()
        .map(|p| {
            let (v, ddx, ddy) = sample_field_with_jacobian(field, *p);
            [
                2.0 * (v[0] * ddx[0] + v[1] * ddx[1]) / n,
                2.0 * (v[0] * ddy[0] + v[1] * ddy[1]) / n,
            ]
        })
        .collect()
}

fn total_energy(pts: &[Point2], field: &AttractionField, lambda: f64) -> f64 {
    attraction_energy(pts, field) + lambda * ortho_points(pts)
}

fn total_energy_grad(pts: &[Point2], field: &AttractionField, lambda: f64) -> Vec<[f64; 2]> {
    let mut grad = attraction_energy_grad(pts, field);
    if lambda != 0.0 {
        for (g, o) in grad.iter_mut().zip(ortho_points_grad(pts, 1.0)) {
            g[0] += lambda * o[0];
            g[1] += lambda * o[1];
        }
    }
    grad
}

/// Gradient-descent refinement against an attraction field, with the
/// orthogonality penalty as regularizer. Backtracking halves the step on
/// any energy increase (at most 20 halvings per iteration), so the logged
/// energy sequence never increases and the returned ring is the
/// lowest-energy vertex set encountered.
pub fn energy_refine(
    ring: &PolygonRing,
    field: &AttractionField,
    cfg: &RefineConfig,
) -> PolygonRing {
    energy_refine_with_trace(ring, field, cfg).0
}

/// As [`energy_refine`], also returning the per-iteration energies
/// (starting with the input's energy).
pub fn energy_refine_with_trace(
    ring: &PolygonRing,
    field: &AttractionField,
    cfg: &RefineConfig,
) -> (PolygonRing, Vec<f64>) {
    assert!(cfg.lr > 0.0, "learning rate must be positive");
    assert!(cfg.iters >= 1, "need at least one iteration");
    let mut pts: Vec<Point2> = ring.vertices().to_vec();
    let mut energy = total_energy(&pts, field, cfg.lambda_ortho);
    let mut trace = vec![energy];
    let mut best = (pts.clone(), energy);
    'outer: for _ in 0..cfg.iters {
        let grad = total_energy_grad(&pts, field, cfg.lambda_ortho);
        // Fresh backtracking each iteration: one oversized gradient (tiny
        // edges make the ortho term stiff) must not stall the rest of the
        // descent.
        let mut lr = cfg.lr;
        let mut halvings = 0;
        loop {
            let trial: Vec<Point2> = pts
                .iter()
                .zip(&grad)
                .map(|(p, g)| Point2::new(p.x - lr * g[0], p.y - lr * g[1]))
                .collect();
            let trial_energy = total_energy(&trial, field, cfg.lambda_ortho);
            if trial_energy <= energy {
                pts = trial;
                energy = trial_energy;
                break;
            }
            lr *= 0.5;
            halvings += 1;
            if halvings > 20 {
                break 'outer;
            }
        }
        trace.push(energy);
        if energy < best.1 {
            best = (pts.clone(), energy);
        }
    }
    let ring = PolygonRing::from_loop_unnormalized(best.0).expect("vertex count is preserved");
    (ring, trace)
}

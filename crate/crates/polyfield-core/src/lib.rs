//! Polygonal building-footprint reconstruction and evaluation.
//!
//! The crate covers the geometric core of a two-step footprint extraction
//! pipeline, everything downstream of detection and feature learning:
//!
//! 1. **geometry** – exact 2-D polygon primitives (area, simplicity,
//!    nearest-boundary queries, Douglas–Peucker simplification, turn angles).
//! 2. **raster** – binary masks, probability/feature grids, polygon
//!    rasterization, bilinear sampling, pixel overlap measures.
//! 3. **afm** – attraction field maps: per-pixel vectors to the nearest
//!    polygon boundary, their losses/gradients, and a vote-based decoder.
//! 4. **corners** – corner extraction from heatmaps, NMS, and dynamic
//!    polygon initialization fusing mask contours with corner detections.
//! 5. **losses** – mask BCE, vertex L1, orthogonality regularizer, with
//!    analytic gradients.
//! 6. **refine** – iterative vertex refinement: a loadable-weight graph
//!    convolution forward pass and an energy-descent refiner driven by
//!    attraction fields plus orthogonality.
//! 7. **metrics** – pixel precision/recall, PoLiS, maximum tangent-angle
//!    error, IoU-thresholded AP/AR, and per-scene aggregation.
//! 8. **synth** – deterministic synthetic scenes (rectilinear buildings,
//!    rendered masks, corner heatmaps, attraction fields) for desk-scale
//!    validation.
//!
//! All operations are pure functions on immutable inputs unless noted;
//! nothing here touches the filesystem except the weight file helpers in
//! [`refine`].

pub mod afm;
pub mod corners;
pub mod geometry;
pub mod losses;
pub mod metrics;
pub mod raster;
pub mod refine;
pub mod synth;

pub use afm::{AfmError, AfmLossMode, AttractionField};
pub use corners::{Corner, CornerKind, CornerSet, InitConfig, InitError};
pub use geometry::{GeometryError, Point2, PolygonRing, Polyline};
pub use losses::{LossError, LossParts, LossWeights, VertexAlign};
pub use metrics::{Detection, EvalConfig, MetricsError, MetricsReport, NearestMode, PerInstance};
pub use raster::{BinaryMask, FeatureGrid, ProbGrid, RasterError};
pub use refine::{
    Activation, GcnHead, GcnLayer, GcnWeights, RefineConfig, RefineError, RingGraph,
};
pub use synth::{NoiseSpec, Scene, SceneSpec, SynthError};

#[cfg(test)]
pub(crate) mod testutil {
    /// Softened relative error between an analytic derivative and its
    /// central-difference estimate. The additive floor keeps the measure
    /// meaningful when both values sit below finite-difference noise.
    pub fn grad_rel_err(analytic: f64, fd: f64) -> f64 {
        (analytic - fd).abs() / (analytic.abs() + fd.abs() + 1e-4)
    }
}

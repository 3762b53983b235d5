//! On-disk formats for scene bundles.
//!
//! A bundle directory holds `gt.geojson`, `pred.geojson`, `mask.pgm`,
//! `convex.pgm`/`convex.f32`, `concave.pgm`/`concave.f32`, and
//! `field.afm`; all rasters of one bundle share the same dimensions.

pub mod afmbin;
pub mod fgrid;
pub mod geojson;
pub mod pgm;
pub mod report;

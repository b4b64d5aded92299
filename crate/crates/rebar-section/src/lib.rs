//! Cross-section analysis for fibre-reinforced polymer (FRP) rebar.
//!
//! Given a calibrated grayscale image of a sawn rebar cross-section, this
//! crate segments the load-bearing region, assigns material densities to
//! fibre and epoxy pixels, and derives the section quantities that matter
//! for eccentric tension: the shift of the centre of gravity away from the
//! geometric centre, second moments of area, principal moments and axes,
//! inertia radii, neutral-axis distances and the stresses at the critical
//! boundary points.
//!
//! The pipeline, start to finish:
//!
//! 1. [`image_io`] loads an 8-bit PNG or TIFF together with its physical
//!    pixel scale, or generates synthetic fixtures with known ground truth.
//! 2. [`morphology`] provides erosion, dilation, reconstruction filters and
//!    multi-level Otsu thresholding on which segmentation is built.
//! 3. [`segmentation`] runs a two-stage cascade (rough reconstruction
//!    filter + thresholding, then an asymmetric cleanup) to produce the
//!    region-of-interest mask.
//! 4. [`weights`] assigns per-pixel material densities inside the mask.
//! 5. [`geometry`] computes centroids, the centre-of-gravity shift, area,
//!    second moments (by erosion-layer peeling), principal moments and the
//!    boundary intersections of the principal axes.
//! 6. [`stress`] evaluates eccentric-tension stresses at the critical
//!    points of the section.
//! 7. [`report`] orchestrates the whole run and emits a deterministic JSON
//!    report plus an optional annotated overlay image.
//!
//! The `rebar-section` binary wraps [`report::analyze`] in a CLI with
//! `analyze` and `synth` subcommands.

pub mod error;
pub mod geometry;
pub mod image_io;
pub mod morphology;
pub mod raster;
pub mod report;
pub mod segmentation;
pub mod stress;
pub mod weights;

pub use error::{Error, Result};
pub use raster::{BinaryMask, GrayRaster};

/// Compiles every code block in the user guide as a doc-test so the book
/// cannot drift out of sync with the library.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/images.md")]
    mod images {}
    #[doc = include_str!("../../../book/src/morphology.md")]
    mod morphology {}
    #[doc = include_str!("../../../book/src/segmentation.md")]
    mod segmentation {}
    #[doc = include_str!("../../../book/src/weights.md")]
    mod weights {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/stress.md")]
    mod stress {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

//! Per-pixel material density assignment inside the section mask.
//!
//! Fibre pixels image bright, epoxy pixels dark, so weights follow
//! intensity. Two schemes are provided:
//!
//! * [`assign_global`]: one intensity threshold for the whole section,
//!   either given explicitly or found by two-class Otsu over the masked
//!   histogram;
//! * [`assign_local`]: a sliding-window rule that calls a pixel fibre when
//!   it attains the maximum of at least one window laid over it, epoxy
//!   when it only attains a minimum, and leaves it unweighted otherwise.
//!   The window verdicts are order-independent, so the result is
//!   deterministic and parallelizable.
//!
//! Pixels outside the mask always carry weight zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_io::CalibratedImage;
use crate::morphology::multi_otsu;
use crate::raster::BinaryMask;

/// Material densities in kg/m^3; fibre must be strictly denser than epoxy.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct MaterialDensities {
    pub fibre_kg_m3: f64,
    pub epoxy_kg_m3: f64,
}

impl Default for MaterialDensities {
    /// Glass fibre and epoxy matrix.
    fn default() -> Self {
        Self {
            fibre_kg_m3: 2600.0,
            epoxy_kg_m3: 1300.0,
        }
    }
}

impl MaterialDensities {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epoxy_kg_m3.is_finite()
            && self.fibre_kg_m3.is_finite()
            && self.epoxy_kg_m3 > 0.0
            && self.fibre_kg_m3 > self.epoxy_kg_m3;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("densities must satisfy fibre > epoxy > 0"))
        }
    }
}

/// Per-pixel density map over the image frame. Every nonzero weight equals
/// one of the two material densities exactly.
#[derive(Clone, PartialEq, Debug)]
pub struct WeightMap {
    width: usize,
    height: usize,
    weights: Vec<f64>,
}

impl WeightMap {
    fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            weights: vec![0.0; width * height],
        }
    }

    /// Constant weight on every mask pixel, zero elsewhere.
    pub fn uniform(mask: &BinaryMask, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::invalid("weight must be positive and finite"));
        }
        let mut map = Self::zeros(mask.width(), mask.height());
        for (x, y) in mask.foreground() {
            map.weights[y * mask.width() + x] = weight;
        }
        Ok(map)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.weights[y * self.width + x]
    }
}

fn check_dims(image: &CalibratedImage, mask: &BinaryMask) -> Result<()> {
    if image.width() != mask.width() || image.height() != mask.height() {
        return Err(Error::DimensionMismatch(
            "mask and image differ in size".into(),
        ));
    }
    Ok(())
}

/// Splits masked pixels into fibre and epoxy by one global threshold.
/// `fibre_threshold` is the lowest intensity still counted as fibre; when
/// absent it comes from two-class Otsu over the masked histogram.
pub fn assign_global(
    image: &CalibratedImage,
    mask: &BinaryMask,
    densities: &MaterialDensities,
    fibre_threshold: Option<u8>,
) -> Result<WeightMap> {
    check_dims(image, mask)?;
    densities.validate()?;
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let threshold = match fibre_threshold {
        Some(t) => t,
        None => multi_otsu(image.raster(), 2, Some(mask))?.levels()[0],
    };
    let mut map = WeightMap::zeros(image.width(), image.height());
    for (x, y) in mask.foreground() {
        let density = if image.raster().get(x, y) >= threshold {
            densities.fibre_kg_m3
        } else {
            densities.epoxy_kg_m3
        };
        map.weights[y * image.width() + x] = density;
    }
    Ok(map)
}

/// Sliding-window density assignment.
///
/// A `window x window` footprint is laid at every position where it fits
/// inside the frame (clamped to the frame when the image itself is
/// smaller). For each placement, the masked pixels attaining the window
/// maximum are fibre candidates and those attaining the minimum are epoxy
/// candidates. A pixel that is a fibre candidate anywhere gets the fibre
/// density, otherwise an epoxy candidate anywhere gets the epoxy density,
/// otherwise it stays at weight zero. `window` must be odd and >= 3.
pub fn assign_local(
    image: &CalibratedImage,
    mask: &BinaryMask,
    densities: &MaterialDensities,
    window: usize,
) -> Result<WeightMap> {
    check_dims(image, mask)?;
    densities.validate()?;
    if window < 3 || window % 2 == 0 {
        return Err(Error::invalid("window size must be odd and at least 3"));
    }
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }

    let (w, h) = (image.width(), image.height());
    let mut is_fibre = vec![false; w * h];
    let mut is_epoxy = vec![false; w * h];

    let x_anchors = w.saturating_sub(window).max(0) + 1;
    let y_anchors = h.saturating_sub(window).max(0) + 1;
    for ay in 0..y_anchors {
        let y1 = (ay + window).min(h);
        for ax in 0..x_anchors {
            let x1 = (ax + window).min(w);
            let mut lo = u16::MAX;
            let mut hi = u16::MAX; // sentinel: no masked pixel seen yet
            for y in ay..y1 {
                for x in ax..x1 {
                    if !mask.get(x, y) {
                        continue;
                    }
                    let v = image.raster().get(x, y) as u16;
                    if hi == u16::MAX {
                        lo = v;
                        hi = v;
                    } else {
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
            }
            if hi == u16::MAX {
                continue;
            }
            for y in ay..y1 {
                for x in ax..x1 {
                    if !mask.get(x, y) {
                        continue;
                    }
                    let v = image.raster().get(x, y) as u16;
                    if v == hi {
                        is_fibre[y * w + x] = true;
                    }
                    if v == lo {
                        is_epoxy[y * w + x] = true;
                    }
                }
            }
        }
    }

    let mut map = WeightMap::zeros(w, h);
    for i in 0..w * h {
        // Fibre wins when a pixel holds both verdicts (constant regions).
        map.weights[i] = if is_fibre[i] {
            densities.fibre_kg_m3
        } else if is_epoxy[i] {
            densities.epoxy_kg_m3
        } else {
            0.0
        };
    }
    Ok(map)
}

/// Fraction of mask pixels left without a weight. Errors on an empty mask.
pub fn zero_weight_fraction(weights: &WeightMap, mask: &BinaryMask) -> Result<f64> {
    if weights.width() != mask.width() || weights.height() != mask.height() {
        return Err(Error::DimensionMismatch(
            "weight map and mask differ in size".into(),
        ));
    }
    let total = mask.count();
    if total == 0 {
        return Err(Error::EmptyMask);
    }
    let zeros = mask
        .foreground()
        .filter(|&(x, y)| weights.get(x, y) == 0.0)
        .count();
    Ok(zeros as f64 / total as f64)
}

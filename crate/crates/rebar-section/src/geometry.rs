//! Section geometry: centroids, centre-of-gravity shift, area, second
//! moments of area, principal moments and axes, inertia radii, neutral-axis
//! distances and axis/boundary intersections.
//!
//! Two coordinate frames appear throughout:
//!
//! * storage frame: pixel coordinates `(x, y)` with `y` growing downward;
//! * section frame: Cartesian `(y, z)` in millimetres with the origin at
//!   the lower-left image corner, `y` horizontal and `z` vertical. Storage
//!   columns map to `+y`, storage rows to `-z`.
//!
//! Moments follow the structural convention `I_y = integral z^2 dA`,
//! `I_z = integral y^2 dA`, `D_yz = integral y z dA`, all taken about the
//! weighted centroid of the section. `second_moments_erosion` integrates
//! by peeling one-pixel erosion contours, `second_moments_direct` is the
//! plain sum over mask pixels; both must agree to floating-point noise and
//! the test suite holds them to a 1e-9 relative bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphology::{morph_apply_mask, DiskKernel, MorphOp};
use crate::raster::BinaryMask;
use crate::weights::WeightMap;

/// Eccentricity components below this are treated as a centric load.
pub const CENTRIC_EPS_MM: f64 = 1e-9;

/// A point in the storage frame, units of pixels. Fractional coordinates
/// address positions between pixel centres.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct PointPx {
    pub x: f64,
    pub y: f64,
}

/// Displacement of the weighted centroid away from the geometric centroid,
/// expressed in the section frame.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct ShiftVector {
    pub dy_mm: f64,
    pub dz_mm: f64,
    pub magnitude_mm: f64,
    /// Direction in degrees within (-180, 180], measured from the +y axis.
    pub angle_deg: f64,
}

/// Unweighted centroid of the mask foreground, in pixels.
pub fn geometric_centroid(mask: &BinaryMask) -> Result<PointPx> {
    let mut n = 0u64;
    let (mut sx, mut sy) = (0.0f64, 0.0f64);
    for (x, y) in mask.foreground() {
        sx += x as f64;
        sy += y as f64;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(PointPx {
        x: sx / n as f64,
        y: sy / n as f64,
    })
}

/// Density-weighted centroid of the weight map, in pixels.
pub fn weighted_centroid(weights: &WeightMap) -> Result<PointPx> {
    let (mut sw, mut sx, mut sy) = (0.0f64, 0.0f64, 0.0f64);
    for y in 0..weights.height() {
        for x in 0..weights.width() {
            let w = weights.get(x, y);
            if w != 0.0 {
                sw += w;
                sx += w * x as f64;
                sy += w * y as f64;
            }
        }
    }
    if sw <= 0.0 {
        return Err(Error::invalid("total weight is zero"));
    }
    Ok(PointPx {
        x: sx / sw,
        y: sy / sw,
    })
}

/// Shift of the weighted centroid relative to the geometric one. The
/// storage row axis flips sign so the vector lives in the section frame.
pub fn shift_vector(geometric: PointPx, weighted: PointPx, scale_mm_per_px: f64) -> ShiftVector {
    let dy_mm = (weighted.x - geometric.x) * scale_mm_per_px;
    let dz_mm = -(weighted.y - geometric.y) * scale_mm_per_px;
    let magnitude_mm = (dy_mm * dy_mm + dz_mm * dz_mm).sqrt();
    let angle_deg = if magnitude_mm == 0.0 {
        0.0
    } else {
        let a = dz_mm.atan2(dy_mm).to_degrees();
        if a == 0.0 {
            0.0 // canonicalize -0.0
        } else {
            a
        }
    };
    ShiftVector {
        dy_mm,
        dz_mm,
        magnitude_mm,
        angle_deg,
    }
}

/// Mask area in mm^2.
pub fn area(mask: &BinaryMask, scale_mm_per_px: f64) -> Result<f64> {
    let count = mask.count();
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(count as f64 * scale_mm_per_px * scale_mm_per_px)
}

/// Second moments `(I_y, I_z, D_yz)` about `origin` by direct summation
/// over mask pixels.
pub fn second_moments_direct(
    mask: &BinaryMask,
    origin: PointPx,
    scale_mm_per_px: f64,
) -> Result<(f64, f64, f64)> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut acc = MomentAccumulator::new(origin, scale_mm_per_px);
    for (x, y) in mask.foreground() {
        acc.add(x, y);
    }
    Ok(acc.finish())
}

/// Second moments `(I_y, I_z, D_yz)` about `origin` by erosion-layer
/// peeling: the mask is eroded with the unit disk until nothing remains,
/// and each peeled contour contributes its pixels. The layers partition
/// the mask, so the total matches [`second_moments_direct`].
pub fn second_moments_erosion(
    mask: &BinaryMask,
    origin: PointPx,
    scale_mm_per_px: f64,
) -> Result<(f64, f64, f64)> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let unit = DiskKernel::new(1);
    let mut acc = MomentAccumulator::new(origin, scale_mm_per_px);
    let mut current = mask.clone();
    while !current.is_empty() {
        let eroded = morph_apply_mask(&current, MorphOp::Erode, &unit);
        for (x, y) in current.foreground() {
            if !eroded.get(x, y) {
                acc.add(x, y);
            }
        }
        current = eroded;
    }
    Ok(acc.finish())
}

struct MomentAccumulator {
    origin: PointPx,
    scale: f64,
    i_y: f64,
    i_z: f64,
    d_yz: f64,
}

impl MomentAccumulator {
    fn new(origin: PointPx, scale: f64) -> Self {
        Self {
            origin,
            scale,
            i_y: 0.0,
            i_z: 0.0,
            d_yz: 0.0,
        }
    }

    #[inline]
    fn add(&mut self, x: usize, y: usize) {
        // Section-frame offsets of the pixel centre from the origin.
        let yy = x as f64 - self.origin.x;
        let zz = self.origin.y - y as f64;
        self.i_y += zz * zz;
        self.i_z += yy * yy;
        self.d_yz += yy * zz;
    }

    fn finish(self) -> (f64, f64, f64) {
        // Pixel area and both lever arms each carry one factor of scale.
        let s4 = self.scale.powi(4);
        (self.i_y * s4, self.i_z * s4, self.d_yz * s4)
    }
}

/// Principal moments and the principal direction from `(I_y, I_z, D_yz)`.
/// Returns `(I_1, I_2, theta_deg)` with `I_1 >= I_2`; `theta` is the
/// rotation from the `y` axis to principal axis 1, in degrees within
/// `(-90, 90]`. Axis labels keep the about-axis convention of `I_y` and
/// `I_z`: `I_1` integrates the squared coordinate along axis 2, so axis 1
/// lies across the section's elongation and axis 2 runs along it.
pub fn principal_moments(i_y: f64, i_z: f64, d_yz: f64) -> (f64, f64, f64) {
    let half = 0.5 * (i_y + i_z);
    let root = (0.25 * (i_y - i_z) * (i_y - i_z) + d_yz * d_yz).sqrt();
    // The moment about an axis at angle t is
    //   I(t) = (I_y + I_z)/2 + (I_y - I_z)/2 cos 2t - D_yz sin 2t,
    // maximal where 2t = atan2(-2 D_yz, I_y - I_z).
    let mut theta = 0.5 * (-2.0 * d_yz).atan2(i_y - i_z).to_degrees();
    if theta <= -90.0 {
        theta += 180.0;
    }
    // Symmetric sections land on atan2(-0, 0); fold -0 into +0.
    (half + root, half - root, theta + 0.0)
}

/// Squared inertia radii `(i_1^2, i_2^2) = (I_1 / A, I_2 / A)` in mm^2.
pub fn inertia_radii(i1_mm4: f64, i2_mm4: f64, area_mm2: f64) -> Result<(f64, f64)> {
    if !(area_mm2.is_finite() && area_mm2 > 0.0) {
        return Err(Error::invalid("area must be positive"));
    }
    Ok((i1_mm4 / area_mm2, i2_mm4 / area_mm2))
}

/// Distances from the centroid to the points where the neutral axis
/// crosses the principal axes: `n_1 = i_2^2 / e_1`, `n_2 = i_1^2 / e_2`.
/// A vanishing eccentricity component leaves the corresponding crossing
/// at infinity, reported as `None`; both components zero means a centric
/// load and is an error.
pub fn neutral_axis_points(
    i1_sq_mm2: f64,
    i2_sq_mm2: f64,
    e1_mm: f64,
    e2_mm: f64,
) -> Result<(Option<f64>, Option<f64>)> {
    let e1_live = e1_mm.abs() >= CENTRIC_EPS_MM;
    let e2_live = e2_mm.abs() >= CENTRIC_EPS_MM;
    if !e1_live && !e2_live {
        return Err(Error::invalid(
            "centric load: neutral axis is at infinity",
        ));
    }
    Ok((
        e1_live.then(|| i2_sq_mm2 / e1_mm),
        e2_live.then(|| i1_sq_mm2 / e2_mm),
    ))
}

/// Walks from `origin` along `direction` (storage frame) in half-pixel
/// steps, sampling the nearest pixel, and returns the last foreground
/// pixel before each of the two exits `(forward, backward)`. `origin`
/// must round to a foreground pixel.
pub fn axis_intersections(
    mask: &BinaryMask,
    origin: PointPx,
    direction: (f64, f64),
) -> Result<(PointPx, PointPx)> {
    let norm = (direction.0 * direction.0 + direction.1 * direction.1).sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::invalid("direction must be a nonzero vector"));
    }
    let dir = (direction.0 / norm, direction.1 / norm);
    let ox = origin.x.round() as i64;
    let oy = origin.y.round() as i64;
    if !mask.get_signed(ox, oy) {
        return Err(Error::OriginOutsideMask);
    }

    let march = |sign: f64| -> PointPx {
        let mut last = (ox, oy);
        let mut t = 0.0f64;
        loop {
            t += 0.5;
            let px = (origin.x + sign * t * dir.0).round() as i64;
            let py = (origin.y + sign * t * dir.1).round() as i64;
            if !mask.get_signed(px, py) {
                return PointPx {
                    x: last.0 as f64,
                    y: last.1 as f64,
                };
            }
            last = (px, py);
        }
    };
    Ok((march(1.0), march(-1.0)))
}

/// Boundary intersection segments stored with the section properties:
/// the image-aligned axes, the principal axes, and (for an eccentric
/// section) the line through both centroids. Each pair is (forward,
/// backward) endpoint in storage pixels.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct IntersectionSet {
    pub axis_y: (PointPx, PointPx),
    pub axis_z: (PointPx, PointPx),
    pub axis_1: (PointPx, PointPx),
    pub axis_2: (PointPx, PointPx),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eccentricity: Option<(PointPx, PointPx)>,
}

/// Everything the geometry stage knows about a section.
#[derive(Clone, Copy, PartialEq, Debug, Serialize)]
pub struct SectionProperties {
    pub area_mm2: f64,
    pub centroid_geometric_px: PointPx,
    pub centroid_weighted_px: PointPx,
    pub shift: ShiftVector,
    pub i_y_mm4: f64,
    pub i_z_mm4: f64,
    pub d_yz_mm4: f64,
    pub i1_mm4: f64,
    pub i2_mm4: f64,
    /// Rotation from the `y` axis to principal axis 1, the axis carrying
    /// the larger moment; the section elongates along axis 2.
    pub theta_deg: f64,
    pub i1_sq_mm2: f64,
    pub i2_sq_mm2: f64,
    /// Eccentricity components: the shift vector projected onto the
    /// principal axes.
    pub e1_mm: f64,
    pub e2_mm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n1_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n2_mm: Option<f64>,
    pub intersections: IntersectionSet,
    #[serde(skip)]
    pub scale_mm_per_px: f64,
}

impl SectionProperties {
    /// Principal-frame coordinates `(c_1, c_2)` of a storage-frame point,
    /// in millimetres relative to the weighted centroid.
    pub fn principal_coords_mm(&self, p: PointPx) -> (f64, f64) {
        let dy = (p.x - self.centroid_weighted_px.x) * self.scale_mm_per_px;
        let dz = -(p.y - self.centroid_weighted_px.y) * self.scale_mm_per_px;
        let (s, c) = self.theta_deg.to_radians().sin_cos();
        (dy * c + dz * s, -dy * s + dz * c)
    }

    /// Whether the load effectively acts through the weighted centroid.
    pub fn is_centric(&self) -> bool {
        self.shift.magnitude_mm < CENTRIC_EPS_MM
    }
}

/// Runs the full geometry stage over a mask and its weight map.
pub fn section_properties(
    mask: &BinaryMask,
    weights: &WeightMap,
    scale_mm_per_px: f64,
) -> Result<SectionProperties> {
    if mask.width() != weights.width() || mask.height() != weights.height() {
        return Err(Error::DimensionMismatch(
            "weight map and mask differ in size".into(),
        ));
    }
    if !(scale_mm_per_px.is_finite() && scale_mm_per_px > 0.0) {
        return Err(Error::invalid("pixel scale must be positive and finite"));
    }

    let centroid_geometric_px = geometric_centroid(mask)?;
    let centroid_weighted_px = weighted_centroid(weights)?;
    let shift = shift_vector(centroid_geometric_px, centroid_weighted_px, scale_mm_per_px);
    let area_mm2 = area(mask, scale_mm_per_px)?;
    let (i_y_mm4, i_z_mm4, d_yz_mm4) =
        second_moments_erosion(mask, centroid_weighted_px, scale_mm_per_px)?;
    let (i1_mm4, i2_mm4, theta_deg) = principal_moments(i_y_mm4, i_z_mm4, d_yz_mm4);
    let (i1_sq_mm2, i2_sq_mm2) = inertia_radii(i1_mm4, i2_mm4, area_mm2)?;

    let (sin_t, cos_t) = theta_deg.to_radians().sin_cos();
    let e1_mm = shift.dy_mm * cos_t + shift.dz_mm * sin_t;
    let e2_mm = -shift.dy_mm * sin_t + shift.dz_mm * cos_t;
    let (n1_mm, n2_mm) = if shift.magnitude_mm < CENTRIC_EPS_MM {
        (None, None)
    } else {
        neutral_axis_points(i1_sq_mm2, i2_sq_mm2, e1_mm, e2_mm)?
    };

    // Storage-frame directions: a section-frame angle phi maps to
    // (cos phi, -sin phi) because storage rows run downward.
    let axis_y = axis_intersections(mask, centroid_weighted_px, (1.0, 0.0))?;
    let axis_z = axis_intersections(mask, centroid_weighted_px, (0.0, -1.0))?;
    let axis_1 = axis_intersections(mask, centroid_weighted_px, (cos_t, -sin_t))?;
    let axis_2 = axis_intersections(mask, centroid_weighted_px, (-sin_t, -cos_t))?;
    let eccentricity = if shift.magnitude_mm < CENTRIC_EPS_MM {
        None
    } else {
        let dir = (
            centroid_weighted_px.x - centroid_geometric_px.x,
            centroid_weighted_px.y - centroid_geometric_px.y,
        );
        Some(axis_intersections(mask, centroid_weighted_px, dir)?)
    };

    Ok(SectionProperties {
        area_mm2,
        centroid_geometric_px,
        centroid_weighted_px,
        shift,
        i_y_mm4,
        i_z_mm4,
        d_yz_mm4,
        i1_mm4,
        i2_mm4,
        theta_deg,
        i1_sq_mm2,
        i2_sq_mm2,
        e1_mm,
        e2_mm,
        n1_mm,
        n2_mm,
        intersections: IntersectionSet {
            axis_y,
            axis_z,
            axis_1,
            axis_2,
            eccentricity,
        },
        scale_mm_per_px,
    })
}

//! Image loading, saving and synthetic fixture generation.
//!
//! Real inputs are 8-bit grayscale or RGB images in PNG or TIFF form. RGB
//! decodes to the plain channel average. The physical pixel scale comes
//! from an explicit override when given, otherwise from embedded
//! resolution metadata (PNG pHYs in pixels per metre, TIFF X/YResolution
//! in pixels per inch or centimetre); an image with neither is rejected.
//!
//! Synthetic fixtures rasterize analytic shapes at pixel centres and carry
//! their exact ground truth alongside, so every downstream measurement can
//! be checked against a closed form.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointPx;
use crate::raster::GrayRaster;

/// Grayscale raster plus the physical size of one pixel.
#[derive(Clone, PartialEq, Debug)]
pub struct CalibratedImage {
    raster: GrayRaster,
    scale_mm_per_px: f64,
}

impl CalibratedImage {
    pub fn new(raster: GrayRaster, scale_mm_per_px: f64) -> Result<Self> {
        if !(scale_mm_per_px.is_finite() && scale_mm_per_px > 0.0) {
            return Err(Error::invalid("pixel scale must be positive and finite"));
        }
        Ok(Self {
            raster,
            scale_mm_per_px,
        })
    }

    pub fn raster(&self) -> &GrayRaster {
        &self.raster
    }

    pub fn raster_mut(&mut self) -> &mut GrayRaster {
        &mut self.raster
    }

    pub fn scale_mm_per_px(&self) -> f64 {
        self.scale_mm_per_px
    }

    pub fn width(&self) -> usize {
        self.raster.width()
    }

    pub fn height(&self) -> usize {
        self.raster.height()
    }
}

/// Loads an 8-bit grayscale or RGB image from PNG or TIFF. `scale_override`
/// wins over embedded resolution metadata; without either the load fails.
pub fn load_grayscale(path: impl AsRef<Path>, scale_override: Option<f64>) -> Result<CalibratedImage> {
    let path = path.as_ref();
    let decoded = match sniff_format(path)? {
        SniffedFormat::Png => decode_png(path)?,
        SniffedFormat::Tiff => decode_tiff(path)?,
    };
    let scale = match scale_override {
        Some(s) => s,
        None => decoded.scale_mm_per_px.ok_or(Error::ScaleUnavailable)?,
    };
    CalibratedImage::new(decoded.raster, scale)
}

/// Writes a grayscale image as 8-bit PNG. The pixel scale is embedded as a
/// pHYs chunk (rounded to whole pixels per metre); exact scale belongs in
/// the ground-truth sidecar.
pub fn save_png(path: impl AsRef<Path>, image: &CalibratedImage) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })?;
    let mut encoder = png::Encoder::new(
        BufWriter::new(file),
        image.width() as u32,
        image.height() as u32,
    );
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let ppm = (1000.0 / image.scale_mm_per_px()).round();
    if ppm >= 1.0 && ppm <= u32::MAX as f64 {
        encoder.set_pixel_dims(Some(png::PixelDimensions {
            xppu: ppm as u32,
            yppu: ppm as u32,
            unit: png::Unit::Meter,
        }));
    }
    let mut writer = encoder.write_header().map_err(|e| Error::Write {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })?;
    writer
        .write_image_data(image.raster().pixels())
        .map_err(|e| Error::Write {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        })
}

/// Writes packed RGB bytes (3 per pixel, row-major) as an 8-bit PNG.
pub fn save_rgb_png(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    rgb: &[u8],
) -> Result<()> {
    let path = path.as_ref();
    if rgb.len() != width * height * 3 {
        return Err(Error::DimensionMismatch(
            "RGB buffer does not match the stated dimensions".into(),
        ));
    }
    let file = File::create(path).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(|e| Error::Write {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })?;
    writer.write_image_data(rgb).map_err(|e| Error::Write {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })
}

enum SniffedFormat {
    Png,
    Tiff,
}

fn sniff_format(path: &Path) -> Result<SniffedFormat> {
    let bytes = std::fs::read(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        Ok(SniffedFormat::Png)
    } else if bytes.starts_with(b"II*\0") || bytes.starts_with(b"MM\0*") {
        Ok(SniffedFormat::Tiff)
    } else {
        Err(Error::Decode {
            path: path.to_path_buf(),
            reason: "not a PNG or TIFF file".into(),
        })
    }
}

struct Decoded {
    raster: GrayRaster,
    scale_mm_per_px: Option<f64>,
}

fn decode_png(path: &Path) -> Result<Decoded> {
    let file = File::open(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    // Expand palette and sub-byte grayscale to 8 bits.
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;

    let scale_mm_per_px = reader.info().pixel_dims.and_then(|d| {
        // Only metric, square pixels carry a usable scale.
        if d.unit == png::Unit::Meter && d.xppu == d.yppu && d.xppu > 0 {
            Some(1000.0 / d.xppu as f64)
        } else {
            None
        }
    });

    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedPixelFormat(format!(
            "PNG bit depth {:?}",
            info.bit_depth
        )));
    }
    buf.truncate(info.buffer_size());
    let (w, h) = (info.width as usize, info.height as usize);
    let pixels = match info.color_type {
        png::ColorType::Grayscale => buf,
        png::ColorType::GrayscaleAlpha => buf.chunks_exact(2).map(|p| p[0]).collect(),
        png::ColorType::Rgb => buf.chunks_exact(3).map(average_rgb).collect(),
        png::ColorType::Rgba => buf.chunks_exact(4).map(average_rgb).collect(),
        other => {
            return Err(Error::UnsupportedPixelFormat(format!("PNG color type {other:?}")));
        }
    };
    Ok(Decoded {
        raster: GrayRaster::from_pixels(w, h, pixels)?,
        scale_mm_per_px,
    })
}

/// Unweighted channel average, rounded to nearest.
fn average_rgb(px: &[u8]) -> u8 {
    ((px[0] as u16 + px[1] as u16 + px[2] as u16 + 1) / 3) as u8
}

fn decode_tiff(path: &Path) -> Result<Decoded> {
    let file = File::open(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut decoder = tiff::decoder::Decoder::new(BufReader::new(file)).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;

    let scale_mm_per_px = tiff_scale(&mut decoder);

    let (w, h) = decoder.dimensions().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let color = decoder.colortype().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let image = decoder.read_image().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let buf = match image {
        tiff::decoder::DecodingResult::U8(buf) => buf,
        _ => {
            return Err(Error::UnsupportedPixelFormat(
                "TIFF sample format wider than 8 bits".into(),
            ));
        }
    };
    let pixels = match color {
        tiff::ColorType::Gray(8) => buf,
        tiff::ColorType::RGB(8) => buf.chunks_exact(3).map(average_rgb).collect(),
        tiff::ColorType::RGBA(8) => buf.chunks_exact(4).map(average_rgb).collect(),
        other => {
            return Err(Error::UnsupportedPixelFormat(format!("TIFF color type {other:?}")));
        }
    };
    Ok(Decoded {
        raster: GrayRaster::from_pixels(w as usize, h as usize, pixels)?,
        scale_mm_per_px,
    })
}

/// Pixel scale from TIFF XResolution + ResolutionUnit (defaults to inch).
/// Anisotropic or unitless resolutions are treated as absent.
fn tiff_scale<R: std::io::Read + std::io::Seek>(decoder: &mut tiff::decoder::Decoder<R>) -> Option<f64> {
    use tiff::tags::Tag;
    let rational = |v: tiff::decoder::ifd::Value| -> Option<f64> {
        match v {
            tiff::decoder::ifd::Value::Rational(n, d) if d != 0 => Some(n as f64 / d as f64),
            tiff::decoder::ifd::Value::RationalBig(n, d) if d != 0 => Some(n as f64 / d as f64),
            _ => None,
        }
    };
    let xres = decoder.find_tag(Tag::XResolution).ok()??;
    let xres = rational(xres)?;
    if let Ok(Some(yres)) = decoder.find_tag(Tag::YResolution) {
        if rational(yres) != Some(xres) {
            return None;
        }
    }
    let unit = decoder
        .find_tag(Tag::ResolutionUnit)
        .ok()
        .flatten()
        .and_then(|v| v.into_u16().ok())
        .unwrap_or(2);
    let mm_per_unit = match unit {
        2 => 25.4,
        3 => 10.0,
        _ => return None,
    };
    if xres > 0.0 {
        Some(mm_per_unit / xres)
    } else {
        None
    }
}

/// Analytic shape of a synthetic fixture, all lengths in pixels and angles
/// in degrees counter-clockwise in the lower-left-origin frame.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticShape {
    /// Solid disc textured with deterministic fibre dots in an epoxy matrix.
    Disc { radius_px: f64 },
    /// Solid ellipse with the same fibre-dot texture; semi-axes `a >= b` not
    /// required; `rotation_deg` rotates the `a` axis from horizontal.
    Ellipse {
        a_px: f64,
        b_px: f64,
        rotation_deg: f64,
    },
    /// Disc whose halves render at fibre and epoxy intensity. The fibre
    /// half lies on the side the `split_angle_deg` direction points to.
    HalfDensityDisc {
        radius_px: f64,
        split_angle_deg: f64,
    },
}

/// Intensity levels used when rasterizing fixtures. Must be strictly
/// increasing background < epoxy < fibre.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct FixtureIntensities {
    pub background: u8,
    pub epoxy: u8,
    pub fibre: u8,
}

impl Default for FixtureIntensities {
    fn default() -> Self {
        Self {
            background: 20,
            epoxy: 140,
            fibre: 200,
        }
    }
}

/// Full description of a synthetic fixture.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub shape: SyntheticShape,
    #[serde(default)]
    pub intensities: FixtureIntensities,
    /// Peak amplitude of additive uniform noise, 0 for a clean render.
    #[serde(default)]
    pub noise_amplitude: u8,
    /// Seed of the noise generator; unused when `noise_amplitude` is 0.
    #[serde(default)]
    pub noise_seed: u64,
}

/// Closed-form section quantities of a rasterized fixture, in physical
/// units. Moments are taken about the weighted centroid; for uniform
/// shapes that coincides with the shape centre.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct GroundTruth {
    pub area_mm2: f64,
    pub centroid_px: PointPx,
    /// Larger principal moment.
    pub i1_mm4: f64,
    /// Smaller principal moment.
    pub i2_mm4: f64,
    /// Centre-of-gravity shift of a half-density disc; `None` for uniform
    /// shapes.
    pub shift: Option<GroundTruthShift>,
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct GroundTruthShift {
    pub magnitude_mm: f64,
    /// Direction in the lower-left-origin frame, degrees in (-180, 180].
    pub angle_deg: f64,
}

/// Rasterizes a synthetic fixture onto a `width x height` canvas at the
/// given scale and returns it with its analytic ground truth. The shape is
/// centred on the canvas and must fit with a 2 px margin.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
    width: usize,
    height: usize,
    scale_mm_per_px: f64,
) -> Result<(CalibratedImage, GroundTruth)> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("canvas dimensions must be positive"));
    }
    if !(scale_mm_per_px.is_finite() && scale_mm_per_px > 0.0) {
        return Err(Error::invalid("pixel scale must be positive and finite"));
    }
    let ints = spec.intensities;
    if !(ints.background < ints.epoxy && ints.epoxy < ints.fibre) {
        return Err(Error::invalid(
            "fixture intensities must satisfy background < epoxy < fibre",
        ));
    }

    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let (extent_x, extent_y) = shape_extent(&spec.shape)?;
    let fits = cx - extent_x >= 2.0
        && cx + extent_x <= width as f64 - 3.0
        && cy - extent_y >= 2.0
        && cy + extent_y <= height as f64 - 3.0;
    if !fits {
        return Err(Error::ShapeOutOfBounds);
    }

    let mut raster = GrayRaster::new(width, height)?;
    for y in 0..height {
        for x in 0..width {
            // Pixel centres carry integer coordinates; dz points up.
            let dx = x as f64 - cx;
            let dz = -(y as f64 - cy);
            raster.set(x, y, render_pixel(&spec.shape, &ints, x, y, dx, dz));
        }
    }
    raster = apply_noise(raster, spec);

    let truth = ground_truth(&spec.shape, cx, cy, scale_mm_per_px);
    Ok((CalibratedImage::new(raster, scale_mm_per_px)?, truth))
}

fn shape_extent(shape: &SyntheticShape) -> Result<(f64, f64)> {
    let positive = |v: f64, what: &str| -> Result<f64> {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(Error::invalid(format!("{what} must be positive and finite")))
        }
    };
    match *shape {
        SyntheticShape::Disc { radius_px } | SyntheticShape::HalfDensityDisc { radius_px, .. } => {
            let r = positive(radius_px, "radius")?;
            Ok((r, r))
        }
        SyntheticShape::Ellipse {
            a_px,
            b_px,
            rotation_deg,
        } => {
            let a = positive(a_px, "semi-axis a")?;
            let b = positive(b_px, "semi-axis b")?;
            let rot = rotation_deg.to_radians();
            let (s, c) = rot.sin_cos();
            // Exact bounding half-extents of a rotated ellipse.
            Ok((
                (a * a * c * c + b * b * s * s).sqrt(),
                (a * a * s * s + b * b * c * c).sqrt(),
            ))
        }
    }
}

fn render_pixel(
    shape: &SyntheticShape,
    ints: &FixtureIntensities,
    x: usize,
    y: usize,
    dx: f64,
    dz: f64,
) -> u8 {
    match *shape {
        SyntheticShape::Disc { radius_px } => {
            if dx * dx + dz * dz <= radius_px * radius_px {
                if speckle_is_fibre(x, y) {
                    ints.fibre
                } else {
                    ints.epoxy
                }
            } else {
                ints.background
            }
        }
        SyntheticShape::Ellipse {
            a_px,
            b_px,
            rotation_deg,
        } => {
            let rot = rotation_deg.to_radians();
            let (s, c) = rot.sin_cos();
            let u = dx * c + dz * s;
            let v = -dx * s + dz * c;
            if (u / a_px).powi(2) + (v / b_px).powi(2) <= 1.0 {
                if speckle_is_fibre(x, y) {
                    ints.fibre
                } else {
                    ints.epoxy
                }
            } else {
                ints.background
            }
        }
        SyntheticShape::HalfDensityDisc {
            radius_px,
            split_angle_deg,
        } => {
            if dx * dx + dz * dz <= radius_px * radius_px {
                let phi = split_angle_deg.to_radians();
                if dx * phi.cos() + dz * phi.sin() >= 0.0 {
                    ints.fibre
                } else {
                    ints.epoxy
                }
            } else {
                ints.background
            }
        }
    }
}

/// Cell pitch of the fibre-dot lattice, px.
const DOT_CELL: i64 = 12;
/// Fibre dot radius, px. Larger than typical rough-stage kernels at test
/// scale, so the dots survive smoothing and keep the fibre mode in the
/// histogram.
const DOT_RADIUS: i64 = 5;
/// Dot presence probability per lattice cell, percent.
const DOT_FILL_PCT: u64 = 72;

fn cell_hash(cx: i64, cy: i64, salt: u64) -> u64 {
    let mut h = (cx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    h ^= (cy as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    h ^= salt.wrapping_mul(0x165667B19E3779F9);
    h ^= h >> 31;
    h = h.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    h ^ (h >> 29)
}

/// Deterministic fibre-dot texture: round fibre cross-sections of radius
/// `DOT_RADIUS` scattered on a jittered lattice inside the epoxy matrix.
fn speckle_is_fibre(x: usize, y: usize) -> bool {
    let px = x as i64;
    let py = y as i64;
    let cell_x = px.div_euclid(DOT_CELL);
    let cell_y = py.div_euclid(DOT_CELL);
    // Jittered dots can spill past their own cell, so probe the 3x3
    // neighbourhood.
    for cy in cell_y - 1..=cell_y + 1 {
        for cx in cell_x - 1..=cell_x + 1 {
            if cell_hash(cx, cy, 0) % 100 >= DOT_FILL_PCT {
                continue;
            }
            let jx = (cell_hash(cx, cy, 1) % 5) as i64 - 2;
            let jy = (cell_hash(cx, cy, 2) % 5) as i64 - 2;
            let dot_x = cx * DOT_CELL + DOT_CELL / 2 + jx;
            let dot_y = cy * DOT_CELL + DOT_CELL / 2 + jy;
            let dx = px - dot_x;
            let dy = py - dot_y;
            if dx * dx + dy * dy <= DOT_RADIUS * DOT_RADIUS {
                return true;
            }
        }
    }
    false
}

fn apply_noise(mut raster: GrayRaster, spec: &SyntheticSpec) -> GrayRaster {
    if spec.noise_amplitude == 0 {
        return raster;
    }
    let amp = spec.noise_amplitude as i16;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.noise_seed);
    for v in raster.pixels_mut() {
        let n: i16 = rng.gen_range(-amp..=amp);
        *v = (*v as i16 + n).clamp(0, 255) as u8;
    }
    raster
}

fn ground_truth(shape: &SyntheticShape, cx: f64, cy: f64, scale: f64) -> GroundTruth {
    let s2 = scale * scale;
    let s4 = s2 * s2;
    match *shape {
        SyntheticShape::Disc { radius_px } => {
            let r = radius_px;
            GroundTruth {
                area_mm2: std::f64::consts::PI * r * r * s2,
                centroid_px: PointPx { x: cx, y: cy },
                i1_mm4: std::f64::consts::PI * r.powi(4) / 4.0 * s4,
                i2_mm4: std::f64::consts::PI * r.powi(4) / 4.0 * s4,
                shift: None,
            }
        }
        SyntheticShape::Ellipse { a_px, b_px, .. } => {
            let big = std::f64::consts::PI * a_px.powi(3) * b_px / 4.0;
            let small = std::f64::consts::PI * a_px * b_px.powi(3) / 4.0;
            GroundTruth {
                area_mm2: std::f64::consts::PI * a_px * b_px * s2,
                centroid_px: PointPx { x: cx, y: cy },
                i1_mm4: big.max(small) * s4,
                i2_mm4: big.min(small) * s4,
                shift: None,
            }
        }
        SyntheticShape::HalfDensityDisc {
            radius_px,
            split_angle_deg,
        } => {
            // Densities 2:1 give the shift below; the moments follow from
            // the parallel-axis step away from the shape centre.
            let densities = crate::weights::MaterialDensities::default();
            half_disc_truth(radius_px, split_angle_deg, cx, cy, scale, &densities)
        }
    }
}

/// Ground truth of a half-density disc for arbitrary densities.
///
/// The area centroid of a half-disc sits `4 r / (3 pi)` from the centre, so
/// two halves of densities `rho_f`, `rho_e` shift the centre of gravity by
/// `4 r (rho_f - rho_e) / (3 pi (rho_f + rho_e))` toward the fibre half.
pub fn half_disc_truth(
    radius_px: f64,
    split_angle_deg: f64,
    cx: f64,
    cy: f64,
    scale: f64,
    densities: &crate::weights::MaterialDensities,
) -> GroundTruth {
    let s2 = scale * scale;
    let s4 = s2 * s2;
    let r_mm = radius_px * scale;
    let area = std::f64::consts::PI * r_mm * r_mm;
    let (rho_f, rho_e) = (densities.fibre_kg_m3, densities.epoxy_kg_m3);
    let d_mm = 4.0 * r_mm * (rho_f - rho_e) / (3.0 * std::f64::consts::PI * (rho_f + rho_e));
    let phi = split_angle_deg.to_radians();

    // Area moments about the weighted centroid: central disc moments plus
    // the parallel-axis terms for the offset d along the split direction.
    let i_c = std::f64::consts::PI * radius_px.powi(4) / 4.0 * s4;
    let i_y = i_c + area * (d_mm * phi.sin()).powi(2);
    let i_z = i_c + area * (d_mm * phi.cos()).powi(2);
    let d_yz = area * d_mm * d_mm * phi.cos() * phi.sin();
    let half = 0.5 * (i_y + i_z);
    let root = (0.25 * (i_y - i_z).powi(2) + d_yz * d_yz).sqrt();

    let mut angle = split_angle_deg.rem_euclid(360.0);
    if angle > 180.0 {
        angle -= 360.0;
    }
    GroundTruth {
        area_mm2: area,
        centroid_px: PointPx { x: cx, y: cy },
        i1_mm4: half + root,
        i2_mm4: half - root,
        shift: Some(GroundTruthShift {
            magnitude_mm: d_mm,
            angle_deg: angle,
        }),
    }
}

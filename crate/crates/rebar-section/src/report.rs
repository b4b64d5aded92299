//! End-to-end orchestration: run the full pipeline over one calibrated
//! image, emit a deterministic JSON report and render an annotated
//! overlay.
//!
//! The JSON contract: stable field order, numbers printed with six
//! significant digits, a schema version, and optional sections omitted
//! entirely rather than set to null. Identical image plus identical
//! config must produce byte-identical text.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{section_properties, PointPx, SectionProperties};
use crate::image_io::{save_rgb_png, CalibratedImage};
use crate::segmentation::{apply_mask, fine_segment, rough_segment, SegmentationConfig};
use crate::stress::{critical_point_stresses, StressReport};
use crate::weights::{
    assign_global, assign_local, zero_weight_fraction, MaterialDensities,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Warning attached when the fine mask reaches the image border: the
/// section is cut off, so centroid and shift values describe only the
/// visible part.
pub const TRUNCATION_WARNING: &str = "section truncated";

/// How pixel weights are assigned over the ROI.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WeightMode {
    /// One threshold for the whole ROI; above it a pixel weighs as fibre.
    /// `None` picks the threshold from the masked histogram.
    Global {
        #[serde(skip_serializing_if = "Option::is_none", default)]
        fibre_threshold: Option<u8>,
    },
    /// Sliding-window extremes classify pixels within each window.
    Local { window: usize },
}

impl Default for WeightMode {
    fn default() -> Self {
        WeightMode::Global {
            fibre_threshold: None,
        }
    }
}

/// Everything a run needs beyond the image itself. The struct is echoed
/// verbatim into the report so a run can be reproduced from its output.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub segmentation: SegmentationConfig,
    pub densities: MaterialDensities,
    pub weight_mode: WeightMode,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scale_override_mm_per_px: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub force_kn: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub declared_diameter_mm: Option<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            segmentation: SegmentationConfig::default(),
            densities: MaterialDensities::default(),
            weight_mode: WeightMode::default(),
            scale_override_mm_per_px: None,
            force_kn: None,
            declared_diameter_mm: None,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        self.segmentation.validate()?;
        self.densities.validate()?;
        if let WeightMode::Local { window } = self.weight_mode {
            if window < 3 || window % 2 == 0 {
                return Err(Error::invalid("window size must be odd and at least 3"));
            }
        }
        if let Some(s) = self.scale_override_mm_per_px {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::invalid("scale override must be positive"));
            }
        }
        if let Some(n) = self.force_kn {
            if !(n.is_finite() && n >= 0.0) {
                return Err(Error::invalid("load force must be non-negative"));
            }
        }
        if let Some(d) = self.declared_diameter_mm {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::invalid("declared diameter must be positive"));
            }
        }
        Ok(())
    }

    /// Nominal area from the declared diameter, `pi d^2 / 4`.
    pub fn declared_area_mm2(&self) -> Option<f64> {
        self.declared_diameter_mm
            .map(|d| std::f64::consts::PI * d * d / 4.0)
    }
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize)]
pub struct ImageInfo {
    pub width: usize,
    pub height: usize,
    pub scale_mm_per_px: f64,
}

/// The full result of analyzing one image.
#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct SectionReport {
    pub schema_version: u32,
    pub sample_id: String,
    pub config: AnalysisConfig,
    pub image: ImageInfo,
    pub section: SectionProperties,
    /// Fraction of ROI pixels that carry no weight (local mode assigns
    /// weight only at window extremes).
    pub zero_weight_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stress: Option<StressReport>,
    pub warnings: Vec<String>,
}

impl SectionReport {
    pub fn is_truncated(&self) -> bool {
        self.warnings.iter().any(|w| w == TRUNCATION_WARNING)
    }
}

/// Runs segmentation, weighting, geometry and (if a load is configured)
/// the stress evaluation over one image.
pub fn analyze(
    image: &CalibratedImage,
    config: &AnalysisConfig,
    sample_id: &str,
) -> Result<SectionReport> {
    config.validate()?;

    let rough = rough_segment(image, &config.segmentation)?;
    let fine = fine_segment(&rough, &config.segmentation)?;
    let roi = apply_mask(image, &fine)?;

    let weights = match config.weight_mode {
        WeightMode::Global { fibre_threshold } => {
            assign_global(&roi, &fine, &config.densities, fibre_threshold)?
        }
        WeightMode::Local { window } => {
            assign_local(&roi, &fine, &config.densities, window)?
        }
    };
    let zero_fraction = zero_weight_fraction(&weights, &fine)?;
    let section = section_properties(&fine, &weights, image.scale_mm_per_px())?;

    let stress = match config.force_kn {
        Some(n) => Some(critical_point_stresses(
            &section,
            n,
            config.declared_area_mm2(),
        )?),
        None => None,
    };

    let mut warnings = Vec::new();
    if fine.touches_border() {
        warnings.push(TRUNCATION_WARNING.to_string());
    }

    Ok(SectionReport {
        schema_version: SCHEMA_VERSION,
        sample_id: sample_id.to_string(),
        config: *config,
        image: ImageInfo {
            width: image.width(),
            height: image.height(),
            scale_mm_per_px: image.scale_mm_per_px(),
        },
        section,
        zero_weight_fraction: zero_fraction,
        stress,
        warnings,
    })
}

/// Serializes a report with stable key order and all floating-point
/// numbers rounded to six significant digits. The same report always
/// yields the same bytes.
pub fn emit_json(report: &SectionReport) -> String {
    let mut value = serde_json::to_value(report).expect("report serializes");
    round_json_numbers(&mut value);
    let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
    text.push('\n');
    text
}

/// Rounds every floating-point number in a JSON value to six significant
/// digits, in place. Integers are left untouched.
pub fn round_json_numbers(value: &mut Value) {
    match value {
        Value::Number(n) => {
            // Integers pass through untouched; only f64 values are
            // reformatted to six significant digits.
            if !n.is_u64() && !n.is_i64() {
                if let Some(f) = n.as_f64() {
                    let mut rounded: f64 =
                        format!("{:.5e}", f).parse().expect("formatted float parses");
                    if rounded == 0.0 {
                        rounded = 0.0; // collapse -0.0
                    }
                    if let Some(num) = serde_json::Number::from_f64(rounded) {
                        *value = Value::Number(num);
                    }
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json_numbers),
        Value::Object(map) => map.values_mut().for_each(round_json_numbers),
        _ => {}
    }
}

const RED: [u8; 3] = [220, 40, 40];
const BLUE: [u8; 3] = [60, 90, 230];
const GREEN: [u8; 3] = [40, 190, 70];
const WHITE: [u8; 3] = [255, 255, 255];
const YELLOW: [u8; 3] = [240, 220, 40];

/// Renders the annotated overlay: the grayscale image with the geometric
/// centroid and image-aligned axes in red, the weighted centroid in blue,
/// the principal axes in green, and (for an eccentric section) the
/// eccentricity line in white with its boundary intersections in yellow.
pub fn render_overlay(image: &CalibratedImage, report: &SectionReport) -> Vec<u8> {
    let (w, h) = (image.width(), image.height());
    let mut rgb = Vec::with_capacity(w * h * 3);
    for &v in image.raster().pixels() {
        rgb.extend_from_slice(&[v, v, v]);
    }
    let section = &report.section;
    let ix = &section.intersections;

    draw_segment(&mut rgb, w, h, ix.axis_y.0, ix.axis_y.1, RED);
    draw_segment(&mut rgb, w, h, ix.axis_z.0, ix.axis_z.1, RED);
    draw_segment(&mut rgb, w, h, ix.axis_1.0, ix.axis_1.1, GREEN);
    draw_segment(&mut rgb, w, h, ix.axis_2.0, ix.axis_2.1, GREEN);
    if let Some((a, b)) = ix.eccentricity {
        draw_segment(&mut rgb, w, h, a, b, WHITE);
        draw_square(&mut rgb, w, h, a, 2, YELLOW);
        draw_square(&mut rgb, w, h, b, 2, YELLOW);
    }
    draw_cross(&mut rgb, w, h, section.centroid_geometric_px, 6, RED);
    draw_cross(&mut rgb, w, h, section.centroid_weighted_px, 6, BLUE);
    rgb
}

/// Renders the overlay and writes it as an RGB PNG.
pub fn write_overlay_png(
    path: impl AsRef<Path>,
    image: &CalibratedImage,
    report: &SectionReport,
) -> Result<()> {
    let rgb = render_overlay(image, report);
    save_rgb_png(path, image.width(), image.height(), &rgb)
}

fn put_pixel(rgb: &mut [u8], w: usize, h: usize, x: i64, y: i64, color: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
        let idx = (y as usize * w + x as usize) * 3;
        rgb[idx..idx + 3].copy_from_slice(&color);
    }
}

fn draw_segment(rgb: &mut [u8], w: usize, h: usize, a: PointPx, b: PointPx, color: [u8; 3]) {
    let steps = ((b.x - a.x).abs().max((b.y - a.y).abs()).ceil() as usize).max(1);
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let x = (a.x + t * (b.x - a.x)).round() as i64;
        let y = (a.y + t * (b.y - a.y)).round() as i64;
        put_pixel(rgb, w, h, x, y, color);
    }
}

fn draw_cross(rgb: &mut [u8], w: usize, h: usize, c: PointPx, arm: i64, color: [u8; 3]) {
    let (cx, cy) = (c.x.round() as i64, c.y.round() as i64);
    for d in -arm..=arm {
        put_pixel(rgb, w, h, cx + d, cy, color);
        put_pixel(rgb, w, h, cx, cy + d, color);
    }
}

fn draw_square(rgb: &mut [u8], w: usize, h: usize, c: PointPx, half: i64, color: [u8; 3]) {
    let (cx, cy) = (c.x.round() as i64, c.y.round() as i64);
    for dy in -half..=half {
        for dx in -half..=half {
            put_pixel(rgb, w, h, cx + dx, cy + dy, color);
        }
    }
}

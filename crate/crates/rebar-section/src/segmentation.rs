//! Two-stage segmentation cascade isolating the load-bearing cross
//! section: a rough pass flattens texture with an open-close
//! reconstruction filter and thresholds it, a fine pass cleans the rough
//! mask with an asymmetric close-open reconstruction filter and keeps the
//! main connected component.
//!
//! Loose fibres attached to the section survive the rough pass (grayscale
//! reconstruction re-grows anything connected to a surviving core), which
//! is exactly why the fine pass exists. Dark spots fully enclosed by the
//! section stay in the mask; only dark regions reaching the boundary are
//! cut away.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_io::CalibratedImage;
use crate::morphology::{
    close_open_reconstruction_asym, multi_otsu, open_close_reconstruction,
};
use crate::raster::{BinaryMask, GrayRaster};

/// Tuning knobs for both segmentation stages. Radii are in pixels and
/// sized for roughly 100 px per millimetre of bar; scale them with the
/// image resolution.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SegmentationConfig {
    pub rough_radius: u32,
    pub fine_close_radius: u32,
    pub fine_open_radius: u32,
    pub otsu_classes: usize,
    pub keep_largest_component: bool,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            rough_radius: 40,
            fine_close_radius: 10,
            fine_open_radius: 15,
            otsu_classes: 3,
            keep_largest_component: true,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rough_radius < 1 {
            return Err(Error::invalid("rough_radius must be at least 1"));
        }
        if self.fine_close_radius < 1 || self.fine_open_radius < self.fine_close_radius {
            return Err(Error::invalid(
                "fine radii must satisfy open >= close >= 1",
            ));
        }
        if !(2..=4).contains(&self.otsu_classes) {
            return Err(Error::invalid("otsu_classes must be 2, 3 or 4"));
        }
        Ok(())
    }
}

/// First pass: smooth the image with open-close reconstruction at
/// `rough_radius`, split the histogram into `otsu_classes` classes and
/// keep everything above the lowest (background) class. The result still
/// contains side fibres and anything else brighter than background.
pub fn rough_segment(
    image: &CalibratedImage,
    config: &SegmentationConfig,
) -> Result<BinaryMask> {
    config.validate()?;
    let smoothed = open_close_reconstruction(image.raster(), config.rough_radius)?;
    let thresholds = multi_otsu(&smoothed, config.otsu_classes, None)?;
    let cut = thresholds.levels()[0];
    let mask = BinaryMask::from_fn(smoothed.width(), smoothed.height(), |x, y| {
        smoothed.get(x, y) >= cut
    })?;
    if mask.is_empty() {
        return Err(Error::EmptyResult);
    }
    Ok(mask)
}

/// Second pass: treat the rough mask as a two-level image, run the
/// asymmetric close-open reconstruction filter (close with the smaller
/// radius, open with the larger), and optionally keep only the largest
/// 8-connected component. Structures thinner than the opening diameter
/// disappear; an empty survivor set is an error.
pub fn fine_segment(rough: &BinaryMask, config: &SegmentationConfig) -> Result<BinaryMask> {
    config.validate()?;
    if rough.is_empty() {
        return Err(Error::EmptyMask);
    }
    let gray = rough.to_gray();
    let filtered = close_open_reconstruction_asym(
        &gray,
        config.fine_close_radius,
        config.fine_open_radius,
    )?;
    let mask = BinaryMask::from_gray(&filtered);
    if mask.is_empty() {
        return Err(Error::EmptyResult);
    }
    if config.keep_largest_component {
        mask.largest_component()
    } else {
        Ok(mask)
    }
}

/// Zeroes every pixel outside the mask; pixels inside pass through.
pub fn apply_mask(image: &CalibratedImage, mask: &BinaryMask) -> Result<CalibratedImage> {
    let raster = image.raster();
    if raster.width() != mask.width() || raster.height() != mask.height() {
        return Err(Error::DimensionMismatch(
            "mask and image differ in size".into(),
        ));
    }
    let mut out = GrayRaster::new(raster.width(), raster.height())?;
    for y in 0..raster.height() {
        for x in 0..raster.width() {
            if mask.get(x, y) {
                out.set(x, y, raster.get(x, y));
            }
        }
    }
    CalibratedImage::new(out, image.scale_mm_per_px())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image_io::{
        generate_synthetic, FixtureIntensities, SyntheticShape, SyntheticSpec,
    };
    use crate::morphology::{morph_apply_mask, DiskKernel, MorphOp};

    fn small_config() -> SegmentationConfig {
        SegmentationConfig {
            rough_radius: 4,
            fine_close_radius: 2,
            fine_open_radius: 6,
            otsu_classes: 3,
            keep_largest_component: true,
        }
    }

    fn disc_image(w: usize, h: usize, r: f64, noise: u8) -> CalibratedImage {
        let spec = SyntheticSpec {
            shape: SyntheticShape::Disc { radius_px: r },
            intensities: FixtureIntensities::default(),
            noise_amplitude: noise,
            noise_seed: 7,
        };
        generate_synthetic(&spec, w, h, 0.01).unwrap().0
    }

    fn true_disc(w: usize, h: usize, r: f64) -> BinaryMask {
        let cx = (w as f64 - 1.0) / 2.0;
        let cy = (h as f64 - 1.0) / 2.0;
        BinaryMask::from_fn(w, h, |x, y| {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            dx * dx + dy * dy <= r * r
        })
        .unwrap()
    }

    fn add_satellite(image: &mut CalibratedImage, cx: f64, cy: f64, r: f64, value: u8) {
        let raster = image.raster_mut();
        for y in 0..raster.height() {
            for x in 0..raster.width() {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                if dx * dx + dy * dy <= r * r {
                    raster.set(x, y, value);
                }
            }
        }
    }

    fn jaccard(a: &BinaryMask, b: &BinaryMask) -> f64 {
        let mut inter = 0u64;
        let mut union = 0u64;
        for y in 0..a.height() {
            for x in 0..a.width() {
                let (pa, pb) = (a.get(x, y), b.get(x, y));
                if pa && pb {
                    inter += 1;
                }
                if pa || pb {
                    union += 1;
                }
            }
        }
        inter as f64 / union as f64
    }

    #[test]
    fn config_validation() {
        assert!(SegmentationConfig::default().validate().is_ok());
        let mut bad = SegmentationConfig::default();
        bad.rough_radius = 0;
        assert!(bad.validate().is_err());
        let mut bad = SegmentationConfig::default();
        bad.fine_open_radius = bad.fine_close_radius - 1;
        assert!(bad.validate().is_err());
        let mut bad = SegmentationConfig::default();
        bad.otsu_classes = 5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rough_mask_covers_the_disc() {
        let image = disc_image(160, 160, 55.0, 8);
        let mask = rough_segment(&image, &small_config()).unwrap();
        let truth = true_disc(160, 160, 55.0);
        let truth_area = truth.count() as f64;
        let got_area = mask.count() as f64;
        assert!(
            (got_area - truth_area).abs() / truth_area < 0.02,
            "area {got_area} vs {truth_area}"
        );
    }

    #[test]
    fn rough_segment_rejects_flat_images() {
        let raster = GrayRaster::from_pixels(32, 32, vec![20; 32 * 32]).unwrap();
        let image = CalibratedImage::new(raster, 0.01).unwrap();
        assert!(matches!(
            rough_segment(&image, &small_config()),
            Err(Error::DegenerateHistogram)
        ));
    }

    #[test]
    fn rough_keeps_satellites_fine_drops_them() {
        let mut image = disc_image(200, 200, 55.0, 0);
        // Bright blobs bigger than the rough radius but thinner than the
        // fine opening, well away from the disc.
        add_satellite(&mut image, 20.0, 20.0, 5.0, 200);
        add_satellite(&mut image, 180.0, 30.0, 5.0, 200);
        let config = small_config();

        let rough = rough_segment(&image, &config).unwrap();
        assert!(rough.get(20, 20), "rough keeps the first satellite");
        assert!(rough.get(180, 30), "rough keeps the second satellite");

        let fine = fine_segment(&rough, &config).unwrap();
        assert!(!fine.get(20, 20), "fine drops the first satellite");
        assert!(!fine.get(180, 30), "fine drops the second satellite");
        assert!(fine.get(100, 100), "fine keeps the disc");
        assert_eq!(fine.components().len(), 1);
    }

    #[test]
    fn fine_mask_tracks_a_clean_rough_mask() {
        let rough = true_disc(160, 160, 55.0);
        let fine = fine_segment(&rough, &small_config()).unwrap();
        let mut diff = 0usize;
        for y in 0..160 {
            for x in 0..160 {
                if fine.get(x, y) != rough.get(x, y) {
                    diff += 1;
                }
            }
        }
        assert!(
            (diff as f64) < 0.01 * rough.count() as f64,
            "fine differs from clean rough by {diff} px"
        );
    }

    #[test]
    fn fine_segment_annihilates_thin_structures() {
        // A 3 px line is thinner than the 13 px opening diameter.
        let line = BinaryMask::from_fn(80, 40, |x, y| (18..21).contains(&y) && x >= 5 && x < 75)
            .unwrap();
        assert!(matches!(
            fine_segment(&line, &small_config()),
            Err(Error::EmptyResult)
        ));
    }

    #[test]
    fn fine_stays_within_dilated_rough() {
        let mut image = disc_image(160, 160, 50.0, 10);
        add_satellite(&mut image, 20.0, 140.0, 6.0, 200);
        let config = small_config();
        let rough = rough_segment(&image, &config).unwrap();
        let fine = fine_segment(&rough, &config).unwrap();
        let envelope = morph_apply_mask(
            &rough,
            MorphOp::Dilate,
            &DiskKernel::new(config.fine_close_radius),
        );
        for (x, y) in fine.foreground() {
            assert!(envelope.get(x, y), "fine escaped the rough envelope at {x},{y}");
        }
    }

    #[test]
    fn segmentation_is_deterministic() {
        let image = disc_image(160, 160, 50.0, 10);
        let config = small_config();
        let a = fine_segment(&rough_segment(&image, &config).unwrap(), &config).unwrap();
        let b = fine_segment(&rough_segment(&image, &config).unwrap(), &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fine_mask_matches_ground_truth_disc() {
        let image = disc_image(160, 160, 55.0, 10);
        let config = small_config();
        let fine = fine_segment(&rough_segment(&image, &config).unwrap(), &config).unwrap();
        let truth = true_disc(160, 160, 55.0);
        let j = jaccard(&fine, &truth);
        assert!(j >= 0.98, "Jaccard {j}");
    }

    #[test]
    fn apply_mask_zeroes_outside() {
        let raster = GrayRaster::from_pixels(4, 1, vec![100, 100, 100, 100]).unwrap();
        let image = CalibratedImage::new(raster, 1.0).unwrap();

        let full = BinaryMask::from_fn(4, 1, |_, _| true).unwrap();
        let out = apply_mask(&image, &full).unwrap();
        assert_eq!(out.raster().pixels(), image.raster().pixels());

        let empty = BinaryMask::new(4, 1).unwrap();
        let out = apply_mask(&image, &empty).unwrap();
        assert!(out.raster().pixels().iter().all(|&v| v == 0));

        let half = BinaryMask::from_fn(4, 1, |x, _| x < 2).unwrap();
        let out = apply_mask(&image, &half).unwrap();
        let kept = out.raster().pixels().iter().filter(|&&v| v == 100).count();
        assert_eq!(kept, 2);

        let wrong = BinaryMask::new(3, 1).unwrap();
        assert!(matches!(
            apply_mask(&image, &wrong),
            Err(Error::DimensionMismatch(_))
        ));
    }
}

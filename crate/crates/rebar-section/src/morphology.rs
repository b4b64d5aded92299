//! Mathematical morphology on grayscale rasters and binary masks, plus
//! multi-level Otsu thresholding.
//!
//! All operators use Euclidean disk kernels. Border policy differs by
//! raster kind and is chosen so that masks can never gain pixels outside
//! the frame:
//!
//! * grayscale operators replicate edge pixels (a clamped window), which
//!   keeps erosion/dilation an adjunction and openings/closings exactly
//!   idempotent;
//! * binary erosion treats everything outside the frame as background, so
//!   regions touching the border erode from the frame side too;
//! * binary dilation ignores out-of-frame contributions.
//!
//! Reconstruction filters iterate a unit-disk geodesic step to its fixpoint;
//! the implementation uses the raster-scan + queue form of that iteration,
//! which reaches the same fixpoint in two passes plus local propagation.

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, GrayRaster};

/// Euclidean disk structuring element of integer radius `r`: all offsets
/// with `dx^2 + dy^2 <= r^2`. Radius 0 is the identity kernel, radius 1 is
/// the centre plus its 4-neighbours.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct DiskKernel {
    radius: u32,
}

impl DiskKernel {
    pub fn new(radius: u32) -> Self {
        Self { radius }
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// Half-width of the disk chord at vertical offset `dy`, `|dy| <= r`.
    fn chord_half(&self, dy: i64) -> i64 {
        let r = self.radius as i64;
        debug_assert!(dy.abs() <= r);
        (((r * r - dy * dy) as f64).sqrt().floor()) as i64
    }

    /// All `(dx, dy)` offsets of the kernel.
    pub fn offsets(&self) -> Vec<(i64, i64)> {
        let r = self.radius as i64;
        let mut out = Vec::new();
        for dy in -r..=r {
            let h = self.chord_half(dy);
            for dx in -h..=h {
                out.push((dx, dy));
            }
        }
        out
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MorphOp {
    Erode,
    Dilate,
    /// Erosion followed by dilation.
    Open,
    /// Dilation followed by erosion.
    Close,
}

/// Applies a morphological operator to a grayscale raster.
pub fn morph_apply(image: &GrayRaster, op: MorphOp, kernel: &DiskKernel) -> GrayRaster {
    match op {
        MorphOp::Erode => gray_extreme(image, kernel, true),
        MorphOp::Dilate => gray_extreme(image, kernel, false),
        MorphOp::Open => {
            let eroded = gray_extreme(image, kernel, true);
            gray_extreme(&eroded, kernel, false)
        }
        MorphOp::Close => {
            let dilated = gray_extreme(image, kernel, false);
            gray_extreme(&dilated, kernel, true)
        }
    }
}

/// Applies a morphological operator to a binary mask.
pub fn morph_apply_mask(mask: &BinaryMask, op: MorphOp, kernel: &DiskKernel) -> BinaryMask {
    match op {
        MorphOp::Erode => mask_erode(mask, kernel),
        MorphOp::Dilate => mask_dilate(mask, kernel),
        MorphOp::Open => mask_dilate(&mask_erode(mask, kernel), kernel),
        MorphOp::Close => mask_erode(&mask_dilate(mask, kernel), kernel),
    }
}

/// Grayscale erosion (`minimum = true`) or dilation over a disk, replicating
/// edge pixels. The disk is decomposed into horizontal chords: one sliding
/// min/max pass per distinct chord width, then a vertical combine.
fn gray_extreme(image: &GrayRaster, kernel: &DiskKernel, minimum: bool) -> GrayRaster {
    if kernel.radius == 0 {
        return image.clone();
    }
    let (w, h) = (image.width(), image.height());
    let r = kernel.radius as i64;

    // Row-filtered planes keyed by chord half-width. chord_half is monotone
    // in |dy| so a plain lookup table indexed by half-width suffices.
    let max_half = kernel.chord_half(0) as usize;
    let mut planes: Vec<Option<Vec<u8>>> = vec![None; max_half + 1];
    for dy in 0..=r {
        let half = kernel.chord_half(dy) as usize;
        if planes[half].is_none() {
            planes[half] = Some(row_extreme(image, half, minimum));
        }
    }

    let mut out = vec![if minimum { 255u8 } else { 0u8 }; w * h];
    for dy in -r..=r {
        let half = kernel.chord_half(dy) as usize;
        let plane = planes[half].as_ref().unwrap();
        for y in 0..h {
            // Replicate border: out-of-range rows clamp to the edge row.
            let yy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
            let src = &plane[yy * w..(yy + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            if minimum {
                for x in 0..w {
                    dst[x] = dst[x].min(src[x]);
                }
            } else {
                for x in 0..w {
                    dst[x] = dst[x].max(src[x]);
                }
            }
        }
    }
    GrayRaster::from_pixels(w, h, out).expect("dimensions preserved")
}

/// Horizontal sliding min/max with window `[x - half, x + half]` clamped to
/// the row, via a monotonic deque of candidate indices.
fn row_extreme(image: &GrayRaster, half: usize, minimum: bool) -> Vec<u8> {
    let (w, h) = (image.width(), image.height());
    if half == 0 {
        return image.pixels().to_vec();
    }
    let mut out = vec![0u8; w * h];
    let mut deque: Vec<usize> = Vec::with_capacity(w);
    for y in 0..h {
        let row = image.row(y);
        deque.clear();
        let mut head = 0;
        let better = |a: u8, b: u8| if minimum { a <= b } else { a >= b };
        for x in 0..w + half {
            if x < w {
                while deque.len() > head && better(row[x], row[*deque.last().unwrap()]) {
                    deque.pop();
                }
                deque.push(x);
            }
            if x >= half {
                let center = x - half;
                while deque[head] + half < center {
                    head += 1;
                }
                out[y * w + center] = row[deque[head]];
            }
        }
    }
    out
}

/// Binary erosion: a pixel survives only if the whole disk around it stays
/// inside the frame and on foreground.
fn mask_erode(mask: &BinaryMask, kernel: &DiskKernel) -> BinaryMask {
    if kernel.radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width(), mask.height());
    let r = kernel.radius as i64;
    let prefix = row_prefix_sums(mask);
    let mut out = vec![false; w * h];
    for y in 0..h {
        if (y as i64) < r || y as i64 + r >= h as i64 {
            continue;
        }
        for x in 0..w {
            let mut inside = true;
            for dy in -r..=r {
                let half = kernel.chord_half(dy);
                let x0 = x as i64 - half;
                let x1 = x as i64 + half;
                if x0 < 0 || x1 >= w as i64 {
                    inside = false;
                    break;
                }
                let yy = (y as i64 + dy) as usize;
                let run = prefix[yy * (w + 1) + x1 as usize + 1] - prefix[yy * (w + 1) + x0 as usize];
                if run != (x1 - x0 + 1) as u32 {
                    inside = false;
                    break;
                }
            }
            out[y * w + x] = inside;
        }
    }
    BinaryMask::from_bits(w, h, out).expect("dimensions preserved")
}

/// Binary dilation: union of disks around foreground pixels, clipped to the
/// frame.
fn mask_dilate(mask: &BinaryMask, kernel: &DiskKernel) -> BinaryMask {
    if kernel.radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width(), mask.height());
    let r = kernel.radius as i64;
    let prefix = row_prefix_sums(mask);
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut hit = false;
            for dy in -r..=r {
                let yy = y as i64 + dy;
                if yy < 0 || yy >= h as i64 {
                    continue;
                }
                let half = kernel.chord_half(dy);
                let x0 = (x as i64 - half).max(0) as usize;
                let x1 = (x as i64 + half).min(w as i64 - 1) as usize;
                let yy = yy as usize;
                if prefix[yy * (w + 1) + x1 + 1] > prefix[yy * (w + 1) + x0] {
                    hit = true;
                    break;
                }
            }
            out[y * w + x] = hit;
        }
    }
    BinaryMask::from_bits(w, h, out).expect("dimensions preserved")
}

/// Per-row prefix sums of foreground counts, `w + 1` entries per row.
fn row_prefix_sums(mask: &BinaryMask) -> Vec<u32> {
    let (w, h) = (mask.width(), mask.height());
    let mut prefix = vec![0u32; (w + 1) * h];
    for y in 0..h {
        let base = y * (w + 1);
        for x in 0..w {
            prefix[base + x + 1] = prefix[base + x] + mask.get(x, y) as u32;
        }
    }
    prefix
}

/// Which side of the marker/bound order a reconstruction starts from.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Reconstruction {
    /// Marker grows upward under the bound image (`marker <= bound`).
    ByDilation,
    /// Marker shrinks downward onto the bound image (`marker >= bound`).
    ByErosion,
}

/// Morphological reconstruction of `marker` against `bound` with unit-disk
/// (4-connected) geodesic steps. Returns the fixpoint of the iterated
/// clipped step.
pub fn reconstruct(marker: &GrayRaster, bound: &GrayRaster, kind: Reconstruction) -> Result<GrayRaster> {
    if !marker.same_dims(bound) {
        return Err(Error::DimensionMismatch(
            "marker and bound images differ in size".into(),
        ));
    }
    match kind {
        Reconstruction::ByDilation => {
            if marker.pixels().iter().zip(bound.pixels()).any(|(m, b)| m > b) {
                return Err(Error::MarkerOutOfOrder("at or below"));
            }
            Ok(reconstruct_by_dilation(marker, bound))
        }
        Reconstruction::ByErosion => {
            if marker.pixels().iter().zip(bound.pixels()).any(|(m, b)| m < b) {
                return Err(Error::MarkerOutOfOrder("at or above"));
            }
            Ok(reconstruct_by_dilation(&marker.invert(), &bound.invert())
                .invert())
        }
    }
}

/// Raster-scan reconstruction by dilation: forward and backward sweeps with
/// the causal halves of the 4-neighbourhood, then queue-driven propagation
/// of the remaining fronts.
fn reconstruct_by_dilation(marker: &GrayRaster, bound: &GrayRaster) -> GrayRaster {
    let (w, h) = (marker.width(), marker.height());
    let mut j = marker.clone();
    let b = bound.pixels();

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut m = j.pixels()[i];
            if y > 0 {
                m = m.max(j.pixels()[i - w]);
            }
            if x > 0 {
                m = m.max(j.pixels()[i - 1]);
            }
            j.pixels_mut()[i] = m.min(b[i]);
        }
    }

    let mut queue = std::collections::VecDeque::new();
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let i = y * w + x;
            let mut m = j.pixels()[i];
            if y + 1 < h {
                m = m.max(j.pixels()[i + w]);
            }
            if x + 1 < w {
                m = m.max(j.pixels()[i + 1]);
            }
            let v = m.min(b[i]);
            j.pixels_mut()[i] = v;
            let needs_push = (y + 1 < h && j.pixels()[i + w] < v && j.pixels()[i + w] < b[i + w])
                || (x + 1 < w && j.pixels()[i + 1] < v && j.pixels()[i + 1] < b[i + 1]);
            if needs_push {
                queue.push_back(i);
            }
        }
    }

    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % w, i / w);
        let v = j.pixels()[i];
        let visit = |n: usize, j: &mut GrayRaster, queue: &mut std::collections::VecDeque<usize>| {
            let jn = j.pixels()[n];
            if jn < v && jn != b[n] {
                j.pixels_mut()[n] = v.min(b[n]);
                queue.push_back(n);
            }
        };
        if x > 0 {
            visit(i - 1, &mut j, &mut queue);
        }
        if x + 1 < w {
            visit(i + 1, &mut j, &mut queue);
        }
        if y > 0 {
            visit(i - w, &mut j, &mut queue);
        }
        if y + 1 < h {
            visit(i + w, &mut j, &mut queue);
        }
    }
    j
}

/// Opening-by-reconstruction followed by closing-by-reconstruction, both
/// with the same disk radius. Flattens texture while preserving the
/// contours of structures that survive the erosion/dilation seed.
pub fn open_close_reconstruction(image: &GrayRaster, radius: u32) -> Result<GrayRaster> {
    let kernel = DiskKernel::new(radius);
    let eroded = gray_extreme(image, &kernel, true);
    let opened = reconstruct(&eroded, image, Reconstruction::ByDilation)?;
    let dilated = gray_extreme(&opened, &kernel, false);
    reconstruct(&dilated, &opened, Reconstruction::ByErosion)
}

/// Closing-by-reconstruction with `close_radius` followed by
/// opening-by-reconstruction with the stronger `open_radius`.
/// Requires `open_radius >= close_radius >= 1`.
pub fn close_open_reconstruction_asym(
    image: &GrayRaster,
    close_radius: u32,
    open_radius: u32,
) -> Result<GrayRaster> {
    if close_radius < 1 || open_radius < close_radius {
        return Err(Error::invalid(
            "asymmetric filter needs open_radius >= close_radius >= 1",
        ));
    }
    let dilated = gray_extreme(image, &DiskKernel::new(close_radius), false);
    let closed = reconstruct(&dilated, image, Reconstruction::ByErosion)?;
    let eroded = gray_extreme(&closed, &DiskKernel::new(open_radius), true);
    reconstruct(&eroded, &closed, Reconstruction::ByDilation)
}

/// Ascending intensity cut values produced by [`multi_otsu`]. A pixel of
/// value `v` belongs to class `i` when `levels[i - 1] <= v < levels[i]`
/// (with implicit sentinels 0 and 256), so each level is the lowest
/// intensity of the class above it.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ThresholdSet {
    levels: Vec<u8>,
}

impl ThresholdSet {
    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    /// Class index of an intensity under this threshold set.
    pub fn class_of(&self, value: u8) -> usize {
        self.levels.iter().take_while(|&&t| value >= t).count()
    }
}

/// 256-bin histogram of `image`, restricted to `mask` foreground when given.
pub fn histogram(image: &GrayRaster, mask: Option<&BinaryMask>) -> Result<[u64; 256]> {
    if let Some(m) = mask {
        if m.width() != image.width() || m.height() != image.height() {
            return Err(Error::DimensionMismatch(
                "mask and image differ in size".into(),
            ));
        }
    }
    let mut hist = [0u64; 256];
    for (i, &v) in image.pixels().iter().enumerate() {
        let keep = mask.map_or(true, |m| m.bits()[i]);
        if keep {
            hist[v as usize] += 1;
        }
    }
    Ok(hist)
}

/// Multi-level Otsu thresholding: exhaustively maximises the between-class
/// variance over all combinations of `classes - 1` cut values in `[1, 254]`.
/// Ties resolve to the lexicographically smallest threshold set. `classes`
/// must be 2, 3 or 4 and the (masked) histogram must contain at least
/// `classes` distinct intensities.
pub fn multi_otsu(image: &GrayRaster, classes: usize, mask: Option<&BinaryMask>) -> Result<ThresholdSet> {
    if !(2..=4).contains(&classes) {
        return Err(Error::invalid("class count must be 2, 3 or 4"));
    }
    let hist = histogram(image, mask)?;
    otsu_from_histogram(&hist, classes)
}

/// [`multi_otsu`] on a precomputed histogram.
pub fn otsu_from_histogram(hist: &[u64; 256], classes: usize) -> Result<ThresholdSet> {
    if !(2..=4).contains(&classes) {
        return Err(Error::invalid("class count must be 2, 3 or 4"));
    }
    let distinct = hist.iter().filter(|&&c| c > 0).count();
    if distinct < classes {
        return Err(Error::DegenerateHistogram);
    }

    // Prefix sums let any class weight/mean come out in O(1):
    // count[a..b) = cnt[b] - cnt[a], intensity sum likewise.
    let mut cnt = [0u64; 257];
    let mut sum = [0u64; 257];
    for v in 0..256 {
        cnt[v + 1] = cnt[v] + hist[v];
        sum[v + 1] = sum[v] + hist[v] * v as u64;
    }
    let total = cnt[256] as f64;

    // Between-class variance equals sum(w_i * mu_i^2) - mu^2; the constant
    // term drops out of the argmax. Empty classes contribute nothing.
    let score = |cuts: &[usize]| -> f64 {
        let mut acc = 0.0;
        let mut lo = 0usize;
        for k in 0..=cuts.len() {
            let hi = if k < cuts.len() { cuts[k] } else { 256 };
            let w = (cnt[hi] - cnt[lo]) as f64;
            if w > 0.0 {
                let s = (sum[hi] - sum[lo]) as f64;
                acc += s * s / w;
            }
            lo = hi;
        }
        acc / total
    };

    let k = classes - 1;
    let mut cuts: Vec<usize> = (1..=k).collect();
    let mut best_cuts = cuts.clone();
    let mut best = f64::NEG_INFINITY;
    loop {
        let s = score(&cuts);
        // Strictly greater keeps the lexicographically smallest maximiser
        // because combinations are visited in ascending order.
        if s > best {
            best = s;
            best_cuts.copy_from_slice(&cuts);
        }
        // Next combination of k ascending values from [1, 254].
        let mut i = k;
        loop {
            if i == 0 {
                let levels = best_cuts.iter().map(|&c| c as u8).collect();
                return Ok(ThresholdSet { levels });
            }
            i -= 1;
            if cuts[i] < 254 - (k - 1 - i) {
                cuts[i] += 1;
                for j in i + 1..k {
                    cuts[j] = cuts[j - 1] + 1;
                }
                break;
            }
        }
    }
}

//! Row-major raster primitives shared by the whole pipeline.

use crate::error::{Error, Result};

/// 8-bit grayscale raster, row-major, `(0, 0)` at the top-left corner.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GrayRaster {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayRaster {
    /// All-zero raster. Both dimensions must be positive.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("raster dimensions must be positive"));
        }
        Ok(Self {
            width,
            height,
            pixels: vec![0; width * height],
        })
    }

    /// Wraps an existing row-major buffer of exactly `width * height` bytes.
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("raster dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "buffer holds {} bytes, raster needs {}",
                pixels.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    /// Photometric inversion `v -> 255 - v`.
    pub fn invert(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|v| 255 - v).collect(),
        }
    }

    pub fn same_dims(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Binary membership mask with the same layout as [`GrayRaster`].
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    /// All-background mask. Both dimensions must be positive.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("mask dimensions must be positive"));
        }
        Ok(Self {
            width,
            height,
            bits: vec![false; width * height],
        })
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("mask dimensions must be positive"));
        }
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "buffer holds {} bits, mask needs {}",
                bits.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    /// Builds a mask by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut mask = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                mask.bits[y * width + x] = f(x, y);
            }
        }
        Ok(mask)
    }

    /// Foreground pixels are intensities `>= 128`.
    pub fn from_gray(raster: &GrayRaster) -> Self {
        Self {
            width: raster.width(),
            height: raster.height(),
            bits: raster.pixels().iter().map(|&v| v >= 128).collect(),
        }
    }

    /// 0/255 grayscale rendering of the mask.
    pub fn to_gray(&self) -> GrayRaster {
        GrayRaster {
            width: self.width,
            height: self.height,
            pixels: self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    /// `true` for in-range foreground, `false` anywhere else including
    /// outside the frame.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return false;
        }
        self.bits[y as usize * self.width + x as usize]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Whether any foreground pixel lies on the outermost pixel ring.
    pub fn touches_border(&self) -> bool {
        let (w, h) = (self.width, self.height);
        (0..w).any(|x| self.get(x, 0) || self.get(x, h - 1))
            || (0..h).any(|y| self.get(0, y) || self.get(w - 1, y))
    }

    /// Iterates foreground pixel coordinates in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    /// Tight bounding box of the foreground as `(x0, y0, x1, y1)` inclusive,
    /// or `None` for an empty mask.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bbox: Option<(usize, usize, usize, usize)> = None;
        for (x, y) in self.foreground() {
            bbox = Some(match bbox {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
        bbox
    }

    pub fn same_dims(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Retains only the largest 8-connected foreground component.
    /// Ties go to the component whose first pixel comes earliest in
    /// row-major order. Errors if the mask is empty.
    pub fn largest_component(&self) -> Result<BinaryMask> {
        let components = self.components();
        // Later components must be strictly larger to win, so size ties
        // resolve to the component whose first pixel comes earliest.
        let mut best: Option<&Vec<usize>> = None;
        for c in &components {
            if best.map_or(true, |b| c.len() > b.len()) {
                best = Some(c);
            }
        }
        let best = best.ok_or(Error::EmptyMask)?;
        let mut out = BinaryMask::new(self.width, self.height)?;
        for &i in best {
            out.bits[i] = true;
        }
        Ok(out)
    }

    /// 8-connected foreground components as lists of linear pixel indices,
    /// ordered by their first (row-major) pixel.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let (w, h) = (self.width as i64, self.height as i64);
        let mut seen = vec![false; self.bits.len()];
        let mut components = Vec::new();
        let mut stack = Vec::new();
        for start in 0..self.bits.len() {
            if !self.bits[start] || seen[start] {
                continue;
            }
            let mut pixels = Vec::new();
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                pixels.push(i);
                let (x, y) = ((i % self.width) as i64, (i / self.width) as i64);
                for dy in -1..=1i64 {
                    for dx in -1..=1i64 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w || ny >= h {
                            continue;
                        }
                        let j = ny as usize * self.width + nx as usize;
                        if self.bits[j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
            components.push(pixels);
        }
        components
    }
}

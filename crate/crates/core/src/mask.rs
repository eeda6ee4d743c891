//! Binary masks and the pixel-to-normalized geometry used by the tracker.
//!
//! Coordinates follow the image convention: `x` runs along the width
//! (columns) and `y` along the height (rows). Normalized coordinates sample
//! pixel centers, so pixel `(col, row)` sits at `((col + 0.5) / W, (row + 0.5) / H)`.
//! With this convention a full-frame mask has its centroid at exactly `(0.5, 0.5)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawFrameSize", into = "RawFrameSize")]
pub struct FrameSize {
    width: usize,
    height: usize,
}

#[derive(Serialize, Deserialize)]
struct RawFrameSize {
    width: usize,
    height: usize,
}

impl TryFrom<RawFrameSize> for FrameSize {
    type Error = Error;

    fn try_from(raw: RawFrameSize) -> Result<Self> {
        FrameSize::new(raw.width, raw.height)
    }
}

impl From<FrameSize> for RawFrameSize {
    fn from(size: FrameSize) -> Self {
        RawFrameSize {
            width: size.width,
            height: size.height,
        }
    }
}

impl FrameSize {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::invalid("width", "must be at least 1 pixel"));
        }
        if height == 0 {
            return Err(Error::invalid("height", "must be at least 1 pixel"));
        }
        Ok(FrameSize { width, height })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    /// Normalized x coordinate of the center of column `col`.
    #[inline]
    pub fn col_center(&self, col: usize) -> f64 {
        (col as f64 + 0.5) / self.width as f64
    }

    /// Normalized y coordinate of the center of row `row`.
    #[inline]
    pub fn row_center(&self, row: usize) -> f64 {
        (row as f64 + 0.5) / self.height as f64
    }

    /// Length of one pixel in normalized units along the longer axis.
    pub fn pixel_tolerance(&self) -> f64 {
        1.0 / self.width.max(self.height) as f64
    }
}

impl fmt::Display for FrameSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// Location as a fraction of the frame, `x` along width and `y` along height.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedPoint {
    pub x: f64,
    pub y: f64,
}

impl NormalizedPoint {
    pub fn new(x: f64, y: f64) -> Self {
        NormalizedPoint { x, y }
    }

    pub fn clamped(self) -> Self {
        NormalizedPoint {
            x: self.x.clamp(0.0, 1.0),
            y: self.y.clamp(0.0, 1.0),
        }
    }

    pub fn distance(&self, other: &NormalizedPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Bounding-box size as a fraction of the frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedExtent {
    pub w: f64,
    pub h: f64,
}

impl NormalizedExtent {
    pub fn new(w: f64, h: f64) -> Self {
        NormalizedExtent { w, h }
    }
}

/// A single object's presence raster. Stored row-major.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMask {
    size: FrameSize,
    bits: Vec<bool>,
}

impl fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinaryMask {} area={}", self.size, self.area())?;
        for row in 0..self.size.height {
            for col in 0..self.size.width {
                f.write_str(if self.get(col, row) { "#" } else { "." })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl BinaryMask {
    pub fn empty(size: FrameSize) -> Self {
        BinaryMask {
            size,
            bits: vec![false; size.pixels()],
        }
    }

    pub fn full(size: FrameSize) -> Self {
        BinaryMask {
            size,
            bits: vec![true; size.pixels()],
        }
    }

    pub fn from_fn(size: FrameSize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(size.pixels());
        for row in 0..size.height {
            for col in 0..size.width {
                bits.push(f(col, row));
            }
        }
        BinaryMask { size, bits }
    }

    /// Builds a mask from `(col, row)` pixel coordinates.
    pub fn from_pixels(size: FrameSize, pixels: &[(usize, usize)]) -> Result<Self> {
        let mut mask = BinaryMask::empty(size);
        for &(col, row) in pixels {
            if col >= size.width || row >= size.height {
                return Err(Error::mismatch(
                    "mask pixel",
                    format!("inside {size}"),
                    format!("({col}, {row})"),
                ));
            }
            mask.set(col, row, true);
        }
        Ok(mask)
    }

    /// Row-major bits; length must equal `size.pixels()`.
    pub fn from_bits(size: FrameSize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != size.pixels() {
            return Err(Error::mismatch("mask bits", size.pixels(), bits.len()));
        }
        Ok(BinaryMask { size, bits })
    }

    #[inline]
    pub fn size(&self) -> FrameSize {
        self.size
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> bool {
        self.bits[row * self.size.width + col]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, value: bool) {
        self.bits[row * self.size.width + col] = value;
    }

    /// Iterates over `(col, row)` of set pixels in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let width = self.size.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(idx, _)| (idx % width, idx / width))
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Mean of the pixel centers of set pixels, normalized by `(W, H)`.
    /// Returns `None` for an all-zero mask.
    pub fn centroid(&self) -> Option<NormalizedPoint> {
        let (mut sum_col, mut sum_row, mut count) = (0u64, 0u64, 0u64);
        for (col, row) in self.iter_set() {
            sum_col += col as u64;
            sum_row += row as u64;
            count += 1;
        }
        if count == 0 {
            return None;
        }
        let n = count as f64;
        Some(NormalizedPoint {
            x: (sum_col as f64 / n + 0.5) / self.size.width as f64,
            y: (sum_row as f64 / n + 0.5) / self.size.height as f64,
        })
    }

    /// Inclusive pixel bounding box `(min_col, min_row, max_col, max_row)`.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bbox: Option<(usize, usize, usize, usize)> = None;
        for (col, row) in self.iter_set() {
            bbox = Some(match bbox {
                None => (col, row, col, row),
                Some((c0, r0, c1, r1)) => (c0.min(col), r0.min(row), c1.max(col), r1.max(row)),
            });
        }
        bbox
    }

    /// Tight bounding-box size (`max - min + 1` per axis) normalized by `(W, H)`.
    pub fn extent(&self) -> Option<NormalizedExtent> {
        self.bounding_box().map(|(c0, r0, c1, r1)| NormalizedExtent {
            w: (c1 - c0 + 1) as f64 / self.size.width as f64,
            h: (r1 - r0 + 1) as f64 / self.size.height as f64,
        })
    }

    fn check_same_size(&self, other: &BinaryMask) -> Result<()> {
        if self.size != other.size {
            return Err(Error::mismatch("mask size", self.size, other.size));
        }
        Ok(())
    }

    pub fn intersection_area(&self, other: &BinaryMask) -> Result<usize> {
        self.check_same_size(other)?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a && b)
            .count())
    }

    pub fn union_area(&self, other: &BinaryMask) -> Result<usize> {
        self.check_same_size(other)?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a || b)
            .count())
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.check_same_size(other)?;
        Ok(BinaryMask {
            size: self.size,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a || b).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn size(w: usize, h: usize) -> FrameSize {
        FrameSize::new(w, h).unwrap()
    }

    #[test]
    fn frame_size_rejects_zero() {
        assert!(FrameSize::new(0, 3).is_err());
        assert!(FrameSize::new(3, 0).is_err());
        let err = serde_json::from_str::<FrameSize>(r#"{"width":0,"height":2}"#).unwrap_err();
        assert!(err.to_string().contains("width"));
    }

    #[test]
    fn centroid_examples() {
        let full = BinaryMask::full(size(2, 2));
        assert_eq!(full.centroid(), Some(NormalizedPoint::new(0.5, 0.5)));

        let single = BinaryMask::from_pixels(size(4, 4), &[(2, 1)]).unwrap();
        assert_eq!(single.centroid(), Some(NormalizedPoint::new(0.625, 0.375)));

        let pair = BinaryMask::from_pixels(size(8, 8), &[(1, 4), (3, 4)]).unwrap();
        assert_eq!(pair.centroid(), Some(NormalizedPoint::new(0.3125, 0.5625)));

        assert_eq!(BinaryMask::empty(size(5, 3)).centroid(), None);
    }

    #[test]
    fn extent_examples() {
        let single = BinaryMask::from_pixels(size(4, 4), &[(3, 0)]).unwrap();
        assert_eq!(single.extent(), Some(NormalizedExtent::new(0.25, 0.25)));

        let full = BinaryMask::full(size(10, 10));
        assert_eq!(full.extent(), Some(NormalizedExtent::new(1.0, 1.0)));

        let pair = BinaryMask::from_pixels(size(8, 8), &[(1, 2), (5, 2)]).unwrap();
        assert_eq!(pair.extent(), Some(NormalizedExtent::new(0.625, 0.125)));

        assert_eq!(BinaryMask::empty(size(4, 4)).extent(), None);
    }

    #[test]
    fn area_examples() {
        assert_eq!(BinaryMask::empty(size(3, 3)).area(), 0);
        assert_eq!(BinaryMask::full(size(3, 3)).area(), 9);
        let checker = BinaryMask::from_fn(size(4, 4), |c, r| (c + r) % 2 == 0);
        assert_eq!(checker.area(), 8);
    }

    #[test]
    fn out_of_frame_pixel_rejected() {
        assert!(BinaryMask::from_pixels(size(4, 4), &[(4, 0)]).is_err());
        assert!(BinaryMask::from_bits(size(2, 2), vec![true; 3]).is_err());
    }

    #[test]
    fn size_mismatch_in_pairwise_ops() {
        let a = BinaryMask::full(size(2, 2));
        let b = BinaryMask::full(size(2, 3));
        assert!(a.intersection_area(&b).is_err());
        assert!(a.union(&b).is_err());
    }
}

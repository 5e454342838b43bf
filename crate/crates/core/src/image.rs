//! Pixel grids and window arithmetic.
//!
//! A [`Micrograph`] is a row-major grid of finite `f64` intensities. Window
//! sums over square sub-regions come from an [`IntegralImage`] in four table
//! lookups; [`Micrograph::direct_window_sum`] gives the same quantity by plain
//! summation in a fixed row-major order.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{domain, Error, Result};

/// Observed intensities, row-major, `width * height` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Micrograph {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Micrograph {
    /// Wraps a row-major pixel buffer, rejecting empty grids, length
    /// mismatches and non-finite values.
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(domain(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(domain(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(domain(format!(
                "pixel ({}, {}) is not finite",
                i / width,
                i % width
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image from nested rows. All rows must share one length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let mut pixels = Vec::with_capacity(width * height);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != width {
                return Err(domain(format!(
                    "row {i} has {} values, expected {width}",
                    row.len()
                )));
            }
            pixels.extend_from_slice(row);
        }
        Self::new(width, height, pixels)
    }

    /// A `width x height` image filled with `value`.
    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, alloc::vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.pixels[row * self.width..(row + 1) * self.width]
    }

    pub fn max(&self) -> f64 {
        self.pixels
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sum(&self) -> f64 {
        self.pixels.iter().sum()
    }

    /// Returns a new image with `f` applied to every pixel.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.pixels.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Checks that a `side x side` window at `(row, col)` lies inside the image.
    pub fn check_window(&self, row: usize, col: usize, side: usize) -> Result<()> {
        check_window(self.width, self.height, row, col, side)
    }

    /// Sum of a window by direct accumulation, rows top to bottom, columns
    /// left to right. Two windows holding identical values produce bitwise
    /// identical sums.
    pub fn direct_window_sum(&self, row: usize, col: usize, side: usize) -> Result<f64> {
        self.check_window(row, col, side)?;
        Ok(self.direct_window_sum_unchecked(row, col, side))
    }

    pub(crate) fn direct_window_sum_unchecked(&self, row: usize, col: usize, side: usize) -> f64 {
        let mut sum = 0.0;
        for r in row..row + side {
            for &v in &self.row(r)[col..col + side] {
                sum += v;
            }
        }
        sum
    }
}

pub(crate) fn check_window(
    width: usize,
    height: usize,
    row: usize,
    col: usize,
    side: usize,
) -> Result<()> {
    if side == 0 {
        return Err(domain("window side must be at least 1"));
    }
    if row.checked_add(side).is_none_or(|end| end > height)
        || col.checked_add(side).is_none_or(|end| end > width)
    {
        return Err(domain(format!(
            "window ({row}, {col}) of side {side} does not fit in {width}x{height}"
        )));
    }
    Ok(())
}

/// Summed-area table with a zero guard row and column.
///
/// `at(r, c)` is the sum of all pixels in rows `0..r` and columns `0..c`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    table: Vec<f64>,
}

impl IntegralImage {
    /// Builds the table in a single pass over the pixels.
    pub fn new(img: &Micrograph) -> Self {
        let (w, h) = img.dims();
        let stride = w + 1;
        let mut table = alloc::vec![0.0; stride * (h + 1)];
        for r in 0..h {
            let mut row_sum = 0.0;
            let src = img.row(r);
            for c in 0..w {
                row_sum += src[c];
                table[(r + 1) * stride + c + 1] = table[r * stride + c + 1] + row_sum;
            }
        }
        Self {
            width: w,
            height: h,
            table,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Cumulative sum over `[0, row) x [0, col)`.
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.table[row * (self.width + 1) + col]
    }

    /// Sum of the `side x side` window whose top-left corner is `(row, col)`.
    pub fn window_sum(&self, row: usize, col: usize, side: usize) -> Result<f64> {
        check_window(self.width, self.height, row, col, side)?;
        Ok(self.window_sum_unchecked(row, col, side))
    }

    #[inline]
    pub(crate) fn window_sum_unchecked(&self, row: usize, col: usize, side: usize) -> f64 {
        self.at(row + side, col + side) - self.at(row, col + side) - self.at(row + side, col)
            + self.at(row, col)
    }

    /// Window sum together with its mean.
    pub fn window_stats(&self, row: usize, col: usize, side: usize) -> Result<WindowStats> {
        let sum = self.window_sum(row, col, side)?;
        Ok(WindowStats::new(row, col, side, sum))
    }

    pub fn total(&self) -> f64 {
        self.at(self.height, self.width)
    }
}

/// Location, size and sum of one square window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub row: usize,
    pub col: usize,
    pub side: usize,
    pub sum: f64,
    pub mean: f64,
}

impl WindowStats {
    pub fn new(row: usize, col: usize, side: usize, sum: f64) -> Self {
        Self {
            row,
            col,
            side,
            sum,
            mean: sum / (side * side) as f64,
        }
    }
}

/// Halves both dimensions by averaging disjoint 2x2 blocks. A trailing odd
/// row or column is dropped.
pub fn downsample2x(img: &Micrograph) -> Result<Micrograph> {
    let (w, h) = img.dims();
    if w < 2 || h < 2 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            side: 2,
        });
    }
    let (ow, oh) = (w / 2, h / 2);
    let mut out = Vec::with_capacity(ow * oh);
    for r in 0..oh {
        let top = img.row(2 * r);
        let bottom = img.row(2 * r + 1);
        for c in 0..ow {
            let s = top[2 * c] + top[2 * c + 1] + bottom[2 * c] + bottom[2 * c + 1];
            out.push(s / 4.0);
        }
    }
    Micrograph::new(ow, oh, out)
}

/// Divides every pixel by the image maximum so the brightest pixel is 1.
pub fn normalize_max1(img: &Micrograph) -> Result<Micrograph> {
    let max = img.max();
    if max <= 0.0 {
        return Err(domain(format!(
            "cannot normalize an image whose maximum is {max}"
        )));
    }
    img.map(|v| v / max)
}

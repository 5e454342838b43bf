//! Spatial scan estimators for the background and particle intensities.
//!
//! The background level is estimated by the mean of the square window with
//! the smallest sum, the particle level by the mean of the window with the
//! largest sum. Every stride-1 position is considered.
//!
//! Window sums come from an integral image, whose rounding depends on the
//! window position. Windows whose table sum lies within a rigorous rounding
//! bound of the extreme are re-summed directly in row-major order, and the
//! final choice is made on those direct sums with ties going to the smallest
//! `(row, col)`. Identical windows therefore tie exactly, and the result
//! agrees with a brute-force scan over direct sums.

use alloc::format;

use crate::error::{domain, Result};
use crate::image::{IntegralImage, Micrograph, WindowStats};

/// Result of running both scan estimators on one image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityEstimates {
    /// Estimated background intensity, the mean of `k_hat_low`.
    pub a_hat: f64,
    /// Estimated particle intensity, the mean of `k_hat_high`.
    pub b_hat: f64,
    pub phi0: usize,
    pub phi1: usize,
    /// Minimum-sum window of side `phi0`.
    pub k_hat_low: WindowStats,
    /// Maximum-sum window of side `phi1`.
    pub k_hat_high: WindowStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Extreme {
    Min,
    Max,
}

/// An image paired with its integral table, for repeated scans.
#[derive(Debug, Clone)]
pub struct Scanner<'a> {
    img: &'a Micrograph,
    integral: IntegralImage,
    abs_total: f64,
}

impl<'a> Scanner<'a> {
    pub fn new(img: &'a Micrograph) -> Self {
        Self {
            img,
            integral: IntegralImage::new(img),
            abs_total: img.pixels().iter().map(|v| v.abs()).sum(),
        }
    }

    pub fn image(&self) -> &Micrograph {
        self.img
    }

    pub fn integral(&self) -> &IntegralImage {
        &self.integral
    }

    /// Minimum-sum window of the given side.
    pub fn min_window(&self, side: usize) -> Result<WindowStats> {
        self.scan(side, Extreme::Min)
    }

    /// Maximum-sum window of the given side.
    pub fn max_window(&self, side: usize) -> Result<WindowStats> {
        self.scan(side, Extreme::Max)
    }

    pub fn estimates(&self, phi0: usize, phi1: usize) -> Result<IntensityEstimates> {
        let low = self.min_window(phi0)?;
        let high = self.max_window(phi1)?;
        Ok(IntensityEstimates {
            a_hat: low.mean,
            b_hat: high.mean,
            phi0,
            phi1,
            k_hat_low: low,
            k_hat_high: high,
        })
    }

    fn scan(&self, side: usize, extreme: Extreme) -> Result<WindowStats> {
        let (w, h) = self.img.dims();
        if side == 0 || side > w.min(h) {
            return Err(domain(format!(
                "window side {side} must be in 1..={} for a {w}x{h} image",
                w.min(h)
            )));
        }
        let rows = h - side + 1;
        let cols = w - side + 1;
        let better = |a: f64, b: f64| match extreme {
            Extreme::Min => a < b,
            Extreme::Max => a > b,
        };

        let mut best = self.integral.window_sum_unchecked(0, 0, side);
        for r in 0..rows {
            for c in 0..cols {
                let s = self.integral.window_sum_unchecked(r, c, side);
                if better(s, best) {
                    best = s;
                }
            }
        }

        // Table entries carry at most (h + w) accumulated roundings of partial
        // sums bounded by the absolute total; a direct window sum carries at
        // most side^2. Twice their combined bound covers both routes.
        let eps = f64::EPSILON;
        let tol = 2.0 * eps * self.abs_total * (4.0 * (w + h) as f64 + 3.0 + (side * side) as f64);

        let mut chosen: Option<(usize, usize, f64)> = None;
        for r in 0..rows {
            for c in 0..cols {
                let s = self.integral.window_sum_unchecked(r, c, side);
                let near = match extreme {
                    Extreme::Min => s <= best + tol,
                    Extreme::Max => s >= best - tol,
                };
                if !near {
                    continue;
                }
                let exact = self.img.direct_window_sum_unchecked(r, c, side);
                if chosen.is_none_or(|(_, _, cur)| better(exact, cur)) {
                    chosen = Some((r, c, exact));
                }
            }
        }
        let (row, col, sum) =
            chosen.expect("at least one window is within tolerance of the extreme");
        Ok(WindowStats::new(row, col, side, sum))
    }
}

/// Minimum-sum `side x side` window, ties to the smallest `(row, col)`.
pub fn scan_min_window(img: &Micrograph, side: usize) -> Result<WindowStats> {
    Scanner::new(img).min_window(side)
}

/// Maximum-sum `side x side` window, ties to the smallest `(row, col)`.
pub fn scan_max_window(img: &Micrograph, side: usize) -> Result<WindowStats> {
    Scanner::new(img).max_window(side)
}

/// Scan estimate of the background intensity with window side `phi0`.
pub fn estimate_lower(img: &Micrograph, phi0: usize) -> Result<f64> {
    Ok(scan_min_window(img, phi0)?.mean)
}

/// Scan estimate of the particle intensity with window side `phi1`.
pub fn estimate_upper(img: &Micrograph, phi1: usize) -> Result<f64> {
    Ok(scan_max_window(img, phi1)?.mean)
}

/// Both scan estimates from a single integral image.
pub fn estimate_intensities(
    img: &Micrograph,
    phi0: usize,
    phi1: usize,
) -> Result<IntensityEstimates> {
    Scanner::new(img).estimates(phi0, phi1)
}

/// Mean over the whole image. Biased toward the particle level whenever
/// particles cover a non-vanishing share of the image.
pub fn naive_mean(img: &Micrograph) -> f64 {
    img.sum() / img.pixels().len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn constant_image_ties_to_origin() {
        for c in [0.1, 0.3, -2.7, 1e6 / 3.0] {
            let img = Micrograph::constant(11, 9, c).unwrap();
            let lo = scan_min_window(&img, 3).unwrap();
            let hi = scan_max_window(&img, 3).unwrap();
            assert_eq!((lo.row, lo.col), (0, 0));
            assert_eq!((hi.row, hi.col), (0, 0));
            assert!((lo.mean - c).abs() <= 1e-12 * c.abs().max(1.0));
        }
    }

    #[test]
    fn single_dark_pixel() {
        let mut px = vec![1.0; 16];
        px[15] = 0.0;
        let img = Micrograph::new(4, 4, px).unwrap();
        let lo = scan_min_window(&img, 1).unwrap();
        assert_eq!((lo.row, lo.col, lo.mean), (3, 3, 0.0));
    }

    #[test]
    fn bright_block_is_found() {
        let mut px = vec![0.0; 100];
        for r in 4..7 {
            for c in 2..5 {
                px[r * 10 + c] = 1.0;
            }
        }
        let img = Micrograph::new(10, 10, px).unwrap();
        let hi = scan_max_window(&img, 3).unwrap();
        assert_eq!((hi.row, hi.col, hi.mean), (4, 2, 1.0));
    }

    #[test]
    fn side_out_of_range() {
        let img = Micrograph::constant(5, 4, 1.0).unwrap();
        assert!(scan_min_window(&img, 0).is_err());
        assert!(scan_min_window(&img, 5).is_err());
        assert!(scan_max_window(&img, 4).is_ok());
    }

    #[test]
    fn naive_mean_cases() {
        let img = Micrograph::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(naive_mean(&img), 2.5);

        // Half the pixels are particle at b = 1 over a = 0.
        let px: Vec<f64> = (0..64).map(|i| if i < 32 { 1.0 } else { 0.0 }).collect();
        let img = Micrograph::new(8, 8, px).unwrap();
        assert_eq!(naive_mean(&img), 0.5);
    }

    #[test]
    fn noiseless_two_level_scene_is_exact() {
        let (a, b) = (0.25, 0.75);
        let mut px = vec![a; 40 * 40];
        for r in 20..32 {
            for c in 5..30 {
                px[r * 40 + c] = b;
            }
        }
        let img = Micrograph::new(40, 40, px).unwrap();
        let est = estimate_intensities(&img, 16, 8).unwrap();
        assert_eq!(est.a_hat, a);
        assert_eq!(est.b_hat, b);
        assert_eq!(est.a_hat, est.k_hat_low.mean);
        assert_eq!(est.b_hat, est.k_hat_high.mean);
        assert_eq!((est.k_hat_high.row, est.k_hat_high.col), (20, 5));
    }
}

//! Thresholding and black-cluster extraction on the triangular lattice.
//!
//! Pixels are embedded in the triangular lattice by shearing the square grid:
//! each pixel `(r, c)` touches its four axis neighbours plus the anti-diagonal
//! pair `(r - 1, c + 1)` and `(r + 1, c - 1)`. The main diagonal is not an
//! edge. Site percolation on this graph has critical probability exactly 1/2.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Deref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Result};
use crate::image::Micrograph;

/// Thresholded picture, `true` meaning black.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(domain(format!(
                "expected {} bits for {width}x{height}, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn blank(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: alloc::vec![false; width * height],
        }
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

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, black: bool) {
        self.bits[row * self.width + col] = black;
    }

    pub fn black_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Image holding only the pixels of the given clusters.
    pub fn from_clusters(width: usize, height: usize, clusters: &[Cluster]) -> Self {
        let mut img = Self::blank(width, height);
        for cl in clusters {
            for &(r, c) in &cl.pixels {
                img.set(r, c, true);
            }
        }
        img
    }
}

/// Maps every pixel to black when it is at or above `theta`.
pub fn binarize(img: &Micrograph, theta: f64) -> BinaryImage {
    BinaryImage {
        width: img.width(),
        height: img.height(),
        bits: img.pixels().iter().map(|&v| v >= theta).collect(),
    }
}

/// Up to six in-bounds lattice neighbours of a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbors {
    items: [(usize, usize); 6],
    len: usize,
}

impl Deref for Neighbors {
    type Target = [(usize, usize)];

    fn deref(&self) -> &Self::Target {
        &self.items[..self.len]
    }
}

#[inline]
fn neighbors_unchecked(row: usize, col: usize, width: usize, height: usize) -> Neighbors {
    let mut n = Neighbors {
        items: [(0, 0); 6],
        len: 0,
    };
    let mut push = |r: usize, c: usize| {
        n.items[n.len] = (r, c);
        n.len += 1;
    };
    let up = row > 0;
    let down = row + 1 < height;
    let left = col > 0;
    let right = col + 1 < width;
    if up {
        push(row - 1, col);
    }
    if down {
        push(row + 1, col);
    }
    if left {
        push(row, col - 1);
    }
    if right {
        push(row, col + 1);
    }
    if up && right {
        push(row - 1, col + 1);
    }
    if down && left {
        push(row + 1, col - 1);
    }
    n
}

/// Triangular-lattice neighbours of `(row, col)` inside a `width x height` grid,
/// in the order up, down, left, right, up-right, down-left.
pub fn tri_neighbors(row: usize, col: usize, width: usize, height: usize) -> Result<Neighbors> {
    if row >= height || col >= width {
        return Err(domain(format!(
            "pixel ({row}, {col}) is outside {width}x{height}"
        )));
    }
    Ok(neighbors_unchecked(row, col, width, height))
}

/// A maximal connected set of black pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub id: usize,
    pub pixel_count: usize,
    /// Member pixels in row-major order.
    pub pixels: Vec<(usize, usize)>,
    /// `(min_row, min_col, max_row, max_col)`, inclusive.
    pub bbox: (usize, usize, usize, usize),
}

/// All black clusters, numbered in the row-major order of their first pixel.
///
/// Depth-first search with an explicit stack, so arbitrarily large clusters
/// do not grow the call stack.
pub fn black_clusters(bin: &BinaryImage) -> Vec<Cluster> {
    let (w, h) = bin.dims();
    let mut visited = alloc::vec![false; w * h];
    let mut stack: Vec<usize> = Vec::new();
    let mut clusters = Vec::new();

    for seed in 0..w * h {
        if !bin.bits[seed] || visited[seed] {
            continue;
        }
        visited[seed] = true;
        stack.push(seed);
        let mut pixels = Vec::new();
        while let Some(idx) = stack.pop() {
            let (r, c) = (idx / w, idx % w);
            pixels.push((r, c));
            for &(nr, nc) in neighbors_unchecked(r, c, w, h).iter() {
                let ni = nr * w + nc;
                if bin.bits[ni] && !visited[ni] {
                    visited[ni] = true;
                    stack.push(ni);
                }
            }
        }
        pixels.sort_unstable();
        let mut bbox = (usize::MAX, usize::MAX, 0, 0);
        for &(r, c) in &pixels {
            bbox.0 = bbox.0.min(r);
            bbox.1 = bbox.1.min(c);
            bbox.2 = bbox.2.max(r);
            bbox.3 = bbox.3.max(c);
        }
        clusters.push(Cluster {
            id: clusters.len(),
            pixel_count: pixels.len(),
            pixels,
            bbox,
        });
    }
    clusters
}

/// Size of the largest black cluster, without materializing pixel lists.
pub fn largest_cluster_size(bin: &BinaryImage) -> usize {
    let (w, h) = bin.dims();
    let mut visited = alloc::vec![false; w * h];
    let mut stack: Vec<usize> = Vec::new();
    let mut largest = 0;
    for seed in 0..w * h {
        if !bin.bits[seed] || visited[seed] {
            continue;
        }
        visited[seed] = true;
        stack.push(seed);
        let mut size = 0;
        while let Some(idx) = stack.pop() {
            size += 1;
            for &(nr, nc) in neighbors_unchecked(idx / w, idx % w, w, h).iter() {
                let ni = nr * w + nc;
                if bin.bits[ni] && !visited[ni] {
                    visited[ni] = true;
                    stack.push(ni);
                }
            }
        }
        largest = largest.max(size);
    }
    largest
}

/// Keeps clusters with at least `min_pixels` pixels, preserving order.
pub fn filter_clusters(clusters: Vec<Cluster>, min_pixels: usize) -> Result<Vec<Cluster>> {
    if min_pixels == 0 {
        return Err(domain("min_pixels must be at least 1"));
    }
    Ok(clusters
        .into_iter()
        .filter(|c| c.pixel_count >= min_pixels)
        .collect())
}

/// I.i.d. site field: every pixel black with probability `p`.
pub fn bernoulli_field(width: usize, height: usize, p: f64, seed: u64) -> Result<BinaryImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    bernoulli_field_with(width, height, p, &mut rng)
}

/// [`bernoulli_field`] drawing from a caller-supplied generator.
pub fn bernoulli_field_with<R: Rng + ?Sized>(
    width: usize,
    height: usize,
    p: f64,
    rng: &mut R,
) -> Result<BinaryImage> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("probability {p} is outside [0, 1]")));
    }
    let bits = (0..width * height).map(|_| rng.random_bool(p)).collect();
    BinaryImage::new(width, height, bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn bin_from(w: usize, h: usize, black: &[(usize, usize)]) -> BinaryImage {
        let mut b = BinaryImage::blank(w, h);
        for &(r, c) in black {
            b.set(r, c, true);
        }
        b
    }

    #[test]
    fn binarize_uses_closed_boundary() {
        let img = Micrograph::from_rows(&[[0.3, 0.5], [0.386, 0.2]]).unwrap();
        let b = binarize(&img, 0.386);
        assert_eq!(b.bits(), &[false, true, true, false]);
        assert_eq!(binarize(&img, img.min() - 1.0).black_count(), 4);
        assert_eq!(binarize(&img, f64::NEG_INFINITY).black_count(), 4);
        assert_eq!(binarize(&img, img.max() + 1e-9).black_count(), 0);
    }

    #[test]
    fn neighbor_sets() {
        let n = tri_neighbors(5, 5, 10, 10).unwrap();
        assert_eq!(&*n, &[(4, 5), (6, 5), (5, 4), (5, 6), (4, 6), (6, 4)]);

        let n = tri_neighbors(0, 0, 10, 10).unwrap();
        assert_eq!(&*n, &[(1, 0), (0, 1)]);

        let n = tri_neighbors(0, 9, 10, 10).unwrap();
        assert_eq!(n.len(), 3);
        assert!(n.contains(&(1, 8)));

        assert!(tri_neighbors(10, 0, 10, 10).is_err());
        assert!(tri_neighbors(0, 10, 10, 10).is_err());
    }

    #[test]
    fn clusters_basic() {
        assert!(black_clusters(&BinaryImage::blank(5, 5)).is_empty());

        let one = black_clusters(&bin_from(5, 5, &[(2, 3)]));
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].pixel_count, 1);
        assert_eq!(one[0].bbox, (2, 3, 2, 3));

        // main diagonal is not an edge
        let diag = black_clusters(&bin_from(4, 4, &[(0, 0), (1, 1)]));
        assert_eq!(diag.len(), 2);
        assert_eq!((diag[0].id, diag[1].id), (0, 1));
        // anti-diagonal is
        let anti = black_clusters(&bin_from(4, 4, &[(0, 1), (1, 0)]));
        assert_eq!(anti.len(), 1);
        assert_eq!(anti[0].pixels, vec![(0, 1), (1, 0)]);
        assert_eq!(anti[0].bbox, (0, 0, 1, 1));
    }

    #[test]
    fn full_field_is_one_cluster() {
        let b = bernoulli_field(13, 7, 1.0, 4).unwrap();
        let cl = black_clusters(&b);
        assert_eq!(cl.len(), 1);
        assert_eq!(cl[0].pixel_count, 91);
        assert_eq!(largest_cluster_size(&b), 91);
        assert_eq!(bernoulli_field(13, 7, 0.0, 4).unwrap().black_count(), 0);
        assert!(bernoulli_field(2, 2, 1.5, 0).is_err());
        assert!(bernoulli_field(2, 2, -0.1, 0).is_err());
        assert_eq!(
            bernoulli_field(20, 20, 0.5, 11).unwrap(),
            bernoulli_field(20, 20, 0.5, 11).unwrap()
        );
    }

    #[test]
    fn filter_by_size() {
        let mk = |id, n| Cluster {
            id,
            pixel_count: n,
            pixels: vec![],
            bbox: (0, 0, 0, 0),
        };
        let cl = vec![mk(0, 5), mk(1, 30), mk(2, 200)];
        let kept = filter_clusters(cl.clone(), 30).unwrap();
        assert_eq!(
            kept.iter().map(|c| c.pixel_count).collect::<Vec<_>>(),
            vec![30, 200]
        );
        assert_eq!(filter_clusters(cl.clone(), 1).unwrap(), cl);
        assert!(filter_clusters(vec![], 30).unwrap().is_empty());
        assert!(filter_clusters(cl, 0).is_err());
    }

    #[test]
    fn large_cluster_does_not_overflow() {
        let b = bernoulli_field(1200, 1200, 1.0, 0).unwrap();
        assert_eq!(largest_cluster_size(&b), 1200 * 1200);
    }
}

//! End-to-end particle detection: preprocess, estimate both intensities,
//! threshold at their midpoint, cluster on the triangular lattice and keep
//! the clusters that are large enough.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{domain, Error, Result};
use crate::image::{downsample2x, normalize_max1, Micrograph};
use crate::percolation::{binarize, black_clusters, filter_clusters, BinaryImage, Cluster};
use crate::scan::{IntensityEstimates, Scanner};
use crate::synth::Mask;

/// Pipeline parameters. The defaults reproduce the published cryo-EM run:
/// two downsampling passes, normalization to a maximum of 1, windows of 65
/// and 9 pixels, and a 30-pixel cluster filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectParams {
    pub phi0: usize,
    pub phi1: usize,
    pub min_cluster_pixels: usize,
    pub downsample_passes: usize,
    pub normalize: bool,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self {
            phi0: 65,
            phi1: 9,
            min_cluster_pixels: 30,
            downsample_passes: 2,
            normalize: true,
        }
    }
}

impl DetectParams {
    pub fn validate(&self) -> Result<()> {
        if self.phi0 == 0 || self.phi1 == 0 {
            return Err(domain("window sides must be at least 1"));
        }
        if self.min_cluster_pixels == 0 {
            return Err(domain("min_cluster_pixels must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    ParticlesFound,
    NoParticles,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::ParticlesFound => "ParticlesFound",
            Decision::NoParticles => "NoParticles",
        }
    }
}

/// Outcome of [`run_detection`]. Coordinates refer to the preprocessed image.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub estimates: IntensityEstimates,
    pub theta: f64,
    pub clusters_kept: Vec<Cluster>,
    pub clusters_total: usize,
    pub decision: Decision,
    pub params: DetectParams,
    /// `(width, height)` of the image that was thresholded.
    pub image_dims: (usize, usize),
    /// The thresholded picture before cluster filtering.
    pub binary: BinaryImage,
}

impl DetectionReport {
    /// Thresholded picture with the small clusters removed.
    pub fn filtered_binary(&self) -> BinaryImage {
        BinaryImage::from_clusters(self.image_dims.0, self.image_dims.1, &self.clusters_kept)
    }
}

/// Midpoint between the two intensity estimates.
pub fn compute_threshold(a_hat: f64, b_hat: f64) -> Result<f64> {
    if a_hat.is_nan() || b_hat.is_nan() || a_hat >= b_hat {
        return Err(Error::DegenerateEstimates { a_hat, b_hat });
    }
    Ok((a_hat + b_hat) / 2.0)
}

/// Applies the configured downsampling passes and optional normalization.
pub fn preprocess(img: &Micrograph, params: &DetectParams) -> Result<Micrograph> {
    let mut cur = img.clone();
    for _ in 0..params.downsample_passes {
        cur = downsample2x(&cur)?;
    }
    if params.normalize {
        cur = normalize_max1(&cur)?;
    }
    Ok(cur)
}

/// Runs the full detection pipeline on one image.
pub fn run_detection(img: &Micrograph, params: &DetectParams) -> Result<DetectionReport> {
    params.validate()?;
    let work = preprocess(img, params)?;
    let (w, h) = work.dims();
    let needed = params.phi0.max(params.phi1);
    if needed > w.min(h) {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            side: needed,
        });
    }
    let estimates = Scanner::new(&work).estimates(params.phi0, params.phi1)?;
    let theta = compute_threshold(estimates.a_hat, estimates.b_hat)?;
    let binary = binarize(&work, theta);
    let all = black_clusters(&binary);
    let clusters_total = all.len();
    let clusters_kept = filter_clusters(all, params.min_cluster_pixels)?;
    let decision = if clusters_kept.is_empty() {
        Decision::NoParticles
    } else {
        Decision::ParticlesFound
    };
    Ok(DetectionReport {
        estimates,
        theta,
        clusters_kept,
        clusters_total,
        decision,
        params: *params,
        image_dims: (w, h),
        binary,
    })
}

/// Thresholds at a caller-chosen level and returns the clusters of at least
/// `min_pixels` pixels. No preprocessing or estimation is done.
pub fn detect_at_threshold(
    img: &Micrograph,
    theta: f64,
    min_pixels: usize,
) -> Result<Vec<Cluster>> {
    if !theta.is_finite() {
        return Err(domain(format!("threshold {theta} is not finite")));
    }
    filter_clusters(black_clusters(&binarize(img, theta)), min_pixels)
}

/// Per-particle detection flags and the count of kept clusters that touch
/// no particle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchSummary {
    pub detected: Vec<bool>,
    pub false_clusters: usize,
}

impl MatchSummary {
    pub fn detected_count(&self) -> usize {
        self.detected.iter().filter(|&&d| d).count()
    }

    pub fn all_detected(&self) -> bool {
        self.detected.iter().all(|&d| d)
    }

    /// Every particle detected and every kept cluster on a particle.
    pub fn exact(&self) -> bool {
        self.all_detected() && self.false_clusters == 0
    }
}

/// A particle counts as detected when some kept cluster shares a pixel with
/// its mask. One merged cluster may detect several particles.
pub fn match_detections(report: &DetectionReport, truth: &[Mask]) -> Result<MatchSummary> {
    match_clusters(&report.clusters_kept, report.image_dims, truth)
}

/// [`match_detections`] for a bare cluster list on a `dims = (width, height)` grid.
pub fn match_clusters(
    clusters: &[Cluster],
    dims: (usize, usize),
    truth: &[Mask],
) -> Result<MatchSummary> {
    let (w, h) = dims;
    // owner[i] = index of the mask covering pixel i, if any
    let mut owner: Vec<Option<usize>> = alloc::vec![None; w * h];
    for (k, mask) in truth.iter().enumerate() {
        for &(r, c) in mask.pixels() {
            if r >= h || c >= w {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    found: (c + 1, r + 1),
                });
            }
            owner[r * w + c] = Some(k);
        }
    }
    let mut detected = alloc::vec![false; truth.len()];
    let mut false_clusters = 0;
    for cl in clusters {
        let mut hit = false;
        for &(r, c) in &cl.pixels {
            if let Some(k) = owner[r * w + c] {
                detected[k] = true;
                hit = true;
            }
        }
        if !hit {
            false_clusters += 1;
        }
    }
    Ok(MatchSummary {
        detected,
        false_clusters,
    })
}

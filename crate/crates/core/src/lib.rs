#![cfg_attr(not(feature = "std"), no_std)]
//! Adaptive particle detection in noisy images.
//!
//! The pipeline estimates the unknown background and particle intensities with
//! spatial scan estimators ([`scan`]), thresholds the image at their midpoint,
//! and keeps the large black clusters of the thresholded picture on the
//! triangular lattice ([`percolation`], [`detect`]). Background noise below the
//! midpoint percolates subcritically and leaves only small clusters, while
//! particle interiors percolate supercritically.
//!
//! [`synth`] generates scenes with known ground truth and [`bound`] evaluates
//! the tail bound on the scan estimator choosing a window that overlaps
//! particles.
//!
//! The crate is `no_std` + `alloc` when the default `std` feature is disabled.

extern crate alloc;

pub mod bound;
pub mod detect;
pub mod error;
pub mod image;
pub mod percolation;
pub mod scan;
pub mod synth;

pub use bound::{misselection_bound, BoundValue};
pub use detect::{
    compute_threshold, detect_at_threshold, match_clusters, match_detections, preprocess,
    run_detection, Decision, DetectParams, DetectionReport, MatchSummary,
};
pub use error::{Error, Result};
pub use image::{downsample2x, normalize_max1, IntegralImage, Micrograph, WindowStats};
pub use percolation::{
    bernoulli_field, binarize, black_clusters, filter_clusters, largest_cluster_size,
    tri_neighbors, BinaryImage, Cluster,
};
pub use scan::{
    estimate_intensities, estimate_lower, estimate_upper, naive_mean, scan_max_window,
    scan_min_window, IntensityEstimates, Scanner,
};
pub use synth::{
    generate_scene, shape_library, Mask, NoiseKind, NoiseModel, Population, Scene, SceneFamily,
    SceneSpec, Shape,
};

//! JSON form of a detection report.
//!
//! Keys come out in a fixed order and every float is rounded to six
//! significant digits, so identical inputs give byte-identical documents.

use serde::Serialize;

use scanperc_core::{DetectParams, DetectionReport, WindowStats};

/// Rounds to six significant digits.
pub fn sig6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

/// Six-significant-digit text form used in CLI output.
pub fn fmt6(x: f64) -> String {
    let v = sig6(x);
    let plain = v.to_string();
    if v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e7) {
        format!("{v:e}")
    } else {
        plain
    }
}

#[derive(Debug, Serialize)]
pub struct ReportDoc {
    pub a_hat: f64,
    pub b_hat: f64,
    pub theta: f64,
    pub decision: &'static str,
    pub clusters_total: usize,
    pub clusters: Vec<ClusterDoc>,
    pub windows: WindowsDoc,
    pub params: ParamsDoc,
    pub dims: DimsDoc,
}

#[derive(Debug, Serialize)]
pub struct ClusterDoc {
    pub id: usize,
    pub pixel_count: usize,
    /// `[min_row, min_col, max_row, max_col]`
    pub bbox: [usize; 4],
}

#[derive(Debug, Serialize)]
pub struct WindowDoc {
    pub row: usize,
    pub col: usize,
    pub side: usize,
    pub mean: f64,
}

#[derive(Debug, Serialize)]
pub struct WindowsDoc {
    pub low: WindowDoc,
    pub high: WindowDoc,
}

#[derive(Debug, Serialize)]
pub struct ParamsDoc {
    pub phi0: usize,
    pub phi1: usize,
    pub min_cluster_pixels: usize,
    pub downsample_passes: usize,
    pub normalize: bool,
}

#[derive(Debug, Serialize)]
pub struct DimsDoc {
    pub width: usize,
    pub height: usize,
}

fn window(w: &WindowStats) -> WindowDoc {
    WindowDoc {
        row: w.row,
        col: w.col,
        side: w.side,
        mean: sig6(w.mean),
    }
}

impl From<&DetectParams> for ParamsDoc {
    fn from(p: &DetectParams) -> Self {
        Self {
            phi0: p.phi0,
            phi1: p.phi1,
            min_cluster_pixels: p.min_cluster_pixels,
            downsample_passes: p.downsample_passes,
            normalize: p.normalize,
        }
    }
}

impl From<&DetectionReport> for ReportDoc {
    fn from(r: &DetectionReport) -> Self {
        Self {
            a_hat: sig6(r.estimates.a_hat),
            b_hat: sig6(r.estimates.b_hat),
            theta: sig6(r.theta),
            decision: r.decision.as_str(),
            clusters_total: r.clusters_total,
            clusters: r
                .clusters_kept
                .iter()
                .map(|c| ClusterDoc {
                    id: c.id,
                    pixel_count: c.pixel_count,
                    bbox: [c.bbox.0, c.bbox.1, c.bbox.2, c.bbox.3],
                })
                .collect(),
            windows: WindowsDoc {
                low: window(&r.estimates.k_hat_low),
                high: window(&r.estimates.k_hat_high),
            },
            params: (&r.params).into(),
            dims: DimsDoc {
                width: r.image_dims.0,
                height: r.image_dims.1,
            },
        }
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn report_json(report: &DetectionReport) -> String {
    let mut s = serde_json::to_string_pretty(&ReportDoc::from(report)).expect("report serializes");
    s.push('\n');
    s
}

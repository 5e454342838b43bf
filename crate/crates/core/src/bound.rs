//! Tail bound on the scan estimator picking a window other than an all-noise
//! reference square.
//!
//! For each competing window `K` with `s1` particle pixels and `excess`
//! pixels outside the reference square, the term is
//! `exp(-C1 s1^2 / (C2 excess + C3 s1))` with `C1 = 3 (b - a)^2`,
//! `C2 = 12 sigma^2` and `C3 = 4 M (b - a)`. A window with no particle pixels
//! contributes 1. The quantities depend on the unknown truth, so this is a
//! diagnostic for hypothetical configurations only.

use alloc::format;

use crate::error::{domain, Result};

/// Raw sum of terms and the same value capped at 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundValue {
    pub raw: f64,
    pub clipped: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl BoundConstants {
    pub fn new(contrast: f64, sigma: f64, noise_bound: f64) -> Result<Self> {
        for (name, v) in [
            ("b - a", contrast),
            ("sigma", sigma),
            ("noise bound M", noise_bound),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self {
            c1: 3.0 * contrast * contrast,
            c2: 12.0 * sigma * sigma,
            c3: 4.0 * noise_bound * contrast,
        })
    }

    /// One window's term.
    pub fn term(&self, s1: u64, excess: u64) -> f64 {
        if s1 == 0 {
            return 1.0;
        }
        let s1 = s1 as f64;
        libm::exp(-self.c1 * s1 * s1 / (self.c2 * excess as f64 + self.c3 * s1))
    }
}

/// Sums the per-window terms for paired `(s1, excess)` lists.
pub fn misselection_bound(
    s1: &[i64],
    excess: &[i64],
    contrast: f64,
    sigma: f64,
    noise_bound: f64,
) -> Result<BoundValue> {
    if s1.len() != excess.len() {
        return Err(domain(format!(
            "s1 has {} entries but excess has {}",
            s1.len(),
            excess.len()
        )));
    }
    let k = BoundConstants::new(contrast, sigma, noise_bound)?;
    let mut raw = 0.0;
    for (i, (&s, &e)) in s1.iter().zip(excess).enumerate() {
        if s < 0 || e < 0 {
            return Err(domain(format!("entry {i} has a negative count ({s}, {e})")));
        }
        raw += k.term(s as u64, e as u64);
    }
    Ok(BoundValue {
        raw,
        clipped: raw.min(1.0),
    })
}

//! Monte Carlo harnesses over synthetic scenes.
//!
//! Trial `t` of a run with seed `s` draws from a ChaCha8 generator seeded
//! with `s` on stream `t`, so results do not depend on how rayon schedules
//! the trials.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use scanperc_core::{
    bernoulli_field, detect_at_threshold, largest_cluster_size, match_detections, naive_mean,
    percolation::bernoulli_field_with, run_detection, synth::generate_scene_with, DetectParams,
    Mask, Micrograph, NoiseModel, Result, Scanner, SceneFamily, SceneSpec,
};

use crate::report::fmt6;

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Linear-interpolation quantile of sorted data (`q` in `[0, 1]`).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Distribution of absolute errors over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSummary {
    pub trials: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub q90: f64,
    pub mean: f64,
}

impl ErrorSummary {
    pub fn from_errors(mut errs: Vec<f64>) -> Self {
        errs.sort_by(f64::total_cmp);
        Self {
            trials: errs.len(),
            median: quantile(&errs, 0.5),
            q25: quantile(&errs, 0.25),
            q75: quantile(&errs, 0.75),
            q90: quantile(&errs, 0.9),
            mean: errs.iter().sum::<f64>() / errs.len() as f64,
        }
    }

    fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.trials,
            fmt6(self.median),
            fmt6(self.q25),
            fmt6(self.q75),
            fmt6(self.q90),
            fmt6(self.mean)
        )
    }
}

/// Errors of the scan estimators and of the whole-image mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyTable {
    /// `|a_hat - a|` per background window side.
    pub lower: Vec<(usize, ErrorSummary)>,
    /// `|b_hat - b|` for the particle window side.
    pub upper: (usize, ErrorSummary),
    /// `|mean(Y) - a|`.
    pub naive: ErrorSummary,
}

impl ConsistencyTable {
    pub fn lower_for(&self, phi0: usize) -> Option<&ErrorSummary> {
        self.lower.iter().find(|(s, _)| *s == phi0).map(|(_, e)| e)
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("estimator,window,trials,median_abs_err,q25,q75,q90,mean_abs_err\n");
        for (side, e) in &self.lower {
            out.push_str(&format!("scan_lower,{side},{}\n", e.csv_fields()));
        }
        let (side, e) = &self.upper;
        out.push_str(&format!("scan_upper,{side},{}\n", e.csv_fields()));
        out.push_str(&format!("naive_mean,,{}\n", self.naive.csv_fields()));
        out
    }
}

/// Runs the scan estimators on `trials` scenes from `family`. Every window in
/// `phi0_grid` is evaluated on the same scene, so the family's noise square
/// must be at least as large as the largest of them.
pub fn mc_consistency(
    family: &SceneFamily,
    noise: &NoiseModel,
    phi0_grid: &[usize],
    phi1: usize,
    trials: usize,
    seed: u64,
) -> Result<ConsistencyTable> {
    if trials == 0 {
        return Err(scanperc_core::Error::InputDomain(
            "trials must be at least 1".into(),
        ));
    }
    let per_trial: Vec<(Vec<f64>, f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let scene = family.generate(noise, &mut rng)?;
            let scanner = Scanner::new(&scene.image);
            let lower = phi0_grid
                .iter()
                .map(|&s| Ok((scanner.min_window(s)?.mean - family.a).abs()))
                .collect::<Result<Vec<_>>>()?;
            let upper = (scanner.max_window(phi1)?.mean - family.b).abs();
            let naive = (naive_mean(&scene.image) - family.a).abs();
            Ok((lower, upper, naive))
        })
        .collect::<Result<_>>()?;

    let lower = phi0_grid
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let errs = per_trial.iter().map(|t| t.0[i]).collect();
            (s, ErrorSummary::from_errors(errs))
        })
        .collect();
    Ok(ConsistencyTable {
        lower,
        upper: (
            phi1,
            ErrorSummary::from_errors(per_trial.iter().map(|t| t.1).collect()),
        ),
        naive: ErrorSummary::from_errors(per_trial.iter().map(|t| t.2).collect()),
    })
}

/// Detection power of the full pipeline on scenes with particles.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSummary {
    pub trials: usize,
    /// Fraction of trials in which every particle was detected.
    pub all_detected_rate: f64,
    /// Fraction of trials with every particle detected and no false cluster.
    pub exact_rate: f64,
    pub mean_detected_fraction: f64,
    /// Fraction of trials with at least one kept cluster touching no particle.
    pub false_cluster_rate: f64,
    pub mean_false_clusters: f64,
    /// Trials aborted because `a_hat >= b_hat`.
    pub degenerate: usize,
}

impl DetectionSummary {
    pub fn to_csv(&self) -> String {
        format!(
            "trials,all_detected_rate,exact_rate,mean_detected_fraction,false_cluster_rate,mean_false_clusters,degenerate\n{},{},{},{},{},{},{}\n",
            self.trials,
            fmt6(self.all_detected_rate),
            fmt6(self.exact_rate),
            fmt6(self.mean_detected_fraction),
            fmt6(self.false_cluster_rate),
            fmt6(self.mean_false_clusters),
            self.degenerate
        )
    }
}

pub fn mc_detection(
    family: &SceneFamily,
    noise: &NoiseModel,
    params: &DetectParams,
    trials: usize,
    seed: u64,
) -> Result<DetectionSummary> {
    if trials == 0 {
        return Err(scanperc_core::Error::InputDomain(
            "trials must be at least 1".into(),
        ));
    }
    // (all detected, exact, detected fraction, false clusters); None when degenerate
    let outcomes: Vec<Option<(bool, bool, f64, usize)>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let scene = family.generate(noise, &mut rng)?;
            let report = match run_detection(&scene.image, params) {
                Ok(r) => r,
                Err(scanperc_core::Error::DegenerateEstimates { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let masks: Vec<Mask> = scene
                .masks
                .iter()
                .map(|m| m.downscaled(params.downsample_passes, report.image_dims))
                .collect();
            let m = match_detections(&report, &masks)?;
            let frac = if m.detected.is_empty() {
                1.0
            } else {
                m.detected_count() as f64 / m.detected.len() as f64
            };
            Ok(Some((m.all_detected(), m.exact(), frac, m.false_clusters)))
        })
        .collect::<Result<_>>()?;

    let n = trials as f64;
    let done: Vec<_> = outcomes.iter().flatten().collect();
    Ok(DetectionSummary {
        trials,
        all_detected_rate: done.iter().filter(|o| o.0).count() as f64 / n,
        exact_rate: done.iter().filter(|o| o.1).count() as f64 / n,
        mean_detected_fraction: done.iter().map(|o| o.2).sum::<f64>() / n,
        false_cluster_rate: done.iter().filter(|o| o.3 > 0).count() as f64 / n,
        mean_false_clusters: done.iter().map(|o| o.3 as f64).sum::<f64>() / n,
        degenerate: trials - done.len(),
    })
}

/// False alarms on pure-noise images thresholded at a fixed level.
#[derive(Debug, Clone, PartialEq)]
pub struct FalseAlarmRow {
    pub n: usize,
    pub trials: usize,
    pub theta: f64,
    /// Fraction of trials with at least one kept cluster.
    pub false_alarm_rate: f64,
    pub mean_black_fraction: f64,
    pub max_cluster_seen: usize,
}

pub fn false_alarm_csv(rows: &[FalseAlarmRow]) -> String {
    let mut out =
        String::from("n,trials,theta,false_alarm_rate,mean_black_fraction,max_cluster_seen\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n,
            r.trials,
            fmt6(r.theta),
            fmt6(r.false_alarm_rate),
            fmt6(r.mean_black_fraction),
            r.max_cluster_seen
        ));
    }
    out
}

/// For each image side in `sizes`, thresholds `trials` pure-noise images
/// (`a + noise`) at `theta` and records how often any cluster of at least
/// `min_cluster` pixels survives.
pub fn mc_false_alarm(
    sizes: &[usize],
    a: f64,
    noise: &NoiseModel,
    theta: f64,
    min_cluster: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<FalseAlarmRow>> {
    if trials == 0 {
        return Err(scanperc_core::Error::InputDomain(
            "trials must be at least 1".into(),
        ));
    }
    sizes
        .iter()
        .map(|&n| {
            let spec = SceneSpec {
                n,
                a,
                b: a + 1.0,
                particles: Vec::new(),
                noise_square_side: n,
                noise_square_at: Some((0, 0)),
                phi1: 1,
            };
            let per: Vec<(bool, f64, usize)> = (0..trials as u64)
                .into_par_iter()
                .map(|t| {
                    let mut rng = trial_rng(seed ^ (n as u64).rotate_left(32), t);
                    let img: Micrograph = generate_scene_with(&spec, noise, &mut rng)?.image;
                    let black = img.pixels().iter().filter(|&&v| v >= theta).count();
                    let kept = detect_at_threshold(&img, theta, 1)?;
                    let largest = kept.iter().map(|c| c.pixel_count).max().unwrap_or(0);
                    Ok((
                        largest >= min_cluster,
                        black as f64 / (n * n) as f64,
                        largest,
                    ))
                })
                .collect::<Result<_>>()?;
            Ok(FalseAlarmRow {
                n,
                trials,
                theta,
                false_alarm_rate: per.iter().filter(|p| p.0).count() as f64 / trials as f64,
                mean_black_fraction: per.iter().map(|p| p.1).sum::<f64>() / trials as f64,
                max_cluster_seen: per.iter().map(|p| p.2).max().unwrap_or(0),
            })
        })
        .collect()
}

/// Largest-cluster statistics of i.i.d. site fields at one occupation probability.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRow {
    pub p: f64,
    pub size: usize,
    /// Largest cluster as a fraction of all sites, one entry per trial.
    pub largest_fractions: Vec<f64>,
}

impl PhaseRow {
    pub fn fraction_at_least(&self, x: f64) -> f64 {
        self.largest_fractions.iter().filter(|&&f| f >= x).count() as f64
            / self.largest_fractions.len() as f64
    }

    pub fn fraction_below(&self, x: f64) -> f64 {
        self.largest_fractions.iter().filter(|&&f| f < x).count() as f64
            / self.largest_fractions.len() as f64
    }

    pub fn median(&self) -> f64 {
        let mut v = self.largest_fractions.clone();
        v.sort_by(f64::total_cmp);
        quantile(&v, 0.5)
    }
}

pub fn phase_csv(rows: &[PhaseRow]) -> String {
    let mut out = String::from("p,size,trials,median_largest_fraction,min_largest_fraction,max_largest_fraction,frac_ge_0.10,frac_lt_0.05\n");
    for r in rows {
        let min = r
            .largest_fractions
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let max = r
            .largest_fractions
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt6(r.p),
            r.size,
            r.largest_fractions.len(),
            fmt6(r.median()),
            fmt6(min),
            fmt6(max),
            fmt6(r.fraction_at_least(0.10)),
            fmt6(r.fraction_below(0.05))
        ));
    }
    out
}

/// Largest black cluster of `size x size` Bernoulli fields for each `p`.
pub fn percolation_phase(
    size: usize,
    ps: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<PhaseRow>> {
    if trials == 0 {
        return Err(scanperc_core::Error::InputDomain(
            "trials must be at least 1".into(),
        ));
    }
    // validates p before spawning work
    for &p in ps {
        bernoulli_field(1, 1, p, 0)?;
    }
    ps.iter()
        .enumerate()
        .map(|(i, &p)| {
            let largest_fractions = (0..trials as u64)
                .into_par_iter()
                .map(|t| {
                    let mut rng = trial_rng(seed.wrapping_add(i as u64), t);
                    let field = bernoulli_field_with(size, size, p, &mut rng)?;
                    Ok(largest_cluster_size(&field) as f64 / (size * size) as f64)
                })
                .collect::<Result<_>>()?;
            Ok(PhaseRow {
                p,
                size,
                largest_fractions,
            })
        })
        .collect()
}

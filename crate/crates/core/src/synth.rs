//! Synthetic scenes with known ground truth.
//!
//! A scene is a two-level image (background `a`, particles `b`) plus i.i.d.
//! bounded, symmetric noise. Every scene reserves an all-noise square of a
//! given side, placed explicitly and checked, and every particle mask must
//! contain a full `phi1 x phi1` square.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};
use crate::image::Micrograph;

/// Shape of the noise law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    /// Uniform on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
    /// `N(0, sigma_raw^2)` conditioned on `|x| <= bound`.
    TruncatedGaussian { sigma_raw: f64, bound: f64 },
}

/// Mean-zero, symmetric noise bounded by `bound()` almost surely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    variance: f64,
}

impl NoiseModel {
    /// Uniform noise. A zero half width gives the noiseless model.
    pub fn uniform(half_width: f64) -> Result<Self> {
        if !half_width.is_finite() || half_width < 0.0 {
            return Err(domain(format!(
                "uniform half width {half_width} must be >= 0"
            )));
        }
        Ok(Self {
            kind: NoiseKind::Uniform { half_width },
            variance: half_width * half_width / 3.0,
        })
    }

    pub fn zero() -> Self {
        Self {
            kind: NoiseKind::Uniform { half_width: 0.0 },
            variance: 0.0,
        }
    }

    /// Gaussian truncated symmetrically at `+-bound`.
    pub fn truncated_gaussian(sigma_raw: f64, bound: f64) -> Result<Self> {
        if !(sigma_raw > 0.0 && sigma_raw.is_finite()) {
            return Err(domain(format!("sigma_raw {sigma_raw} must be positive")));
        }
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(domain(format!("truncation bound {bound} must be positive")));
        }
        Ok(Self {
            kind: NoiseKind::TruncatedGaussian { sigma_raw, bound },
            variance: truncated_gaussian_variance(sigma_raw, bound),
        })
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    /// Exact variance of the law.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sigma(&self) -> f64 {
        libm::sqrt(self.variance)
    }

    /// Almost-sure bound on `|noise|`.
    pub fn bound(&self) -> f64 {
        match self.kind {
            NoiseKind::Uniform { half_width } => half_width,
            NoiseKind::TruncatedGaussian { bound, .. } => bound,
        }
    }

    /// `P(noise >= t)`.
    pub fn upper_tail(&self, t: f64) -> f64 {
        match self.kind {
            NoiseKind::Uniform { half_width: m } => {
                if m == 0.0 {
                    return if t <= 0.0 { 1.0 } else { 0.0 };
                }
                ((m - t) / (2.0 * m)).clamp(0.0, 1.0)
            }
            NoiseKind::TruncatedGaussian { sigma_raw, bound } => {
                let t = t.clamp(-bound, bound);
                let cdf =
                    |x: f64| 0.5 * (1.0 + libm::erf(x / (sigma_raw * core::f64::consts::SQRT_2)));
                (cdf(bound) - cdf(t)) / (cdf(bound) - cdf(-bound))
            }
        }
    }

    /// Smallest `t` in `[-bound, bound]` with `P(noise >= t) <= q`, found by
    /// bisection. A threshold at `level + upper_quantile(q)` blackens a
    /// fraction `q` of pure-background pixels.
    pub fn upper_quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(domain(format!("tail probability {q} is outside [0, 1]")));
        }
        let m = self.bound();
        if m == 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (-m, m);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.upper_tail(mid) > q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::Uniform { half_width } => {
                if half_width == 0.0 {
                    0.0
                } else {
                    rng.random_range(-half_width..=half_width)
                }
            }
            NoiseKind::TruncatedGaussian { sigma_raw, bound } => loop {
                let z: f64 = rng.sample(StandardNormal);
                let x = z * sigma_raw;
                if x.abs() <= bound {
                    break x;
                }
            },
        }
    }
}

/// Variance of `N(0, s^2)` truncated to `[-m, m]`:
/// `s^2 (1 - 2 k pdf(k) / (2 cdf(k) - 1))` with `k = m / s`.
fn truncated_gaussian_variance(s: f64, m: f64) -> f64 {
    let k = m / s;
    let pdf = libm::exp(-0.5 * k * k) / libm::sqrt(2.0 * core::f64::consts::PI);
    let mass = libm::erf(k / core::f64::consts::SQRT_2);
    s * s * (1.0 - 2.0 * k * pdf / mass)
}

/// A set of pixel coordinates `(row, col)`, sorted and distinct.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Mask {
    pixels: Vec<(usize, usize)>,
}

impl Mask {
    pub fn from_pixels(pixels: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut pixels: Vec<_> = pixels.into_iter().collect();
        pixels.sort_unstable();
        pixels.dedup();
        Self { pixels }
    }

    pub fn pixels(&self) -> &[(usize, usize)] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn contains(&self, p: (usize, usize)) -> bool {
        self.pixels.binary_search(&p).is_ok()
    }

    /// Inclusive `(min_row, min_col, max_row, max_col)`.
    pub fn bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let first = self.pixels.first()?;
        let mut b = (first.0, first.1, first.0, first.1);
        for &(r, c) in &self.pixels {
            b.0 = b.0.min(r);
            b.1 = b.1.min(c);
            b.2 = b.2.max(r);
            b.3 = b.3.max(c);
        }
        Some(b)
    }

    pub fn translate(&self, dr: usize, dc: usize) -> Self {
        Self {
            pixels: self.pixels.iter().map(|&(r, c)| (r + dr, c + dc)).collect(),
        }
    }

    /// The mask on an image shrunk by `passes` rounds of 2x2 block
    /// averaging, keeping the blocks that survive inside `dims = (width, height)`.
    pub fn downscaled(&self, passes: usize, dims: (usize, usize)) -> Self {
        let (w, h) = dims;
        Self::from_pixels(
            self.pixels
                .iter()
                .map(|&(r, c)| (r >> passes, c >> passes))
                .filter(|&(r, c)| r < h && c < w),
        )
    }

    /// Top-left corner of the first (row-major) `side x side` square lying
    /// entirely inside the mask.
    pub fn find_square(&self, side: usize) -> Option<(usize, usize)> {
        let (r0, c0, r1, c1) = self.bbox()?;
        if side == 0 {
            return Some((r0, c0));
        }
        let (h, w) = (r1 - r0 + 1, c1 - c0 + 1);
        if side > h || side > w {
            return None;
        }
        // integral of the indicator over the bounding box
        let stride = w + 1;
        let mut table = alloc::vec![0u32; stride * (h + 1)];
        let mut inside = alloc::vec![0u32; w * h];
        for &(r, c) in &self.pixels {
            inside[(r - r0) * w + (c - c0)] = 1;
        }
        for r in 0..h {
            let mut run = 0;
            for c in 0..w {
                run += inside[r * w + c];
                table[(r + 1) * stride + c + 1] = table[r * stride + c + 1] + run;
            }
        }
        let full = (side * side) as u32;
        for r in 0..=h - side {
            for c in 0..=w - side {
                let s = table[(r + side) * stride + c + side] + table[r * stride + c]
                    - table[r * stride + c + side]
                    - table[(r + side) * stride + c];
                if s == full {
                    return Some((r + r0, c + c0));
                }
            }
        }
        None
    }
}

/// Particle templates. Masks are anchored with their bounding box at `(0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Square {
        side: usize,
    },
    /// Lattice points within Euclidean distance `radius` of the center.
    Disc {
        radius: usize,
    },
    /// Two perpendicular arms of outer length `arm` and width `thickness`
    /// sharing the bottom-left corner.
    LShape {
        arm: usize,
        thickness: usize,
    },
    /// Ring `inner < d <= outer` with a slot of `gap` rows cut through its
    /// left side.
    GappedAnnulus {
        outer: usize,
        inner: usize,
        gap: usize,
    },
}

impl Shape {
    pub fn mask(&self) -> Result<Mask> {
        shape_library(*self)
    }
}

/// Rasterizes a particle template.
pub fn shape_library(shape: Shape) -> Result<Mask> {
    match shape {
        Shape::Square { side } => {
            if side == 0 {
                return Err(domain("square side must be at least 1"));
            }
            Ok(Mask::from_pixels(
                (0..side).flat_map(|r| (0..side).map(move |c| (r, c))),
            ))
        }
        Shape::Disc { radius } => {
            if radius == 0 {
                return Err(domain("disc radius must be at least 1"));
            }
            let r2 = (radius * radius) as i64;
            let rad = radius as i64;
            Ok(Mask::from_pixels((0..=2 * radius).flat_map(move |r| {
                (0..=2 * radius).filter_map(move |c| {
                    let (dr, dc) = (r as i64 - rad, c as i64 - rad);
                    (dr * dr + dc * dc <= r2).then_some((r, c))
                })
            })))
        }
        Shape::LShape { arm, thickness } => {
            if thickness == 0 || thickness >= arm {
                return Err(domain(format!(
                    "L-shape needs 0 < thickness < arm, got arm {arm}, thickness {thickness}"
                )));
            }
            Ok(Mask::from_pixels((0..arm).flat_map(move |r| {
                (0..arm)
                    .filter_map(move |c| (c < thickness || r >= arm - thickness).then_some((r, c)))
            })))
        }
        Shape::GappedAnnulus { outer, inner, gap } => {
            if inner == 0 || inner >= outer {
                return Err(domain(format!(
                    "annulus needs 0 < inner < outer, got inner {inner}, outer {outer}"
                )));
            }
            if gap == 0 || gap > 2 * inner {
                return Err(domain(format!(
                    "annulus gap {gap} must be in 1..={}",
                    2 * inner
                )));
            }
            let (o2, i2) = ((outer * outer) as i64, (inner * inner) as i64);
            let rad = outer as i64;
            let gap_lo = -(gap as i64) / 2;
            let gap_hi = gap_lo + gap as i64;
            Ok(Mask::from_pixels((0..=2 * outer).flat_map(move |r| {
                (0..=2 * outer).filter_map(move |c| {
                    let (dr, dc) = (r as i64 - rad, c as i64 - rad);
                    let d2 = dr * dr + dc * dc;
                    let in_ring = d2 > i2 && d2 <= o2;
                    let in_gap = dc < 0 && dr >= gap_lo && dr < gap_hi;
                    (in_ring && !in_gap).then_some((r, c))
                })
            })))
        }
    }
}

/// Ground-truth layout of a synthetic scene on an `n x n` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    /// Particle masks in absolute image coordinates.
    pub particles: Vec<Mask>,
    /// Side of the reserved all-noise square.
    pub noise_square_side: usize,
    /// Top-left corner of that square. `None` lets validation find one.
    pub noise_square_at: Option<(usize, usize)>,
    /// Every particle must contain a square of this side.
    pub phi1: usize,
}

/// Ground truth plus the validated all-noise square `(row, col, side)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: Micrograph,
    pub masks: Vec<Mask>,
    pub noise_square: (usize, usize, usize),
}

impl SceneSpec {
    /// Checks the model premises and returns the all-noise square corner.
    pub fn validate(&self) -> Result<(usize, usize)> {
        let n = self.n;
        if n == 0 {
            return Err(invalid("image side must be positive"));
        }
        if !(self.a.is_finite() && self.b.is_finite() && self.b > self.a) {
            return Err(invalid(format!(
                "intensities must satisfy b > a, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        let k0 = self.noise_square_side;
        if k0 == 0 || k0 > n {
            return Err(invalid(format!(
                "noise square side {k0} must be in 1..={n}"
            )));
        }
        let mut owner: Vec<Option<usize>> = alloc::vec![None; n * n];
        for (k, mask) in self.particles.iter().enumerate() {
            if mask.is_empty() {
                return Err(invalid(format!("particle {k} is empty")));
            }
            for &(r, c) in mask.pixels() {
                if r >= n || c >= n {
                    return Err(invalid(format!(
                        "particle {k} pixel ({r}, {c}) is outside the {n}x{n} image"
                    )));
                }
                if let Some(j) = owner[r * n + c] {
                    return Err(invalid(format!(
                        "particles {j} and {k} overlap at ({r}, {c})"
                    )));
                }
                owner[r * n + c] = Some(k);
            }
            if mask.find_square(self.phi1).is_none() {
                return Err(invalid(format!(
                    "particle {k} contains no {0}x{0} square",
                    self.phi1
                )));
            }
        }
        let free_square = |r: usize, c: usize| {
            (r..r + k0).all(|i| (c..c + k0).all(|j| owner[i * n + j].is_none()))
        };
        match self.noise_square_at {
            Some((r, c)) => {
                if r + k0 > n || c + k0 > n {
                    return Err(invalid(format!(
                        "noise square at ({r}, {c}) of side {k0} leaves the image"
                    )));
                }
                if !free_square(r, c) {
                    return Err(invalid(format!(
                        "noise square at ({r}, {c}) of side {k0} intersects a particle"
                    )));
                }
                Ok((r, c))
            }
            None => {
                let occupancy = Mask::from_pixels(
                    (0..n * n)
                        .filter(|&i| owner[i].is_none())
                        .map(|i| (i / n, i % n)),
                );
                occupancy
                    .find_square(k0)
                    .ok_or_else(|| invalid(format!("no particle-free {k0}x{k0} square exists")))
            }
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidScene(msg.into())
}

/// Renders a scene: `a + noise` off the masks, `b + noise` on them. Noise is
/// drawn in row-major order from a ChaCha8 stream seeded with `seed`.
pub fn generate_scene(spec: &SceneSpec, noise: &NoiseModel, seed: u64) -> Result<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_scene_with(spec, noise, &mut rng)
}

pub fn generate_scene_with<R: Rng + ?Sized>(
    spec: &SceneSpec,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Scene> {
    let (k0r, k0c) = spec.validate()?;
    let n = spec.n;
    let mut level = alloc::vec![spec.a; n * n];
    for mask in &spec.particles {
        for &(r, c) in mask.pixels() {
            level[r * n + c] = spec.b;
        }
    }
    let pixels = level.into_iter().map(|v| v + noise.sample(rng)).collect();
    Ok(Scene {
        image: Micrograph::new(n, n, pixels)?,
        masks: spec.particles.clone(),
        noise_square: (k0r, k0c, spec.noise_square_side),
    })
}

/// How many particles a [`SceneFamily`] places.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Population {
    /// Exactly this many particles.
    Count(usize),
    /// Keep placing until this fraction of the image is covered.
    Coverage(f64),
}

/// Random layouts: the noise square lands uniformly at random, then particle
/// templates are dropped at uniform positions (cycling through `shapes` for a
/// fixed count, drawing one at random for a coverage target),
/// rejecting any that would intersect the noise square or come within
/// `margin` pixels (Chebyshev) of another particle.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFamily {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub noise_square_side: usize,
    pub phi1: usize,
    pub shapes: Vec<Shape>,
    pub population: Population,
    pub margin: usize,
}

const MAX_PLACEMENT_FAILURES: usize = 5000;

impl SceneFamily {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SceneSpec> {
        let n = self.n;
        let k0 = self.noise_square_side;
        if k0 == 0 || k0 > n {
            return Err(invalid(format!(
                "noise square side {k0} must be in 1..={n}"
            )));
        }
        let templates = self
            .shapes
            .iter()
            .map(|s| s.mask())
            .collect::<Result<Vec<_>>>()?;
        let target = match self.population {
            Population::Count(0) => None,
            _ if templates.is_empty() => {
                return Err(invalid("a populated family needs at least one shape"));
            }
            Population::Count(_) => None,
            Population::Coverage(f) => {
                if !(0.0..1.0).contains(&f) {
                    return Err(invalid(format!("coverage {f} must be in [0, 1)")));
                }
                Some(libm::ceil(f * (n * n) as f64) as usize)
            }
        };

        let k0r = rng.random_range(0..=n - k0);
        let k0c = rng.random_range(0..=n - k0);
        // `reserved`: noise square; `near`: particle pixels dilated by margin
        let mut reserved = alloc::vec![false; n * n];
        for r in k0r..k0r + k0 {
            reserved[r * n + k0c..r * n + k0c + k0].fill(true);
        }
        let mut near = alloc::vec![false; n * n];

        let mut particles = Vec::new();
        let mut covered = 0usize;
        let mut failures = 0usize;
        loop {
            let done = match (self.population, target) {
                (Population::Count(k), _) => particles.len() >= k,
                (_, Some(t)) => covered >= t,
                _ => true,
            };
            if done {
                break;
            }
            if failures >= MAX_PLACEMENT_FAILURES {
                return Err(invalid(format!(
                    "placed {} particles covering {covered} pixels before running out of room",
                    particles.len()
                )));
            }
            let pick = match self.population {
                Population::Count(_) => particles.len() % templates.len(),
                Population::Coverage(_) => rng.random_range(0..templates.len()),
            };
            let template = &templates[pick];
            let (_, _, hr, hc) = template.bbox().expect("templates are nonempty");
            if hr >= n || hc >= n {
                return Err(invalid("a shape is larger than the image"));
            }
            let dr = rng.random_range(0..=n - 1 - hr);
            let dc = rng.random_range(0..=n - 1 - hc);
            let fits = template.pixels().iter().all(|&(r, c)| {
                let i = (r + dr) * n + c + dc;
                !reserved[i] && !near[i]
            });
            if !fits {
                failures += 1;
                continue;
            }
            failures = 0;
            let placed = template.translate(dr, dc);
            let m = self.margin;
            for &(r, c) in placed.pixels() {
                for rr in r.saturating_sub(m)..=(r + m).min(n - 1) {
                    near[rr * n + c.saturating_sub(m)..=rr * n + (c + m).min(n - 1)].fill(true);
                }
            }
            covered += placed.len();
            particles.push(placed);
        }

        let spec = SceneSpec {
            n,
            a: self.a,
            b: self.b,
            particles,
            noise_square_side: k0,
            noise_square_at: Some((k0r, k0c)),
            phi1: self.phi1,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Samples a layout and renders it with the same generator.
    pub fn generate<R: Rng + ?Sized>(&self, noise: &NoiseModel, rng: &mut R) -> Result<Scene> {
        let spec = self.sample(rng)?;
        generate_scene_with(&spec, noise, rng)
    }
}

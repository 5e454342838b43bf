//! JSON scene documents.
//!
//! ```json
//! {
//!   "n": 128, "a": 0.3, "b": 0.7, "phi0": 32, "phi1": 8,
//!   "noise": {"kind": "uniform", "params": {"half_width": 0.2}},
//!   "noise_square": {"row": 0, "col": 0},
//!   "shapes": [
//!     {"kind": "square", "side": 20, "row": 60, "col": 60},
//!     {"kind": "l_shape", "arm": 24, "thickness": 12, "row": 10, "col": 80}
//!   ]
//! }
//! ```
//!
//! `noise_square` is optional; without it the first particle-free
//! `phi0 x phi0` square in row-major order is used. Shape kinds are
//! `square {side}`, `disc {radius}`, `l_shape {arm, thickness}` and
//! `gapped_annulus {outer, inner, gap}`; `row`/`col` place the bounding box.
//! Noise kinds are `uniform {half_width}` and
//! `truncated_gaussian {sigma_raw, bound}`.

use serde::{Deserialize, Serialize};

use scanperc_core::{shape_library, NoiseModel, SceneSpec, Shape};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SceneDoc {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub phi0: usize,
    pub phi1: usize,
    pub noise: NoiseDoc,
    #[serde(default)]
    pub noise_square: Option<Corner>,
    #[serde(default)]
    pub shapes: Vec<PlacedShape>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Corner {
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum NoiseDoc {
    Uniform { half_width: f64 },
    TruncatedGaussian { sigma_raw: f64, bound: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeDoc {
    Square {
        side: usize,
    },
    Disc {
        radius: usize,
    },
    LShape {
        arm: usize,
        thickness: usize,
    },
    GappedAnnulus {
        outer: usize,
        inner: usize,
        gap: usize,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct PlacedShape {
    #[serde(flatten)]
    pub shape: ShapeDoc,
    pub row: usize,
    pub col: usize,
}

impl From<ShapeDoc> for Shape {
    fn from(s: ShapeDoc) -> Self {
        match s {
            ShapeDoc::Square { side } => Shape::Square { side },
            ShapeDoc::Disc { radius } => Shape::Disc { radius },
            ShapeDoc::LShape { arm, thickness } => Shape::LShape { arm, thickness },
            ShapeDoc::GappedAnnulus { outer, inner, gap } => {
                Shape::GappedAnnulus { outer, inner, gap }
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("scene JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] scanperc_core::Error),
}

impl NoiseDoc {
    pub fn model(&self) -> Result<NoiseModel, scanperc_core::Error> {
        match *self {
            NoiseDoc::Uniform { half_width } => NoiseModel::uniform(half_width),
            NoiseDoc::TruncatedGaussian { sigma_raw, bound } => {
                NoiseModel::truncated_gaussian(sigma_raw, bound)
            }
        }
    }
}

impl SceneDoc {
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Builds and validates the scene spec and noise model.
    pub fn build(&self) -> Result<(SceneSpec, NoiseModel), SceneError> {
        let particles = self
            .shapes
            .iter()
            .map(|p| Ok(shape_library(p.shape.into())?.translate(p.row, p.col)))
            .collect::<Result<Vec<_>, scanperc_core::Error>>()?;
        let spec = SceneSpec {
            n: self.n,
            a: self.a,
            b: self.b,
            particles,
            noise_square_side: self.phi0,
            noise_square_at: self.noise_square.map(|c| (c.row, c.col)),
            phi1: self.phi1,
        };
        spec.validate()?;
        Ok((spec, self.noise.model()?))
    }
}

//! Scene configuration files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certifier::{CertifierConfig, DivergenceSchedule, PairGrid, SampleDomain, TriangleGrid};
use crate::error::{Error, Result};
use crate::surface::{GluingSpec, SquareTiledSurface, SurfacePoint};
use crate::warped::{Leaf, SafeBox};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// The coordinate pencil into ℍᵐ (the identity when `n = m`).
    ExactHyperbolic,
    /// The constant map into ℍᵐ; a control that must fail.
    Constant,
    /// The leaf pencil into the warped product over the Euclidean plane.
    WarpedPlane,
    /// The leaf pencil into the warped product over a square-tiled surface.
    WarpedCover,
    /// The unwarped Euclidean plane as a grid graph (probe only).
    Euclidean,
    /// A star graph (probe only).
    Star,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasepointConfig {
    pub square: usize,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafConfig {
    /// Defaults to the golden ratio.
    #[serde(default)]
    pub slope: Option<f64>,
    pub basepoint: BasepointConfig,
}

/// Axis-aligned box of the domain `|x_i| ≤ half_width`, `t ∈ [t_min, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub half_width: f64,
    pub t_min: f64,
    pub t_max: f64,
}

/// Certifier settings; unset fields take the defaults of the target type.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifierSection {
    pub epsilon: Option<f64>,
    pub pairs: Option<usize>,
    pub seed: Option<u64>,
    pub height_tolerance: Option<f64>,
    pub triangles: Option<TriangleGrid>,
    pub pair_grid: Option<PairGrid>,
    pub divergence: Option<DivergenceSchedule>,
    pub verify_domain: Option<SampleDomain>,
}

impl CertifierSection {
    pub fn apply(&self, mut base: CertifierConfig) -> CertifierConfig {
        if let Some(v) = self.epsilon {
            base.epsilon = v;
        }
        if let Some(v) = self.pairs {
            base.pairs = v;
        }
        if let Some(v) = self.seed {
            base.seed = v;
        }
        if let Some(v) = self.height_tolerance {
            base.height_tolerance = v;
        }
        if let Some(v) = &self.triangles {
            base.triangles = v.clone();
        }
        if let Some(v) = &self.pair_grid {
            base.pair_grid = v.clone();
        }
        if let Some(v) = &self.divergence {
            base.divergence = v.clone();
        }
        if let Some(v) = self.verify_domain {
            base.verify_domain = v;
        }
        base
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    /// Box sizes of the sweep, increasing.
    pub sizes: Vec<f64>,
    pub points: usize,
    pub quadruples: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Random-pair comparison against the exact oracle for `pencil mesh`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossCheckSection {
    pub safe_box: SafeBox,
    pub pairs: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub model: ModelKind,
    /// Domain dimension `n` of the pencil (exact models).
    #[serde(default)]
    pub dim: Option<usize>,
    /// Target dimension `m` (exact models); defaults to `n`.
    #[serde(default)]
    pub target_dim: Option<usize>,
    /// Mesh resolution `h`.
    #[serde(default)]
    pub resolution: Option<f64>,
    #[serde(default)]
    pub stencil: Option<usize>,
    #[serde(default)]
    pub thickening: Option<f64>,
    /// Gluing of a square-tiled surface.
    #[serde(default)]
    pub surface: Option<GluingSpec>,
    #[serde(default)]
    pub leaf: Option<LeafConfig>,
    /// Sheets unfolded around each cone point.
    #[serde(default)]
    pub sheets: Option<usize>,
    /// Flat half-width of the cover strip around the leaf.
    #[serde(default)]
    pub width: Option<f64>,
    /// Mesh domain for `pencil mesh`; certification derives its own.
    #[serde(default, rename = "box")]
    pub domain_box: Option<BoxConfig>,
    /// Base dimension of a warped-plane mesh for `pencil mesh`: 1 meshes the
    /// vertical plane over a line, 2 the whole ℍ³ box.
    #[serde(default)]
    pub base_dim: Option<usize>,
    #[serde(default)]
    pub rays: Option<usize>,
    #[serde(default)]
    pub length: Option<usize>,
    #[serde(default)]
    pub spacing: Option<f64>,
    #[serde(default)]
    pub certifier: CertifierSection,
    #[serde(default)]
    pub probe: Option<ProbeSection>,
    #[serde(default)]
    pub cross_check: Option<CrossCheckSection>,
}

impl SceneConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("scene config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn require<T: Copy>(&self, value: Option<T>, name: &str) -> Result<T> {
        value.ok_or_else(|| Error::Config(format!("model {:?} needs `{name}`", self.model)))
    }

    pub fn resolution(&self) -> Result<f64> {
        let h = self.require(self.resolution, "resolution")?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config(format!("resolution {h} must be positive")));
        }
        Ok(h)
    }

    pub fn surface(&self) -> Result<SquareTiledSurface> {
        let spec = self
            .surface
            .clone()
            .ok_or_else(|| Error::Config("warped_cover needs `surface`".into()))?;
        SquareTiledSurface::from_spec(&spec).map_err(|e| Error::Config(format!("surface: {e}")))
    }

    pub fn leaf(&self) -> Result<Leaf> {
        let leaf = self.require(self.leaf, "leaf")?;
        let b = leaf.basepoint;
        let mut out = Leaf::golden(SurfacePoint {
            square: b.square,
            u: b.u,
            v: b.v,
        });
        if let Some(slope) = leaf.slope {
            out.slope = slope;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_cover_scene() {
        let cfg = SceneConfig::from_json(
            r#"{"model": "warped_cover", "resolution": 0.05,
                "surface": {"squares": 3, "right_glue": [1, 0, 2], "top_glue": [0, 2, 1]},
                "leaf": {"basepoint": {"square": 0, "u": 0.3, "v": 0.1}},
                "certifier": {"pairs": 10}}"#,
        )
        .unwrap();
        assert_eq!(cfg.model, ModelKind::WarpedCover);
        assert_eq!(cfg.surface().unwrap().genus().unwrap(), 2);
        assert!((cfg.leaf().unwrap().slope - 1.618033988749895).abs() < 1e-15);
        assert_eq!(cfg.certifier.apply(CertifierConfig::exact_defaults()).pairs, 10);
    }

    #[test]
    fn rejects_unknown_fields_and_models() {
        assert!(SceneConfig::from_json(r#"{"model": "exact_hyperbolic", "dimm": 2}"#).is_err());
        assert!(SceneConfig::from_json(r#"{"model": "teichmuller"}"#).is_err());
        let cfg = SceneConfig::from_json(r#"{"model": "warped_plane"}"#).unwrap();
        assert!(matches!(cfg.resolution(), Err(Error::Config(_))));
    }
}

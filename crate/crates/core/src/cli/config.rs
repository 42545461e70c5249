//! `PipelineConfig`: the JSON file driving `run`, `section` and `verify`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::convex::{ConvexBody, PolytopeJson};
use crate::nets::DualNorm;
use crate::smooth::NormSpec;
use crate::smoothing::{PipelineOptions, PriorityOptions, SampleCounts};
use crate::{RenormError, Result};

/// `"linf"`, `"l1"`, `"random-polytope(count, seed)"` or an explicit polytope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetSpec {
    Named(String),
    Polytope(PolytopeJson),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sabotage {
    #[serde(rename = "zero-net")]
    ZeroNet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SizeCaps {
    /// Largest net that may be enumerated.
    pub net_points: u64,
    /// Largest net whose slabs are written to `slabs.json`.
    pub slab_json: u64,
}

impl Default for SizeCaps {
    fn default() -> Self {
        Self {
            net_points: 1_000_000,
            slab_json: 20_000,
        }
    }
}

fn euclidean() -> NormSpec {
    NormSpec::Euclidean
}

fn unit_width() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dimension: usize,
    pub target: TargetSpec,
    #[serde(default = "euclidean")]
    pub base_norm: NormSpec,
    pub epsilon: f64,
    pub lambda1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<f64>,
    #[serde(default)]
    pub dual_norm: DualNorm,
    #[serde(default = "unit_width")]
    pub plane_width: f64,
    #[serde(default)]
    pub priority: PriorityOptions,
    #[serde(default)]
    pub samples: SampleCounts,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub size_caps: SizeCaps,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sabotage: Option<Sabotage>,
}

fn config_err(msg: impl Into<String>) -> RenormError {
    RenormError::Config(msg.into())
}

/// Parses `random-polytope(count, seed)`.
fn parse_random(name: &str) -> Option<(usize, u64)> {
    let inner = name.strip_prefix("random-polytope(")?.strip_suffix(')')?;
    let (count, seed) = inner.split_once(',')?;
    Some((count.trim().parse().ok()?, seed.trim().parse().ok()?))
}

impl PipelineConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| config_err(format!("malformed config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(config_err("dimension must be at least 2"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.125) {
            return Err(config_err(format!("epsilon must lie in (0, 1/8), got {}", self.epsilon)));
        }
        if !(self.lambda1 > 1.0 / 3.0 && self.lambda1 < 1.0) {
            return Err(config_err(format!("lambda1 must lie in (1/3, 1), got {}", self.lambda1)));
        }
        for (name, v) in [("a1", self.a1), ("perturbation", self.perturbation)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(config_err(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if !(self.plane_width > 0.0 && self.plane_width.is_finite()) {
            return Err(config_err("plane_width must be positive"));
        }
        if self.priority.max_slabs == 0 {
            return Err(config_err("priority.max_slabs must be positive"));
        }
        self.samples.validate().map_err(|e| config_err(e.to_string()))?;
        self.target_body()?;
        self.base_norm
            .build(self.dimension)
            .map_err(|e| config_err(format!("base norm: {e}")))?;
        Ok(())
    }

    /// The target unit ball.
    pub fn target_body(&self) -> Result<ConvexBody> {
        let d = self.dimension;
        let body = match &self.target {
            TargetSpec::Named(name) => match name.as_str() {
                "linf" => ConvexBody::cube(d),
                "l1" => ConvexBody::cross(d),
                other => match parse_random(other) {
                    Some((count, seed)) => ConvexBody::random_polytope(d, count, seed)
                        .map_err(|e| config_err(format!("target: {e}")))?,
                    None => return Err(config_err(format!("unknown target {other:?}"))),
                },
            },
            TargetSpec::Polytope(json) => {
                if json.dim != d {
                    return Err(config_err(format!("target dimension {} differs from {d}", json.dim)));
                }
                let body = ConvexBody::from_json(json).map_err(|e| config_err(format!("target: {e}")))?;
                if !matches!(body, ConvexBody::VPolytope { .. }) {
                    return Err(config_err("target must be given by vertices"));
                }
                body
            }
        };
        Ok(body)
    }

    pub fn options(&self) -> PipelineOptions {
        PipelineOptions {
            a1: self.a1,
            perturbation: self.perturbation,
            dual_norm: self.dual_norm,
            size_cap: self.size_caps.net_points,
            plane_width: self.plane_width,
            priority: self.priority,
            samples: self.samples,
            seed: self.seed,
            sabotage_zero_net: self.sabotage == Some(Sabotage::ZeroNet),
        }
    }
}

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featsel::SelectorParams;
use crate::fuzzy::{ClusterParams, Pruning};
use crate::keyfeat::SeedOrdering;
use crate::segmenters::{Polarity, SegmenterKind, SegmenterSpec};

/// Which images feed a self-configuration step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    All,
    Training,
}

/// Experiment configuration, read from TOML. Every key is optional:
///
/// ```toml
/// segmenter = "threshold"        # threshold | region_grow | srm
/// polarity = "dark"              # dark | bright
/// grid = [0.1, 0.2, 0.3]         # parameter grid, defaults per segmenter
/// default = 0.2                  # fixed-parameter baseline, must be on the grid
/// keep_largest = true            # thresholding keeps the largest component
/// seed = 7
/// runs = 10
/// train_fraction = 0.85          # unset: 30/5 for 35 images, else 85/15
/// selection_scope = "all"        # all | training
/// normalization_scope = "training"
/// seed_ordering = "response"     # response | descriptor_norm
/// eps_x = 0.3                    # pruning radius on normalized inputs
/// eps_o = 0.05                   # pruning radius on the parameter
/// fusion = ["region_grow", "srm"]
///
/// [selectors]
/// k = 5
/// clusters = 5
/// ridge = 0.5
///
/// [cluster]
/// radius = 0.5
/// squash = 1.25
/// accept = 0.5
/// reject = 0.15
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub segmenter: SegmenterKind,
    pub polarity: Polarity,
    pub grid: Option<Vec<f64>>,
    pub default: Option<f64>,
    pub keep_largest: bool,
    pub seed: u64,
    pub runs: usize,
    pub train_fraction: Option<f64>,
    pub selection_scope: Scope,
    pub normalization_scope: Scope,
    pub seed_ordering: SeedOrdering,
    pub eps_x: Option<f64>,
    pub eps_o: Option<f64>,
    /// Extra parents evolved alongside the main one and fused by STAPLE.
    pub fusion: Vec<SegmenterKind>,
    pub selectors: SelectorParams,
    pub cluster: ClusterParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            segmenter: SegmenterKind::Threshold,
            polarity: Polarity::Dark,
            grid: None,
            default: None,
            keep_largest: true,
            seed: 1,
            runs: 10,
            train_fraction: None,
            selection_scope: Scope::All,
            normalization_scope: Scope::Training,
            seed_ordering: SeedOrdering::Response,
            eps_x: None,
            eps_o: None,
            fusion: Vec::new(),
            selectors: SelectorParams::default(),
            cluster: ClusterParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec()?;
        if self.runs == 0 {
            return Err(Error::contract("runs must be at least 1"));
        }
        if let Some(f) = self.train_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::contract("train_fraction must lie in (0, 1)"));
            }
        }
        for (name, v) in [("eps_x", self.eps_x), ("eps_o", self.eps_o)] {
            if v.is_some_and(|v| !(v >= 0.0)) {
                return Err(Error::contract(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }

    /// Spec of the main parent with any grid and default overrides.
    pub fn spec(&self) -> Result<SegmenterSpec> {
        self.spec_for(self.segmenter)
    }

    /// Overrides apply to the main parent only.
    pub fn spec_for(&self, kind: SegmenterKind) -> Result<SegmenterSpec> {
        let mut spec = SegmenterSpec::for_kind(kind);
        if kind == self.segmenter {
            if let Some(grid) = &self.grid {
                spec.grid = grid.clone();
                if self.default.is_none() {
                    spec.default = spec.snap(SegmenterSpec::for_kind(kind).default);
                }
            }
            if let Some(d) = self.default {
                spec.default = d;
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn pruning(&self, input_dim: usize, spec: &SegmenterSpec) -> Pruning {
        let d = Pruning::defaults(input_dim, spec.hi() - spec.lo());
        Pruning {
            eps_x: self.eps_x.unwrap_or(d.eps_x),
            eps_o: self.eps_o.unwrap_or(d.eps_o),
        }
    }
}

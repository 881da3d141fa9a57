//! TOML run configuration shared by all subcommands.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::Grid;
use crate::detection::{DetectionConfig, Exclusion, DEFAULT_CUTOFF_A};
use crate::error::{Error, Result};
use crate::evaluation::{DeltaPolicy, PipelineConfig, SampleSize, StudyConfig};
use crate::process::ProcessSpec;
use crate::quadrature::QuadratureKind;
use crate::regression::{DEFAULT_K_MAX, DEFAULT_MAX_VARS};
use crate::response::ImpactModelSpec;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub data: Option<DataSection>,
    pub simulate: Option<SimulateSection>,
    pub process: Option<ProcessSpec>,
    pub model: Option<ImpactModelSpec>,
    pub detection: Option<DetectionSection>,
    pub regression: Option<RegressionSection>,
    pub study: Option<StudySection>,
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    pub max_missing: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n: usize,
    pub p: usize,
    #[serde(default)]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    pub delta: Option<f64>,
    pub delta_grid: Option<Vec<f64>>,
    pub exclusion: Option<Exclusion>,
    pub cutoff_a: Option<f64>,
    pub max_candidates: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionSection {
    pub k_max: Option<usize>,
    pub max_vars: Option<usize>,
    pub quadrature: Option<QuadratureKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub replications: usize,
    pub sizes: Vec<SampleSize>,
    #[serde(default)]
    pub delta: DeltaPolicy,
    #[serde(default = "yes")]
    pub parallel: bool,
    #[serde(default = "yes")]
    pub keep_records: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

impl RunConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |e: Error| Error::Config(e.to_string());
        if let Some(p) = &self.process {
            p.validate().map_err(bad)?;
        }
        if let Some(s) = &self.simulate {
            let grid = Grid::new(s.a, s.b, s.p).map_err(bad)?;
            if s.n == 0 {
                return Err(Error::Config("simulate.n must be positive".into()));
            }
            if let Some(m) = &self.model {
                m.validate(&grid).map_err(bad)?;
            }
            if let Some(p) = &self.process {
                p.validate_domain(&grid).map_err(bad)?;
            }
        }
        if let Some(d) = &self.detection {
            let probe = DetectionConfig {
                delta: d.delta.unwrap_or(0.1),
                exclusion: d.exclusion.unwrap_or_default(),
                cutoff_a: d.cutoff_a.unwrap_or(DEFAULT_CUTOFF_A),
                max_candidates: d.max_candidates,
            };
            probe.validate().map_err(bad)?;
            if let Some(g) = &d.delta_grid {
                if g.is_empty() || g.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::Config("delta_grid must hold positive values".into()));
                }
            }
        }
        if let Some(s) = &self.study {
            self.study_config()?;
            if s.sizes.is_empty() {
                return Err(Error::Config("study.sizes is empty".into()));
            }
        }
        Ok(())
    }

    fn detection_section(&self) -> DetectionSection {
        self.detection.clone().unwrap_or_default()
    }

    pub fn exclusion(&self) -> Option<Exclusion> {
        self.detection_section().exclusion
    }

    pub fn cutoff_a(&self) -> f64 {
        self.detection_section()
            .cutoff_a
            .unwrap_or(DEFAULT_CUTOFF_A)
    }

    pub fn k_max(&self) -> usize {
        self.regression
            .as_ref()
            .and_then(|r| r.k_max)
            .unwrap_or(DEFAULT_K_MAX)
    }

    pub fn max_vars(&self) -> usize {
        self.regression
            .as_ref()
            .and_then(|r| r.max_vars)
            .unwrap_or(DEFAULT_MAX_VARS)
    }

    pub fn quadrature(&self) -> QuadratureKind {
        self.regression
            .as_ref()
            .and_then(|r| r.quadrature)
            .unwrap_or_default()
    }

    /// Cross-validation settings; the window grid defaults to 146 values from
    /// 0.10 to 0.49 scaled to the domain width.
    pub fn pipeline(&self, grid: &Grid) -> PipelineConfig {
        let d = self.detection_section();
        let default = PipelineConfig::default();
        PipelineConfig {
            delta_grid: d.delta_grid.unwrap_or_else(|| {
                default
                    .delta_grid
                    .iter()
                    .map(|v| v * grid.width())
                    .collect()
            }),
            exclusion: d.exclusion.unwrap_or(Exclusion::DeltaLogDelta),
            cutoff_a: self.cutoff_a(),
            k_max: self.k_max(),
            max_vars: self.max_vars(),
            quadrature: self.quadrature(),
        }
    }

    /// Simulation study assembled from the `study`, `process`, `model`,
    /// `detection` and `regression` sections.
    pub fn study_config(&self) -> Result<StudyConfig> {
        let s = self
            .study
            .as_ref()
            .ok_or_else(|| Error::Config("missing [study] section".into()))?;
        let process = self
            .process
            .ok_or_else(|| Error::Config("missing [process] section".into()))?;
        let model = self
            .model
            .clone()
            .ok_or_else(|| Error::Config("missing [model] section".into()))?;
        let (a, b) = self.simulate.as_ref().map_or((0.0, 1.0), |s| (s.a, s.b));
        let cfg = StudyConfig {
            replications: s.replications,
            sizes: s.sizes.clone(),
            domain_a: a,
            domain_b: b,
            process,
            model,
            delta: s.delta,
            exclusion: self.exclusion().unwrap_or_default(),
            cutoff_a: self.cutoff_a(),
            k_max: self.k_max(),
            max_vars: self.max_vars(),
            quadrature: self.quadrature(),
            seed: self.seed.unwrap_or(0),
            parallel: s.parallel,
            keep_records: s.keep_records,
        };
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }
}

//! JSON reports. Each report carries a `report` tag and a format version so the
//! files in `schemas/` can check them.

use serde::Serialize;

use crate::data::Grid;
use crate::detection::DetectionResult;
use crate::error::{Error, Result};
use crate::evaluation::{CvReport, StudyReport};
use crate::io::LoadReport;
use crate::regression::{AugmentedFit, DeltaSkip};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Report<T: Serialize> {
    pub report: &'static str,
    pub format_version: u32,
    pub seed: Option<u64>,
    #[serde(flatten)]
    pub body: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(report: &'static str, seed: Option<u64>, body: T) -> Self {
        Self {
            report,
            format_version: FORMAT_VERSION,
            seed,
            body,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectBody {
    pub n: usize,
    pub p: usize,
    pub grid: Grid,
    pub load: Option<LoadReport>,
    pub result: DetectionResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitBody {
    pub n: usize,
    pub p: usize,
    pub grid: Grid,
    pub load: Option<LoadReport>,
    pub delta: Option<f64>,
    pub k_delta: Option<usize>,
    pub candidate_pool: Vec<f64>,
    pub best_bic_by_size: Vec<Option<f64>>,
    pub fits_evaluated: usize,
    pub singular_skipped: usize,
    pub skipped_deltas: Vec<DeltaSkip>,
    pub eigenvalues: Vec<f64>,
    pub fit: AugmentedFit,
}

#[derive(Debug, Clone, Serialize)]
pub struct CvBody {
    pub load: Option<LoadReport>,
    #[serde(flatten)]
    pub cv: CvReport,
}

pub fn detect_report(seed: Option<u64>, body: DetectBody) -> Report<DetectBody> {
    Report::new("detect", seed, body)
}

pub fn fit_report(seed: Option<u64>, body: FitBody) -> Report<FitBody> {
    Report::new("fit", seed, body)
}

pub fn cv_report(seed: Option<u64>, body: CvBody) -> Report<CvBody> {
    Report::new("cv", seed, body)
}

pub fn study_report(seed: Option<u64>, body: StudyReport) -> Report<StudyReport> {
    Report::new("study", seed, body)
}

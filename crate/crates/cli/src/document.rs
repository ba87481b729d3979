//! The JSON model file written by `fit` and `cv` and read by `predict`.
//!
//! Floats are written in their shortest round-trip form, so reading a file
//! and writing it again reproduces it byte for byte. Undefined CV values
//! (NaN) are stored as `null`.

use std::path::Path;

use fwelnet::{Aggregate, CoefficientPath, CvResult, Family, LambdaSelector, Metric};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{write_error, CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    ElasticNet,
    Fwelnet,
}

/// Settings the model was fitted with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigEcho {
    pub family: Family,
    pub alpha: f64,
    pub n_iter: usize,
    pub aggregate: Aggregate,
    pub n_lambda: usize,
    /// Ratio of the smallest to the largest lambda actually used.
    pub lambda_min_ratio: f64,
    pub standardize: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvSummary {
    pub metric: Metric,
    pub n_folds: usize,
    /// Whether every observation group fell in a single fold; absent when
    /// no groups were given.
    pub folds_respect_groups: Option<bool>,
    pub index_min: usize,
    pub index_1se: usize,
    pub lambda_min: f64,
    pub lambda_1se: f64,
    pub mean: Vec<Option<f64>>,
    pub se: Vec<Option<f64>>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl CvSummary {
    pub fn new(cv: &CvResult, n_folds: usize, folds_respect_groups: Option<bool>) -> Self {
        Self {
            metric: cv.metric,
            n_folds,
            folds_respect_groups,
            index_min: cv.index_min,
            index_1se: cv.index_1se,
            lambda_min: cv.lambda_min,
            lambda_1se: cv.lambda_1se,
            mean: cv.mean.iter().copied().map(finite).collect(),
            se: cv.se.iter().copied().map(finite).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub model: ModelKind,
    pub config: ConfigEcho,
    pub n_features: usize,
    pub feature_names: Option<Vec<String>>,
    pub theta: Option<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Aggregate objective before and after each accepted theta update.
    pub history: Vec<f64>,
    /// Lambda values on the scale the solver worked in (standardized columns
    /// unless standardization was turned off).
    pub lambdas: Vec<f64>,
    pub intercepts: Vec<f64>,
    /// `coefficients[i]`: coefficients on the original column scale at
    /// `lambdas[i]`.
    pub coefficients: Vec<Vec<f64>>,
    pub cv: Option<CvSummary>,
}

impl ModelDocument {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model documents always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let doc: Self = serde_json::from_str(text).map_err(|e| CliError::Data(format!("invalid model file: {e}")))?;
        doc.check()?;
        Ok(doc)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_json()).map_err(|e| write_error(path, e))
    }

    fn check(&self) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Data(format!(
                "model schema version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let m = self.lambdas.len();
        let p = self.n_features;
        if self.intercepts.len() != m
            || self.coefficients.len() != m
            || self.coefficients.iter().any(|c| c.len() != p)
            || self.weights.len() != p
        {
            return Err(CliError::Data(format!(
                "model file is inconsistent: {m} lambdas, {} intercepts, {} coefficient vectors, {p} features",
                self.intercepts.len(),
                self.coefficients.len()
            )));
        }
        Ok(())
    }

    /// The stored path as a library object.
    pub fn path(&self) -> CoefficientPath {
        let p = self.n_features;
        let m = self.lambdas.len();
        CoefficientPath {
            lambdas: self.lambdas.clone(),
            intercepts: self.intercepts.clone(),
            betas: Array2::from_shape_fn((p, m), |(j, i)| self.coefficients[i][j]),
            family: self.config.family,
        }
    }

    /// Path index picked by CV under the given rule.
    pub fn cv_selector(&self, one_se: bool) -> CliResult<LambdaSelector> {
        let cv = self
            .cv
            .as_ref()
            .ok_or_else(|| CliError::Usage("model has no CV summary; pass --lambda or --lambda-index".into()))?;
        Ok(LambdaSelector::Index(if one_se { cv.index_1se } else { cv.index_min }))
    }
}

/// Columns of a `p x m` path as per-lambda vectors.
pub fn path_columns(path: &CoefficientPath) -> Vec<Vec<f64>> {
    (0..path.len()).map(|i| path.beta(i)).collect()
}

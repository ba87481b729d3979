//! Two-response multi-task fitting: each response is refit with fwelnet
//! using the absolute coefficients of the other response as feature
//! information.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::cv::{cv_elastic_net, cv_fwelnet, CvResult, FoldAssignment, Metric};
use crate::data::{Dataset, Family};
use crate::error::{FwelnetError, Result};
use crate::fwelnet::{Aggregate, FeatureInfo, FwelnetConfig};
use crate::solver::{CoefficientPath, PathOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultitaskOptions {
    pub n_outer: usize,
    /// Shared path/solver settings; `path.solver.alpha` is the mix for every
    /// fit, including the initial elastic nets.
    pub fwelnet: FwelnetConfig,
    pub metric: Metric,
}

impl Default for MultitaskOptions {
    fn default() -> Self {
        Self {
            n_outer: 3,
            fwelnet: FwelnetConfig::default(),
            metric: Metric::Mse,
        }
    }
}

impl MultitaskOptions {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            fwelnet: FwelnetConfig {
                path: PathOptions::with_alpha(alpha),
                n_iter: 1,
                aggregate: Aggregate::Mean,
            },
            ..Self::default()
        }
    }
}

/// A coefficient vector with its intercept, on the original column scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFit {
    pub intercept: f64,
    pub beta: Vec<f64>,
    pub lambda: f64,
}

impl SelectedFit {
    fn at(path: &CoefficientPath, cv: &CvResult) -> Self {
        Self {
            intercept: path.intercepts[cv.index_min],
            beta: path.beta(cv.index_min),
            lambda: cv.lambda_min,
        }
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.beta.len() {
            return Err(FwelnetError::Dimension(format!(
                "X has {} columns, model has {} coefficients",
                x.ncols(),
                self.beta.len()
            )));
        }
        Ok(x.dot(&Array1::from(self.beta.clone())) + self.intercept)
    }
}

/// State after initialization (index 0) or after outer iteration `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultitaskSnapshot {
    pub response1: SelectedFit,
    pub response2: SelectedFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultitaskResult {
    pub response1: SelectedFit,
    pub response2: SelectedFit,
    /// `n_outer + 1` entries, starting with the elastic-net initialization.
    pub snapshots: Vec<MultitaskSnapshot>,
    pub cv1: CvResult,
    pub cv2: CvResult,
}

/// Feature information built from another response's coefficients:
/// `[|beta|, 1]`.
pub fn magnitude_z(beta: &[f64]) -> FeatureInfo {
    let p = beta.len();
    let z = Array2::from_shape_fn((p, 2), |(j, c)| if c == 0 { beta[j].abs() } else { 1.0 });
    FeatureInfo::new(z).expect("finite coefficients")
}

fn fwelnet_step(
    data: &Dataset,
    other: &SelectedFit,
    opts: &MultitaskOptions,
    folds: &FoldAssignment,
) -> Result<(SelectedFit, CvResult)> {
    let z = magnitude_z(&other.beta);
    let (model, cv) = cv_fwelnet(data, &z, &opts.fwelnet, opts.metric, folds)?;
    Ok((SelectedFit::at(&model.path, &cv), cv))
}

/// Alternating fwelnet fits for two Gaussian responses sharing `x`.
///
/// Both responses start from their CV-selected elastic-net solutions. Each
/// outer iteration refits response 2 with `Z = [|beta_1|, 1]`, then refits
/// response 1 with `Z = [|beta_2|, 1]` using the new `beta_2`. Every fit
/// selects `lambda_min` on the same folds.
pub fn multitask_fit(
    x: Array2<f64>,
    y1: Array1<f64>,
    y2: Array1<f64>,
    opts: &MultitaskOptions,
    folds: &FoldAssignment,
) -> Result<MultitaskResult> {
    let d1 = Dataset::new(x, y1, Family::Gaussian)?;
    let d2 = d1.with_response(y2)?;
    let path_opts = &opts.fwelnet.path;

    let (m1, mut cv1) = cv_elastic_net(&d1, None, path_opts, opts.metric, folds)?;
    let (m2, mut cv2) = cv_elastic_net(&d2, None, path_opts, opts.metric, folds)?;
    let mut r1 = SelectedFit::at(&m1.path, &cv1);
    let mut r2 = SelectedFit::at(&m2.path, &cv2);
    let mut snapshots = vec![MultitaskSnapshot {
        response1: r1.clone(),
        response2: r2.clone(),
    }];

    for k in 0..opts.n_outer {
        (r2, cv2) = fwelnet_step(&d2, &r1, opts, folds)?;
        (r1, cv1) = fwelnet_step(&d1, &r2, opts, folds)?;
        log::debug!(
            "outer iteration {}: {} and {} nonzero coefficients",
            k + 1,
            r1.beta.iter().filter(|b| **b != 0.0).count(),
            r2.beta.iter().filter(|b| **b != 0.0).count()
        );
        snapshots.push(MultitaskSnapshot {
            response1: r1.clone(),
            response2: r2.clone(),
        });
    }
    Ok(MultitaskResult {
        response1: r1,
        response2: r2,
        snapshots,
        cv1,
        cv2,
    })
}

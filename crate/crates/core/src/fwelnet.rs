//! Feature-weighted elastic net.
//!
//! Feature `j` gets the penalty factor
//!
//! ```text
//! w_j(theta) = sum_l exp(z_l' theta) / (p * exp(z_j' theta))
//! ```
//!
//! where `z_j` is row `j` of the side-information matrix `Z`. A single
//! `theta` shared by every lambda on the path is learned by alternating a
//! backtracking gradient step on `theta` (with the per-lambda gradients
//! combined by a component-wise mean or median) and a warm-started re-solve
//! of the whole path under the new penalty factors.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Family, LambdaSequence, StandardizationInfo};
use crate::error::{FwelnetError, Result};
use crate::solver::cd::Design;
use crate::solver::{
    fit_path, lambda_path, negative_log_likelihood, prepare, CoefficientPath, ElnetFit,
    LambdaSelector, PathOptions, PenaltyFactors, Prediction,
};

/// Side information about the features: one row per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureInfo {
    z: Array2<f64>,
    column_names: Option<Vec<String>>,
}

impl FeatureInfo {
    pub fn new(z: Array2<f64>) -> Result<Self> {
        if z.ncols() == 0 {
            return Err(FwelnetError::InvalidInput(
                "feature information needs at least one column".into(),
            ));
        }
        if let Some(((row, col), _)) = z.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(FwelnetError::NonFinite { what: "z", row, col });
        }
        Ok(Self {
            z,
            column_names: None,
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.k() {
            return Err(FwelnetError::Dimension(format!(
                "{} names for {} columns",
                names.len(),
                self.k()
            )));
        }
        self.column_names = Some(names);
        Ok(self)
    }

    /// A `p x 1` column of ones: carries no information about the features.
    pub fn constant(p: usize) -> Self {
        Self {
            z: Array2::ones((p, 1)),
            column_names: None,
        }
    }

    pub fn p(&self) -> usize {
        self.z.nrows()
    }

    pub fn k(&self) -> usize {
        self.z.ncols()
    }

    pub fn z(&self) -> ArrayView2<'_, f64> {
        self.z.view()
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }
}

/// Score coefficients `theta`, one per column of `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThetaVector(Vec<f64>);

impl ThetaVector {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(FwelnetError::InvalidInput("theta must be finite".into()));
        }
        Ok(Self(theta))
    }

    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_theta(zmat: &FeatureInfo, theta: &ThetaVector) -> Result<()> {
    if theta.len() != zmat.k() {
        return Err(FwelnetError::Dimension(format!(
            "theta has {} entries but Z has {} columns",
            theta.len(),
            zmat.k()
        )));
    }
    Ok(())
}

/// Feature scores `z_j' theta`.
pub fn scores(zmat: &FeatureInfo, theta: &ThetaVector) -> Result<Vec<f64>> {
    check_theta(zmat, theta)?;
    Ok(zmat
        .z
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(theta.as_slice()).map(|(a, b)| a * b).sum())
        .collect())
}

/// Largest log penalty factor; keeps factors finite when scores span more
/// than the exponent range.
const MAX_LOG_WEIGHT: f64 = 700.0;

/// Softmax-style quantities shared by the weights and their gradient.
struct WeightParts {
    weights: Vec<f64>,
    /// `exp(s_j - max s) / sum_l exp(s_l - max s)`
    probs: Vec<f64>,
}

fn weight_parts(scores: &[f64]) -> WeightParts {
    let p = scores.len() as f64;
    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
    let total: f64 = e.iter().sum();
    let log_total = total.ln();
    let weights = e
        .iter()
        .zip(scores)
        .map(|(&ej, &sj)| {
            let w = total / (p * ej);
            if w.is_finite() {
                w
            } else {
                (log_total - p.ln() - (sj - top)).min(MAX_LOG_WEIGHT).exp()
            }
        })
        .collect();
    let probs = e.iter().map(|ej| ej / total).collect();
    WeightParts { weights, probs }
}

/// Penalty factors `w(theta)`. Every factor is at least `1/p` and
/// `theta = 0` gives all ones.
pub fn penalty_weights(zmat: &FeatureInfo, theta: &ThetaVector) -> Result<PenaltyFactors> {
    let s = scores(zmat, theta)?;
    PenaltyFactors::new(weight_parts(&s).weights)
}

/// Per-feature penalty term `alpha |b| + (1 - alpha)/2 b^2`.
fn penalty_core(beta: &[f64], alpha: f64) -> Vec<f64> {
    beta.iter()
        .map(|b| alpha * b.abs() + 0.5 * (1.0 - alpha) * b * b)
        .collect()
}

/// Gradient in `theta` of the penalized objective at fixed `beta`:
///
/// `lambda * sum_j C_j * w_j * (zbar_k - z_jk)` with
/// `C_j = alpha |beta_j| + (1 - alpha)/2 beta_j^2` and `zbar` the
/// softmax(score)-weighted mean row of `Z`.
pub fn theta_gradient(
    zmat: &FeatureInfo,
    theta: &ThetaVector,
    beta: &[f64],
    lambda: f64,
    alpha: f64,
) -> Result<Vec<f64>> {
    if beta.len() != zmat.p() {
        return Err(FwelnetError::Dimension(format!(
            "beta has {} entries but Z has {} rows",
            beta.len(),
            zmat.p()
        )));
    }
    let s = scores(zmat, theta)?;
    let parts = weight_parts(&s);
    let c = penalty_core(beta, alpha);
    let z = &zmat.z;
    let mut grad = vec![0.0; zmat.k()];
    for (k, g) in grad.iter_mut().enumerate() {
        let col = z.column(k);
        // offsets from row 0 make constant columns contribute exactly zero
        let base = col[0];
        let zbar: f64 = col
            .iter()
            .zip(&parts.probs)
            .map(|(zj, pj)| pj * (zj - base))
            .sum();
        *g = lambda
            * c.iter()
                .zip(&parts.weights)
                .zip(col.iter())
                .filter(|((cj, _), _)| **cj != 0.0)
                .map(|((cj, wj), zj)| cj * wj * (zbar - (zj - base)))
                .sum::<f64>();
    }
    Ok(grad)
}

/// How per-lambda quantities are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Mean,
    Median,
}

impl std::str::FromStr for Aggregate {
    type Err = FwelnetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregate::Mean),
            "median" => Ok(Aggregate::Median),
            other => Err(FwelnetError::InvalidInput(format!(
                "unknown aggregate '{other}' (expected mean or median)"
            ))),
        }
    }
}

/// Mean or median of a nonempty slice. Even-length medians average the two
/// middle values.
pub fn aggregate(values: &[f64], mode: Aggregate) -> f64 {
    match mode {
        Aggregate::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Aggregate::Median => {
            let mut v = values.to_vec();
            v.sort_by(f64::total_cmp);
            let h = v.len() / 2;
            if v.len() % 2 == 1 {
                v[h]
            } else {
                0.5 * (v[h - 1] + v[h])
            }
        }
    }
}

/// Component-wise mean or median of the per-lambda gradients.
pub fn aggregate_gradient(grads: &[Vec<f64>], mode: Aggregate) -> Result<Vec<f64>> {
    let first = grads
        .first()
        .ok_or_else(|| FwelnetError::InvalidInput("no gradients to aggregate".into()))?;
    let k = first.len();
    if grads.iter().any(|g| g.len() != k) {
        return Err(FwelnetError::Dimension("gradients differ in length".into()));
    }
    let mut col = Vec::with_capacity(grads.len());
    Ok((0..k)
        .map(|c| {
            col.clear();
            col.extend(grads.iter().map(|g| g[c]));
            aggregate(&col, mode)
        })
        .collect())
}

pub const MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub theta: ThetaVector,
    /// Accepted step size (0 when rejected).
    pub eta: f64,
    pub accepted: bool,
    /// Objective at the returned theta.
    pub value: f64,
}

/// Backtracking line search along `-delta`.
///
/// Tries `eta = 1, 1/2, 1/4, ...` (at most 20 halvings) and accepts the
/// first step whose objective is strictly below the value at `theta`.
/// Otherwise `theta` is returned unchanged.
pub fn backtracking_step<F>(theta: &ThetaVector, delta: &[f64], mut objective: F) -> StepOutcome
where
    F: FnMut(&ThetaVector) -> f64,
{
    let base = objective(theta);
    let reject = StepOutcome {
        theta: theta.clone(),
        eta: 0.0,
        accepted: false,
        value: base,
    };
    if delta.iter().all(|d| *d == 0.0) {
        return reject;
    }
    let mut eta = 1.0;
    for _ in 0..=MAX_HALVINGS {
        let cand = ThetaVector(
            theta
                .as_slice()
                .iter()
                .zip(delta)
                .map(|(t, d)| t - eta * d)
                .collect(),
        );
        if cand.0.iter().all(|v| v.is_finite()) {
            let v = objective(&cand);
            if v < base {
                return StepOutcome {
                    theta: cand,
                    eta,
                    accepted: true,
                    value: v,
                };
            }
        }
        eta *= 0.5;
    }
    reject
}

/// Loss term and penalty cores at every point of a fixed path. Evaluating
/// the objective at a new theta only needs new penalty factors.
struct PathTerms {
    lambdas: Vec<f64>,
    loss: Vec<f64>,
    cores: Vec<Vec<f64>>,
}

impl PathTerms {
    fn new(data: &Dataset, path: &CoefficientPath, alpha: f64) -> Result<Self> {
        let design = Design::new(data.x());
        let y = data.y().to_vec();
        let mut eta = vec![0.0; data.n()];
        let mut loss = Vec::with_capacity(path.len());
        let mut cores = Vec::with_capacity(path.len());
        for i in 0..path.len() {
            let beta = path.beta(i);
            design.linear_predictor(&beta, path.intercepts[i], &mut eta);
            loss.push(negative_log_likelihood(data.family(), &y, &eta)?);
            cores.push(penalty_core(&beta, alpha));
        }
        Ok(Self {
            lambdas: path.lambdas.clone(),
            loss,
            cores,
        })
    }

    fn values(&self, weights: &[f64]) -> Vec<f64> {
        self.loss
            .iter()
            .zip(&self.cores)
            .zip(&self.lambdas)
            .map(|((l, c), lam)| {
                let pen: f64 = c
                    .iter()
                    .zip(weights)
                    .filter(|(cj, _)| **cj != 0.0)
                    .map(|(cj, w)| cj * w)
                    .sum();
                l + lam * pen
            })
            .collect()
    }

    fn aggregate(&self, weights: &[f64], mode: Aggregate) -> f64 {
        aggregate(&self.values(weights), mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwelnetConfig {
    /// Path and solver settings; `path.solver.alpha` is the elastic-net mix.
    pub path: PathOptions,
    /// Number of theta/path alternations.
    pub n_iter: usize,
    pub aggregate: Aggregate,
}

impl Default for FwelnetConfig {
    fn default() -> Self {
        Self {
            path: PathOptions::default(),
            n_iter: 1,
            aggregate: Aggregate::Mean,
        }
    }
}

impl FwelnetConfig {
    pub fn alpha(&self) -> f64 {
        self.path.solver.alpha
    }

    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            path: PathOptions::with_alpha(alpha),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct FwelnetModel {
    pub theta: ThetaVector,
    /// Final path on the standardized scale.
    pub fit: ElnetFit,
    pub weights: PenaltyFactors,
    /// Aggregate objective before the first update and after each accepted
    /// one.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub config: FwelnetConfig,
    pub info: StandardizationInfo,
    /// Final path on the original column scale.
    pub path: CoefficientPath,
}

impl FwelnetModel {
    pub fn predict(&self, x: ArrayView2<'_, f64>, sel: LambdaSelector) -> Result<Prediction> {
        self.path.predict(x, sel)
    }

    pub fn lambdas(&self) -> &LambdaSequence {
        &self.fit.lambda_seq
    }
}

fn check_z(data: &Dataset, zmat: &FeatureInfo) -> Result<()> {
    if zmat.p() != data.p() {
        return Err(FwelnetError::Dimension(format!(
            "Z has {} rows but X has {} columns",
            zmat.p(),
            data.p()
        )));
    }
    Ok(())
}

/// Fit fwelnet: plain elastic-net path first, then `n_iter` rounds of
/// (aggregated theta gradient, backtracking step, path re-solve). Stops early
/// when the line search finds no decrease.
pub fn fwelnet_fit(data: &Dataset, zmat: &FeatureInfo, cfg: &FwelnetConfig) -> Result<FwelnetModel> {
    check_z(data, zmat)?;
    let alpha = cfg.alpha();
    let solver = cfg.path.solver;
    let (prepared, info) = prepare(data, cfg.path.standardize);
    let ones = PenaltyFactors::ones(data.p());
    let lambdas = lambda_path(&prepared, &ones, &cfg.path)?;
    let mut fit = fit_path(&prepared, &ones, &solver, &lambdas, None)?;

    let mut theta = ThetaVector::zeros(zmat.k());
    let mut weights = ones;
    let mut terms = PathTerms::new(&prepared, &fit.path, alpha)?;
    let mut history = vec![terms.aggregate(weights.as_slice(), cfg.aggregate)];
    let mut iterations = 0;

    for _ in 0..cfg.n_iter {
        let grads = (0..fit.path.len())
            .into_par_iter()
            .map(|i| {
                theta_gradient(
                    zmat,
                    &theta,
                    &fit.path.beta(i),
                    fit.path.lambdas[i],
                    alpha,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let delta = aggregate_gradient(&grads, cfg.aggregate)?;
        let step = backtracking_step(&theta, &delta, |t| match penalty_weights(zmat, t) {
            Ok(w) => terms.aggregate(w.as_slice(), cfg.aggregate),
            Err(_) => f64::INFINITY,
        });
        if !step.accepted {
            log::debug!("line search found no decrease; stopping after {iterations} iterations");
            break;
        }
        theta = step.theta;
        weights = penalty_weights(zmat, &theta)?;
        fit = fit_path(&prepared, &weights, &solver, &lambdas, Some(&fit.path))?;
        terms = PathTerms::new(&prepared, &fit.path, alpha)?;
        history.push(terms.aggregate(weights.as_slice(), cfg.aggregate));
        iterations += 1;
    }
    if !fit.all_converged() {
        log::warn!("some path points did not converge");
    }
    let path = fit.destandardize(&info)?;
    Ok(FwelnetModel {
        theta,
        fit,
        weights,
        history,
        iterations,
        config: cfg.clone(),
        info,
        path,
    })
}

/// [`fwelnet_fit`] for binomial data. The theta gradient only involves the
/// penalty, so the procedure is unchanged apart from the loss.
pub fn fwelnet_fit_glm(
    data: &Dataset,
    zmat: &FeatureInfo,
    cfg: &FwelnetConfig,
) -> Result<FwelnetModel> {
    if data.family() != Family::Binomial {
        return Err(FwelnetError::InvalidInput(
            "fwelnet_fit_glm expects a binomial dataset".into(),
        ));
    }
    fwelnet_fit(data, zmat, cfg)
}

/// Result of the per-lambda alternating minimization.
#[derive(Debug, Clone)]
pub struct PerLambdaFit {
    pub lambdas: LambdaSequence,
    pub thetas: Vec<ThetaVector>,
    /// Standardized-scale solutions.
    pub fit_path: CoefficientPath,
    /// Original-scale solutions.
    pub path: CoefficientPath,
    /// Accepted theta updates at each lambda.
    pub iterations: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerLambdaOptions {
    pub max_iter: usize,
    /// Stop when the objective changes by less than this fraction.
    pub rel_tol: f64,
}

impl Default for PerLambdaOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            rel_tol: 1e-6,
        }
    }
}

/// Comparison mode: a separate theta for every lambda, each found by
/// alternating a backtracking theta step with a single-lambda re-solve.
pub fn fwelnet_fit_per_lambda(
    data: &Dataset,
    zmat: &FeatureInfo,
    cfg: &FwelnetConfig,
    opts: PerLambdaOptions,
) -> Result<PerLambdaFit> {
    check_z(data, zmat)?;
    let alpha = cfg.alpha();
    let solver = cfg.path.solver;
    let (prepared, info) = prepare(data, cfg.path.standardize);
    let ones = PenaltyFactors::ones(data.p());
    let lambdas = lambda_path(&prepared, &ones, &cfg.path)?;
    let init = fit_path(&prepared, &ones, &solver, &lambdas, None)?;

    let m = lambdas.len();
    let p = data.p();
    let mut betas = Array2::zeros((p, m));
    let mut intercepts = Vec::with_capacity(m);
    let mut thetas = Vec::with_capacity(m);
    let mut iterations = Vec::with_capacity(m);

    for i in 0..m {
        let single = LambdaSequence::from_values(vec![lambdas.values[i]])?;
        let mut current = CoefficientPath {
            lambdas: single.values.clone(),
            intercepts: vec![init.path.intercepts[i]],
            betas: init.path.betas.slice(ndarray::s![.., i..i + 1]).to_owned(),
            family: init.path.family,
        };
        let mut theta = ThetaVector::zeros(zmat.k());
        let mut weights = ones.clone();
        let mut count = 0;
        for _ in 0..opts.max_iter {
            let terms = PathTerms::new(&prepared, &current, alpha)?;
            let before = terms.aggregate(weights.as_slice(), cfg.aggregate);
            let grad = theta_gradient(zmat, &theta, &current.beta(0), single.values[0], alpha)?;
            let delta = aggregate_gradient(&[grad], cfg.aggregate)?;
            let step = backtracking_step(&theta, &delta, |t| match penalty_weights(zmat, t) {
                Ok(w) => terms.aggregate(w.as_slice(), cfg.aggregate),
                Err(_) => f64::INFINITY,
            });
            if !step.accepted {
                break;
            }
            theta = step.theta;
            weights = penalty_weights(zmat, &theta)?;
            current = fit_path(&prepared, &weights, &solver, &single, Some(&current))?.path;
            count += 1;
            let after = PathTerms::new(&prepared, &current, alpha)?
                .aggregate(weights.as_slice(), cfg.aggregate);
            if (before - after).abs() <= opts.rel_tol * before.abs() {
                break;
            }
        }
        betas.column_mut(i).assign(&current.betas.column(0));
        intercepts.push(current.intercepts[0]);
        thetas.push(theta);
        iterations.push(count);
    }
    let std_path = CoefficientPath {
        lambdas: lambdas.values.clone(),
        intercepts,
        betas,
        family: data.family(),
    };
    let holder = ElnetFit {
        lambda_seq: lambdas.clone(),
        path: std_path.clone(),
        objective: Vec::new(),
        n_passes: Vec::new(),
        converged: Vec::new(),
        saturated_at: None,
    };
    let path = holder.destandardize(&info)?;
    Ok(PerLambdaFit {
        lambdas,
        thetas,
        fit_path: std_path,
        path,
        iterations,
    })
}

//! Weighted elastic-net path solver.
//!
//! Solves, for every lambda on a decreasing path,
//!
//! ```text
//! minimize  loss(b0, beta) + lambda * sum_j w_j * (alpha * |beta_j| + (1 - alpha) / 2 * beta_j^2)
//! ```
//!
//! where the loss is half the residual sum of squares (Gaussian) or the
//! negative log-likelihood (binomial). Solutions are computed by cyclic
//! coordinate descent, warm-started from the previous lambda or from a
//! supplied path.

mod binomial;
pub(crate) mod cd;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{
    default_min_ratio, destandardize, make_lambda_sequence, standardize, Dataset, Family,
    LambdaSequence, StandardizationInfo,
};
use crate::error::{FwelnetError, Result};

pub use binomial::fit_path_binomial;
use cd::{CdProblem, Design, Penalty};

/// Per-feature penalty multipliers `w_j >= 0`. A zero entry leaves the
/// feature unpenalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PenaltyFactors(Vec<f64>);

impl PenaltyFactors {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some((j, v)) = w.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(FwelnetError::InvalidInput(format!(
                "penalty factor {j} is {v}; factors must be finite and nonnegative"
            )));
        }
        Ok(Self(w))
    }

    pub fn ones(p: usize) -> Self {
        Self(vec![1.0; p])
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

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    /// Largest absolute (standardized) coefficient change allowed in a
    /// converged full pass.
    pub tol: f64,
    pub max_passes: usize,
    /// Binomial only: maximum quadratic-approximation rounds per lambda.
    pub max_outer: usize,
    /// Binomial only: deviance change, relative to the null deviance, below
    /// which the outer loop stops.
    pub outer_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            tol: 1e-7,
            max_passes: 100_000,
            max_outer: 25,
            outer_tol: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(FwelnetError::InvalidInput(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(FwelnetError::InvalidInput("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Intercepts and coefficients along a lambda path. Column `i` of `betas`
/// is the solution at `lambdas[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPath {
    pub lambdas: Vec<f64>,
    pub intercepts: Vec<f64>,
    pub betas: Array2<f64>,
    pub family: Family,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSelector {
    Index(usize),
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Linear predictor.
    pub eta: Array1<f64>,
    /// Fitted probabilities (binomial only).
    pub prob: Option<Array1<f64>>,
}

impl CoefficientPath {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn p(&self) -> usize {
        self.betas.nrows()
    }

    pub fn beta(&self, i: usize) -> Vec<f64> {
        self.betas.column(i).to_vec()
    }

    /// Resolve a selector to a path index. Values match the nearest path
    /// lambda within a relative distance of 1e-9.
    pub fn resolve(&self, sel: LambdaSelector) -> Result<usize> {
        match sel {
            LambdaSelector::Index(i) if i < self.len() => Ok(i),
            LambdaSelector::Index(i) => Err(FwelnetError::InvalidInput(format!(
                "lambda index {i} out of range for a path of length {}",
                self.len()
            ))),
            LambdaSelector::Value(v) => {
                let (i, d) = self
                    .lambdas
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (i, (l - v).abs()))
                    .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
                let scale = v.abs().max(self.lambdas[i].abs());
                if d <= 1e-9 * scale {
                    Ok(i)
                } else {
                    Err(FwelnetError::LambdaNotOnPath(v))
                }
            }
        }
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>, sel: LambdaSelector) -> Result<Prediction> {
        if x.ncols() != self.p() {
            return Err(FwelnetError::Dimension(format!(
                "model has {} features but new data has {} columns",
                self.p(),
                x.ncols()
            )));
        }
        let i = self.resolve(sel)?;
        let eta = x.dot(&self.betas.column(i)) + self.intercepts[i];
        let prob = match self.family {
            Family::Gaussian => None,
            Family::Binomial => Some(eta.mapv(sigmoid)),
        };
        Ok(Prediction { eta, prob })
    }

    /// Linear predictors for every path point, `n x m`.
    pub fn predict_all(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.p() {
            return Err(FwelnetError::Dimension(format!(
                "model has {} features but new data has {} columns",
                self.p(),
                x.ncols()
            )));
        }
        let mut eta = x.dot(&self.betas);
        for (mut row_col, b0) in eta.columns_mut().into_iter().zip(&self.intercepts) {
            row_col += *b0;
        }
        Ok(eta)
    }
}

/// A fitted path on the (standardized) scale the solver worked in.
#[derive(Debug, Clone)]
pub struct ElnetFit {
    pub lambda_seq: LambdaSequence,
    pub path: CoefficientPath,
    /// Penalized objective at each path point.
    pub objective: Vec<f64>,
    pub n_passes: Vec<usize>,
    pub converged: Vec<bool>,
    /// Binomial: first path index at which coefficients diverged (perfect
    /// separation). Later points repeat the last finite solution.
    pub saturated_at: Option<usize>,
}

impl ElnetFit {
    pub fn intercepts(&self) -> &[f64] {
        &self.path.intercepts
    }

    pub fn betas(&self) -> &Array2<f64> {
        &self.path.betas
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|c| *c)
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>, sel: LambdaSelector) -> Result<Prediction> {
        self.path.predict(x, sel)
    }

    /// Express the path on the original column scale.
    pub fn destandardize(&self, info: &StandardizationInfo) -> Result<CoefficientPath> {
        let p = self.path.p();
        let m = self.path.len();
        let mut betas = Array2::zeros((p, m));
        let mut intercepts = Vec::with_capacity(m);
        for i in 0..m {
            let col = self.path.betas.column(i).to_vec();
            let (b, b0) = destandardize(&col, self.path.intercepts[i], info)?;
            betas.column_mut(i).assign(&Array1::from(b));
            intercepts.push(b0);
        }
        Ok(CoefficientPath {
            lambdas: self.path.lambdas.clone(),
            intercepts,
            betas,
            family: self.path.family,
        })
    }
}

/// `sign(u) * max(|u| - t, 0)`.
pub fn soft_threshold(u: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if u > t {
        u - t
    } else if u < -t {
        u + t
    } else {
        0.0
    }
}

pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(eta))` without overflow.
pub(crate) fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

/// Gaussian: `0.5 * sum (y - eta)^2`. Binomial: `sum log(1 + e^eta) - y * eta`.
pub fn negative_log_likelihood(family: Family, y: &[f64], eta: &[f64]) -> Result<f64> {
    if y.len() != eta.len() {
        return Err(FwelnetError::Dimension(format!(
            "{} responses but {} linear predictors",
            y.len(),
            eta.len()
        )));
    }
    Ok(match family {
        Family::Gaussian => 0.5 * y.iter().zip(eta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
        // (1 - y) softplus(eta) + y softplus(-eta) == softplus(eta) - y eta
        Family::Binomial => y
            .iter()
            .zip(eta)
            .map(|(&yi, &e)| (1.0 - yi) * softplus(e) + yi * softplus(-e))
            .sum(),
    })
}

/// Penalized objective of `(b0, beta)` at one lambda.
pub fn objective(
    data: &Dataset,
    factors: &PenaltyFactors,
    alpha: f64,
    lambda: f64,
    beta: &[f64],
    b0: f64,
) -> Result<f64> {
    let design = Design::new(data.x());
    let mut eta = vec![0.0; data.n()];
    design.linear_predictor(beta, b0, &mut eta);
    let y = data.y().to_vec();
    let loss = negative_log_likelihood(data.family(), &y, &eta)?;
    let pen = Penalty {
        lambda,
        alpha,
        factors: factors.as_slice(),
    };
    Ok(loss + pen.value(beta))
}

fn check_inputs(
    data: &Dataset,
    factors: &PenaltyFactors,
    config: &SolverConfig,
    lambdas: &LambdaSequence,
    warm: Option<&CoefficientPath>,
) -> Result<()> {
    config.validate()?;
    if factors.len() != data.p() {
        return Err(FwelnetError::Dimension(format!(
            "{} penalty factors for {} features",
            factors.len(),
            data.p()
        )));
    }
    if lambdas.is_empty() || lambdas.values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(FwelnetError::InvalidInput(
            "lambda sequence must be nonempty and strictly decreasing".into(),
        ));
    }
    if let Some(w) = warm {
        if w.len() != lambdas.len() || w.p() != data.p() {
            return Err(FwelnetError::Dimension(format!(
                "warm start path is {}x{}, expected {}x{}",
                w.p(),
                w.len(),
                data.p(),
                lambdas.len()
            )));
        }
    }
    Ok(())
}

/// Solve the weighted elastic net along `lambdas`.
///
/// `data` is used as given (standardize it first if desired). Without a warm
/// path, each lambda starts from the previous solution; with one, lambda `i`
/// starts from column `i` of `warm`.
pub fn fit_path(
    data: &Dataset,
    factors: &PenaltyFactors,
    config: &SolverConfig,
    lambdas: &LambdaSequence,
    warm: Option<&CoefficientPath>,
) -> Result<ElnetFit> {
    check_inputs(data, factors, config, lambdas, warm)?;
    if data.family() == Family::Binomial {
        return binomial::solve_path(data, factors, config, lambdas, warm);
    }
    let n = data.n();
    let p = data.p();
    let m = lambdas.len();
    let design = Design::new(data.x());
    let prob = CdProblem::new(&design, None);
    let y = data.y().to_vec();

    let mut beta = vec![0.0; p];
    let mut b0 = 0.0;
    let mut resid = y.clone();
    let mut eta = vec![0.0; n];

    let mut betas = Array2::zeros((p, m));
    let mut intercepts = Vec::with_capacity(m);
    let mut objective = Vec::with_capacity(m);
    let mut n_passes = Vec::with_capacity(m);
    let mut converged = Vec::with_capacity(m);

    for (i, &lambda) in lambdas.values.iter().enumerate() {
        if let Some(w) = warm {
            beta.copy_from_slice(&w.beta(i));
            b0 = w.intercepts[i];
            design.linear_predictor(&beta, b0, &mut eta);
            for ((r, yi), e) in resid.iter_mut().zip(&y).zip(&eta) {
                *r = yi - e;
            }
        }
        let pen = Penalty {
            lambda,
            alpha: config.alpha,
            factors: factors.as_slice(),
        };
        let out = cd::solve(
            &prob,
            &pen,
            &mut beta,
            &mut b0,
            &mut resid,
            config.tol,
            config.max_passes,
        );
        if !out.converged {
            log::warn!("coordinate descent hit {} passes at lambda {lambda}", config.max_passes);
        }
        let rss = 0.5 * resid.iter().map(|r| r * r).sum::<f64>();
        objective.push(rss + pen.value(&beta));
        betas.column_mut(i).assign(&Array1::from(beta.clone()));
        intercepts.push(b0);
        n_passes.push(out.passes);
        converged.push(out.converged);
    }
    Ok(ElnetFit {
        lambda_seq: lambdas.clone(),
        path: CoefficientPath {
            lambdas: lambdas.values.clone(),
            intercepts,
            betas,
            family: Family::Gaussian,
        },
        objective,
        n_passes,
        converged,
        saturated_at: None,
    })
}

/// Largest KKT residual at each path point, divided by `n`.
///
/// For an active coordinate the residual is
/// `|x_j'r - lambda w_j (1 - alpha) beta_j - lambda w_j alpha sign(beta_j)|`;
/// for a zero coordinate it is the excess of `|x_j'r|` over
/// `lambda w_j alpha`. The intercept contributes `|sum r|`. Here `r` is
/// `y - eta` (Gaussian) or `y - sigmoid(eta)` (binomial).
pub fn kkt_violation(
    fit: &ElnetFit,
    data: &Dataset,
    factors: &PenaltyFactors,
    alpha: f64,
) -> Result<Vec<f64>> {
    if fit.path.p() != data.p() || factors.len() != data.p() {
        return Err(FwelnetError::Dimension(
            "fit, data and penalty factors disagree on the number of features".into(),
        ));
    }
    let n = data.n();
    let design = Design::new(data.x());
    let y = data.y().to_vec();
    let w = factors.as_slice();
    let mut eta = vec![0.0; n];
    let mut out = Vec::with_capacity(fit.path.len());
    for (i, &lambda) in fit.path.lambdas.iter().enumerate() {
        let beta = fit.path.beta(i);
        design.linear_predictor(&beta, fit.path.intercepts[i], &mut eta);
        let resid: Vec<f64> = match data.family() {
            Family::Gaussian => y.iter().zip(&eta).map(|(a, b)| a - b).collect(),
            Family::Binomial => y.iter().zip(&eta).map(|(a, b)| a - sigmoid(*b)).collect(),
        };
        let mut worst = resid.iter().sum::<f64>().abs();
        for j in 0..data.p() {
            let xj = design.col(j);
            if xj.iter().all(|v| *v == 0.0) {
                continue;
            }
            let g = cd::dot(xj, &resid) - lambda * w[j] * (1.0 - alpha) * beta[j];
            let t = lambda * w[j] * alpha;
            let v = if beta[j] != 0.0 {
                (g - t * beta[j].signum()).abs()
            } else {
                (g.abs() - t).max(0.0)
            };
            worst = worst.max(v);
        }
        out.push(worst / n as f64);
    }
    Ok(out)
}

/// Options for fitting a full path from raw data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathOptions {
    pub solver: SolverConfig,
    pub n_lambda: usize,
    /// `None` picks 0.01 when `n < p`, else 1e-4.
    pub min_ratio: Option<f64>,
    /// Fixed lambda values (on the standardized scale); overrides
    /// `n_lambda`/`min_ratio`.
    pub lambdas: Option<Vec<f64>>,
    pub standardize: bool,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            n_lambda: 100,
            min_ratio: None,
            lambdas: None,
            standardize: true,
        }
    }
}

impl PathOptions {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            solver: SolverConfig::with_alpha(alpha),
            ..Self::default()
        }
    }
}

/// Standardize (or not) according to `standardize`.
pub fn prepare(data: &Dataset, standardize_columns: bool) -> (Dataset, StandardizationInfo) {
    if standardize_columns {
        standardize(data)
    } else {
        (data.clone(), StandardizationInfo::identity(data.p()))
    }
}

/// Lambda path for prepared data, honoring fixed values in `opts`.
pub fn lambda_path(
    prepared: &Dataset,
    factors: &PenaltyFactors,
    opts: &PathOptions,
) -> Result<LambdaSequence> {
    if let Some(v) = &opts.lambdas {
        return LambdaSequence::from_values(v.clone());
    }
    let y = prepared.y();
    let ybar = y.sum() / y.len() as f64;
    let y_work = y.mapv(|v| v - ybar);
    let min_ratio = opts
        .min_ratio
        .unwrap_or_else(|| default_min_ratio(prepared.n(), prepared.p()));
    make_lambda_sequence(
        prepared.x(),
        y_work.view(),
        factors.as_slice(),
        opts.solver.alpha,
        opts.n_lambda,
        min_ratio,
    )
}

/// An elastic-net path fitted from raw data.
#[derive(Debug, Clone)]
pub struct ElnetModel {
    pub fit: ElnetFit,
    pub info: StandardizationInfo,
    pub factors: PenaltyFactors,
    /// The path on the original column scale.
    pub path: CoefficientPath,
}

/// Standardize, build the lambda path and solve. `factors` defaults to all
/// ones.
pub fn fit_elastic_net(
    data: &Dataset,
    factors: Option<&PenaltyFactors>,
    opts: &PathOptions,
) -> Result<ElnetModel> {
    let factors = factors.cloned().unwrap_or_else(|| PenaltyFactors::ones(data.p()));
    let (prepared, info) = prepare(data, opts.standardize);
    let lambdas = lambda_path(&prepared, &factors, opts)?;
    let fit = fit_path(&prepared, &factors, &opts.solver, &lambdas, None)?;
    let path = fit.destandardize(&info)?;
    Ok(ElnetModel {
        fit,
        info,
        factors,
        path,
    })
}

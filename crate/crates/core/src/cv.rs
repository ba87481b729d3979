//! Grouped k-fold cross-validation over a lambda path.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Family};
use crate::error::{FwelnetError, Result};
use crate::solver::{
    fit_elastic_net, lambda_path, negative_log_likelihood, prepare, CoefficientPath, ElnetModel,
    PathOptions, PenaltyFactors,
};
use crate::fwelnet::{fwelnet_fit, FeatureInfo, FwelnetConfig, FwelnetModel};

/// Fold label for every observation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
}

impl FoldAssignment {
    /// Row indices (training, held-out) for fold `f`.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..self.fold_of.len()).partition(|&i| self.fold_of[i] == f);
        (train, test)
    }

    /// True when every group id maps to exactly one fold.
    pub fn respects_groups(&self, groups: &[i64]) -> bool {
        let mut seen: BTreeMap<i64, usize> = BTreeMap::new();
        groups
            .iter()
            .zip(&self.fold_of)
            .all(|(g, f)| *seen.entry(*g).or_insert(*f) == *f)
    }
}

/// Shuffle observations (or whole groups) with a seeded generator and deal
/// them round-robin into `k` folds.
pub fn make_folds(n: usize, k: usize, groups: Option<&[i64]>, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(FwelnetError::InvalidInput(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; n];
    match groups {
        None => {
            if k > n {
                return Err(FwelnetError::InvalidInput(format!(
                    "{k} folds requested for {n} observations"
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            for (pos, i) in order.into_iter().enumerate() {
                fold_of[i] = pos % k;
            }
        }
        Some(g) => {
            if g.len() != n {
                return Err(FwelnetError::Dimension(format!(
                    "{} group ids for {n} observations",
                    g.len()
                )));
            }
            let mut ids: Vec<i64> = g.to_vec();
            ids.sort_unstable();
            ids.dedup();
            if k > ids.len() {
                return Err(FwelnetError::InvalidInput(format!(
                    "{k} folds requested but only {} distinct groups",
                    ids.len()
                )));
            }
            ids.shuffle(&mut rng);
            let fold_of_group: BTreeMap<i64, usize> =
                ids.into_iter().enumerate().map(|(pos, id)| (id, pos % k)).collect();
            for (f, id) in fold_of.iter_mut().zip(g) {
                *f = fold_of_group[id];
            }
        }
    }
    Ok(FoldAssignment { fold_of, k })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mse,
    Deviance,
    Auc,
}

impl Metric {
    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Auc)
    }
}

impl std::str::FromStr for Metric {
    type Err = FwelnetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(Metric::Mse),
            "deviance" => Ok(Metric::Deviance),
            "auc" => Ok(Metric::Auc),
            other => Err(FwelnetError::InvalidInput(format!(
                "unknown metric '{other}' (expected mse, deviance or auc)"
            ))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Mse => "mse",
            Metric::Deviance => "deviance",
            Metric::Auc => "auc",
        })
    }
}

/// Area under the ROC curve (Mann-Whitney statistic, ties count one half).
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(FwelnetError::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // midranks
    let mut rank = vec![0.0; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let r = 0.5 * (i + j) as f64 + 1.0;
        for &t in &idx[i..=j] {
            rank[t] = r;
        }
        i = j + 1;
    }
    let n_pos = labels.iter().filter(|l| **l == 1.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(FwelnetError::InvalidInput(
            "AUC needs both classes among the labels".into(),
        ));
    }
    let rank_sum: f64 = rank
        .iter()
        .zip(labels)
        .filter(|(_, l)| **l == 1.0)
        .map(|(r, _)| r)
        .sum();
    let (np, nn) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

fn sigmoid(e: f64) -> f64 {
    if e >= 0.0 {
        1.0 / (1.0 + (-e).exp())
    } else {
        let t = e.exp();
        t / (1.0 + t)
    }
}

/// Metric of held-out linear predictors `eta` against `y`. `None` when
/// undefined (AUC on a single-class fold).
pub fn evaluate(metric: Metric, family: Family, y: &[f64], eta: &[f64]) -> Result<Option<f64>> {
    let n = y.len() as f64;
    Ok(match (metric, family) {
        (Metric::Mse, Family::Gaussian) | (Metric::Deviance, Family::Gaussian) => Some(
            y.iter().zip(eta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n,
        ),
        (Metric::Mse, Family::Binomial) => Some(
            y.iter()
                .zip(eta)
                .map(|(a, b)| (a - sigmoid(*b)) * (a - sigmoid(*b)))
                .sum::<f64>()
                / n,
        ),
        (Metric::Deviance, Family::Binomial) => {
            Some(2.0 * negative_log_likelihood(Family::Binomial, y, eta)? / n)
        }
        (Metric::Auc, Family::Binomial) => auc(eta, y).ok(),
        (Metric::Auc, Family::Gaussian) => {
            return Err(FwelnetError::InvalidInput(
                "AUC requires a binomial response".into(),
            ))
        }
    })
}

/// Per-lambda cross-validated metric with fold standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub metric: Metric,
    pub lambdas: Vec<f64>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    pub index_min: usize,
    pub index_1se: usize,
    pub lambda_min: f64,
    pub lambda_1se: f64,
    /// `fold_metrics[f][i]`: metric of fold `f` at lambda `i` (NaN when
    /// undefined).
    pub fold_metrics: Vec<Vec<f64>>,
}

impl CvResult {
    /// Summarize a `folds x lambdas` metric table. Undefined (NaN) entries are
    /// left out of the mean and standard error.
    pub fn from_fold_metrics(metric: Metric, lambdas: Vec<f64>, fold_metrics: Vec<Vec<f64>>) -> Result<Self> {
        let m = lambdas.len();
        let mut mean = Vec::with_capacity(m);
        let mut se = Vec::with_capacity(m);
        for i in 0..m {
            let vals: Vec<f64> = fold_metrics.iter().map(|f| f[i]).filter(|v| !v.is_nan()).collect();
            let k = vals.len() as f64;
            if vals.is_empty() {
                mean.push(f64::NAN);
                se.push(f64::NAN);
                continue;
            }
            let mu = vals.iter().sum::<f64>() / k;
            let sd = if vals.len() > 1 {
                (vals.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (k - 1.0)).sqrt()
            } else {
                0.0
            };
            mean.push(mu);
            se.push(sd / k.sqrt());
        }
        let better = |a: f64, b: f64| if metric.higher_is_better() { a > b } else { a < b };
        let index_min = (0..m)
            .filter(|&i| !mean[i].is_nan())
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if !better(mean[i], mean[b]) => Some(b),
                _ => Some(i),
            })
            .ok_or_else(|| FwelnetError::Numerical("metric undefined at every lambda".into()))?;
        let bound = if metric.higher_is_better() {
            mean[index_min] - se[index_min]
        } else {
            mean[index_min] + se[index_min]
        };
        let index_1se = (0..=index_min)
            .find(|&i| {
                !mean[i].is_nan()
                    && if metric.higher_is_better() {
                        mean[i] >= bound
                    } else {
                        mean[i] <= bound
                    }
            })
            .unwrap_or(index_min);
        Ok(Self {
            metric,
            lambda_min: lambdas[index_min],
            lambda_1se: lambdas[index_1se],
            lambdas,
            mean,
            se,
            index_min,
            index_1se,
            fold_metrics,
        })
    }
}

/// Cross-validate a path-fitting procedure over the full-data `lambdas`.
///
/// The objective carries no `1/n`, so a lambda fitted on `n_train` rows is
/// comparable to `lambda * n_train / n` on the full data. `fit` receives a
/// training split and the rescaled lambdas, and must return a path over them
/// on the original column scale. Folds run in parallel.
pub fn cross_validate<F>(
    data: &Dataset,
    metric: Metric,
    folds: &FoldAssignment,
    lambdas: &[f64],
    fit: F,
) -> Result<CvResult>
where
    F: Fn(&Dataset, &[f64]) -> Result<CoefficientPath> + Sync,
{
    if metric == Metric::Auc && data.family() != Family::Binomial {
        return Err(FwelnetError::InvalidInput("AUC requires a binomial response".into()));
    }
    if folds.fold_of.len() != data.n() {
        return Err(FwelnetError::Dimension(format!(
            "fold assignment covers {} rows, data has {}",
            folds.fold_of.len(),
            data.n()
        )));
    }
    let per_fold: Vec<Vec<f64>> = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            let (train, test) = folds.split(f);
            if train.is_empty() || test.is_empty() {
                return Err(FwelnetError::InvalidInput(format!("fold {f} is empty")));
            }
            let ratio = train.len() as f64 / data.n() as f64;
            let scaled: Vec<f64> = lambdas.iter().map(|l| l * ratio).collect();
            let path = fit(&data.subset(&train), &scaled)?;
            if path.len() != lambdas.len() {
                return Err(FwelnetError::Dimension(format!(
                    "fold {f} returned {} path points for {} lambdas",
                    path.len(),
                    lambdas.len()
                )));
            }
            let held = data.subset(&test);
            let eta = path.predict_all(held.x())?;
            let y = held.y().to_vec();
            eta.columns()
                .into_iter()
                .map(|col| {
                    evaluate(metric, data.family(), &y, &col.to_vec())
                        .map(|v| v.unwrap_or(f64::NAN))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let undefined = per_fold.iter().filter(|v| v.iter().any(|x| x.is_nan())).count();
    if undefined > 0 {
        log::warn!("{undefined} fold(s) had an undefined {metric}; they are excluded where undefined");
    }
    CvResult::from_fold_metrics(metric, lambdas.to_vec(), per_fold)
}

/// Full-data lambda path (standardized scale) used by every fold.
pub fn shared_lambdas(data: &Dataset, opts: &PathOptions) -> Result<Vec<f64>> {
    let (prepared, _) = prepare(data, opts.standardize);
    Ok(lambda_path(&prepared, &PenaltyFactors::ones(data.p()), opts)?.values)
}

/// Cross-validated elastic net: the full-data fit plus its CV curve.
pub fn cv_elastic_net(
    data: &Dataset,
    factors: Option<&PenaltyFactors>,
    opts: &PathOptions,
    metric: Metric,
    folds: &FoldAssignment,
) -> Result<(ElnetModel, CvResult)> {
    let mut fixed = opts.clone();
    if fixed.lambdas.is_none() {
        let (prepared, _) = prepare(data, opts.standardize);
        let f = factors.cloned().unwrap_or_else(|| PenaltyFactors::ones(data.p()));
        fixed.lambdas = Some(lambda_path(&prepared, &f, opts)?.values);
    }
    let full = fit_elastic_net(data, factors, &fixed)?;
    let cv = cross_validate(data, metric, folds, &full.path.lambdas, |train, lambdas| {
        let opts = PathOptions {
            lambdas: Some(lambdas.to_vec()),
            ..fixed.clone()
        };
        Ok(fit_elastic_net(train, factors, &opts)?.path)
    })?;
    Ok((full, cv))
}

/// Cross-validated fwelnet. Theta is learned afresh on every training fold.
pub fn cv_fwelnet(
    data: &Dataset,
    zmat: &FeatureInfo,
    cfg: &FwelnetConfig,
    metric: Metric,
    folds: &FoldAssignment,
) -> Result<(FwelnetModel, CvResult)> {
    let mut fixed = cfg.clone();
    if fixed.path.lambdas.is_none() {
        fixed.path.lambdas = Some(shared_lambdas(data, &cfg.path)?);
    }
    let full = fwelnet_fit(data, zmat, &fixed)?;
    let cv = cross_validate(data, metric, folds, &full.path.lambdas, |train, lambdas| {
        let mut cfg = fixed.clone();
        cfg.path.lambdas = Some(lambdas.to_vec());
        Ok(fwelnet_fit(train, zmat, &cfg)?.path)
    })?;
    Ok((full, cv))
}

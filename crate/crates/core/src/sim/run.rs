use std::io::Write;

use ndarray::{Array1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mtlasso::mt_lasso_cv;
use super::{generate, test_mse, tpr_fpr, Setting, SimConfig, SimInstance};
use crate::cv::{cv_elastic_net, cv_fwelnet, make_folds, FoldAssignment, Metric};
use crate::error::{FwelnetError, Result};
use crate::fwelnet::FwelnetConfig;
use crate::multitask::{multitask_fit, MultitaskOptions};
use crate::solver::{CoefficientPath, PathOptions};

/// Lambda count and depth of the multi-response reference path.
const MT_LASSO_LAMBDAS: usize = 30;
const MT_LASSO_MIN_RATIO: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub test_mse: f64,
    pub tpr: f64,
    pub fpr: f64,
    /// Selected lambda (NaN for the null model).
    pub lambda: f64,
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRunResult {
    pub run: usize,
    pub methods: Vec<MethodResult>,
    /// Penalty factors learned by fwelnet on the full training set.
    pub weights: Option<Vec<f64>>,
}

impl SimRunResult {
    pub fn method(&self, name: &str) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.method == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub runs: usize,
    /// `[q1, median, q3]`.
    pub test_mse: [f64; 3],
    pub tpr: [f64; 3],
    pub fpr: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: SimConfig,
    pub completed_runs: usize,
    /// `(run, error message)` for runs that failed and were skipped.
    pub failed_runs: Vec<(usize, String)>,
    pub methods: Vec<MethodSummary>,
    /// Per-group mean of the learned penalty factors, averaged over runs
    /// (grouped settings only).
    pub mean_group_weights: Option<Vec<f64>>,
}

impl Summary {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub runs: Vec<SimRunResult>,
    pub summary: Summary,
}

/// First quartile, median and third quartile (linear interpolation between
/// order statistics). NaN entries are ignored; all NaN when nothing is left.
pub fn quartiles(values: &[f64]) -> [f64; 3] {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return [f64::NAN; 3];
    }
    v.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let h = q * (v.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    [at(0.25), at(0.5), at(0.75)]
}

fn scored(
    method: &str,
    path: &CoefficientPath,
    index: usize,
    x_test: ArrayView2<'_, f64>,
    mu: &Array1<f64>,
    beta_true: &[f64],
) -> Result<MethodResult> {
    let beta = path.beta(index);
    let yhat = x_test.dot(&Array1::from(beta.clone())) + path.intercepts[index];
    let (tpr, fpr) = tpr_fpr(&beta, beta_true);
    Ok(MethodResult {
        method: method.into(),
        test_mse: test_mse(yhat.as_slice().expect("contiguous"), mu.as_slice().expect("contiguous"))?,
        tpr,
        fpr,
        lambda: path.lambdas[index],
        theta: None,
    })
}

fn null_result(method: &str, ybar: f64, mu: &Array1<f64>) -> MethodResult {
    MethodResult {
        method: method.into(),
        test_mse: mu.iter().map(|m| (ybar - m) * (ybar - m)).sum::<f64>() / mu.len() as f64,
        tpr: 0.0,
        fpr: 0.0,
        lambda: f64::NAN,
        theta: None,
    }
}

fn lasso_options(config: &SimConfig) -> PathOptions {
    PathOptions {
        n_lambda: config.n_lambda,
        min_ratio: Some(config.path_min_ratio()),
        ..PathOptions::with_alpha(1.0)
    }
}

fn fwelnet_options(config: &SimConfig) -> FwelnetConfig {
    FwelnetConfig {
        path: PathOptions {
            n_lambda: config.n_lambda,
            min_ratio: Some(config.path_min_ratio()),
            ..PathOptions::with_alpha(config.alpha)
        },
        n_iter: config.n_iter,
        aggregate: config.aggregate,
    }
}

fn single_response_run(config: &SimConfig, inst: &SimInstance, folds: &FoldAssignment) -> Result<SimRunResult> {
    let data = &inst.train;
    let z = inst.z.as_ref().expect("single-response settings carry Z");
    let ybar = data.y().mean().expect("n >= 2");
    let xt = inst.x_test.view();

    let (lasso, lasso_cv) = cv_elastic_net(data, None, &lasso_options(config), Metric::Mse, folds)?;
    let (fw, fw_cv) = cv_fwelnet(data, z, &fwelnet_options(config), Metric::Mse, folds)?;
    let mut fw_result = scored("fwelnet", &fw.path, fw_cv.index_min, xt, &inst.mu_test, &inst.beta)?;
    fw_result.theta = Some(fw.theta.as_slice().to_vec());
    Ok(SimRunResult {
        run: 0,
        methods: vec![
            null_result("null", ybar, &inst.mu_test),
            scored("lasso", &lasso.path, lasso_cv.index_min, xt, &inst.mu_test, &inst.beta)?,
            fw_result,
        ],
        weights: Some(fw.weights.into_vec()),
    })
}

fn multitask_run(config: &SimConfig, inst: &SimInstance, folds: &FoldAssignment) -> Result<SimRunResult> {
    let second = inst.second.as_ref().expect("multi-task setting carries a second response");
    let d1 = &inst.train;
    let d2 = d1.with_response(second.y.clone())?;
    let xt = inst.x_test.view();
    let responses = [
        (d1, &inst.mu_test, inst.beta.as_slice(), "y1"),
        (&d2, &second.mu_test, second.beta.as_slice(), "y2"),
    ];
    let mut methods = Vec::new();

    for (d, mu, beta, tag) in responses {
        methods.push(null_result(&format!("null_{tag}"), d.y().mean().expect("n >= 2"), mu));
        let (m, cv) = cv_elastic_net(d, None, &lasso_options(config), Metric::Mse, folds)?;
        methods.push(scored(&format!("ind_lasso_{tag}"), &m.path, cv.index_min, xt, mu, beta)?);
    }

    let y = ndarray::stack![ndarray::Axis(1), d1.y(), d2.y()];
    let (mt, mt_cv) = mt_lasso_cv(d1.x(), y.view(), folds, MT_LASSO_LAMBDAS, MT_LASSO_MIN_RATIO)?;
    for (r, (_, mu, beta, tag)) in responses.iter().enumerate() {
        let i = mt_cv.index_min;
        let yhat = mt.predict(xt, i, r);
        let b = mt.betas[i].column(r).to_vec();
        let (tpr, fpr) = tpr_fpr(&b, beta);
        methods.push(MethodResult {
            method: format!("mt_lasso_{tag}"),
            test_mse: test_mse(yhat.as_slice().expect("contiguous"), mu.as_slice().expect("contiguous"))?,
            tpr,
            fpr,
            lambda: mt_cv.lambda_min,
            theta: None,
        });
    }

    let opts = MultitaskOptions {
        n_outer: config.n_outer,
        fwelnet: fwelnet_options(config),
        metric: Metric::Mse,
    };
    let res = multitask_fit(d1.x().to_owned(), d1.y().to_owned(), d2.y().to_owned(), &opts, folds)?;
    for (fit, (_, mu, beta, tag)) in [&res.response1, &res.response2].into_iter().zip(&responses) {
        let yhat = fit.predict(xt)?;
        let (tpr, fpr) = tpr_fpr(&fit.beta, beta);
        methods.push(MethodResult {
            method: format!("fwelnet_{tag}"),
            test_mse: test_mse(yhat.as_slice().expect("contiguous"), mu.as_slice().expect("contiguous"))?,
            tpr,
            fpr,
            lambda: fit.lambda,
            theta: None,
        });
    }
    Ok(SimRunResult {
        run: 0,
        methods,
        weights: None,
    })
}

/// Generate and score run `run_index`.
pub fn run_once(config: &SimConfig, run_index: usize) -> Result<SimRunResult> {
    let inst = generate(config, run_index as u64)?;
    let folds = make_folds(inst.train.n(), config.n_folds, None, inst.fold_seed)?;
    let mut out = if config.setting == Setting::Multitask {
        multitask_run(config, &inst, &folds)?
    } else {
        single_response_run(config, &inst, &folds)?
    };
    out.run = run_index;
    Ok(out)
}

fn summarize(config: &SimConfig, runs: &[SimRunResult], failed_runs: Vec<(usize, String)>) -> Summary {
    let mut names: Vec<String> = Vec::new();
    for r in runs {
        for m in &r.methods {
            if !names.contains(&m.method) {
                names.push(m.method.clone());
            }
        }
    }
    let methods = names
        .into_iter()
        .map(|name| {
            let rows: Vec<&MethodResult> = runs.iter().filter_map(|r| r.method(&name)).collect();
            let col = |f: fn(&MethodResult) -> f64| quartiles(&rows.iter().map(|m| f(m)).collect::<Vec<_>>());
            MethodSummary {
                runs: rows.len(),
                test_mse: col(|m| m.test_mse),
                tpr: col(|m| m.tpr),
                fpr: col(|m| m.fpr),
                method: name,
            }
        })
        .collect();
    let grouped = matches!(
        config.setting,
        Setting::Setting2OneGroup | Setting::Setting2FourGroups | Setting::Fig1
    );
    let mean_group_weights = (grouped && !runs.is_empty()).then(|| {
        let k = config.p / 10;
        let mut acc = vec![0.0; k];
        let mut count = 0.0;
        for w in runs.iter().filter_map(|r| r.weights.as_ref()) {
            for (g, a) in acc.iter_mut().enumerate() {
                *a += w[g * 10..(g + 1) * 10].iter().sum::<f64>() / 10.0;
            }
            count += 1.0;
        }
        acc.into_iter().map(|a| a / count).collect()
    });
    Summary {
        config: config.clone(),
        completed_runs: runs.len(),
        failed_runs,
        methods,
        mean_group_weights,
    }
}

/// Run `config.n_runs` independent replications (in parallel) and summarize
/// them. A failing run is logged, skipped and listed in the summary.
pub fn run_experiment(config: &SimConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let outcomes: Vec<Result<SimRunResult>> =
        (0..config.n_runs).into_par_iter().map(|r| run_once(config, r)).collect();
    let mut runs = Vec::new();
    let mut failed = Vec::new();
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(res) => runs.push(res),
            Err(e) => {
                log::warn!("run {r} failed: {e}");
                failed.push((r, e.to_string()));
            }
        }
    }
    if runs.is_empty() {
        return Err(FwelnetError::Numerical(format!("all {} runs failed", config.n_runs)));
    }
    let summary = summarize(config, &runs, failed);
    Ok(ExperimentResult { runs, summary })
}

fn io_err(e: csv::Error) -> FwelnetError {
    FwelnetError::Io {
        path: "<output>".into(),
        source: e.into(),
    }
}

/// One row per run and method: `run,method,test_mse,tpr,fpr,lambda`.
pub fn write_runs_csv<W: Write>(runs: &[SimRunResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run", "method", "test_mse", "tpr", "fpr", "lambda"]).map_err(io_err)?;
    for r in runs {
        for m in &r.methods {
            w.write_record([
                r.run.to_string(),
                m.method.clone(),
                m.test_mse.to_string(),
                m.tpr.to_string(),
                m.fpr.to_string(),
                m.lambda.to_string(),
            ])
            .map_err(io_err)?;
        }
    }
    w.flush().map_err(|e| io_err(e.into()))
}

/// Learned penalty factors: `run,feature,weight`.
pub fn write_weights_csv<W: Write>(runs: &[SimRunResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run", "feature", "weight"]).map_err(io_err)?;
    for r in runs {
        for (j, v) in r.weights.iter().flatten().enumerate() {
            w.write_record([r.run.to_string(), j.to_string(), v.to_string()]).map_err(io_err)?;
        }
    }
    w.flush().map_err(|e| io_err(e.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartile_cases() {
        assert_eq!(quartiles(&[3.0, 1.0, 2.0]), [1.5, 2.0, 2.5]);
        assert_eq!(quartiles(&[5.0]), [5.0; 3]);
        assert_eq!(quartiles(&[1.0, f64::NAN, 3.0])[1], 2.0);
        assert!(quartiles(&[f64::NAN]).iter().all(|v| v.is_nan()));
    }

    #[test]
    fn single_run_is_reproducible() {
        let cfg = SimConfig {
            n_runs: 1,
            n_test: 200,
            n_lambda: 20,
            ..SimConfig::new(Setting::Setting1)
        };
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        write_runs_csv(&a.runs, &mut ca).unwrap();
        write_runs_csv(&b.runs, &mut cb).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(a.summary, b.summary);
        let fw = a.runs[0].method("fwelnet").unwrap();
        assert!(fw.test_mse >= 0.0 && (0.0..=1.0).contains(&fw.tpr) && (0.0..=1.0).contains(&fw.fpr));
        assert_eq!(a.runs[0].weights.as_ref().unwrap().len(), 50);
    }
}

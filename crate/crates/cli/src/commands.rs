use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fwelnet::io::{read_groups, read_table, read_vector};
use fwelnet::sim::{write_runs_csv, write_weights_csv};
use fwelnet::{
    cv_elastic_net, cv_fwelnet, fit_elastic_net, fwelnet_fit, make_folds, multitask_fit, penalty_weights,
    run_experiment, CvResult, Dataset, Family, FeatureInfo, FwelnetConfig, LambdaSelector, Metric,
    MultitaskOptions, PathOptions, Setting, SimConfig, ThetaVector,
};
use ndarray::Array1;
use serde::Serialize;

use crate::args::{CvArgs, DataArgs, FitArgs, ModelArgs, MultitaskArgs, PredictArgs, PredictType, Rule, SimulateArgs, WeightsArgs};
use crate::document::{path_columns, ConfigEcho, CvSummary, ModelDocument, ModelKind, SCHEMA_VERSION};
use crate::error::{write_error, CliError, CliResult};

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| write_error(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| write_error(dir, e))
}

struct Loaded {
    data: Dataset,
    names: Option<Vec<String>>,
    z: Option<FeatureInfo>,
}

fn load(args: &DataArgs) -> CliResult<Loaded> {
    let x = read_table(&args.x, args.header)?;
    let y = read_vector(&args.y, args.header)?;
    if y.len() != x.values.nrows() {
        return Err(CliError::Data(format!(
            "{} has {} rows but {} has {}",
            args.x.display(),
            x.values.nrows(),
            args.y.display(),
            y.len()
        )));
    }
    let data = Dataset::new(x.values, y, args.family.into())?;
    let z = match &args.z {
        Some(path) => Some(load_z(path, args.header, data.p())?),
        None => None,
    };
    Ok(Loaded {
        data,
        names: x.names,
        z,
    })
}

fn load_z(path: &Path, header: bool, p: usize) -> CliResult<FeatureInfo> {
    let t = read_table(path, header)?;
    if t.values.nrows() != p {
        return Err(CliError::Data(format!(
            "{} has {} rows (features) but the design has {p} columns",
            path.display(),
            t.values.nrows()
        )));
    }
    let z = FeatureInfo::new(t.values)?;
    Ok(match t.names {
        Some(n) => z.with_names(n)?,
        None => z,
    })
}

fn check_model_args(m: &ModelArgs) -> CliResult<()> {
    if !(0.0..=1.0).contains(&m.alpha) {
        return Err(CliError::Usage(format!("--alpha must lie in [0, 1], got {}", m.alpha)));
    }
    if m.nlambda == 0 {
        return Err(CliError::Usage("--nlambda must be at least 1".into()));
    }
    if let Some(r) = m.lambda_min_ratio {
        if !(r > 0.0 && r < 1.0) {
            return Err(CliError::Usage(format!("--lambda-min-ratio must lie in (0, 1), got {r}")));
        }
    }
    Ok(())
}

fn fwelnet_config(m: &ModelArgs) -> FwelnetConfig {
    FwelnetConfig {
        path: PathOptions {
            n_lambda: m.nlambda,
            min_ratio: m.lambda_min_ratio,
            standardize: !m.no_standardize,
            ..PathOptions::with_alpha(m.alpha)
        },
        n_iter: m.niter,
        aggregate: m.aggregate.into(),
    }
}

fn echo(m: &ModelArgs, family: Family, min_ratio: f64) -> ConfigEcho {
    ConfigEcho {
        family,
        alpha: m.alpha,
        n_iter: m.niter,
        aggregate: m.aggregate.into(),
        n_lambda: m.nlambda,
        lambda_min_ratio: min_ratio,
        standardize: !m.no_standardize,
        seed: m.seed,
    }
}

/// Fit on the loaded data, with CV when `folds` is given.
fn fit_document(
    loaded: &Loaded,
    m: &ModelArgs,
    cv: Option<(Metric, &fwelnet::FoldAssignment, Option<bool>)>,
) -> CliResult<(ModelDocument, Option<CvResult>)> {
    check_model_args(m)?;
    let cfg = fwelnet_config(m);
    let data = &loaded.data;
    let family = data.family();
    let (doc, cv_result) = match &loaded.z {
        Some(z) => {
            let (model, cv_result) = match cv {
                Some((metric, folds, _)) => {
                    let (model, r) = cv_fwelnet(data, z, &cfg, metric, folds)?;
                    (model, Some(r))
                }
                None => (fwelnet_fit(data, z, &cfg)?, None),
            };
            let doc = ModelDocument {
                schema_version: SCHEMA_VERSION,
                model: ModelKind::Fwelnet,
                config: echo(m, family, model.lambdas().min_ratio),
                n_features: data.p(),
                feature_names: loaded.names.clone(),
                theta: Some(model.theta.as_slice().to_vec()),
                weights: model.weights.as_slice().to_vec(),
                history: model.history.clone(),
                lambdas: model.path.lambdas.clone(),
                intercepts: model.path.intercepts.clone(),
                coefficients: path_columns(&model.path),
                cv: None,
            };
            (doc, cv_result)
        }
        None => {
            let opts = cfg.path.clone();
            let (model, cv_result) = match cv {
                Some((metric, folds, _)) => {
                    let (model, r) = cv_elastic_net(data, None, &opts, metric, folds)?;
                    (model, Some(r))
                }
                None => (fit_elastic_net(data, None, &opts)?, None),
            };
            let doc = ModelDocument {
                schema_version: SCHEMA_VERSION,
                model: ModelKind::ElasticNet,
                config: echo(m, family, model.fit.lambda_seq.min_ratio),
                n_features: data.p(),
                feature_names: loaded.names.clone(),
                theta: None,
                weights: model.factors.as_slice().to_vec(),
                history: Vec::new(),
                lambdas: model.path.lambdas.clone(),
                intercepts: model.path.intercepts.clone(),
                coefficients: path_columns(&model.path),
                cv: None,
            };
            (doc, cv_result)
        }
    };
    let doc = match (&cv_result, cv) {
        (Some(r), Some((_, folds, respect))) => ModelDocument {
            cv: Some(CvSummary::new(r, folds.k, respect)),
            ..doc
        },
        _ => doc,
    };
    Ok((doc, cv_result))
}

pub fn fit(args: &FitArgs) -> CliResult<()> {
    let loaded = load(&args.data)?;
    let (doc, _) = fit_document(&loaded, &args.model, None)?;
    emit(args.out.as_deref(), &doc.to_json())
}

#[derive(Serialize)]
struct CvReport {
    metric: Metric,
    n_folds: usize,
    folds_respect_groups: Option<bool>,
    lambda_min: f64,
    lambda_1se: f64,
    index_min: usize,
    index_1se: usize,
    metric_at_min: f64,
    metric_at_1se: f64,
}

pub fn cv(args: &CvArgs) -> CliResult<()> {
    let mut loaded = load(&args.data)?;
    let n = loaded.data.n();
    if args.nfolds < 2 || args.nfolds > n {
        return Err(CliError::Usage(format!("--nfolds must lie in [2, {n}], got {}", args.nfolds)));
    }
    let groups = match &args.fold_groups {
        Some(path) => {
            let g = read_groups(path, args.data.header)?;
            loaded.data = loaded.data.clone().with_groups(g.clone())?;
            Some(g)
        }
        None => None,
    };
    let folds = make_folds(n, args.nfolds, groups.as_deref(), args.model.seed)?;
    let respect = groups.as_deref().map(|g| folds.respects_groups(g));
    let (doc, result) = fit_document(&loaded, &args.model, Some((args.metric.into(), &folds, respect)))?;
    let result = result.expect("cv requested");

    ensure_dir(&args.out)?;
    doc.write(&args.out.join("model.json"))?;
    let mut csv = String::from("lambda,mean,se\n");
    for i in 0..result.lambdas.len() {
        writeln!(csv, "{},{},{}", result.lambdas[i], result.mean[i], result.se[i]).expect("string write");
    }
    let csv_path = args.out.join("cv.csv");
    std::fs::write(&csv_path, csv).map_err(|e| write_error(&csv_path, e))?;
    let report = CvReport {
        metric: result.metric,
        n_folds: folds.k,
        folds_respect_groups: respect,
        lambda_min: result.lambda_min,
        lambda_1se: result.lambda_1se,
        index_min: result.index_min,
        index_1se: result.index_1se,
        metric_at_min: result.mean[result.index_min],
        metric_at_1se: result.mean[result.index_1se],
    };
    let summary = args.out.join("cv_summary.json");
    emit(Some(&summary), &to_json(&report))?;
    if let Some(ok) = respect {
        log::info!("fold assignment keeps every observation group in one fold: {ok}");
    }
    Ok(())
}

pub fn predict(args: &PredictArgs) -> CliResult<()> {
    let doc = ModelDocument::read(&args.model)?;
    let x = read_table(&args.x, args.header)?.values;
    let sel = match (args.lambda, args.lambda_index, args.rule) {
        (Some(v), _, _) => LambdaSelector::Value(v),
        (None, Some(i), _) => LambdaSelector::Index(i),
        (None, None, rule) => doc.cv_selector(matches!(rule, Some(Rule::OneSe)))?,
    };
    let pred = doc.path().predict(x.view(), sel)?;
    let values: Array1<f64> = match (args.kind, pred.prob) {
        (PredictType::Response, Some(prob)) => prob,
        _ => pred.eta,
    };
    let mut out = String::new();
    for v in &values {
        writeln!(out, "{v}").expect("string write");
    }
    emit(args.out.as_deref(), &out)
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let setting: Setting = args.setting.parse()?;
    let mut cfg = SimConfig::new(setting);
    cfg.n_runs = args.runs;
    cfg.seed = args.seed;
    if let Some(v) = args.snr_y {
        cfg.snr_y = v;
    }
    if let Some(v) = args.snr_z {
        cfg.snr_z = v;
    }
    if let Some(v) = args.n_test {
        cfg.n_test = v;
    }
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = args.niter {
        cfg.n_iter = v;
    }
    if let Some(v) = args.aggregate {
        cfg.aggregate = v.into();
    }
    if let Some(v) = args.nfolds {
        cfg.n_folds = v;
    }
    if let Some(v) = args.nlambda {
        cfg.n_lambda = v;
    }
    if let Some(v) = args.outer {
        cfg.n_outer = v;
    }
    cfg.min_ratio = args.lambda_min_ratio;
    cfg.validate()?;

    let result = run_experiment(&cfg)?;
    if result.summary.completed_runs == 0 {
        return Err(CliError::Numerical(format!(
            "every run failed; first error: {}",
            result.summary.failed_runs.first().map_or("none", |f| f.1.as_str())
        )));
    }
    ensure_dir(&args.out)?;
    let runs_path = args.out.join("runs.csv");
    let file = std::fs::File::create(&runs_path).map_err(|e| write_error(&runs_path, e))?;
    write_runs_csv(&result.runs, std::io::BufWriter::new(file))?;
    if result.runs.iter().any(|r| r.weights.is_some()) {
        let path = args.out.join("weights.csv");
        let file = std::fs::File::create(&path).map_err(|e| write_error(&path, e))?;
        write_weights_csv(&result.runs, std::io::BufWriter::new(file))?;
    }
    emit(Some(&args.out.join("summary.json")), &to_json(&result.summary))
}

pub fn multitask(args: &MultitaskArgs) -> CliResult<()> {
    let x = read_table(&args.x, args.header)?.values;
    let y1 = read_vector(&args.y1, args.header)?;
    let y2 = read_vector(&args.y2, args.header)?;
    for (path, y) in [(&args.y1, &y1), (&args.y2, &y2)] {
        if y.len() != x.nrows() {
            return Err(CliError::Data(format!(
                "{} has {} rows but {} has {}",
                args.x.display(),
                x.nrows(),
                path.display(),
                y.len()
            )));
        }
    }
    let n = x.nrows();
    if args.nfolds < 2 || args.nfolds > n {
        return Err(CliError::Usage(format!("--nfolds must lie in [2, {n}], got {}", args.nfolds)));
    }
    let model = ModelArgs {
        alpha: args.alpha,
        niter: args.niter,
        aggregate: args.aggregate,
        nlambda: args.nlambda,
        lambda_min_ratio: args.lambda_min_ratio,
        no_standardize: false,
        seed: args.seed,
    };
    check_model_args(&model)?;
    let opts = MultitaskOptions {
        n_outer: args.outer,
        fwelnet: fwelnet_config(&model),
        metric: Metric::Mse,
    };
    let folds = make_folds(n, args.nfolds, None, args.seed)?;
    let result = multitask_fit(x, y1, y2, &opts, &folds)?;
    emit(args.out.as_deref(), &to_json(&result))
}

fn read_theta(path: &PathBuf) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: invalid JSON: {e}", path.display())))?;
    let list = match &value {
        serde_json::Value::Object(map) => map.get("theta").cloned().unwrap_or(serde_json::Value::Null),
        other => other.clone(),
    };
    serde_json::from_value(list).map_err(|_| {
        CliError::Data(format!(
            "{}: expected a JSON array of numbers or an object with a numeric `theta` array",
            path.display()
        ))
    })
}

pub fn weights(args: &WeightsArgs) -> CliResult<()> {
    let z = FeatureInfo::new(read_table(&args.z, args.header)?.values)?;
    let theta = read_theta(&args.theta)?;
    if theta.len() != z.k() {
        return Err(CliError::Data(format!(
            "theta has {} entries but {} has {} columns",
            theta.len(),
            args.z.display(),
            z.k()
        )));
    }
    let theta = ThetaVector::new(theta)?;
    let scores = fwelnet::fwelnet::scores(&z, &theta)?;
    let w = penalty_weights(&z, &theta)?;
    let mut out = String::from("feature,score,weight\n");
    for (j, (s, wj)) in scores.iter().zip(w.as_slice()).enumerate() {
        writeln!(out, "{},{s},{wj}", j + 1).expect("string write");
    }
    emit(args.out.as_deref(), &out)
}

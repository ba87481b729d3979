//! Multi-response lasso reference: row-wise group penalty on the `p x r`
//! coefficient matrix, solved by block coordinate descent over the rows
//! with warm starts along the path. Meant for comparison runs, not as a
//! production solver.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use rayon::prelude::*;

use crate::cv::{CvResult, FoldAssignment, Metric};
use crate::data::{standardize, Dataset, Family};
use crate::error::{FwelnetError, Result};

const MAX_PASSES: usize = 100_000;
const TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct MtLassoFit {
    pub lambdas: Vec<f64>,
    /// `intercepts[i]`: one intercept per response.
    pub intercepts: Vec<Vec<f64>>,
    /// `betas[i]`: `p x r` coefficients on the original column scale.
    pub betas: Vec<Array2<f64>>,
    /// Coordinate passes per path point.
    pub iterations: Vec<usize>,
}

impl MtLassoFit {
    /// Predictions of response `r` at path point `i`.
    pub fn predict(&self, x: ArrayView2<'_, f64>, i: usize, r: usize) -> Array1<f64> {
        x.dot(&self.betas[i].column(r)) + self.intercepts[i][r]
    }
}

/// Block coordinate descent over the rows of `b` at one lambda. `cols` are
/// the standardized columns, `norms` their squared lengths, `resid` the
/// current `Y - X B`. Returns the number of passes.
fn solve_rows(
    cols: &[Vec<f64>],
    norms: &[f64],
    b: &mut Array2<f64>,
    resid: &mut Array2<f64>,
    lambda: f64,
) -> usize {
    let p = cols.len();
    let r = b.ncols();
    let mut u = vec![0.0; r];
    let mut update = |j: usize, b: &mut Array2<f64>, resid: &mut Array2<f64>| -> f64 {
        let c = norms[j];
        if c == 0.0 {
            return 0.0;
        }
        for (k, uk) in u.iter_mut().enumerate() {
            *uk = cols[j].iter().zip(resid.column(k)).map(|(x, e)| x * e).sum::<f64>() + c * b[[j, k]];
        }
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        // rounding slack so that lambda_max zeroes every row exactly
        let shrink = if norm > lambda * (1.0 + 8.0 * f64::EPSILON) {
            (1.0 - lambda / norm) / c
        } else {
            0.0
        };
        let mut delta = 0.0f64;
        for k in 0..r {
            let d = u[k] * shrink - b[[j, k]];
            if d != 0.0 {
                b[[j, k]] += d;
                for (e, x) in resid.column_mut(k).iter_mut().zip(&cols[j]) {
                    *e -= d * x;
                }
                delta = delta.max(d.abs());
            }
        }
        delta
    };
    let mut passes = 0;
    loop {
        let mut delta = 0.0f64;
        for j in 0..p {
            delta = delta.max(update(j, b, resid));
        }
        passes += 1;
        if delta < TOL || passes >= MAX_PASSES {
            return passes;
        }
        let active: Vec<usize> = (0..p).filter(|&j| b.row(j).iter().any(|v| *v != 0.0)).collect();
        loop {
            let mut delta = 0.0f64;
            for &j in &active {
                delta = delta.max(update(j, b, resid));
            }
            passes += 1;
            if delta < TOL || passes >= MAX_PASSES {
                break;
            }
        }
    }
}

/// Lambda values `lambda_max * ratio^(i/(m-1))` for standardized `x` and
/// centered `y`, with `lambda_max = max_j |x_j' Y|_2`.
pub fn mt_lambda_sequence(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, m: usize, ratio: f64) -> Vec<f64> {
    let xty = x.t().dot(&y);
    let lmax = xty
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .fold(0.0, f64::max);
    if m == 1 || lmax == 0.0 {
        return vec![lmax];
    }
    (0..m)
        .map(|i| lmax * ratio.powf(i as f64 / (m - 1) as f64))
        .collect()
}

/// Fit the multi-response lasso
/// `0.5 |Y - 1 b0' - X B|_F^2 + lambda sum_j |B_j.|_2` along `lambdas`
/// (standardized scale; `None` builds `n_lambda` values down to
/// `min_ratio * lambda_max`). Columns of `x` are standardized internally.
pub fn mt_lasso_path(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    lambdas: Option<&[f64]>,
    n_lambda: usize,
    min_ratio: f64,
) -> Result<MtLassoFit> {
    let (n, p) = x.dim();
    let r = y.ncols();
    if y.nrows() != n || r == 0 {
        return Err(FwelnetError::Dimension(format!(
            "Y is {}x{}, X has {n} rows",
            y.nrows(),
            r
        )));
    }
    let (std, info) = standardize(&Dataset::new(x.to_owned(), y.column(0).to_owned(), Family::Gaussian)?);
    let xs = std.x();
    let y_means = y.mean_axis(Axis(0)).expect("n >= 2");
    let yc = &y - &y_means;
    let lambdas = match lambdas {
        Some(l) => l.to_vec(),
        None => mt_lambda_sequence(xs, yc.view(), n_lambda, min_ratio),
    };
    let cols: Vec<Vec<f64>> = xs.columns().into_iter().map(|c| c.to_vec()).collect();
    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();

    let mut b = Array2::<f64>::zeros((p, r));
    let mut resid = yc.clone();
    let mut out = MtLassoFit {
        lambdas: lambdas.clone(),
        intercepts: Vec::with_capacity(lambdas.len()),
        betas: Vec::with_capacity(lambdas.len()),
        iterations: Vec::with_capacity(lambdas.len()),
    };
    for &lambda in &lambdas {
        let iters = solve_rows(&cols, &norms, &mut b, &mut resid, lambda);
        let mut beta = Array2::zeros((p, r));
        let mut b0 = Vec::with_capacity(r);
        for k in 0..r {
            for j in 0..p {
                if !info.constant[j] {
                    beta[[j, k]] = b[[j, k]] / info.col_scales[j];
                }
            }
            let shift: f64 = beta.slice(s![.., k]).iter().zip(&info.col_means).map(|(a, m)| a * m).sum();
            b0.push(y_means[k] - shift);
        }
        out.betas.push(beta);
        out.intercepts.push(b0);
        out.iterations.push(iters);
    }
    Ok(out)
}

/// Cross-validated fit: lambdas from the full data, fold fits at
/// `lambda * n_train / n`, metric the held-out squared error summed over
/// responses. Returns the full-data path and the CV curve.
pub fn mt_lasso_cv(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    folds: &FoldAssignment,
    n_lambda: usize,
    min_ratio: f64,
) -> Result<(MtLassoFit, CvResult)> {
    let full = mt_lasso_path(x, y, None, n_lambda, min_ratio)?;
    let n = x.nrows();
    let fold_metrics = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            let (train, test) = folds.split(f);
            let ratio = train.len() as f64 / n as f64;
            let scaled: Vec<f64> = full.lambdas.iter().map(|l| l * ratio).collect();
            let fit = mt_lasso_path(
                x.select(Axis(0), &train).view(),
                y.select(Axis(0), &train).view(),
                Some(&scaled),
                n_lambda,
                min_ratio,
            )?;
            let xt = x.select(Axis(0), &test);
            let yt = y.select(Axis(0), &test);
            Ok((0..scaled.len())
                .map(|i| {
                    (0..y.ncols())
                        .map(|r| {
                            let e = fit.predict(xt.view(), i, r) - yt.column(r);
                            e.dot(&e)
                        })
                        .sum::<f64>()
                        / test.len() as f64
                })
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let cv = CvResult::from_fold_metrics(Metric::Mse, full.lambdas.clone(), fold_metrics)?;
    Ok((full, cv))
}

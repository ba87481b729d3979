//! Logistic elastic net: quadratic approximation of the log-likelihood
//! around the current fit, solved by weighted coordinate descent.

use ndarray::{Array1, Array2};

use super::cd::{self, CdProblem, Design, Penalty};
use super::{
    check_inputs, negative_log_likelihood, sigmoid, CoefficientPath, ElnetFit, PenaltyFactors,
    SolverConfig,
};
use crate::data::{Dataset, Family, LambdaSequence};
use crate::error::{FwelnetError, Result};

const PROB_FLOOR: f64 = 1e-5;
/// Coefficient norm beyond which the data are treated as separable.
const SATURATION_NORM: f64 = 1e4;

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Binomial path fit. Errors if `data` is not a binomial dataset.
pub fn fit_path_binomial(
    data: &Dataset,
    factors: &PenaltyFactors,
    config: &SolverConfig,
    lambdas: &LambdaSequence,
    warm: Option<&CoefficientPath>,
) -> Result<ElnetFit> {
    if data.family() != Family::Binomial {
        return Err(FwelnetError::InvalidInput(
            "fit_path_binomial needs a binomial dataset".into(),
        ));
    }
    check_inputs(data, factors, config, lambdas, warm)?;
    solve_path(data, factors, config, lambdas, warm)
}

pub(super) fn solve_path(
    data: &Dataset,
    factors: &PenaltyFactors,
    config: &SolverConfig,
    lambdas: &LambdaSequence,
    warm: Option<&CoefficientPath>,
) -> Result<ElnetFit> {
    let n = data.n();
    let p = data.p();
    let m = lambdas.len();
    let design = Design::new(data.x());
    let y = data.y().to_vec();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let null_b0 = logit(clamp_prob(ybar));

    let mut betas = Array2::zeros((p, m));
    let mut intercepts = Vec::with_capacity(m);
    let mut objective = Vec::with_capacity(m);
    let mut n_passes = Vec::with_capacity(m);
    let mut converged = Vec::with_capacity(m);
    let mut saturated_at = None;

    let null_eta = vec![null_b0; n];
    let null_dev = 2.0 * negative_log_likelihood(Family::Binomial, &y, &null_eta)?;
    let single_class = ybar == 0.0 || ybar == 1.0;

    let mut beta = vec![0.0; p];
    let mut b0 = null_b0;
    let mut eta = vec![0.0; n];
    let mut prob_w = vec![0.0; n];
    let mut resid = vec![0.0; n];

    for (i, &lambda) in lambdas.values.iter().enumerate() {
        let pen = Penalty {
            lambda,
            alpha: config.alpha,
            factors: factors.as_slice(),
        };
        if single_class || saturated_at.is_some() {
            design.linear_predictor(&beta, b0, &mut eta);
            let nll = negative_log_likelihood(Family::Binomial, &y, &eta)?;
            objective.push(nll + pen.value(&beta));
            betas.column_mut(i).assign(&Array1::from(beta.clone()));
            intercepts.push(b0);
            n_passes.push(0);
            converged.push(single_class);
            continue;
        }
        if let Some(w) = warm {
            beta.copy_from_slice(&w.beta(i));
            b0 = w.intercepts[i];
        }
        design.linear_predictor(&beta, b0, &mut eta);
        let mut dev = 2.0 * negative_log_likelihood(Family::Binomial, &y, &eta)?;
        let mut passes = 0;
        let mut ok = false;
        for _ in 0..config.max_outer {
            for k in 0..n {
                let pk = clamp_prob(sigmoid(eta[k]));
                prob_w[k] = pk * (1.0 - pk);
                resid[k] = (y[k] - pk) / prob_w[k];
            }
            let prob = CdProblem::new(&design, Some(&prob_w));
            let out = cd::solve(
                &prob,
                &pen,
                &mut beta,
                &mut b0,
                &mut resid,
                config.tol,
                config.max_passes,
            );
            passes += out.passes;
            design.linear_predictor(&beta, b0, &mut eta);
            let new_dev = 2.0 * negative_log_likelihood(Family::Binomial, &y, &eta)?;
            let norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
            if !norm.is_finite() || norm > SATURATION_NORM {
                saturated_at = Some(i);
                break;
            }
            let change = (new_dev - dev).abs();
            dev = new_dev;
            if out.converged && change < config.outer_tol * null_dev {
                ok = true;
                break;
            }
        }
        if let Some(s) = saturated_at {
            log::warn!("binomial fit saturated at lambda index {s}; remaining path is frozen");
            // fall back to the previous finite solution
            if i > 0 {
                beta = betas.column(i - 1).to_vec();
                b0 = intercepts[i - 1];
            } else {
                beta.fill(0.0);
                b0 = null_b0;
            }
            design.linear_predictor(&beta, b0, &mut eta);
        }
        let nll = negative_log_likelihood(Family::Binomial, &y, &eta)?;
        objective.push(nll + pen.value(&beta));
        betas.column_mut(i).assign(&Array1::from(beta.clone()));
        intercepts.push(b0);
        n_passes.push(passes);
        converged.push(ok);
    }
    Ok(ElnetFit {
        lambda_seq: lambdas.clone(),
        path: CoefficientPath {
            lambdas: lambdas.values.clone(),
            intercepts,
            betas,
            family: Family::Binomial,
        },
        objective,
        n_passes,
        converged,
        saturated_at,
    })
}

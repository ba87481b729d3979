//! Independent reference computations for the integration tests. Nothing
//! here calls the solver; everything is recomputed from the definitions.
#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Loss {
    Squared,
    Logistic,
}

fn log1pexp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn expit(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub fn eta(x: ArrayView2<'_, f64>, b0: f64, beta: &[f64]) -> Vec<f64> {
    (0..x.nrows())
        .map(|i| b0 + (0..x.ncols()).map(|j| x[[i, j]] * beta[j]).sum::<f64>())
        .collect()
}

pub fn loss(kind: Loss, y: &[f64], eta: &[f64]) -> f64 {
    match kind {
        Loss::Squared => 0.5 * y.iter().zip(eta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
        Loss::Logistic => y.iter().zip(eta).map(|(a, b)| log1pexp(*b) - a * b).sum(),
    }
}

/// Loss plus `lambda * sum w_j (alpha |b_j| + (1 - alpha)/2 b_j^2)`.
#[allow(clippy::too_many_arguments)]
pub fn objective(
    kind: Loss,
    x: ArrayView2<'_, f64>,
    y: &[f64],
    w: &[f64],
    alpha: f64,
    lambda: f64,
    b0: f64,
    beta: &[f64],
) -> f64 {
    let pen: f64 = beta
        .iter()
        .zip(w)
        .map(|(b, wj)| wj * (alpha * b.abs() + 0.5 * (1.0 - alpha) * b * b))
        .sum();
    loss(kind, y, &eta(x, b0, beta)) + lambda * pen
}

/// Residual `y - mu(eta)`.
pub fn residual(kind: Loss, y: &[f64], eta: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(eta)
        .map(|(a, e)| match kind {
            Loss::Squared => a - e,
            Loss::Logistic => a - expit(*e),
        })
        .collect()
}

/// Largest subgradient-condition residual divided by `n`.
#[allow(clippy::too_many_arguments)]
pub fn kkt(
    kind: Loss,
    x: ArrayView2<'_, f64>,
    y: &[f64],
    w: &[f64],
    alpha: f64,
    lambda: f64,
    b0: f64,
    beta: &[f64],
) -> f64 {
    let r = residual(kind, y, &eta(x, b0, beta));
    let mut worst = r.iter().sum::<f64>().abs();
    for j in 0..x.ncols() {
        let xr: f64 = (0..x.nrows()).map(|i| x[[i, j]] * r[i]).sum();
        if (0..x.nrows()).all(|i| x[[i, j]] == 0.0) {
            continue;
        }
        let g = xr - lambda * w[j] * (1.0 - alpha) * beta[j];
        let t = lambda * w[j] * alpha;
        let v = if beta[j] != 0.0 {
            (g - t * beta[j].signum()).abs()
        } else {
            (g.abs() - t).max(0.0)
        };
        worst = worst.max(v);
    }
    worst / x.nrows() as f64
}

fn largest_eigenvalue(g: &Array2<f64>) -> f64 {
    let m = g.nrows();
    let mut v = Array1::from_elem(m, 1.0);
    let mut est = 0.0;
    for _ in 0..5000 {
        let u = g.dot(&v);
        let norm = u.dot(&u).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let done = (norm - est).abs() <= 1e-14 * norm;
        est = norm;
        v = u / norm;
        if done {
            break;
        }
    }
    est
}

/// Accelerated proximal gradient (with restart) on the weighted elastic-net
/// objective; the intercept is unpenalized. Runs until successive iterates
/// agree to `1e-14` relative or `max_iter` is reached.
#[allow(clippy::too_many_arguments)]
pub fn proximal_gradient(
    kind: Loss,
    x: ArrayView2<'_, f64>,
    y: &[f64],
    w: &[f64],
    alpha: f64,
    lambda: f64,
    start: Option<(f64, Vec<f64>)>,
    max_iter: usize,
) -> (f64, Vec<f64>) {
    let (n, p) = x.dim();
    // augmented design [1, X]
    let xa = Array2::from_shape_fn((n, p + 1), |(i, j)| if j == 0 { 1.0 } else { x[[i, j - 1]] });
    let gram = xa.t().dot(&xa);
    let curvature = match kind {
        Loss::Squared => 1.0,
        Loss::Logistic => 0.25,
    };
    let wmax = w.iter().copied().fold(0.0, f64::max);
    let lip = curvature * largest_eigenvalue(&gram) * 1.0001 + lambda * (1.0 - alpha) * wmax;
    let step = 1.0 / lip;
    let ya = Array1::from(y.to_vec());

    let unpack = |v: &Array1<f64>| (v[0], v.slice(ndarray::s![1..]).to_vec());
    let obj = |v: &Array1<f64>| {
        let (b0, b) = unpack(v);
        objective(kind, x, y, w, alpha, lambda, b0, &b)
    };
    let grad = |v: &Array1<f64>| -> Array1<f64> {
        let e = xa.dot(v);
        let mu = match kind {
            Loss::Squared => e,
            Loss::Logistic => e.mapv(expit),
        };
        let mut g = xa.t().dot(&(mu - &ya));
        for j in 0..p {
            g[j + 1] += lambda * (1.0 - alpha) * w[j] * v[j + 1];
        }
        g
    };
    let prox = |v: &mut Array1<f64>| {
        for j in 0..p {
            let t = step * lambda * alpha * w[j];
            let u = v[j + 1];
            v[j + 1] = if u.abs() <= t { 0.0 } else { (u.abs() - t).copysign(u) };
        }
    };

    let mut cur = match start {
        Some((b0, b)) => {
            let mut v = Array1::zeros(p + 1);
            v[0] = b0;
            for j in 0..p {
                v[j + 1] = b[j];
            }
            v
        }
        None => Array1::zeros(p + 1),
    };
    let mut z = cur.clone();
    let mut t: f64 = 1.0;
    let mut f_cur = obj(&cur);
    for _ in 0..max_iter {
        let mut next = &z - &(grad(&z) * step);
        prox(&mut next);
        let f_next = obj(&next);
        if f_next > f_cur {
            if z == cur {
                break;
            }
            z.assign(&cur);
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let diff = (&next - &cur).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let scale = next.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        z = &next + &((&next - &cur) * ((t - 1.0) / t_next));
        cur = next;
        f_cur = f_next;
        t = t_next;
        if diff <= 1e-14 * scale {
            break;
        }
    }
    unpack(&cur)
}

/// Penalty factors straight from the definition
/// `w_j = sum_l exp(s_l) / (p exp(s_j))`.
pub fn naive_weights(z: ArrayView2<'_, f64>, theta: &[f64]) -> Vec<f64> {
    let p = z.nrows();
    let s: Vec<f64> = (0..p)
        .map(|j| (0..z.ncols()).map(|k| z[[j, k]] * theta[k]).sum())
        .collect();
    let total: f64 = s.iter().map(|v| v.exp()).sum();
    s.iter().map(|sj| total / (p as f64 * sj.exp())).collect()
}

/// Penalty part of the objective as a function of theta.
pub fn theta_objective(z: ArrayView2<'_, f64>, theta: &[f64], beta: &[f64], lambda: f64, alpha: f64) -> f64 {
    naive_weights(z, theta)
        .iter()
        .zip(beta)
        .map(|(w, b)| w * (alpha * b.abs() + 0.5 * (1.0 - alpha) * b * b))
        .sum::<f64>()
        * lambda
}

/// Central finite differences of `theta_objective`.
pub fn finite_difference_gradient(
    z: ArrayView2<'_, f64>,
    theta: &[f64],
    beta: &[f64],
    lambda: f64,
    alpha: f64,
    h: f64,
) -> Vec<f64> {
    (0..theta.len())
        .map(|k| {
            let mut up = theta.to_vec();
            let mut down = theta.to_vec();
            up[k] += h;
            down[k] -= h;
            (theta_objective(z, &up, beta, lambda, alpha) - theta_objective(z, &down, beta, lambda, alpha))
                / (2.0 * h)
        })
        .collect()
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, p), |_| rng.sample(StandardNormal))
}

/// Gaussian response with a sparse signal on the first few columns.
pub fn gaussian_response(rng: &mut ChaCha8Rng, x: &Array2<f64>, noise: f64) -> Array1<f64> {
    let p = x.ncols();
    let beta: Vec<f64> = (0..p).map(|j| if j < 3.min(p) { 2.0 - j as f64 } else { 0.0 }).collect();
    Array1::from_shape_fn(x.nrows(), |i| {
        (0..p).map(|j| x[[i, j]] * beta[j]).sum::<f64>() + noise * rng.sample::<f64, _>(StandardNormal)
    })
}

/// 0/1 response from a logistic model on the first columns.
pub fn binomial_response(rng: &mut ChaCha8Rng, x: &Array2<f64>) -> Array1<f64> {
    let p = x.ncols();
    Array1::from_shape_fn(x.nrows(), |i| {
        let e = x[[i, 0]] - 0.5 * x[[i, p.min(2) - 1]];
        if rng.random::<f64>() < expit(e) {
            1.0
        } else {
            0.0
        }
    })
}

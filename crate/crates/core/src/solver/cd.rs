//! Cyclic coordinate descent for the weighted elastic net at a single lambda.
//!
//! Minimizes
//! `0.5 * sum_i v_i (z_i - b0 - x_i'beta)^2 + lambda * sum_j w_j (alpha |beta_j| + (1 - alpha)/2 beta_j^2)`
//! where `v` are observation weights (all ones for least squares). The
//! residual vector `z - b0 - X beta` is maintained in place.

use ndarray::{ArrayView2, Axis};

/// Column-major copy of a design matrix.
#[derive(Debug, Clone)]
pub(crate) struct Design {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl Design {
    pub(crate) fn new(x: ArrayView2<'_, f64>) -> Self {
        let (n, p) = x.dim();
        let mut data = Vec::with_capacity(n * p);
        for col in x.axis_iter(Axis(1)) {
            data.extend(col.iter());
        }
        Self { n, p, data }
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }

    pub(crate) fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub(crate) fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    /// `out = b0 + X beta`.
    pub(crate) fn linear_predictor(&self, beta: &[f64], b0: f64, out: &mut [f64]) {
        out.fill(b0);
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (o, x) in out.iter_mut().zip(self.col(j)) {
                    *o += b * x;
                }
            }
        }
    }
}

/// Dot product with four independent accumulators (lets the compiler
/// vectorize the reduction).
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn dot3(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let n = a.len().min(b.len()).min(c.len());
    let m = n - n % 4;
    for i in (0..m).step_by(4) {
        for k in 0..4 {
            acc[k] += a[i + k] * b[i + k] * c[i + k];
        }
    }
    let tail: f64 = (m..n).map(|i| a[i] * b[i] * c[i]).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Per-problem quantities that do not change across coordinate passes.
pub(crate) struct CdProblem<'a> {
    design: &'a Design,
    obs_weights: Option<&'a [f64]>,
    col_norm2: Vec<f64>,
    weight_sum: f64,
}

impl<'a> CdProblem<'a> {
    pub(crate) fn new(design: &'a Design, obs_weights: Option<&'a [f64]>) -> Self {
        let col_norm2 = (0..design.p())
            .map(|j| {
                let c = design.col(j);
                match obs_weights {
                    None => dot(c, c),
                    Some(v) => c.iter().zip(v).map(|(x, w)| w * x * x).sum(),
                }
            })
            .collect();
        let weight_sum = match obs_weights {
            None => design.n() as f64,
            Some(v) => v.iter().sum(),
        };
        Self {
            design,
            obs_weights,
            col_norm2,
            weight_sum,
        }
    }

    #[inline]
    fn gradient(&self, j: usize, resid: &[f64]) -> f64 {
        let c = self.design.col(j);
        match self.obs_weights {
            None => dot(c, resid),
            Some(v) => dot3(c, v, resid),
        }
    }
}

pub(crate) struct CdOutcome {
    pub passes: usize,
    pub converged: bool,
}

pub(crate) struct Penalty<'a> {
    pub lambda: f64,
    pub alpha: f64,
    pub factors: &'a [f64],
}

impl Penalty<'_> {
    pub(crate) fn value(&self, beta: &[f64]) -> f64 {
        let (a, lam) = (self.alpha, self.lambda);
        self.factors
            .iter()
            .zip(beta)
            .map(|(w, b)| w * (a * b.abs() + 0.5 * (1.0 - a) * b * b))
            .sum::<f64>()
            * lam
    }
}

/// Run coordinate descent from the given starting point until the largest
/// coefficient change in a full pass falls below `tol`.
///
/// After each full pass the solver cycles over the nonzero coefficients
/// until they settle, then returns to a full pass to check the rest.
pub(crate) fn solve(
    prob: &CdProblem<'_>,
    pen: &Penalty<'_>,
    beta: &mut [f64],
    b0: &mut f64,
    resid: &mut [f64],
    tol: f64,
    max_passes: usize,
) -> CdOutcome {
    let p = prob.design.p();
    let mut passes = 0;
    let mut active: Vec<usize> = Vec::with_capacity(p);
    loop {
        let delta = pass(prob, pen, beta, b0, resid, 0..p);
        passes += 1;
        if delta < tol {
            return CdOutcome {
                passes,
                converged: true,
            };
        }
        if passes >= max_passes {
            return CdOutcome {
                passes,
                converged: false,
            };
        }
        active.clear();
        active.extend((0..p).filter(|&j| beta[j] != 0.0));
        loop {
            let delta = pass(prob, pen, beta, b0, resid, active.iter().copied());
            passes += 1;
            if delta < tol {
                break;
            }
            if passes >= max_passes {
                return CdOutcome {
                    passes,
                    converged: false,
                };
            }
        }
    }
}

fn pass(
    prob: &CdProblem<'_>,
    pen: &Penalty<'_>,
    beta: &mut [f64],
    b0: &mut f64,
    resid: &mut [f64],
    coords: impl Iterator<Item = usize>,
) -> f64 {
    let mut max_delta = 0.0_f64;
    for j in coords {
        let xn = prob.col_norm2[j];
        if xn == 0.0 {
            continue;
        }
        let w = pen.factors[j];
        let old = beta[j];
        let u = prob.gradient(j, resid) + xn * old;
        let t = pen.lambda * pen.alpha * w;
        // |u| within rounding of the threshold counts as inside it, so that
        // lambda_max itself yields exact zeros
        let new = if u.abs() <= t * (1.0 + 8.0 * f64::EPSILON) {
            0.0
        } else {
            (u.abs() - t).copysign(u) / (xn + pen.lambda * (1.0 - pen.alpha) * w)
        };
        if new != old {
            let d = new - old;
            beta[j] = new;
            for (r, x) in resid.iter_mut().zip(prob.design.col(j)) {
                *r -= d * x;
            }
            max_delta = max_delta.max(d.abs());
        }
    }
    // unpenalized intercept, closed form
    let shift = match prob.obs_weights {
        None => resid.iter().sum::<f64>(),
        Some(v) => dot(v, resid),
    } / prob.weight_sum;
    if shift != 0.0 {
        *b0 += shift;
        resid.iter_mut().for_each(|r| *r -= shift);
        max_delta = max_delta.max(shift.abs());
    }
    max_delta
}

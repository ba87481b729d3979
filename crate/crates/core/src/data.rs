//! Data containers, column standardization and lambda-path construction.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{FwelnetError, Result};

/// Response distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Binomial,
}

impl std::str::FromStr for Family {
    type Err = FwelnetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Family::Gaussian),
            "binomial" => Ok(Family::Binomial),
            other => Err(FwelnetError::InvalidInput(format!(
                "unknown family '{other}' (expected gaussian or binomial)"
            ))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Family::Gaussian => f.write_str("gaussian"),
            Family::Binomial => f.write_str("binomial"),
        }
    }
}

/// Design matrix, response and optional observation groups.
///
/// Rows of `x` are observations. `obs_group_ids`, when present, ties rows
/// together for cross-validation: rows sharing an id always land in the same
/// fold.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Array2<f64>,
    y: Array1<f64>,
    obs_group_ids: Option<Vec<i64>>,
    family: Family,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>, family: Family) -> Result<Self> {
        let (n, p) = x.dim();
        if y.len() != n {
            return Err(FwelnetError::Dimension(format!(
                "x has {n} rows but y has {} entries",
                y.len()
            )));
        }
        if n < 2 {
            return Err(FwelnetError::InvalidInput(format!(
                "need at least 2 observations, got {n}"
            )));
        }
        if p < 1 {
            return Err(FwelnetError::InvalidInput("design has no columns".into()));
        }
        if let Some(((row, col), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(FwelnetError::NonFinite { what: "x", row, col });
        }
        if let Some((row, _)) = y.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(FwelnetError::NonFinite { what: "y", row, col: 0 });
        }
        if family == Family::Binomial {
            if let Some((row, v)) = y.iter().enumerate().find(|(_, v)| **v != 0.0 && **v != 1.0) {
                return Err(FwelnetError::InvalidInput(format!(
                    "binomial response must be 0 or 1, found {v} at row {row}"
                )));
            }
        }
        Ok(Self {
            x,
            y,
            obs_group_ids: None,
            family,
        })
    }

    pub fn with_groups(mut self, groups: Vec<i64>) -> Result<Self> {
        if groups.len() != self.n() {
            return Err(FwelnetError::Dimension(format!(
                "{} group ids for {} observations",
                groups.len(),
                self.n()
            )));
        }
        self.obs_group_ids = Some(groups);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn y(&self) -> ArrayView1<'_, f64> {
        self.y.view()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn obs_group_ids(&self) -> Option<&[i64]> {
        self.obs_group_ids.as_deref()
    }

    /// Same design with a different response (used by the multi-task fits).
    pub fn with_response(&self, y: Array1<f64>) -> Result<Self> {
        let mut d = Dataset::new(self.x.clone(), y, self.family)?;
        d.obs_group_ids = self.obs_group_ids.clone();
        Ok(d)
    }

    /// Rows `rows` of this dataset, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            x: self.x.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
            obs_group_ids: self
                .obs_group_ids
                .as_ref()
                .map(|g| rows.iter().map(|&i| g[i]).collect()),
            family: self.family,
        }
    }
}

/// Column centering/scaling applied before fitting.
///
/// Standardized columns have mean 0 and squared norm `n`. `y_mean` is the
/// offset removed from the response (the Gaussian mean; 0 for binomial).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationInfo {
    pub col_means: Vec<f64>,
    pub col_scales: Vec<f64>,
    pub y_mean: f64,
    /// Columns with zero variance. Their standardized column is all zeros and
    /// their coefficient stays pinned at 0.
    pub constant: Vec<bool>,
}

impl StandardizationInfo {
    pub fn identity(p: usize) -> Self {
        Self {
            col_means: vec![0.0; p],
            col_scales: vec![1.0; p],
            y_mean: 0.0,
            constant: vec![false; p],
        }
    }
}

/// Center and scale the columns of `x` (and center `y` for Gaussian data).
pub fn standardize(dataset: &Dataset) -> (Dataset, StandardizationInfo) {
    let n = dataset.n() as f64;
    let p = dataset.p();
    let mut x = dataset.x.clone();
    let mut col_means = Vec::with_capacity(p);
    let mut col_scales = Vec::with_capacity(p);
    let mut constant = Vec::with_capacity(p);
    for (j, mut col) in x.axis_iter_mut(Axis(1)).enumerate() {
        let mean = col.sum() / n;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let scale = (ss / n).sqrt();
        let is_const = col.iter().all(|&v| v == col[0]);
        if is_const || scale == 0.0 {
            log::warn!("column {j} has zero variance; its coefficient is fixed at 0");
            col.fill(0.0);
            col_means.push(mean);
            col_scales.push(1.0);
            constant.push(true);
            continue;
        }
        col.mapv_inplace(|v| (v - mean) / scale);
        col_means.push(mean);
        col_scales.push(scale);
        constant.push(false);
    }
    let (y, y_mean) = match dataset.family {
        Family::Gaussian => {
            let m = dataset.y.sum() / n;
            (dataset.y.mapv(|v| v - m), m)
        }
        Family::Binomial => (dataset.y.clone(), 0.0),
    };
    let out = Dataset {
        x,
        y,
        obs_group_ids: dataset.obs_group_ids.clone(),
        family: dataset.family,
    };
    (
        out,
        StandardizationInfo {
            col_means,
            col_scales,
            y_mean,
            constant,
        },
    )
}

/// Map a standardized-scale fit back to the original columns.
pub fn destandardize(
    beta_std: &[f64],
    intercept_std: f64,
    info: &StandardizationInfo,
) -> Result<(Vec<f64>, f64)> {
    if beta_std.len() != info.col_scales.len() {
        return Err(FwelnetError::Dimension(format!(
            "{} coefficients for {} columns",
            beta_std.len(),
            info.col_scales.len()
        )));
    }
    let beta: Vec<f64> = beta_std
        .iter()
        .zip(&info.col_scales)
        .zip(&info.constant)
        .map(|((b, s), &c)| if c { 0.0 } else { b / s })
        .collect();
    let shift: f64 = beta.iter().zip(&info.col_means).map(|(b, m)| b * m).sum();
    Ok((beta, intercept_std + info.y_mean - shift))
}

/// Strictly decreasing lambda values, starting at the smallest lambda for
/// which every penalized coefficient is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSequence {
    pub values: Vec<f64>,
    pub min_ratio: f64,
}

impl LambdaSequence {
    /// Wrap user-provided values, checking they are nonnegative and strictly
    /// decreasing.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(FwelnetError::InvalidInput("empty lambda sequence".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(FwelnetError::InvalidInput(
                "lambda values must be finite and nonnegative".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(FwelnetError::InvalidInput(
                "lambda values must be strictly decreasing".into(),
            ));
        }
        let min_ratio = if values[0] > 0.0 {
            values[values.len() - 1] / values[0]
        } else {
            1.0
        };
        Ok(Self { values, min_ratio })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lambda_max(&self) -> f64 {
        self.values[0]
    }
}

/// Default ratio of smallest to largest lambda.
pub fn default_min_ratio(n: usize, p: usize) -> f64 {
    if n < p {
        0.01
    } else {
        1e-4
    }
}

/// Smallest alpha used in the lambda_max denominator; pure ridge would
/// otherwise have an infinite lambda_max.
pub const ALPHA_FLOOR: f64 = 0.001;

/// Build a log-spaced lambda path.
///
/// `x_std` is the (standardized) design and `y_work` the residual of the
/// intercept-only model. With the half-RSS objective,
/// `lambda_max = max_j |x_j' y_work| / (max(alpha, 0.001) * w_j)` over
/// features with positive weight.
pub fn make_lambda_sequence(
    x_std: ArrayView2<'_, f64>,
    y_work: ArrayView1<'_, f64>,
    weights: &[f64],
    alpha: f64,
    n_lambda: usize,
    min_ratio: f64,
) -> Result<LambdaSequence> {
    if weights.len() != x_std.ncols() {
        return Err(FwelnetError::Dimension(format!(
            "{} penalty factors for {} columns",
            weights.len(),
            x_std.ncols()
        )));
    }
    if x_std.nrows() != y_work.len() {
        return Err(FwelnetError::Dimension(format!(
            "x has {} rows but y has {} entries",
            x_std.nrows(),
            y_work.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(FwelnetError::InvalidInput(
            "penalty factors must be finite and nonnegative".into(),
        ));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(FwelnetError::InvalidInput(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if n_lambda == 0 {
        return Err(FwelnetError::InvalidInput("n_lambda must be positive".into()));
    }
    if !(min_ratio > 0.0 && min_ratio < 1.0) {
        return Err(FwelnetError::InvalidInput(format!(
            "lambda min ratio must lie in (0, 1), got {min_ratio}"
        )));
    }
    let a = alpha.max(ALPHA_FLOOR);
    let lambda_max = x_std
        .axis_iter(Axis(1))
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(col, &w)| col.dot(&y_work).abs() / (a * w))
        .fold(0.0_f64, f64::max);
    if lambda_max == 0.0 {
        log::warn!("response is orthogonal to every penalized column; lambda path is {{0}}");
        return Ok(LambdaSequence {
            values: vec![0.0],
            min_ratio,
        });
    }
    if n_lambda == 1 {
        return Ok(LambdaSequence {
            values: vec![lambda_max],
            min_ratio,
        });
    }
    let log_max = lambda_max.ln();
    let step = min_ratio.ln() / (n_lambda - 1) as f64;
    let mut values: Vec<f64> = (0..n_lambda)
        .map(|i| (log_max + step * i as f64).exp())
        .collect();
    values[0] = lambda_max;
    Ok(LambdaSequence { values, min_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn standardize_small_column() {
        let d = Dataset::new(array![[1.0], [2.0], [3.0]], array![0.0, 1.0, 2.0], Family::Gaussian)
            .unwrap();
        let (s, info) = standardize(&d);
        let h = 1.5_f64.sqrt();
        assert_relative_eq!(s.x()[[0, 0]], -h, epsilon = 1e-15);
        assert_eq!(s.x()[[1, 0]], 0.0);
        assert_relative_eq!(s.x()[[2, 0]], h, epsilon = 1e-15);
        assert_relative_eq!(info.col_scales[0], (2.0_f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_eq!(info.col_means[0], 2.0);
        assert_eq!(info.y_mean, 1.0);
    }

    #[test]
    fn standardized_column_is_unchanged() {
        let col = array![[-1.0], [1.0], [-1.0], [1.0]];
        let d = Dataset::new(col.clone(), array![1.0, 2.0, 3.0, 4.0], Family::Gaussian).unwrap();
        let (s, info) = standardize(&d);
        assert_eq!(s.x(), col.view());
        assert_eq!(info.col_scales, vec![1.0]);
        assert_eq!(info.col_means, vec![0.0]);
    }

    #[test]
    fn constant_column_is_flagged() {
        let d = Dataset::new(
            array![[5.0, 1.0], [5.0, 2.0], [5.0, 4.0]],
            array![0.0, 1.0, 2.0],
            Family::Gaussian,
        )
        .unwrap();
        let (s, info) = standardize(&d);
        assert_eq!(info.constant, vec![true, false]);
        assert!(s.x().column(0).iter().all(|v| *v == 0.0));
        let (beta, _) = destandardize(&[3.0, 1.0], 0.0, &info).unwrap();
        assert_eq!(beta[0], 0.0);
    }

    #[test]
    fn destandardize_cases() {
        let id = StandardizationInfo::identity(2);
        assert_eq!(destandardize(&[1.5, -2.0], 0.25, &id).unwrap(), (vec![1.5, -2.0], 0.25));

        let info = StandardizationInfo {
            col_means: vec![3.0],
            col_scales: vec![2.0],
            y_mean: 10.0,
            constant: vec![false],
        };
        let (beta, b0) = destandardize(&[1.0], 0.0, &info).unwrap();
        assert_eq!(beta, vec![0.5]);
        assert_eq!(b0, 10.0 - 0.5 * 3.0);
        // prediction at x = 7: standardized value (7 - 3) / 2 = 2 -> 10 + 1 * 2
        assert_relative_eq!(b0 + beta[0] * 7.0, 12.0, epsilon = 1e-14);

        let (beta, b0) = destandardize(&[0.0], 0.0, &info).unwrap();
        assert_eq!(beta, vec![0.0]);
        assert_eq!(b0, 10.0);

        assert!(destandardize(&[1.0, 2.0], 0.0, &info).is_err());
    }

    #[test]
    fn lambda_max_closed_form() {
        // x'y = 6
        let x = array![[1.0], [-1.0], [2.0], [-2.0]];
        let y = array![2.0, 0.0, 1.0, -1.0];
        let seq = make_lambda_sequence(x.view(), y.view(), &[1.0], 1.0, 5, 0.01).unwrap();
        assert_relative_eq!(seq.lambda_max(), 6.0, epsilon = 1e-15);

        let x2 = array![[1.0, 0.5], [-1.0, 0.5], [2.0, -0.5], [-2.0, -0.5]];
        let base = make_lambda_sequence(x2.view(), y.view(), &[1.0, 1.0], 1.0, 3, 0.1).unwrap();
        let doubled = make_lambda_sequence(x2.view(), y.view(), &[2.0, 1.0], 1.0, 3, 0.1).unwrap();
        assert_relative_eq!(doubled.lambda_max(), base.lambda_max() / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn lambda_sequence_is_log_spaced() {
        let x = array![[1.0], [-1.0], [2.0], [-2.0]];
        let y = array![2.0, 0.0, 1.0, -1.0];
        let seq = make_lambda_sequence(x.view(), y.view(), &[1.0], 1.0, 100, 0.01).unwrap();
        assert_eq!(seq.len(), 100);
        let r0 = seq.values[1] / seq.values[0];
        for w in seq.values.windows(2) {
            assert!(w[1] < w[0]);
            assert_relative_eq!(w[1] / w[0], r0, max_relative = 1e-12);
        }
        assert_relative_eq!(seq.values[99], 0.06, max_relative = 1e-12);
    }

    #[test]
    fn orthogonal_response_gives_zero_path() {
        let x = array![[1.0], [-1.0]];
        let y = array![1.0, 1.0];
        let seq = make_lambda_sequence(x.view(), y.view(), &[1.0], 1.0, 10, 0.01).unwrap();
        assert_eq!(seq.values, vec![0.0]);
    }

    #[test]
    fn ridge_uses_alpha_floor() {
        let x = array![[1.0], [-1.0], [2.0], [-2.0]];
        let y = array![2.0, 0.0, 1.0, -1.0];
        let seq = make_lambda_sequence(x.view(), y.view(), &[1.0], 0.0, 2, 0.5).unwrap();
        assert_relative_eq!(seq.lambda_max(), 6000.0, max_relative = 1e-12);
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(array![[1.0]], array![1.0], Family::Gaussian).is_err());
        assert!(Dataset::new(array![[1.0], [2.0]], array![1.0], Family::Gaussian).is_err());
        assert!(Dataset::new(array![[1.0], [f64::NAN]], array![1.0, 2.0], Family::Gaussian).is_err());
        assert!(Dataset::new(array![[1.0], [2.0]], array![0.0, 2.0], Family::Binomial).is_err());
        assert!(Dataset::new(array![[1.0], [2.0]], array![0.0, 1.0], Family::Binomial).is_ok());
    }
}

//! Seeded synthetic experiments: data generators, scoring, and the
//! lasso-versus-fwelnet comparison runner.

mod mtlasso;
mod run;

pub use mtlasso::{mt_lambda_sequence, mt_lasso_cv, mt_lasso_path, MtLassoFit};
pub use run::{
    quartiles, run_experiment, run_once, write_runs_csv, write_weights_csv, ExperimentResult,
    MethodResult, MethodSummary, SimRunResult, Summary,
};

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Family};
use crate::error::{FwelnetError, Result};
use crate::fwelnet::{Aggregate, FeatureInfo};
use crate::group::{grouped_indicator_z, GroupStructure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// Noisy copy of `|beta|` as side information.
    Setting1,
    /// Group indicators; signal in the first group.
    Setting2OneGroup,
    /// Group indicators; signal in the first four groups.
    Setting2FourGroups,
    /// Pure-noise side information.
    Setting3,
    /// Groups of ten, coefficients 4 and -2 on the first two groups.
    Fig1,
    /// Two responses with partly shared support.
    Multitask,
}

impl Setting {
    pub const NAMES: [&'static str; 6] = ["1", "2a", "2b", "3", "fig1", "mt"];

    pub fn short_name(self) -> &'static str {
        match self {
            Setting::Setting1 => "1",
            Setting::Setting2OneGroup => "2a",
            Setting::Setting2FourGroups => "2b",
            Setting::Setting3 => "3",
            Setting::Fig1 => "fig1",
            Setting::Multitask => "mt",
        }
    }

    /// Default `(n, p)`.
    pub fn dims(self) -> (usize, usize) {
        match self {
            Setting::Setting1 => (100, 50),
            Setting::Setting2OneGroup | Setting::Setting2FourGroups => (100, 150),
            Setting::Setting3 => (100, 100),
            Setting::Fig1 => (200, 100),
            Setting::Multitask => (150, 50),
        }
    }
}

impl std::str::FromStr for Setting {
    type Err = FwelnetError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "1" | "setting1" => Setting::Setting1,
            "2a" | "setting2_one_group" => Setting::Setting2OneGroup,
            "2b" | "setting2_four_groups" => Setting::Setting2FourGroups,
            "3" | "setting3" => Setting::Setting3,
            "fig1" => Setting::Fig1,
            "mt" | "multitask" => Setting::Multitask,
            _ => {
                return Err(FwelnetError::InvalidInput(format!(
                    "unknown setting {s:?}; expected one of {}",
                    Setting::NAMES.join(", ")
                )))
            }
        })
    }
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Response SNRs of the two multi-task responses.
pub const MULTITASK_SNR: (f64, f64) = (0.5, 1.5);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub setting: Setting,
    pub n: usize,
    pub p: usize,
    /// Ignored by the multi-task setting, which uses [`MULTITASK_SNR`].
    pub snr_y: f64,
    /// Setting 1 only.
    pub snr_z: f64,
    pub n_runs: usize,
    pub seed: u64,
    pub n_test: usize,
    pub alpha: f64,
    pub n_iter: usize,
    pub aggregate: Aggregate,
    pub n_folds: usize,
    pub n_lambda: usize,
    /// Path depth; `None` uses [`SimConfig::path_min_ratio`].
    pub min_ratio: Option<f64>,
    /// Outer iterations of the multi-task procedure.
    pub n_outer: usize,
}

impl SimConfig {
    pub fn new(setting: Setting) -> Self {
        let (n, p) = setting.dims();
        Self {
            setting,
            n,
            p,
            snr_y: 2.0,
            snr_z: 10.0,
            n_runs: 30,
            seed: 1,
            n_test: 10_000,
            alpha: 1.0,
            n_iter: 1,
            aggregate: Aggregate::Mean,
            n_folds: 10,
            n_lambda: 100,
            min_ratio: None,
            n_outer: 3,
        }
    }

    /// Smallest lambda as a fraction of lambda_max: the configured value, or
    /// 0.01 when `n <= p` and 1e-4 otherwise. Square designs count as wide:
    /// once centered they are rank deficient and the far end of the path is
    /// not identifiable.
    pub fn path_min_ratio(&self) -> f64 {
        self.min_ratio
            .unwrap_or(if self.n <= self.p { 0.01 } else { 1e-4 })
    }

    pub fn validate(&self) -> Result<()> {
        let (_, p) = self.setting.dims();
        if self.p != p {
            return Err(FwelnetError::InvalidInput(format!(
                "setting {} has p = {p}, got {}",
                self.setting, self.p
            )));
        }
        if !(self.snr_y > 0.0 && self.snr_z > 0.0) {
            return Err(FwelnetError::InvalidInput("SNRs must be positive".into()));
        }
        if self.n_runs == 0 || self.n_test == 0 {
            return Err(FwelnetError::InvalidInput("need at least one run and one test point".into()));
        }
        if self.n < self.n_folds || self.n_folds < 2 {
            return Err(FwelnetError::InvalidInput(format!(
                "cannot make {} folds from {} observations",
                self.n_folds, self.n
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(FwelnetError::InvalidInput(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// One response of a generated instance.
#[derive(Debug, Clone)]
pub struct SimResponse {
    pub y: Array1<f64>,
    pub beta: Vec<f64>,
    pub sigma2: f64,
    /// Noise-free mean on the test design.
    pub mu_test: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct SimInstance {
    pub train: Dataset,
    /// Side information; `None` for the multi-task setting, where it is
    /// built from fitted coefficients.
    pub z: Option<FeatureInfo>,
    pub x_test: Array2<f64>,
    pub mu_test: Array1<f64>,
    pub beta: Vec<f64>,
    pub sigma2: f64,
    /// Second response (multi-task setting only).
    pub second: Option<SimResponse>,
    /// Feature groups, for the grouped settings.
    pub groups: Option<GroupStructure>,
    /// Seed for the CV folds of this run.
    pub fold_seed: u64,
}

/// Generator for run `run_index`: ChaCha8 seeded with `seed`, stream
/// `run_index`.
pub fn run_rng(seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    rng
}

fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, p), |_| rng.sample(StandardNormal))
}

fn random_sign(rng: &mut ChaCha8Rng, magnitude: f64) -> f64 {
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

/// `sum(beta^2) / snr`.
pub fn noise_variance(beta: &[f64], snr: f64) -> f64 {
    beta.iter().map(|b| b * b).sum::<f64>() / snr
}

/// Population variance over the entries of `|beta|`.
pub fn abs_variance(beta: &[f64]) -> f64 {
    let p = beta.len() as f64;
    let m = beta.iter().map(|b| b.abs()).sum::<f64>() / p;
    beta.iter().map(|b| (b.abs() - m).powi(2)).sum::<f64>() / p
}

fn noisy_response(rng: &mut ChaCha8Rng, x: &Array2<f64>, beta: &[f64], sigma2: f64) -> Array1<f64> {
    let noise = Normal::new(0.0, sigma2.sqrt()).expect("finite noise level");
    let mu = x.dot(&Array1::from(beta.to_vec()));
    mu.mapv(|m| m + noise.sample(rng))
}

fn with_constant_column(z: Array2<f64>) -> Array2<f64> {
    let (p, k) = z.dim();
    Array2::from_shape_fn((p, k + 1), |(j, c)| if c < k { z[[j, c]] } else { 1.0 })
}

/// Draw one instance. Every random quantity comes from
/// [`run_rng`]`(config.seed, run_index)`, in a fixed order: coefficients,
/// training design, training noise, side information, test design, fold
/// seed.
pub fn generate(config: &SimConfig, run_index: u64) -> Result<SimInstance> {
    config.validate()?;
    let mut rng = run_rng(config.seed, run_index);
    let (n, p) = (config.n, config.p);
    let mut groups = None;
    let mut second = None;

    let beta: Vec<f64> = match config.setting {
        Setting::Setting1 => (0..p)
            .map(|j| match j {
                0..=4 => 2.0,
                5..=9 => -1.0,
                _ => 0.0,
            })
            .collect(),
        Setting::Setting2OneGroup | Setting::Setting2FourGroups => {
            let active = if config.setting == Setting::Setting2OneGroup { 10 } else { 40 };
            (0..p).map(|j| if j < active { random_sign(&mut rng, 3.0) } else { 0.0 }).collect()
        }
        Setting::Setting3 => (0..p).map(|j| if j < 10 { 2.0 } else { 0.0 }).collect(),
        Setting::Fig1 => (0..p)
            .map(|j| match j {
                0..=9 => 4.0,
                10..=19 => -2.0,
                _ => 0.0,
            })
            .collect(),
        Setting::Multitask => (0..p)
            .map(|j| match j {
                0..=4 => random_sign(&mut rng, 5.0),
                5..=9 => random_sign(&mut rng, 2.0),
                _ => 0.0,
            })
            .collect(),
    };
    let beta2: Option<Vec<f64>> = (config.setting == Setting::Multitask).then(|| {
        (0..p)
            .map(|j| match j {
                0..=4 => random_sign(&mut rng, 5.0),
                10..=14 => random_sign(&mut rng, 2.0),
                _ => 0.0,
            })
            .collect()
    });

    let x = normal_matrix(&mut rng, n, p);
    let snr = if config.setting == Setting::Multitask {
        MULTITASK_SNR.0
    } else {
        config.snr_y
    };
    let sigma2 = noise_variance(&beta, snr);
    let y = noisy_response(&mut rng, &x, &beta, sigma2);
    let y2 = beta2.as_ref().map(|b2| {
        let s2 = noise_variance(b2, MULTITASK_SNR.1);
        (noisy_response(&mut rng, &x, b2, s2), s2)
    });

    let z = match config.setting {
        Setting::Setting1 => {
            let sigma_z = (abs_variance(&beta) / config.snr_z).sqrt();
            let noise = Normal::new(0.0, sigma_z).expect("finite noise level");
            let col = Array2::from_shape_fn((p, 1), |(j, _)| beta[j].abs() + noise.sample(&mut rng));
            Some(FeatureInfo::new(with_constant_column(col))?)
        }
        Setting::Setting2OneGroup | Setting::Setting2FourGroups | Setting::Fig1 => {
            let g = GroupStructure::contiguous(p / 10, 10)?;
            let z = grouped_indicator_z(&g);
            groups = Some(g);
            Some(z)
        }
        Setting::Setting3 => Some(FeatureInfo::new(with_constant_column(normal_matrix(&mut rng, p, 10)))?),
        Setting::Multitask => None,
    };

    let x_test = normal_matrix(&mut rng, config.n_test, p);
    let mu_test = x_test.dot(&Array1::from(beta.clone()));
    if let (Some(b2), Some((y2, s2))) = (beta2, y2) {
        second = Some(SimResponse {
            mu_test: x_test.dot(&Array1::from(b2.clone())),
            y: y2,
            beta: b2,
            sigma2: s2,
        });
    }
    let fold_seed = rng.random();
    Ok(SimInstance {
        train: Dataset::new(x, y, Family::Gaussian)?,
        z,
        x_test,
        mu_test,
        beta,
        sigma2,
        second,
        groups,
        fold_seed,
    })
}

/// Mean of `(yhat - mu)^2`.
pub fn test_mse(yhat: &[f64], mu: &[f64]) -> Result<f64> {
    if yhat.len() != mu.len() || mu.is_empty() {
        return Err(FwelnetError::Dimension(format!(
            "{} predictions for {} test means",
            yhat.len(),
            mu.len()
        )));
    }
    Ok(yhat.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / mu.len() as f64)
}

/// True and false positive rates of the support of `beta_hat`. A coefficient
/// counts as selected when it is exactly nonzero. A rate whose denominator
/// is empty is NaN.
pub fn tpr_fpr(beta_hat: &[f64], beta_true: &[f64]) -> (f64, f64) {
    let (mut tp, mut pos, mut fp, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (h, t) in beta_hat.iter().zip(beta_true) {
        if *t != 0.0 {
            pos += 1;
            tp += usize::from(*h != 0.0);
        } else {
            neg += 1;
            fp += usize::from(*h != 0.0);
        }
    }
    let rate = |a: usize, b: usize| if b == 0 { f64::NAN } else { a as f64 / b as f64 };
    (rate(tp, pos), rate(fp, neg))
}

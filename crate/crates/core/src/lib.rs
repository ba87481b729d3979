//! Feature-weighted elastic net.
//!
//! An elastic-net path solver whose per-feature penalty factors are driven
//! by a matrix of side information about the features ("features of
//! features") through a learned score vector. Also provides grouped
//! cross-validation, a two-response multi-task wrapper, group-lasso
//! equivalence utilities and seeded simulation generators.

pub mod data;
pub mod cv;
pub mod error;
pub mod fwelnet;
pub mod group;
pub mod io;
pub mod multitask;
pub mod sim;
pub mod solver;

pub use data::{
    default_min_ratio, destandardize, make_lambda_sequence, standardize, Dataset, Family,
    LambdaSequence, StandardizationInfo,
};
pub use error::{FwelnetError, Result};
pub use solver::{
    fit_elastic_net, fit_path, fit_path_binomial, kkt_violation, negative_log_likelihood,
    soft_threshold, CoefficientPath, ElnetFit, ElnetModel, LambdaSelector, PathOptions,
    PenaltyFactors, Prediction, SolverConfig,
};
pub use fwelnet::{
    aggregate_gradient, backtracking_step, fwelnet_fit, fwelnet_fit_glm, fwelnet_fit_per_lambda,
    penalty_weights, theta_gradient, Aggregate, FeatureInfo, FwelnetConfig, FwelnetModel,
    PerLambdaFit, PerLambdaOptions, StepOutcome, ThetaVector,
};
pub use group::{
    grouped_indicator_z, optimal_group_weights, penalty_equivalence_check, EquivalenceCheck,
    GroupStructure, GroupWeights,
};
pub use multitask::{multitask_fit, MultitaskOptions, MultitaskResult, MultitaskSnapshot, SelectedFit};
pub use sim::{run_experiment, Setting, SimConfig};
pub use cv::{
    auc, cross_validate, cv_elastic_net, cv_fwelnet, make_folds, CvResult, FoldAssignment, Metric,
};

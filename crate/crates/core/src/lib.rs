// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod basis;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod feedforward;
pub mod io;
pub mod linalg;
pub mod lip;
pub mod model;
pub mod nn;
pub mod plant;
pub mod training;
pub mod trajectory;

pub use basis::{eval_basis, BasisMap};
pub use data::{build_regressor, valid_sample_range, Dataset, Regressor, RegressorSpec};
pub use error::{Error, Result};
pub use lip::{correlation, fit_lip, gram_matrix, unmodelled_residual, LipParams};
pub use model::{
    mse_cost, pgnn_predict, FeatureSet, InverseModel, LipModel, NnInput, PgnnGradient, PgnnModel,
    PgnnParams,
};
pub use nn::{init_hidden_random, Activation, NnLayer, NnParams};
pub use training::{
    cost_gradient, init_output_layer, pinn_cost, regularized_cost, strict_improvement_condition,
    train, CostTerms, OptimizerConfig, TrainingConfig, TrainingHistory, TrainingMode,
};

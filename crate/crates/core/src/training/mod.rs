//! Training of physics-guided networks: regularized and baseline costs,
//! closed-form output-layer initialization and full-batch Adam with
//! best-iterate selection.

mod cost;
mod init;
mod optim;

use serde::{Deserialize, Serialize};

use crate::basis::BasisMap;
use crate::data::{Dataset, RegressorSpec};
use crate::error::{Error, Result};
use crate::lip::LipParams;
use crate::model::{FeatureSet, NnInput, PgnnGradient, PgnnModel, PgnnParams};
use crate::nn::{init_hidden_random, Activation, NnParams, Workspace};

pub use cost::CostTerms;
pub use init::{OutputLayerInit, RestrictedProblem};
pub use optim::{Adam, OptimizerConfig};

use cost::{evaluate, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    /// Joint training with the physical parameters pulled towards the anchor.
    #[default]
    Regularized,
    /// Joint training with no pull on the physical parameters.
    Unregularized,
    /// Physical parameters frozen at the anchor; only the network is trained.
    Sequential,
    /// Network-only predictor penalized towards the anchor model's output.
    PinnBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Diagonal of the regularization weight matrix.
    pub lambda_diag: Vec<f64>,
    /// Anchor for the physical parameters, normally the LIP estimate.
    pub theta_lip_ref: LipParams,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub seed: u64,
    /// Multipliers for the network input; `None` picks unit max magnitude on the training set.
    #[serde(default)]
    pub input_scaling: Option<Vec<f64>>,
    #[serde(default)]
    pub mode: TrainingMode,
    #[serde(default)]
    pub pinn_lambda: f64,
    #[serde(default = "default_hidden")]
    pub hidden_widths: Vec<usize>,
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    /// Train on every `stride`-th valid sample.
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub nn_input: NnInput,
}

fn default_hidden() -> Vec<usize> {
    vec![16]
}

fn default_init_scale() -> f64 {
    1.0
}

fn default_activation() -> Activation {
    Activation::Tanh
}

fn default_stride() -> usize {
    1
}

impl TrainingConfig {
    /// Regularized training with `Lambda = lambda I` and defaults elsewhere.
    pub fn new(theta_lip_ref: LipParams, lambda: f64) -> Self {
        Self {
            lambda_diag: vec![lambda; theta_lip_ref.len()],
            theta_lip_ref,
            optimizer: OptimizerConfig::default(),
            seed: 0,
            input_scaling: None,
            mode: TrainingMode::Regularized,
            pinn_lambda: 0.0,
            hidden_widths: default_hidden(),
            init_scale: default_init_scale(),
            activation: default_activation(),
            stride: 1,
            nn_input: NnInput::Basis,
        }
    }

    pub fn validate(&self, n_phy: usize) -> Result<()> {
        if self.lambda_diag.len() != n_phy {
            return Err(Error::dims("lambda_diag", n_phy, self.lambda_diag.len()));
        }
        if self.theta_lip_ref.len() != n_phy {
            return Err(Error::dims(
                "theta_lip_ref",
                n_phy,
                self.theta_lip_ref.len(),
            ));
        }
        if self
            .lambda_diag
            .iter()
            .any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return Err(Error::config(
                "lambda_diag",
                "entries must be finite and >= 0",
            ));
        }
        if !(self.pinn_lambda >= 0.0 && self.pinn_lambda.is_finite()) {
            return Err(Error::config("pinn_lambda", "must be finite and >= 0"));
        }
        let o = &self.optimizer;
        if o.max_iterations == 0 {
            return Err(Error::config("optimizer.max_iterations", "must be >= 1"));
        }
        if !(o.step_size > 0.0)
            || !(0.0..1.0).contains(&o.beta1)
            || !(0.0..1.0).contains(&o.beta2)
            || !(o.epsilon > 0.0)
        {
            return Err(Error::config(
                "optimizer",
                "need step_size > 0, beta1 and beta2 in [0, 1), epsilon > 0",
            ));
        }
        if !(o.tolerance >= 0.0) {
            return Err(Error::config("optimizer.tolerance", "must be >= 0"));
        }
        if self.hidden_widths.is_empty() || self.hidden_widths.contains(&0) {
            return Err(Error::config(
                "hidden_widths",
                "need at least one non-empty hidden layer",
            ));
        }
        if self.stride == 0 {
            return Err(Error::config("stride", "must be >= 1"));
        }
        Ok(())
    }

    /// Regularization weights actually applied: zero in unregularized mode.
    pub fn effective_lambda(&self) -> Vec<f64> {
        match self.mode {
            TrainingMode::Unregularized => vec![0.0; self.lambda_diag.len()],
            _ => self.lambda_diag.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub total: f64,
    pub data_fit: f64,
    pub reg: f64,
    pub theta_phy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub records: Vec<IterationRecord>,
    pub best_iteration: usize,
}

impl TrainingHistory {
    pub fn best(&self) -> &IterationRecord {
        &self.records[self.best_iteration]
    }

    pub fn initial(&self) -> &IterationRecord {
        &self.records[0]
    }
}

fn features(
    dataset: &Dataset,
    map: &BasisMap,
    cfg: &TrainingConfig,
    scaling: Option<&[f64]>,
) -> Result<FeatureSet> {
    cfg.validate(map.n_out())?;
    FeatureSet::build(dataset, map, map.spec(), cfg.nn_input, scaling, cfg.stride)
}

fn model_features(
    model: &PgnnModel,
    dataset: &Dataset,
    cfg: &TrainingConfig,
) -> Result<FeatureSet> {
    if model.nn_input != cfg.nn_input {
        return Err(Error::config(
            "nn_input",
            "model and training config disagree",
        ));
    }
    features(dataset, &model.map, cfg, Some(&model.input_scaling))
}

fn objective<'a>(cfg: &'a TrainingConfig, lambda: &'a [f64]) -> Objective<'a> {
    match cfg.mode {
        TrainingMode::PinnBaseline => Objective::Pinn {
            lambda: cfg.pinn_lambda,
            anchor: &cfg.theta_lip_ref.theta,
        },
        _ => Objective::Anchored {
            lambda,
            anchor: &cfg.theta_lip_ref.theta,
        },
    }
}

/// `MSE + (theta_phy - theta_ref)^T Lambda (theta_phy - theta_ref)` on the
/// training samples selected by `cfg.stride`.
pub fn regularized_cost(
    model: &PgnnModel,
    dataset: &Dataset,
    cfg: &TrainingConfig,
) -> Result<CostTerms> {
    let set = model_features(model, dataset, cfg)?;
    let lambda = cfg.effective_lambda();
    let obj = Objective::Anchored {
        lambda: &lambda,
        anchor: &cfg.theta_lip_ref.theta,
    };
    Ok(evaluate(
        &model.params,
        &set,
        obj,
        None,
        &mut Workspace::new(&model.params.nn),
    ))
}

/// `MSE + pinn_lambda (1/N) sum (u_hat - theta_ref^T T)^2`, where `u_hat`
/// is the full model output.
pub fn pinn_cost(model: &PgnnModel, dataset: &Dataset, cfg: &TrainingConfig) -> Result<CostTerms> {
    let set = model_features(model, dataset, cfg)?;
    let obj = Objective::Pinn {
        lambda: cfg.pinn_lambda,
        anchor: &cfg.theta_lip_ref.theta,
    };
    Ok(evaluate(
        &model.params,
        &set,
        obj,
        None,
        &mut Workspace::new(&model.params.nn),
    ))
}

/// Exact gradient of [`regularized_cost`] with respect to every parameter.
pub fn cost_gradient(
    model: &PgnnModel,
    dataset: &Dataset,
    cfg: &TrainingConfig,
) -> Result<PgnnGradient> {
    let set = model_features(model, dataset, cfg)?;
    let lambda = cfg.effective_lambda();
    let obj = Objective::Anchored {
        lambda: &lambda,
        anchor: &cfg.theta_lip_ref.theta,
    };
    let mut flat = vec![0.0; model.params.n_params()];
    evaluate(
        &model.params,
        &set,
        obj,
        Some(&mut flat),
        &mut Workspace::new(&model.params.nn),
    );
    let mut g = PgnnParams {
        nn: model.params.nn.zeros_like(),
        theta_phy: vec![0.0; model.params.theta_phy.len()],
    };
    g.set_flat(&flat)?;
    Ok(g)
}

/// Fills the output layer (and, in joint modes, the physical parameters)
/// with the minimizer of the cost restricted to them. Hidden layers are kept.
pub fn init_output_layer(
    hidden: &NnParams,
    dataset: &Dataset,
    map: &BasisMap,
    cfg: &TrainingConfig,
) -> Result<PgnnModel> {
    let set = features(dataset, map, cfg, cfg.input_scaling.as_deref())?;
    let init = init::init_output_layer_set(hidden, &set, cfg)?;
    PgnnModel::new(init.params, map.clone(), set.scaling, cfg.nn_input)
}

/// Like [`init_output_layer`], also returning the restricted normal equations
/// and the reciprocal condition number of `M_R`.
pub fn init_output_layer_detailed(
    hidden: &NnParams,
    dataset: &Dataset,
    map: &BasisMap,
    cfg: &TrainingConfig,
) -> Result<(PgnnModel, OutputLayerInit)> {
    let set = features(dataset, map, cfg, cfg.input_scaling.as_deref())?;
    let init = init::init_output_layer_set(hidden, &set, cfg)?;
    let model = PgnnModel::new(init.params.clone(), map.clone(), set.scaling, cfg.nn_input)?;
    Ok((model, init))
}

/// Whether the initialized model has strictly lower cost than the anchor
/// model, decided by the norm of `M_R [0; 0; theta_ref] - rhs`.
pub fn strict_improvement_condition(
    hidden: &NnParams,
    dataset: &Dataset,
    map: &BasisMap,
    cfg: &TrainingConfig,
) -> Result<(bool, f64)> {
    let set = features(dataset, map, cfg, cfg.input_scaling.as_deref())?;
    init::strict_condition_set(hidden, &set, cfg)
}

/// Random hidden layers for the configured architecture.
pub fn init_hidden(map: &BasisMap, cfg: &TrainingConfig) -> Result<NnParams> {
    let mut widths = vec![crate::model::input_dim(map, cfg.nn_input)];
    widths.extend_from_slice(&cfg.hidden_widths);
    init_hidden_random(&widths, cfg.seed, cfg.init_scale, cfg.activation)
}

/// Trains a model and returns the lowest-cost iterate with the full history.
///
/// Iteration 0 is the closed-form initialization; iterations `1..max_iterations`
/// follow Adam steps. Sequential and PINN modes keep `theta_phy` fixed.
pub fn train(
    dataset: &Dataset,
    map: &BasisMap,
    spec: &RegressorSpec,
    cfg: &TrainingConfig,
) -> Result<(PgnnModel, TrainingHistory)> {
    crate::lip::check_spec(map, spec)?;
    let set = features(dataset, map, cfg, cfg.input_scaling.as_deref())?;
    let hidden = init_hidden(map, cfg)?;
    let init = init::init_output_layer_set(&hidden, &set, cfg)?;
    let (best, history) = optimize(init.params, &set, cfg)?;
    let model = PgnnModel::new(best, map.clone(), set.scaling, cfg.nn_input)?;
    Ok((model, history))
}

/// Continues training from given parameters on the training samples of `cfg`.
pub fn train_from(
    model: &PgnnModel,
    dataset: &Dataset,
    cfg: &TrainingConfig,
) -> Result<(PgnnModel, TrainingHistory)> {
    let set = model_features(model, dataset, cfg)?;
    let (best, history) = optimize(model.params.clone(), &set, cfg)?;
    let out = PgnnModel::new(best, model.map.clone(), set.scaling, cfg.nn_input)?;
    Ok((out, history))
}

fn optimize(
    mut params: PgnnParams,
    set: &FeatureSet,
    cfg: &TrainingConfig,
) -> Result<(PgnnParams, TrainingHistory)> {
    let lambda = cfg.effective_lambda();
    let obj = objective(cfg, &lambda);
    let n_nn = params.nn.n_params();
    let train_phy = matches!(
        cfg.mode,
        TrainingMode::Regularized | TrainingMode::Unregularized
    );
    let mut ws = Workspace::new(&params.nn);
    let mut flat = params.to_flat();
    let mut grad = vec![0.0; flat.len()];
    let mut best_flat = flat.clone();
    let mut best_total = f64::INFINITY;
    let mut best_iteration = 0;
    let mut adam = Adam::new(flat.len(), &cfg.optimizer);
    let max_it = cfg.optimizer.max_iterations;
    let mut records = Vec::with_capacity(max_it);
    for k in 0..max_it {
        params.set_flat(&flat)?;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let terms = evaluate(&params, set, obj, Some(&mut grad), &mut ws);
        if !terms.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "training cost at iteration {k} (data fit {}, regularization {}, theta_phy {:?})",
                terms.data_fit, terms.reg, params.theta_phy
            )));
        }
        records.push(IterationRecord {
            iteration: k,
            total: terms.total,
            data_fit: terms.data_fit,
            reg: terms.reg,
            theta_phy: params.theta_phy.clone(),
        });
        if terms.total < best_total {
            best_total = terms.total;
            best_iteration = k;
            best_flat.copy_from_slice(&flat);
        }
        if k + 1 == max_it {
            break;
        }
        if !train_phy {
            grad[n_nn..].iter_mut().for_each(|g| *g = 0.0);
        }
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax <= cfg.optimizer.tolerance {
            break;
        }
        adam.step(&mut flat, &grad);
    }
    params.set_flat(&best_flat)?;
    Ok((
        params,
        TrainingHistory {
            records,
            best_iteration,
        },
    ))
}

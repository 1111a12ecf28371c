//! Declarative experiment configuration (TOML).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::Contender;
use crate::lip::LipParams;
use crate::model::NnInput;
use crate::plant::PlantConfig;
use crate::training::{OptimizerConfig, TrainingConfig, TrainingMode};

/// Closed-loop run that produces the identification data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSettings {
    /// Reference preset used while recording.
    pub reference: String,
    pub dither: bool,
    /// Encoder step while recording; the tracking experiments use `plant.encoder_resolution`.
    pub encoder_resolution: f64,
}

impl Default for DataSettings {
    fn default() -> Self {
        Self {
            reference: "r1".into(),
            dither: true,
            encoder_resolution: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSettings {
    pub mode: TrainingMode,
    /// `Lambda = lambda I`.
    pub lambda: f64,
    pub pinn_lambda: f64,
    pub hidden_widths: Vec<usize>,
    pub init_scale: f64,
    pub stride: usize,
    pub nn_input: NnInput,
    pub input_scaling: Option<Vec<f64>>,
    /// Fields left out of the table keep the experiment defaults from
    /// [`experiment_optimizer`], not the library defaults.
    #[serde(deserialize_with = "optimizer_overrides")]
    pub optimizer: OptimizerConfig,
}

/// Optimizer used by the experiment pipeline. The wider hidden-layer spread and
/// larger step let the network leave its initial point within 5000 iterations
/// on the default plant; at `1e-3` the data fit barely moves.
pub fn experiment_optimizer() -> OptimizerConfig {
    OptimizerConfig {
        step_size: 1e-2,
        ..OptimizerConfig::default()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerPatch {
    step_size: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    epsilon: Option<f64>,
    max_iterations: Option<usize>,
    tolerance: Option<f64>,
}

fn optimizer_overrides<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<OptimizerConfig, D::Error> {
    let p = OptimizerPatch::deserialize(d)?;
    let mut c = experiment_optimizer();
    if let Some(v) = p.step_size {
        c.step_size = v;
    }
    if let Some(v) = p.beta1 {
        c.beta1 = v;
    }
    if let Some(v) = p.beta2 {
        c.beta2 = v;
    }
    if let Some(v) = p.epsilon {
        c.epsilon = v;
    }
    if let Some(v) = p.max_iterations {
        c.max_iterations = v;
    }
    if let Some(v) = p.tolerance {
        c.tolerance = v;
    }
    Ok(c)
}

impl Default for TrainingSettings {
    fn default() -> Self {
        Self {
            mode: TrainingMode::Regularized,
            lambda: 0.01,
            pinn_lambda: 1.0,
            hidden_widths: vec![16],
            init_scale: 4.0,
            stride: 10,
            nn_input: NnInput::Basis,
            input_scaling: None,
            optimizer: experiment_optimizer(),
        }
    }
}

impl TrainingSettings {
    pub fn to_training_config(&self, anchor: LipParams, seed: u64) -> TrainingConfig {
        let mut cfg = TrainingConfig::new(anchor, self.lambda);
        cfg.mode = self.mode;
        cfg.pinn_lambda = self.pinn_lambda;
        cfg.hidden_widths = self.hidden_widths.clone();
        cfg.init_scale = self.init_scale;
        cfg.stride = self.stride;
        cfg.nn_input = self.nn_input;
        cfg.input_scaling = self.input_scaling.clone();
        cfg.optimizer = self.optimizer.clone();
        cfg.seed = seed;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSettings {
    pub references: Vec<String>,
    pub nl_values: Vec<usize>,
    /// Number of network initializations per trained contender.
    pub seed_count: usize,
    pub contenders: Vec<Contender>,
    pub sweep_lambdas: Vec<f64>,
    pub sweep_seed_count: usize,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self {
            references: vec!["r1".into(), "r2".into()],
            nl_values: vec![16, 8],
            seed_count: 5,
            contenders: vec![
                Contender::NoFeedforward,
                Contender::Lip,
                Contender::Pgnn {
                    mode: TrainingMode::Regularized,
                    lambda: 0.01,
                },
                Contender::Pgnn {
                    mode: TrainingMode::Unregularized,
                    lambda: 0.0,
                },
                Contender::Pgnn {
                    mode: TrainingMode::Sequential,
                    lambda: 0.0,
                },
                Contender::Pgnn {
                    mode: TrainingMode::PinnBaseline,
                    lambda: 0.0,
                },
            ],
            sweep_lambdas: vec![0.0, 1e-4, 1e-2, 1.0],
            sweep_seed_count: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root of every random stream in the experiment.
    pub seed: u64,
    pub basis: String,
    pub plant: PlantConfig,
    pub data: DataSettings,
    pub training: TrainingSettings,
    pub evaluation: EvaluationSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            basis: "clm".into(),
            plant: PlantConfig::default(),
            data: DataSettings::default(),
            training: TrainingSettings::default(),
            evaluation: EvaluationSettings::default(),
        }
    }
}

/// Independent seed for stream `k` derived from the root seed.
pub fn derive_seed(root: u64, k: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = root.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(k + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(s).map_err(|e| Error::config("config", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        if !(self.data.encoder_resolution >= 0.0 && self.data.encoder_resolution.is_finite()) {
            return Err(Error::config("data.encoder_resolution", "must be >= 0"));
        }
        crate::basis::BasisMap::from_key(&self.basis, self.plant.ts)?;
        crate::trajectory::preset(&self.data.reference, self.plant.ts).map_err(|_| {
            Error::config(
                "data.reference",
                format!("unknown preset `{}`", self.data.reference),
            )
        })?;
        let t = &self.training;
        if !(t.lambda >= 0.0 && t.lambda.is_finite()) {
            return Err(Error::config("training.lambda", "must be finite and >= 0"));
        }
        let probe = t.to_training_config(
            LipParams {
                theta: vec![0.0; 4],
            },
            0,
        );
        probe.validate(4).map_err(|e| match e {
            Error::Config { field, reason } => Error::config(format!("training.{field}"), reason),
            other => other,
        })?;
        let e = &self.evaluation;
        for r in &e.references {
            if !matches!(r.as_str(), "r1" | "r2") {
                return Err(Error::config(
                    "evaluation.references",
                    format!("unknown preset `{r}`"),
                ));
            }
        }
        if e.nl_values.is_empty() || e.nl_values.contains(&0) {
            return Err(Error::config(
                "evaluation.nl_values",
                "need positive widths",
            ));
        }
        if e.seed_count == 0 || e.sweep_seed_count == 0 {
            return Err(Error::config("evaluation.seed_count", "must be >= 1"));
        }
        if e.sweep_lambdas
            .iter()
            .any(|l| !(*l >= 0.0 && l.is_finite()))
        {
            return Err(Error::config(
                "evaluation.sweep_lambdas",
                "entries must be finite and >= 0",
            ));
        }
        Ok(())
    }

    /// Plant used to record identification data.
    pub fn data_plant(&self) -> PlantConfig {
        let mut p = self.plant.clone();
        p.encoder_resolution = self.data.encoder_resolution;
        p.seed = derive_seed(self.seed, 0);
        p
    }

    /// Plant used for tracking experiments (dither is switched off by the caller).
    pub fn eval_plant(&self) -> PlantConfig {
        let mut p = self.plant.clone();
        p.seed = derive_seed(self.seed, 0);
        p
    }

    /// Network initialization seeds for the comparison table.
    pub fn model_seeds(&self) -> Vec<u64> {
        (0..self.evaluation.seed_count as u64)
            .map(|k| derive_seed(self.seed, 100 + k))
            .collect()
    }

    pub fn sweep_seeds(&self) -> Vec<u64> {
        (0..self.evaluation.sweep_seed_count as u64)
            .map(|k| derive_seed(self.seed, 200 + k))
            .collect()
    }

    /// Seed of the single model trained by the `train` command.
    pub fn train_seed(&self) -> u64 {
        derive_seed(self.seed, 1)
    }
}

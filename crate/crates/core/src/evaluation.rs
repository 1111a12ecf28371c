//! Tracking experiments, the MAE metric, regularization sweeps and
//! comparison tables across training modes.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisMap;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::feedforward::generate_ff;
use crate::lip::LipParams;
use crate::model::{InverseModel, LipModel, PgnnModel};
use crate::plant::{run_closed_loop, PlantConfig};
use crate::training::{train, TrainingConfig, TrainingHistory, TrainingMode};
use crate::trajectory::ReferenceProfile;

/// Mean absolute value.
pub fn mae(e: &[f64]) -> Result<f64> {
    if e.is_empty() {
        return Err(Error::Empty("error sequence"));
    }
    Ok(e.iter().map(|v| v.abs()).sum::<f64>() / e.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingResult {
    /// `r - y` on the true position.
    pub e: Vec<f64>,
    /// True position.
    pub y: Vec<f64>,
    pub u_ff: Vec<f64>,
    pub mae: f64,
    pub reference_id: String,
    pub model_id: String,
}

/// Runs the closed loop on `reference` with feedforward from `model` (none
/// when `None`). Dither is off; quantization follows `plant_cfg`.
pub fn run_tracking_experiment(
    model: Option<&dyn InverseModel>,
    reference: &ReferenceProfile,
    plant_cfg: &PlantConfig,
    reference_id: &str,
    model_id: &str,
) -> Result<TrackingResult> {
    let u_ff = match model {
        Some(m) => generate_ff(m, reference)?,
        None => vec![0.0; reference.len()],
    };
    let log = run_closed_loop(reference, model.map(|_| u_ff.as_slice()), plant_cfg, false)?;
    Ok(TrackingResult {
        mae: mae(&log.e)?,
        e: log.e,
        y: log.y,
        u_ff,
        reference_id: reference_id.to_string(),
        model_id: model_id.to_string(),
    })
}

fn drift_sq(theta: &[f64], anchor: &[f64]) -> f64 {
    theta
        .iter()
        .zip(anchor)
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub seed: u64,
    pub best_iteration: usize,
    pub total_cost: f64,
    pub data_fit: f64,
    /// `||theta_phy - theta_ref||^2` of the returned model.
    pub drift_sq: f64,
    pub theta_phy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    #[serde(skip)]
    pub histories: Vec<TrainingHistory>,
}

impl SweepTable {
    /// Mean drift norm over seeds for each lambda, in first-seen order.
    pub fn mean_drift(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64, usize)> = Vec::new();
        for r in &self.rows {
            let d = r.drift_sq.sqrt();
            match out.iter_mut().find(|(l, _, _)| *l == r.lambda) {
                Some(e) => {
                    e.1 += d;
                    e.2 += 1;
                }
                None => out.push((r.lambda, d, 1)),
            }
        }
        out.into_iter().map(|(l, s, n)| (l, s / n as f64)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,seed,best_iteration,total_cost,data_fit,drift_sq");
        let n_phy = self.rows.first().map_or(0, |r| r.theta_phy.len());
        for i in 0..n_phy {
            let _ = write!(s, ",theta_phy_{i}");
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(
                s,
                "{:.16e},{},{},{:.16e},{:.16e},{:.16e}",
                r.lambda, r.seed, r.best_iteration, r.total_cost, r.data_fit, r.drift_sq
            );
            for v in &r.theta_phy {
                let _ = write!(s, ",{v:.16e}");
            }
            s.push('\n');
        }
        s
    }

    pub fn render_text(&self) -> String {
        let mut s = format!(
            "{:>10} {:>20} {:>8} {:>14} {:>14}\n",
            "lambda", "seed", "best_it", "data_fit", "drift"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>10.3e} {:>20} {:>8} {:>14.6e} {:>14.6e}",
                r.lambda,
                r.seed,
                r.best_iteration,
                r.data_fit,
                r.drift_sq.sqrt()
            );
        }
        s
    }
}

/// Trains one regularized model per `(lambda, seed)` pair (`Lambda = lambda I`).
/// Cells run in parallel; rows come back in lambda-major order.
pub fn lambda_sweep(
    dataset: &Dataset,
    map: &BasisMap,
    base: &TrainingConfig,
    lambdas: &[f64],
    seeds: &[u64],
) -> Result<SweepTable> {
    if lambdas.is_empty() || seeds.is_empty() {
        return Err(Error::Empty("lambda sweep grid"));
    }
    let cells: Vec<(f64, u64)> = lambdas
        .iter()
        .flat_map(|&l| seeds.iter().map(move |&s| (l, s)))
        .collect();
    let results: Vec<Result<(SweepRow, TrainingHistory)>> = cells
        .par_iter()
        .map(|&(lambda, seed)| {
            let mut cfg = base.clone();
            cfg.mode = TrainingMode::Regularized;
            cfg.lambda_diag = vec![lambda; map.n_out()];
            cfg.seed = seed;
            let (model, history) = train(dataset, map, map.spec(), &cfg)?;
            let best = history.best();
            let row = SweepRow {
                lambda,
                seed,
                best_iteration: history.best_iteration,
                total_cost: best.total,
                data_fit: best.data_fit,
                drift_sq: drift_sq(&model.params.theta_phy, &cfg.theta_lip_ref.theta),
                theta_phy: model.params.theta_phy.clone(),
            };
            Ok((row, history))
        })
        .collect();
    let mut table = SweepTable {
        rows: Vec::with_capacity(cells.len()),
        histories: Vec::with_capacity(cells.len()),
    };
    for r in results {
        let (row, h) = r?;
        table.rows.push(row);
        table.histories.push(h);
    }
    Ok(table)
}

/// A feedforward source in a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Contender {
    /// Feedback only.
    NoFeedforward,
    Lip,
    Pgnn {
        mode: TrainingMode,
        lambda: f64,
    },
}

impl Contender {
    pub fn label(&self) -> String {
        match self {
            Contender::NoFeedforward => "no_ff".into(),
            Contender::Lip => "lip".into(),
            Contender::Pgnn { mode, lambda } => match mode {
                TrainingMode::Regularized => format!("regularized_l{lambda:e}"),
                TrainingMode::Unregularized => "unregularized".into(),
                TrainingMode::Sequential => "sequential".into(),
                TrainingMode::PinnBaseline => "pinn_baseline".into(),
            },
        }
    }

    fn trains(&self) -> bool {
        matches!(self, Contender::Pgnn { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub contender: String,
    pub reference: String,
    pub n_l: usize,
    pub seed: u64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub cells: Vec<ComparisonCell>,
}

impl ComparisonTable {
    pub fn get(&self, contender: &str, reference: &str, n_l: usize, seed: u64) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| {
                c.contender == contender
                    && c.reference == reference
                    && c.n_l == n_l
                    && c.seed == seed
            })
            .map(|c| c.mae)
    }

    pub fn mean(&self, contender: &str, reference: &str, n_l: usize) -> Option<f64> {
        let v: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.contender == contender && c.reference == reference && c.n_l == n_l)
            .map(|c| c.mae)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("contender,reference,n_l,seed,mae\n");
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.16e}",
                c.contender, c.reference, c.n_l, c.seed, c.mae
            );
        }
        s
    }

    /// Seed-averaged MAE with one row per (contender, n_l) and one column per reference.
    pub fn render_text(&self) -> String {
        let mut refs: Vec<&str> = Vec::new();
        let mut rows: Vec<(&str, usize)> = Vec::new();
        for c in &self.cells {
            if !refs.contains(&c.reference.as_str()) {
                refs.push(&c.reference);
            }
            if !rows.contains(&(c.contender.as_str(), c.n_l)) {
                rows.push((&c.contender, c.n_l));
            }
        }
        let mut s = format!("{:<24} {:>4}", "contender", "n_l");
        for r in &refs {
            let _ = write!(s, " {:>14}", format!("MAE {r}"));
        }
        s.push('\n');
        for (name, nl) in rows {
            let _ = write!(s, "{name:<24} {nl:>4}");
            for r in &refs {
                let _ = write!(s, " {:>14.6e}", self.mean(name, r, nl).unwrap_or(f64::NAN));
            }
            s.push('\n');
        }
        s
    }
}

/// Everything a comparison needs besides the grid itself.
pub struct ComparisonSetup<'a> {
    pub dataset: &'a Dataset,
    pub map: &'a BasisMap,
    pub lip: &'a LipParams,
    /// Template for every trained model; mode, lambda, width and seed are overridden.
    pub base: &'a TrainingConfig,
    /// Plant used for tracking (dither is always off).
    pub plant: &'a PlantConfig,
}

/// MAE for every (contender, reference, n_l, seed). Contenders that do not
/// train report the same value for every `n_l` and seed.
pub fn comparison_table(
    setup: &ComparisonSetup<'_>,
    contenders: &[Contender],
    references: &[(String, ReferenceProfile)],
    nl_values: &[usize],
    seeds: &[u64],
) -> Result<ComparisonTable> {
    if contenders.is_empty() || references.is_empty() || nl_values.is_empty() || seeds.is_empty() {
        return Err(Error::Empty("comparison grid"));
    }
    let lip_model = LipModel::new(setup.lip.clone(), setup.map.clone())?;
    // fixed contenders are evaluated once per reference
    let fixed: Vec<(usize, usize)> = contenders
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.trains())
        .flat_map(|(i, _)| (0..references.len()).map(move |j| (i, j)))
        .collect();
    let fixed_mae: Vec<Result<f64>> = fixed
        .par_iter()
        .map(|&(i, j)| {
            let model: Option<&dyn InverseModel> = match contenders[i] {
                Contender::Lip => Some(&lip_model),
                _ => None,
            };
            let (id, r) = &references[j];
            Ok(run_tracking_experiment(model, r, setup.plant, id, &contenders[i].label())?.mae)
        })
        .collect();

    let jobs: Vec<(usize, usize, u64)> = contenders
        .iter()
        .enumerate()
        .filter(|(_, c)| c.trains())
        .flat_map(|(i, _)| {
            nl_values
                .iter()
                .flat_map(move |&nl| seeds.iter().map(move |&s| (i, nl, s)))
        })
        .collect();
    let trained: Vec<Result<Vec<f64>>> = jobs
        .par_iter()
        .map(|&(i, nl, seed)| {
            let Contender::Pgnn { mode, lambda } = contenders[i] else {
                unreachable!()
            };
            let mut cfg = setup.base.clone();
            cfg.mode = mode;
            cfg.lambda_diag = vec![lambda; setup.map.n_out()];
            cfg.hidden_widths = vec![nl];
            cfg.seed = seed;
            cfg.theta_lip_ref = setup.lip.clone();
            let (model, _) = train(setup.dataset, setup.map, setup.map.spec(), &cfg)?;
            references
                .iter()
                .map(|(id, r)| {
                    Ok(run_tracking_experiment(
                        Some(&model as &PgnnModel),
                        r,
                        setup.plant,
                        id,
                        &contenders[i].label(),
                    )?
                    .mae)
                })
                .collect()
        })
        .collect();

    let mut fixed_vals = Vec::with_capacity(fixed.len());
    for v in fixed_mae {
        fixed_vals.push(v?);
    }
    let mut trained_vals = Vec::with_capacity(jobs.len());
    for v in trained {
        trained_vals.push(v?);
    }
    let mut cells = Vec::new();
    for (i, c) in contenders.iter().enumerate() {
        for &nl in nl_values {
            for &seed in seeds {
                for (j, (id, _)) in references.iter().enumerate() {
                    let mae = if c.trains() {
                        let k = jobs.iter().position(|&job| job == (i, nl, seed)).unwrap();
                        trained_vals[k][j]
                    } else {
                        fixed_vals[fixed.iter().position(|&f| f == (i, j)).unwrap()]
                    };
                    cells.push(ComparisonCell {
                        contender: c.label(),
                        reference: id.clone(),
                        n_l: nl,
                        seed,
                        mae,
                    });
                }
            }
        }
    }
    Ok(ComparisonTable { cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mae_cases() {
        assert_eq!(mae(&[0.0; 4]).unwrap(), 0.0);
        assert_eq!(mae(&[2.5, -2.5]).unwrap(), 2.5);
        assert!(mae(&[]).is_err());
    }

    #[test]
    fn labels_are_distinct() {
        let c = [
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
        ];
        let labels: std::collections::HashSet<String> = c.iter().map(|c| c.label()).collect();
        assert_eq!(labels.len(), c.len());
        assert_eq!(c[2].label(), "regularized_l1e-2");
    }
}

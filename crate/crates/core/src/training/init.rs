//! Closed-form initialization of the output layer and physical parameters
//! for fixed random hidden layers.
//!
//! With the hidden layers frozen the cost is a convex quadratic in
//! `[W_out, b_out, theta_phy]`, so its unique minimizer is one linear solve.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::lip::dot;
use crate::model::{FeatureSet, PgnnParams};
use crate::nn::NnParams;

use super::{TrainingConfig, TrainingMode};

/// Normal equations of the cost restricted to the output layer.
#[derive(Debug, Clone)]
pub struct RestrictedProblem {
    /// `(1/N) sum phi_ol phi_ol^T` plus the regularization block.
    pub m_r: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Number of leading entries (`n_l` weights and the bias) that belong to the network.
    pub n_nn: usize,
    /// Whether the physical parameters are part of the solve.
    pub with_phy: bool,
}

/// Output of [`init_output_layer_set`].
#[derive(Debug, Clone)]
pub struct OutputLayerInit {
    pub params: PgnnParams,
    pub rcond: f64,
    pub problem: RestrictedProblem,
}

impl RestrictedProblem {
    /// Assembles the problem for the given mode.
    ///
    /// Regularized and unregularized modes solve for `[W_out, b_out, theta_phy]`.
    /// Sequential mode fixes `theta_phy` at the anchor and fits the residual.
    /// The PINN baseline fixes `theta_phy = 0` and fits `(u + lambda a^T T) / (1 + lambda)`,
    /// which has the same minimizer as its penalized cost.
    pub(crate) fn build(hidden: &NnParams, set: &FeatureSet, cfg: &TrainingConfig) -> Result<Self> {
        let h = set.hidden_features(hidden)?;
        let n_l = hidden.hidden_width();
        let n_phy = set.n_phy;
        let anchor = &cfg.theta_lip_ref.theta;
        let with_phy = matches!(
            cfg.mode,
            TrainingMode::Regularized | TrainingMode::Unregularized
        );
        let n_nn = n_l + 1;
        let dim = if with_phy { n_nn + n_phy } else { n_nn };
        let mut m = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        let mut row = vec![0.0; dim];
        for k in 0..set.len() {
            let t = set.basis_row(k);
            row[..n_l].copy_from_slice(&h[k * n_l..(k + 1) * n_l]);
            row[n_l] = 1.0;
            if with_phy {
                row[n_nn..].copy_from_slice(t);
            }
            let target = match cfg.mode {
                TrainingMode::Regularized | TrainingMode::Unregularized => set.u[k],
                TrainingMode::Sequential => set.u[k] - dot(anchor, t),
                TrainingMode::PinnBaseline => {
                    (set.u[k] + cfg.pinn_lambda * dot(anchor, t)) / (1.0 + cfg.pinn_lambda)
                }
            };
            for j in 0..dim {
                rhs[j] += target * row[j];
                for i in 0..=j {
                    m[(i, j)] += row[i] * row[j];
                }
            }
        }
        let inv = 1.0 / set.len() as f64;
        rhs *= inv;
        for j in 0..dim {
            for i in 0..=j {
                let v = m[(i, j)] * inv;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        if with_phy {
            let lambda = cfg.effective_lambda();
            for i in 0..n_phy {
                m[(n_nn + i, n_nn + i)] += lambda[i];
                rhs[n_nn + i] += lambda[i] * anchor[i];
            }
        }
        Ok(Self {
            m_r: m,
            rhs,
            n_nn,
            with_phy,
        })
    }

    /// `M_R x - rhs`, half the gradient of the restricted cost at `x`.
    pub fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.m_r * x - &self.rhs
    }

    /// The point that reproduces the anchor model: zero output layer with the
    /// physical parameters at the anchor (or unchanged when they are not solved for).
    pub fn anchor_point(&self, anchor: &[f64]) -> DVector<f64> {
        let mut x = DVector::zeros(self.m_r.nrows());
        if self.with_phy {
            for (i, a) in anchor.iter().enumerate() {
                x[self.n_nn + i] = *a;
            }
        }
        x
    }
}

pub(crate) fn init_output_layer_set(
    hidden: &NnParams,
    set: &FeatureSet,
    cfg: &TrainingConfig,
) -> Result<OutputLayerInit> {
    let problem = RestrictedProblem::build(hidden, set, cfg)?;
    let sol = solve_spd(
        &problem.m_r,
        &problem.rhs,
        "restricted output-layer matrix M_R",
    )?;
    let n_l = hidden.hidden_width();
    let mut nn = hidden.clone();
    {
        let out = nn.output_layer_mut();
        out.weights_mut().copy_from_slice(&sol.x.as_slice()[..n_l]);
        out.biases_mut()[0] = sol.x[n_l];
    }
    let theta_phy = match cfg.mode {
        TrainingMode::Regularized | TrainingMode::Unregularized => {
            sol.x.as_slice()[problem.n_nn..].to_vec()
        }
        TrainingMode::Sequential => cfg.theta_lip_ref.theta.clone(),
        TrainingMode::PinnBaseline => vec![0.0; set.n_phy],
    };
    if theta_phy.iter().chain(sol.x.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("output-layer initialization".into()));
    }
    Ok(OutputLayerInit {
        params: PgnnParams::new(nn, theta_phy)?,
        rcond: sol.rcond,
        problem,
    })
}

/// Whether the initialization strictly improves on the anchor model, plus the
/// norm of `M_R x_anchor - rhs` that decides it.
pub(crate) fn strict_condition_set(
    hidden: &NnParams,
    set: &FeatureSet,
    cfg: &TrainingConfig,
) -> Result<(bool, f64)> {
    let problem = RestrictedProblem::build(hidden, set, cfg)?;
    let x = problem.anchor_point(&cfg.theta_lip_ref.theta);
    let r = problem.residual(&x);
    // compare against the magnitude of the terms that cancel
    let scale = (&problem.m_r * &x).norm().max(problem.rhs.norm());
    let norm = r.norm();
    Ok((norm > 1e-10 * scale, norm))
}

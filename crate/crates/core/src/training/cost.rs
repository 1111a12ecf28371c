//! Training objectives evaluated over a precomputed [`FeatureSet`].

use crate::lip::dot;
use crate::model::{FeatureSet, PgnnParams};
use crate::nn::Workspace;

/// Total cost and its two parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostTerms {
    pub total: f64,
    pub data_fit: f64,
    pub reg: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Objective<'a> {
    /// MSE + (theta_phy - anchor)^T diag(lambda) (theta_phy - anchor).
    Anchored {
        lambda: &'a [f64],
        anchor: &'a [f64],
    },
    /// MSE + lambda (1/N) sum (u_hat - anchor^T T)^2.
    Pinn { lambda: f64, anchor: &'a [f64] },
}

/// Evaluates the objective and, when `grad` is given, adds its gradient in
/// the flat [`PgnnParams`] layout.
pub(crate) fn evaluate(
    params: &PgnnParams,
    set: &FeatureSet,
    obj: Objective<'_>,
    mut grad: Option<&mut [f64]>,
    ws: &mut Workspace,
) -> CostTerms {
    let n = set.len() as f64;
    let n_nn = params.nn.n_params();
    let theta = &params.theta_phy;
    let mut sse = 0.0;
    let mut penalty = 0.0;
    for k in 0..set.len() {
        let t = set.basis_row(k);
        let f = params.nn.forward_cached(set.input_row(k), ws);
        let u_hat = f + dot(theta, t);
        let r = set.u[k] - u_hat;
        sse += r * r;
        // d(sample cost)/d(u_hat)
        let mut slope = -2.0 * r;
        if let Objective::Pinn { lambda, anchor } = obj {
            let gap = u_hat - dot(anchor, t);
            penalty += gap * gap;
            slope += 2.0 * lambda * gap;
        }
        if let Some(g) = grad.as_deref_mut() {
            let s = slope / n;
            params.nn.backprop_into(ws, s, &mut g[..n_nn]);
            for (gi, ti) in g[n_nn..].iter_mut().zip(t) {
                *gi += s * ti;
            }
        }
    }
    let data_fit = sse / n;
    let reg = match obj {
        Objective::Anchored { lambda, anchor } => {
            let mut reg = 0.0;
            for i in 0..theta.len() {
                let d = theta[i] - anchor[i];
                reg += lambda[i] * d * d;
                if let Some(g) = grad.as_deref_mut() {
                    g[n_nn + i] += 2.0 * lambda[i] * d;
                }
            }
            reg
        }
        Objective::Pinn { lambda, .. } => lambda * penalty / n,
    };
    CostTerms {
        total: data_fit + reg,
        data_fit,
        reg,
    }
}

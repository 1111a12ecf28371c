//! Closed-form identification of the linear-in-the-parameters model
//! `u_hat = theta^T T_phy(phi)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::BasisMap;
use crate::data::{window_into, Dataset, RegressorSpec};
use crate::error::{Error, Result};
use crate::linalg::solve_spd;

/// Identified physical parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipParams {
    pub theta: Vec<f64>,
}

impl LipParams {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("LIP parameters".into()));
        }
        Ok(Self { theta })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn predict(&self, map: &BasisMap, phi: &[f64]) -> Result<f64> {
        if self.theta.len() != map.n_out() {
            return Err(Error::dims("LIP parameters", map.n_out(), self.theta.len()));
        }
        let f = map.eval(phi)?;
        Ok(dot(&self.theta, &f))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn check_spec(map: &BasisMap, spec: &RegressorSpec) -> Result<()> {
    let req = map.spec();
    if (req.n_a, req.n_b, req.n_c) != (spec.n_a, spec.n_b, spec.n_c) {
        return Err(Error::dims(
            "regressor length for basis",
            req.len(),
            spec.len(),
        ));
    }
    Ok(())
}

/// Basis vectors evaluated at every `stride`-th valid sample, stored row-major.
#[derive(Debug, Clone)]
pub struct BasisSamples {
    pub n_out: usize,
    pub rows: Vec<f64>,
    pub u: Vec<f64>,
    pub t: Vec<usize>,
}

impl BasisSamples {
    pub fn collect(
        dataset: &Dataset,
        map: &BasisMap,
        spec: &RegressorSpec,
        stride: usize,
    ) -> Result<Self> {
        check_spec(map, spec)?;
        let stride = stride.max(1);
        let (t0, t1) = spec.valid_sample_range(dataset.len())?;
        let n_out = map.n_out();
        let count = (t1 - t0) / stride + 1;
        let mut rows = vec![0.0; count * n_out];
        let mut u = Vec::with_capacity(count);
        let mut ts = Vec::with_capacity(count);
        let mut phi = Vec::with_capacity(spec.len());
        for (k, t) in (t0..=t1).step_by(stride).enumerate() {
            window_into(dataset.y(), dataset.u(), t, spec, &mut phi);
            map.eval_into(&phi, &mut rows[k * n_out..(k + 1) * n_out])?;
            u.push(dataset.u()[t]);
            ts.push(t);
        }
        Ok(Self {
            n_out,
            rows,
            u,
            t: ts,
        })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k * self.n_out..(k + 1) * self.n_out]
    }

    /// `(1/N) sum T T^T`, exactly symmetric.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.n_out;
        let mut m = DMatrix::zeros(n, n);
        for k in 0..self.len() {
            let r = self.row(k);
            for j in 0..n {
                for i in 0..=j {
                    m[(i, j)] += r[i] * r[j];
                }
            }
        }
        let inv = 1.0 / self.len() as f64;
        for j in 0..n {
            for i in 0..=j {
                let v = m[(i, j)] * inv;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// `(1/N) sum T x` for a per-sample signal `x`.
    pub fn project(&self, x: &[f64]) -> DVector<f64> {
        let mut b = DVector::zeros(self.n_out);
        for (k, xk) in x.iter().enumerate() {
            for (i, ti) in self.row(k).iter().enumerate() {
                b[i] += ti * xk;
            }
        }
        b / self.len() as f64
    }
}

pub fn gram_matrix(
    dataset: &Dataset,
    map: &BasisMap,
    spec: &RegressorSpec,
) -> Result<DMatrix<f64>> {
    Ok(BasisSamples::collect(dataset, map, spec, 1)?.gram())
}

/// Least-squares solve of the normal equations on precomputed basis samples.
pub fn fit_lip_samples(samples: &BasisSamples) -> Result<LipParams> {
    if samples.len() < samples.n_out {
        return Err(Error::DatasetTooShort {
            len: samples.len(),
            needed: samples.n_out,
        });
    }
    let m = samples.gram();
    let b = samples.project(&samples.u);
    let sol = solve_spd(&m, &b, "LIP Gram matrix M")?;
    LipParams::new(sol.x.iter().cloned().collect())
}

pub fn fit_lip(dataset: &Dataset, map: &BasisMap, spec: &RegressorSpec) -> Result<LipParams> {
    fit_lip_samples(&BasisSamples::collect(dataset, map, spec, 1)?)
}

/// Normalized inner product `(1/N) sum xa xb`.
pub fn correlation(xa: &[f64], xb: &[f64]) -> Result<f64> {
    if xa.len() != xb.len() {
        return Err(Error::dims("correlation", xa.len(), xb.len()));
    }
    if xa.is_empty() {
        return Err(Error::Empty("correlation"));
    }
    Ok(dot(xa, xb) / xa.len() as f64)
}

/// `u(t) - theta^T T_phy(phi(t))` over the valid sample range.
pub fn unmodelled_residual(
    dataset: &Dataset,
    lip: &LipParams,
    map: &BasisMap,
    spec: &RegressorSpec,
) -> Result<Vec<f64>> {
    if lip.len() != map.n_out() {
        return Err(Error::dims("LIP parameters", map.n_out(), lip.len()));
    }
    let s = BasisSamples::collect(dataset, map, spec, 1)?;
    Ok((0..s.len())
        .map(|k| s.u[k] - dot(&lip.theta, s.row(k)))
        .collect())
}

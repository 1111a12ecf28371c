//! Identified inverse models and the predictor interface they share.

use serde::{Deserialize, Serialize};

use crate::basis::BasisMap;
use crate::data::{window_into, Dataset, Regressor, RegressorSpec};
use crate::error::{Error, Result};
use crate::lip::{check_spec, dot, LipParams};
use crate::nn::{NnParams, Workspace};

/// Anything that maps a regressor to a predicted input `u_hat`.
pub trait InverseModel {
    fn spec(&self) -> &RegressorSpec;
    fn predict(&self, phi: &[f64]) -> Result<f64>;
}

/// Which vector the network sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NnInput {
    /// The basis features `T_phy(phi)`, e.g. `[d2y, dy, sign(dy), y]` for the motor.
    #[default]
    Basis,
    /// The raw regressor `phi`.
    Regressor,
}

/// Physical-layer parameters next to the network weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgnnParams {
    pub nn: NnParams,
    pub theta_phy: Vec<f64>,
}

/// Same shape as [`PgnnParams`]; entries hold partial derivatives.
pub type PgnnGradient = PgnnParams;

impl PgnnParams {
    pub fn new(nn: NnParams, theta_phy: Vec<f64>) -> Result<Self> {
        if theta_phy.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("physical parameters".into()));
        }
        Ok(Self { nn, theta_phy })
    }

    pub fn n_params(&self) -> usize {
        self.nn.n_params() + self.theta_phy.len()
    }

    /// Network parameters first, then the physical parameters.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.nn.to_flat();
        v.extend_from_slice(&self.theta_phy);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::dims(
                "flat PGNN parameters",
                self.n_params(),
                flat.len(),
            ));
        }
        let k = self.nn.n_params();
        self.nn.set_flat(&flat[..k])?;
        self.theta_phy.copy_from_slice(&flat[k..]);
        Ok(())
    }
}

/// Linear-in-the-parameters predictor.
#[derive(Debug, Clone)]
pub struct LipModel {
    pub params: LipParams,
    pub map: BasisMap,
}

impl LipModel {
    pub fn new(params: LipParams, map: BasisMap) -> Result<Self> {
        if params.len() != map.n_out() {
            return Err(Error::dims("LIP parameters", map.n_out(), params.len()));
        }
        Ok(Self { params, map })
    }
}

impl InverseModel for LipModel {
    fn spec(&self) -> &RegressorSpec {
        self.map.spec()
    }

    fn predict(&self, phi: &[f64]) -> Result<f64> {
        self.params.predict(&self.map, phi)
    }
}

/// A trained physics-guided network together with everything needed to
/// evaluate it on new regressors.
#[derive(Debug, Clone)]
pub struct PgnnModel {
    pub params: PgnnParams,
    pub map: BasisMap,
    /// Per-entry multipliers applied to the network input.
    pub input_scaling: Vec<f64>,
    pub nn_input: NnInput,
}

impl PgnnModel {
    pub fn new(
        params: PgnnParams,
        map: BasisMap,
        input_scaling: Vec<f64>,
        nn_input: NnInput,
    ) -> Result<Self> {
        if params.theta_phy.len() != map.n_out() {
            return Err(Error::dims(
                "physical parameters",
                map.n_out(),
                params.theta_phy.len(),
            ));
        }
        let n_in = input_dim(&map, nn_input);
        if params.nn.input_dim() != n_in {
            return Err(Error::dims("network input", n_in, params.nn.input_dim()));
        }
        if input_scaling.len() != n_in {
            return Err(Error::dims("input scaling", n_in, input_scaling.len()));
        }
        Ok(Self {
            params,
            map,
            input_scaling,
            nn_input,
        })
    }

    /// Network and physical-layer contributions evaluated separately.
    pub fn predict_parts(&self, phi: &[f64]) -> Result<(f64, f64)> {
        let t = self.map.eval(phi)?;
        let raw: &[f64] = match self.nn_input {
            NnInput::Basis => &t,
            NnInput::Regressor => phi,
        };
        let x: Vec<f64> = raw
            .iter()
            .zip(&self.input_scaling)
            .map(|(v, s)| v * s)
            .collect();
        Ok((self.params.nn.forward(&x)?, dot(&self.params.theta_phy, &t)))
    }
}

impl InverseModel for PgnnModel {
    fn spec(&self) -> &RegressorSpec {
        self.map.spec()
    }

    fn predict(&self, phi: &[f64]) -> Result<f64> {
        let (nn, phy) = self.predict_parts(phi)?;
        Ok(nn + phy)
    }
}

/// `f_NN(scaled input) + theta_phy^T T_phy(phi)`.
pub fn pgnn_predict(model: &PgnnModel, phi: &Regressor) -> Result<f64> {
    model.predict(&phi.phi)
}

pub(crate) fn input_dim(map: &BasisMap, nn_input: NnInput) -> usize {
    match nn_input {
        NnInput::Basis => map.n_out(),
        NnInput::Regressor => map.spec().len(),
    }
}

/// Mean squared prediction error over the valid sample range.
pub fn mse_cost<M: InverseModel + ?Sized>(model: &M, dataset: &Dataset) -> Result<f64> {
    let spec = *model.spec();
    let (t0, t1) = spec.valid_sample_range(dataset.len())?;
    let mut phi = Vec::with_capacity(spec.len());
    let mut sum = 0.0;
    for t in t0..=t1 {
        window_into(dataset.y(), dataset.u(), t, &spec, &mut phi);
        let e = dataset.u()[t] - model.predict(&phi)?;
        sum += e * e;
    }
    Ok(sum / (t1 - t0 + 1) as f64)
}

/// Per-sample basis values, scaled network inputs and measured inputs,
/// evaluated once and reused by every cost and gradient evaluation.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub n_phy: usize,
    pub n_in: usize,
    pub basis: Vec<f64>,
    pub inputs: Vec<f64>,
    pub u: Vec<f64>,
    pub scaling: Vec<f64>,
}

impl FeatureSet {
    /// Collects every `stride`-th valid sample. With `scaling = None` each
    /// network input is scaled to unit maximum magnitude over the collected samples.
    pub fn build(
        dataset: &Dataset,
        map: &BasisMap,
        spec: &RegressorSpec,
        nn_input: NnInput,
        scaling: Option<&[f64]>,
        stride: usize,
    ) -> Result<Self> {
        check_spec(map, spec)?;
        let stride = stride.max(1);
        let (t0, t1) = spec.valid_sample_range(dataset.len())?;
        let n_phy = map.n_out();
        let n_in = input_dim(map, nn_input);
        let count = (t1 - t0) / stride + 1;
        let mut basis = vec![0.0; count * n_phy];
        let mut inputs = vec![0.0; count * n_in];
        let mut u = Vec::with_capacity(count);
        let mut phi = Vec::with_capacity(spec.len());
        for (k, t) in (t0..=t1).step_by(stride).enumerate() {
            window_into(dataset.y(), dataset.u(), t, spec, &mut phi);
            let row = &mut basis[k * n_phy..(k + 1) * n_phy];
            map.eval_into(&phi, row)?;
            let src: &[f64] = match nn_input {
                NnInput::Basis => row,
                NnInput::Regressor => &phi,
            };
            inputs[k * n_in..(k + 1) * n_in].copy_from_slice(src);
            u.push(dataset.u()[t]);
        }
        let scaling = match scaling {
            Some(s) => {
                if s.len() != n_in {
                    return Err(Error::dims("input scaling", n_in, s.len()));
                }
                if s.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("input scaling".into()));
                }
                s.to_vec()
            }
            None => {
                let mut max = vec![0.0f64; n_in];
                for row in inputs.chunks(n_in) {
                    for (m, v) in max.iter_mut().zip(row) {
                        *m = m.max(v.abs());
                    }
                }
                max.iter()
                    .map(|&m| if m > 0.0 { 1.0 / m } else { 1.0 })
                    .collect()
            }
        };
        for row in inputs.chunks_mut(n_in) {
            for (v, s) in row.iter_mut().zip(&scaling) {
                *v *= s;
            }
        }
        Ok(Self {
            n_phy,
            n_in,
            basis,
            inputs,
            u,
            scaling,
        })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn basis_row(&self, k: usize) -> &[f64] {
        &self.basis[k * self.n_phy..(k + 1) * self.n_phy]
    }

    pub fn input_row(&self, k: usize) -> &[f64] {
        &self.inputs[k * self.n_in..(k + 1) * self.n_in]
    }

    /// Last-hidden-layer outputs for every sample, row-major.
    pub fn hidden_features(&self, nn: &NnParams) -> Result<Vec<f64>> {
        if nn.input_dim() != self.n_in {
            return Err(Error::dims("network input", self.n_in, nn.input_dim()));
        }
        let mut ws = Workspace::new(nn);
        let n_l = nn.hidden_width();
        let mut out = Vec::with_capacity(self.len() * n_l);
        for k in 0..self.len() {
            nn.forward_cached(self.input_row(k), &mut ws);
            out.extend_from_slice(ws.last_hidden());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_hidden_random, Activation};

    fn model(theta: Vec<f64>, seed: u64, zero_nn: bool) -> PgnnModel {
        let mut nn = init_hidden_random(&[4, 6], seed, 1.0, Activation::Tanh).unwrap();
        if !zero_nn {
            let out = nn.output_layer_mut();
            out.weights_mut()
                .iter_mut()
                .enumerate()
                .for_each(|(i, w)| *w = 0.3 - 0.1 * i as f64);
            out.biases_mut()[0] = -0.7;
        }
        let params = PgnnParams::new(nn, theta).unwrap();
        PgnnModel::new(
            params,
            BasisMap::clm(1e-4).unwrap(),
            vec![1e-1, 10.0, 1.0, 5.0],
            NnInput::Basis,
        )
        .unwrap()
    }

    #[test]
    fn zero_network_reduces_to_lip() {
        let theta = vec![18.8, 172.0, 7.21, 1.36e-8];
        let m = model(theta.clone(), 1, true);
        let lip = LipParams::new(theta).unwrap();
        let phi = [1.3e-3, 1.2e-3, 1.05e-3];
        assert_eq!(m.predict(&phi).unwrap(), lip.predict(&m.map, &phi).unwrap());
    }

    #[test]
    fn zero_physics_is_pure_network() {
        let m = model(vec![0.0; 4], 2, false);
        let phi = [1.3e-3, 1.2e-3, 1.05e-3];
        let t = m.map.eval(&phi).unwrap();
        let x: Vec<f64> = t.iter().zip(&m.input_scaling).map(|(a, b)| a * b).collect();
        assert_eq!(m.predict(&phi).unwrap(), m.params.nn.forward(&x).unwrap());
    }

    #[test]
    fn mse_of_constant_gap() {
        let map = BasisMap::clm(1e-3).unwrap();
        let lip = LipModel::new(LipParams::new(vec![0.0; 4]).unwrap(), map).unwrap();
        let d = Dataset::new(vec![3.0; 20], vec![0.1; 20], 1e-3).unwrap();
        assert_eq!(mse_cost(&lip, &d).unwrap(), 9.0);
    }

    #[test]
    fn flat_roundtrip() {
        let m = model(vec![1.0, 2.0, 3.0, 4.0], 3, false);
        let mut p = m.params.clone();
        let flat = p.to_flat();
        p.set_flat(&flat).unwrap();
        assert_eq!(p, m.params);
        assert!(p.set_flat(&flat[1..]).is_err());
    }

    #[test]
    fn auto_scaling_is_unit_max() {
        let map = BasisMap::clm(1e-3).unwrap();
        let y: Vec<f64> = (0..100).map(|k| 1e-3 * (0.1 * k as f64).sin()).collect();
        let d = Dataset::new(vec![0.0; 100], y, 1e-3).unwrap();
        let fs = FeatureSet::build(&d, &map, map.spec(), NnInput::Basis, None, 1).unwrap();
        for j in 0..4 {
            let m = (0..fs.len())
                .map(|k| fs.input_row(k)[j].abs())
                .fold(0.0, f64::max);
            assert!((m - 1.0).abs() < 1e-15);
        }
    }
}

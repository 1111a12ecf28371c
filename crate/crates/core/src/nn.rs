//! Fixed-topology multilayer perceptron with a scalar output.
//!
//! `f(x) = W_{l+1} a(... a(W_1 x + B_1) ...) + B_{l+1}` with element-wise
//! activation `a` on the hidden layers and an affine output layer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    /// Linear hidden layers; used for analytic cross-checks.
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn slope_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

/// One affine layer, weights stored row-major (`rows` = layer width).
#[derive(Debug, Clone, PartialEq)]
pub struct NnLayer {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl NnLayer {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if weights.len() != rows * cols {
            return Err(Error::dims("layer weights", rows * cols, weights.len()));
        }
        if biases.len() != rows {
            return Err(Error::dims("layer biases", rows, biases.len()));
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network layer".into()));
        }
        Ok(Self {
            rows,
            cols,
            weights,
            biases,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            biases: vec![0.0; rows],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    #[inline]
    pub fn weight(&self, r: usize, c: usize) -> f64 {
        self.weights[r * self.cols + c]
    }

    fn n_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

#[derive(Serialize, Deserialize)]
struct LayerRepr {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

impl Serialize for NnLayer {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LayerRepr {
            weights: self
                .weights
                .chunks(self.cols.max(1))
                .map(|r| r.to_vec())
                .collect(),
            biases: self.biases.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for NnLayer {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = LayerRepr::deserialize(d)?;
        let rows = r.weights.len();
        let cols = r.weights.first().map_or(0, |w| w.len());
        if r.weights.iter().any(|w| w.len() != cols) {
            return Err(serde::de::Error::custom("ragged weight matrix"));
        }
        NnLayer::new(rows, cols, r.weights.concat(), r.biases).map_err(serde::de::Error::custom)
    }
}

/// Network weights: `l` hidden layers followed by a width-one output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnParams {
    pub activation: Activation,
    pub widths: Vec<usize>,
    pub layers: Vec<NnLayer>,
}

/// Same shape as [`NnParams`]; entries hold partial derivatives.
pub type NnGradient = NnParams;

impl NnParams {
    pub fn new(layers: Vec<NnLayer>, activation: Activation) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::dims(
                "network layers (hidden + output)",
                2,
                layers.len(),
            ));
        }
        for w in layers.windows(2) {
            if w[1].cols != w[0].rows {
                return Err(Error::dims("layer chain", w[0].rows, w[1].cols));
            }
        }
        let out = layers.last().unwrap();
        if out.rows != 1 {
            return Err(Error::dims("output layer width", 1, out.rows));
        }
        let mut widths = vec![layers[0].cols];
        widths.extend(layers.iter().map(|l| l.rows));
        Ok(Self {
            activation,
            widths,
            layers,
        })
    }

    /// Checks the invariants after deserialization.
    pub fn validate(self) -> Result<Self> {
        let widths = self.widths.clone();
        let p = Self::new(self.layers, self.activation)?;
        if p.widths != widths {
            return Err(Error::dims(
                "declared network widths",
                p.widths.len(),
                widths.len(),
            ));
        }
        Ok(p)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    /// Width of the last hidden layer.
    pub fn hidden_width(&self) -> usize {
        self.output_layer().cols
    }

    pub fn hidden_layers(&self) -> &[NnLayer] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn output_layer(&self) -> &NnLayer {
        self.layers.last().unwrap()
    }

    pub fn output_layer_mut(&mut self) -> &mut NnLayer {
        self.layers.last_mut().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(NnLayer::n_params).sum()
    }

    /// Parameters flattened layer by layer, weights row-major then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            v.extend_from_slice(&l.weights);
            v.extend_from_slice(&l.biases);
        }
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::dims(
                "flat network parameters",
                self.n_params(),
                flat.len(),
            ));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            activation: self.activation,
            widths: self.widths.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| NnLayer::zeros(l.rows, l.cols))
                .collect(),
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::dims("network input", self.input_dim(), x.len()));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut ws = Workspace::new(self);
        Ok(self.forward_cached(x, &mut ws))
    }

    /// Output of the last hidden layer.
    pub fn hidden_output(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut ws = Workspace::new(self);
        self.forward_cached(x, &mut ws);
        Ok(ws.last_hidden().to_vec())
    }

    /// Partial derivatives of the scalar output with respect to every weight and bias.
    pub fn gradient(&self, x: &[f64]) -> Result<NnGradient> {
        self.check_input(x)?;
        let mut ws = Workspace::new(self);
        self.forward_cached(x, &mut ws);
        let mut flat = vec![0.0; self.n_params()];
        self.backprop_into(&mut ws, 1.0, &mut flat);
        let mut g = self.zeros_like();
        g.set_flat(&flat)?;
        Ok(g)
    }

    /// Forward pass that keeps every layer activation in `ws`. No dimension checks.
    pub fn forward_cached(&self, x: &[f64], ws: &mut Workspace) -> f64 {
        ws.acts[0].copy_from_slice(x);
        let n_hidden = self.layers.len() - 1;
        for (i, layer) in self.layers[..n_hidden].iter().enumerate() {
            let (prev, next) = ws.acts.split_at_mut(i + 1);
            let input = &prev[i];
            let out = &mut next[0];
            for r in 0..layer.rows {
                let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
                let z = layer.biases[r]
                    + row
                        .iter()
                        .zip(input.iter())
                        .map(|(w, a)| w * a)
                        .sum::<f64>();
                out[r] = self.activation.apply(z);
            }
        }
        let out = self.output_layer();
        out.biases[0]
            + out
                .weights
                .iter()
                .zip(ws.acts[n_hidden].iter())
                .map(|(w, a)| w * a)
                .sum::<f64>()
    }

    /// Adds `scale * d f / d p` into `grad` (flat layout) for the input last
    /// passed to [`forward_cached`](Self::forward_cached).
    pub fn backprop_into(&self, ws: &mut Workspace, scale: f64, grad: &mut [f64]) {
        let n_layers = self.layers.len();
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.n_params();
        }
        // output layer: df/dW = a_l, df/dB = 1, upstream delta = W_{l+1}
        let out = self.output_layer();
        let o = offsets[n_layers - 1];
        let a_last = &ws.acts[n_layers - 1];
        for (g, a) in grad[o..o + out.cols].iter_mut().zip(a_last) {
            *g += scale * a;
        }
        grad[o + out.cols] += scale;

        let Workspace {
            acts,
            delta,
            delta_next,
        } = ws;
        delta.clear();
        delta.extend(out.weights.iter().map(|w| scale * w));
        for i in (0..n_layers - 1).rev() {
            let layer = &self.layers[i];
            let a_out = &acts[i + 1];
            for (d, a) in delta.iter_mut().zip(a_out) {
                *d *= self.activation.slope_from_output(*a);
            }
            let input = &acts[i];
            let o = offsets[i];
            for r in 0..layer.rows {
                let d = delta[r];
                let g_row = &mut grad[o + r * layer.cols..o + (r + 1) * layer.cols];
                for (g, a) in g_row.iter_mut().zip(input) {
                    *g += d * a;
                }
            }
            let ob = o + layer.rows * layer.cols;
            for r in 0..layer.rows {
                grad[ob + r] += delta[r];
            }
            if i > 0 {
                delta_next.clear();
                delta_next.resize(layer.cols, 0.0);
                for r in 0..layer.rows {
                    let d = delta[r];
                    let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
                    for (dn, w) in delta_next.iter_mut().zip(row) {
                        *dn += d * w;
                    }
                }
                std::mem::swap(delta, delta_next);
            }
        }
    }
}

/// Scratch buffers for repeated forward/backward passes.
#[derive(Debug, Clone)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

impl Workspace {
    pub fn new(nn: &NnParams) -> Self {
        let n_layers = nn.layers.len();
        Self {
            acts: nn.widths[..n_layers]
                .iter()
                .map(|&w| vec![0.0; w])
                .collect(),
            delta: Vec::new(),
            delta_next: Vec::new(),
        }
    }

    pub fn last_hidden(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

/// Random hidden layers with a zero output layer.
///
/// `widths` lists the input dimension followed by each hidden-layer width.
/// Entries are uniform on `[-scale/sqrt(fan_in), scale/sqrt(fan_in)]`.
pub fn init_hidden_random(
    widths: &[usize],
    seed: u64,
    scale: f64,
    activation: Activation,
) -> Result<NnParams> {
    if widths.len() < 2 || widths.contains(&0) {
        return Err(Error::config(
            "hidden widths",
            format!("need an input width and at least one non-empty hidden layer, got {widths:?}"),
        ));
    }
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::config(
            "init scale",
            format!("must be >= 0, got {scale}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(widths.len());
    for w in widths.windows(2) {
        let (fan_in, rows) = (w[0], w[1]);
        let bound = scale / (fan_in as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    if bound > 0.0 {
                        rng.gen_range(-bound..=bound)
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        let weights = draw(rows * fan_in);
        let biases = draw(rows);
        layers.push(NnLayer::new(rows, fan_in, weights, biases)?);
    }
    layers.push(NnLayer::zeros(1, *widths.last().unwrap()));
    NnParams::new(layers, activation)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_neuron() -> NnParams {
        let l1 = NnLayer::new(2, 1, vec![0.7, -1.3], vec![0.1, 0.2]).unwrap();
        let l2 = NnLayer::new(1, 2, vec![1.5, -0.5], vec![0.25]).unwrap();
        NnParams::new(vec![l1, l2], Activation::Tanh).unwrap()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let nn = init_hidden_random(&[3, 5], 1, 0.0, Activation::Tanh).unwrap();
        assert_eq!(nn.forward(&[1.0, -2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(nn.hidden_output(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn output_bias_only() {
        let mut nn = init_hidden_random(&[2, 4], 9, 1.0, Activation::Tanh).unwrap();
        nn.output_layer_mut().biases_mut()[0] = 3.25;
        assert_eq!(nn.forward(&[0.3, -8.0]).unwrap(), 3.25);
    }

    #[test]
    fn hand_evaluated_composition() {
        let nn = two_neuron();
        let x = 0.5;
        let expect = 1.5 * (0.7 * x + 0.1f64).tanh() - 0.5 * (-1.3 * x + 0.2f64).tanh() + 0.25;
        assert!((nn.forward(&[x]).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn single_neuron_hidden() {
        let l1 = NnLayer::new(1, 1, vec![1.0], vec![0.0]).unwrap();
        let l2 = NnLayer::zeros(1, 1);
        let nn = NnParams::new(vec![l1, l2], Activation::Tanh).unwrap();
        assert_eq!(nn.hidden_output(&[0.8]).unwrap(), vec![0.8f64.tanh()]);
    }

    #[test]
    fn output_layer_gradients() {
        let nn = two_neuron();
        let g = nn.gradient(&[0.5]).unwrap();
        let h = nn.hidden_output(&[0.5]).unwrap();
        assert_eq!(g.output_layer().biases()[0], 1.0);
        assert_eq!(g.output_layer().weights(), &h[..]);
    }

    #[test]
    fn init_is_seeded() {
        let a = init_hidden_random(&[4, 16], 7, 1.0, Activation::Tanh).unwrap();
        let b = init_hidden_random(&[4, 16], 7, 1.0, Activation::Tanh).unwrap();
        let c = init_hidden_random(&[4, 16], 8, 1.0, Activation::Tanh).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let bound = 1.0 / 2.0;
        assert!(a.layers[0].weights().iter().all(|w| w.abs() <= bound));
        assert!(a.output_layer().weights().iter().all(|w| *w == 0.0));
    }

    #[test]
    fn dimension_errors() {
        let nn = two_neuron();
        assert!(nn.forward(&[1.0, 2.0]).is_err());
        assert!(NnLayer::new(2, 2, vec![0.0; 3], vec![0.0; 2]).is_err());
        let bad = NnParams::new(
            vec![NnLayer::zeros(3, 2), NnLayer::zeros(1, 2)],
            Activation::Tanh,
        );
        assert!(bad.is_err());
        assert!(init_hidden_random(&[4], 0, 1.0, Activation::Tanh).is_err());
    }

    #[test]
    fn serde_roundtrip() {
        let nn = init_hidden_random(&[3, 4, 2], 3, 1.0, Activation::Tanh).unwrap();
        let s = serde_json::to_string(&nn).unwrap();
        let back: NnParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back.validate().unwrap(), nn);
    }
}

//! Recorded input/output data and regressor windowing.
//!
//! A regressor at sample `t` is
//! `[y(t+n_a), ..., y(t), ..., y(t-n_b), u(t-1), ..., u(t-n_c)]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orders of the inverse model and its sampling time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    /// Output lead (preview) order.
    pub n_a: usize,
    /// Output lag order.
    pub n_b: usize,
    /// Input lag order.
    pub n_c: usize,
    /// Sampling time in seconds.
    pub ts: f64,
}

impl RegressorSpec {
    pub fn new(n_a: usize, n_b: usize, n_c: usize, ts: f64) -> Result<Self> {
        if !(ts > 0.0 && ts.is_finite()) {
            return Err(Error::config(
                "ts",
                format!("sampling time must be > 0, got {ts}"),
            ));
        }
        Ok(Self { n_a, n_b, n_c, ts })
    }

    /// Orders used by the coreless linear motor model: `[y(t), y(t-1), y(t-2)]`.
    pub fn clm(ts: f64) -> Result<Self> {
        Self::new(0, 2, 0, ts)
    }

    pub fn len(&self) -> usize {
        self.n_a + self.n_b + 1 + self.n_c
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Inclusive range of sample indices for which a full regressor exists.
    pub fn valid_sample_range(&self, n: usize) -> Result<(usize, usize)> {
        let t_min = self.n_b.max(self.n_c);
        let needed = t_min + self.n_a + 1;
        if n < needed {
            return Err(Error::DatasetTooShort { len: n, needed });
        }
        Ok((t_min, n - 1 - self.n_a))
    }
}

/// Free-function form of [`RegressorSpec::valid_sample_range`].
pub fn valid_sample_range(spec: &RegressorSpec, n: usize) -> Result<(usize, usize)> {
    spec.valid_sample_range(n)
}

/// Input/output record `Z^N` at a fixed sampling time.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    u: Vec<f64>,
    y: Vec<f64>,
    ts: f64,
}

impl Dataset {
    pub fn new(u: Vec<f64>, y: Vec<f64>, ts: f64) -> Result<Self> {
        if u.len() != y.len() {
            return Err(Error::dims("dataset u/y lengths", u.len(), y.len()));
        }
        if u.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        if !(ts > 0.0 && ts.is_finite()) {
            return Err(Error::config(
                "ts",
                format!("sampling time must be > 0, got {ts}"),
            ));
        }
        if let Some(i) = u.iter().chain(&y).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("dataset sample {}", i % u.len())));
        }
        Ok(Self { u, y, ts })
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Contiguous sub-record `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::IndexOutOfRange {
                t: end,
                min: 0,
                max: self.len() as isize,
            });
        }
        Self::new(
            self.u[start..end].to_vec(),
            self.y[start..end].to_vec(),
            self.ts,
        )
    }
}

/// Regressor vector `phi(t)` together with the sample it was taken at.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    pub phi: Vec<f64>,
    pub t: usize,
}

/// Writes the regressor at `t` into `out`, reading outputs from `y` and
/// inputs from `u`. Shared by dataset windowing and feedforward generation.
pub(crate) fn window_into(
    y: &[f64],
    u: &[f64],
    t: usize,
    spec: &RegressorSpec,
    out: &mut Vec<f64>,
) {
    out.clear();
    for k in (0..=spec.n_a + spec.n_b).rev() {
        // k walks from t+n_a down to t-n_b
        out.push(y[t + k - spec.n_b]);
    }
    for k in 1..=spec.n_c {
        out.push(u[t - k]);
    }
}

pub fn build_regressor(dataset: &Dataset, t: usize, spec: &RegressorSpec) -> Result<Regressor> {
    let n = dataset.len();
    let t_min = spec.n_b.max(spec.n_c);
    if t < t_min || t + spec.n_a >= n {
        return Err(Error::IndexOutOfRange {
            t,
            min: t_min as isize,
            max: n as isize - 1 - spec.n_a as isize,
        });
    }
    let mut phi = Vec::with_capacity(spec.len());
    window_into(&dataset.y, &dataset.u, t, spec, &mut phi);
    Ok(Regressor { phi, t })
}

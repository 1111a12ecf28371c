//! Physical basis maps `T_phy`.
//!
//! The basis carries no parameters, so it is never differentiated: gradients
//! with respect to the physical layer are the basis values themselves.

use std::fmt;
use std::sync::Arc;

use crate::data::{Regressor, RegressorSpec};
use crate::error::{Error, Result};

/// Backward Euler difference `(y_t - y_{t-1}) / Ts`.
#[inline]
pub fn delta(y_t: f64, y_tm1: f64, ts: f64) -> f64 {
    (y_t - y_tm1) / ts
}

/// Second backward difference `(y_t - 2 y_{t-1} + y_{t-2}) / Ts^2`.
#[inline]
pub fn delta2(y_t: f64, y_tm1: f64, y_tm2: f64, ts: f64) -> f64 {
    (y_t - 2.0 * y_tm1 + y_tm2) / (ts * ts)
}

/// Signum with `sign(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Coreless linear motor features `[d2y, dy, sign(dy), y]` from `[y(t), y(t-1), y(t-2)]`.
#[inline]
pub fn clm_features(y_t: f64, y_tm1: f64, y_tm2: f64, ts: f64) -> [f64; 4] {
    let v = delta(y_t, y_tm1, ts);
    [delta2(y_t, y_tm1, y_tm2, ts), v, sign(v), y_t]
}

pub type BasisFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub enum BasisKind {
    Clm,
    Custom { name: String, eval: BasisFn },
}

impl fmt::Debug for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisKind::Clm => write!(f, "Clm"),
            BasisKind::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// A parameter-free feature map tied to the regressor layout it expects.
#[derive(Debug, Clone)]
pub struct BasisMap {
    kind: BasisKind,
    n_out: usize,
    spec: RegressorSpec,
}

impl BasisMap {
    pub fn clm(ts: f64) -> Result<Self> {
        Ok(Self {
            kind: BasisKind::Clm,
            n_out: 4,
            spec: RegressorSpec::clm(ts)?,
        })
    }

    /// Registers a pure function as a basis. `eval` receives a regressor laid
    /// out according to `spec` and must fill an output slice of length `n_out`.
    pub fn custom<F>(
        name: impl Into<String>,
        spec: RegressorSpec,
        n_out: usize,
        eval: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        if n_out == 0 {
            return Err(Error::config("basis.n_out", "must be >= 1"));
        }
        Ok(Self {
            kind: BasisKind::Custom {
                name: name.into(),
                eval: Arc::new(eval),
            },
            n_out,
            spec,
        })
    }

    /// Looks up a built-in basis by its configuration key.
    pub fn from_key(key: &str, ts: f64) -> Result<Self> {
        match key {
            "clm" => Self::clm(ts),
            other => Err(Error::config("basis", format!("unknown basis `{other}`"))),
        }
    }

    pub fn key(&self) -> &str {
        match &self.kind {
            BasisKind::Clm => "clm",
            BasisKind::Custom { name, .. } => name,
        }
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn spec(&self) -> &RegressorSpec {
        &self.spec
    }

    pub fn ts(&self) -> f64 {
        self.spec.ts
    }

    /// Evaluates into a caller-provided buffer of length `n_out`.
    pub fn eval_into(&self, phi: &[f64], out: &mut [f64]) -> Result<()> {
        if phi.len() != self.spec.len() {
            return Err(Error::dims("basis regressor", self.spec.len(), phi.len()));
        }
        if out.len() != self.n_out {
            return Err(Error::dims("basis output", self.n_out, out.len()));
        }
        match &self.kind {
            BasisKind::Clm => {
                out.copy_from_slice(&clm_features(phi[0], phi[1], phi[2], self.spec.ts))
            }
            BasisKind::Custom { eval, .. } => eval(phi, out),
        }
        Ok(())
    }

    pub fn eval(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_out];
        self.eval_into(phi, &mut out)?;
        Ok(out)
    }
}

pub fn eval_basis(map: &BasisMap, phi: &Regressor) -> Result<Vec<f64>> {
    map.eval(&phi.phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_of_constant_is_zero() {
        assert_eq!(delta(3.5, 3.5, 1e-4), 0.0);
        assert_eq!(delta2(3.5, 3.5, 3.5, 1e-4), 0.0);
    }

    #[test]
    fn delta_at_ten_khz() {
        assert_eq!(delta(1e-4, 0.0, 1e-4), 1.0);
    }

    #[test]
    fn ramp_derivative() {
        // y(t) = c t Ts differentiates to c
        let (c, ts) = (0.37, 1e-3);
        for t in 1..50 {
            let y = |k: usize| c * k as f64 * ts;
            let d = delta(y(t), y(t - 1), ts);
            assert!((d - c).abs() <= 1e-12 * c.max(1.0), "{d}");
        }
    }

    #[test]
    fn clm_values() {
        let map = BasisMap::clm(1e-4).unwrap();
        assert_eq!(map.eval(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0; 4]);

        let f = map.eval(&[2e-9, 1e-9, 0.0]).unwrap();
        // d2y = (2e-9 - 2e-9 + 0) / 1e-8 = 0, dy = 1e-9 / 1e-4 = 1e-5
        assert!(f[0].abs() < 1e-12);
        assert!((f[1] - 1e-5).abs() < 1e-18);
        assert_eq!(f[2], 1.0);
        assert_eq!(f[3], 2e-9);

        let x = 0.031;
        assert_eq!(map.eval(&[-x, -x, -x]).unwrap(), vec![0.0, 0.0, 0.0, -x]);
    }

    #[test]
    fn wrong_regressor_length() {
        let map = BasisMap::clm(1e-4).unwrap();
        assert!(matches!(
            map.eval(&[0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn custom_dispatch() {
        let spec = RegressorSpec::new(0, 1, 0, 1.0).unwrap();
        let map = BasisMap::custom("dup", spec, 2, |phi, out| {
            out[0] = phi[0];
            out[1] = phi[0];
        })
        .unwrap();
        assert_eq!(map.eval(&[2.0, 1.0]).unwrap(), vec![2.0, 2.0]);
        assert_eq!(map.key(), "dup");
        assert!(BasisMap::from_key("nope", 1.0).is_err());
    }

    #[test]
    fn linear_entries_scale() {
        let map = BasisMap::clm(1e-4).unwrap();
        let phi = [0.013, 0.0125, 0.0119];
        let a = map.eval(&phi).unwrap();
        let b = map.eval(&phi.map(|v| 2.0 * v)).unwrap();
        for i in [0, 1, 3] {
            assert!((b[i] - 2.0 * a[i]).abs() <= 1e-12 * a[i].abs().max(1e-12));
        }
        assert_eq!(a[2], b[2]);
    }
}

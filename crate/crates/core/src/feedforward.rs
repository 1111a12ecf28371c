//! Inversion-based feedforward: evaluate an inverse model along a reference,
//! feeding generated forces back into the input lags.

use crate::data::{Regressor, RegressorSpec};
use crate::error::{Error, Result};
use crate::model::InverseModel;
use crate::trajectory::ReferenceProfile;

/// Regressor on the reference with generated forces as the input lags.
///
/// Reference indices outside the profile clamp to its end samples (the
/// reference is at rest there); forces before `t = 0` are zero.
pub fn ff_regressor(
    reference: &[f64],
    u_ff_history: &[f64],
    t: usize,
    spec: &RegressorSpec,
) -> Regressor {
    let mut phi = Vec::with_capacity(spec.len());
    ff_window_into(reference, u_ff_history, t, spec, &mut phi);
    Regressor { phi, t }
}

fn ff_window_into(
    reference: &[f64],
    u_ff: &[f64],
    t: usize,
    spec: &RegressorSpec,
    out: &mut Vec<f64>,
) {
    out.clear();
    let last = reference.len().saturating_sub(1) as isize;
    for k in (0..=spec.n_a + spec.n_b).rev() {
        let idx = (t as isize + k as isize - spec.n_b as isize).clamp(0, last);
        out.push(reference.get(idx as usize).copied().unwrap_or(0.0));
    }
    for k in 1..=spec.n_c {
        let v = t
            .checked_sub(k)
            .and_then(|i| u_ff.get(i))
            .copied()
            .unwrap_or(0.0);
        out.push(v);
    }
}

/// Feedforward force for every reference sample.
///
/// Samples before the first full window take the first computed value and
/// the final `n_a` samples take the last one. Input lags read zero before
/// sample `n_b`.
pub fn generate_ff<M: InverseModel + ?Sized>(
    model: &M,
    reference: &ReferenceProfile,
) -> Result<Vec<f64>> {
    let spec = *model.spec();
    if (spec.ts - reference.ts).abs() > 1e-12 * spec.ts {
        return Err(Error::config(
            "reference.ts",
            "reference and model sampling times differ",
        ));
    }
    let r = &reference.r;
    let n = r.len();
    // input lags are zero-padded, so only the reference window limits the range
    let needed = spec.n_a + spec.n_b + 1;
    if n < needed {
        return Err(Error::DatasetTooShort { len: n, needed });
    }
    let (t0, t1) = (spec.n_b, n - 1 - spec.n_a);
    let mut u_ff = vec![0.0; n];
    let mut phi = Vec::with_capacity(spec.len());
    for t in t0..=t1 {
        ff_window_into(r, &u_ff, t, &spec, &mut phi);
        let u = model.predict(&phi)?;
        if !u.is_finite() {
            return Err(Error::NonFinite(format!("feedforward at sample {t}")));
        }
        u_ff[t] = u;
    }
    let (first, last) = (u_ff[t0], u_ff[t1]);
    u_ff[..t0].iter_mut().for_each(|v| *v = first);
    u_ff[t1 + 1..].iter_mut().for_each(|v| *v = last);
    Ok(u_ff)
}

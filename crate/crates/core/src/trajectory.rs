//! Jerk-limited point-to-point references.
//!
//! Each move is a seven-segment double-S profile starting and ending at rest,
//! sampled at `k Ts`. Phase durations are analytic; the deceleration half is
//! the point mirror of the acceleration half.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative margin taken off every bound before planning, so that roundoff
/// in the sampled profile and in discrete differences cannot push observed
/// values past the configured limits.
const BOUND_DERATE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionBounds {
    pub vmax: f64,
    pub amax: f64,
    pub jmax: f64,
}

impl MotionBounds {
    /// Velocity 0.05 m/s, acceleration 4 m/s^2, jerk 1000 m/s^3.
    pub const PRESET: MotionBounds = MotionBounds {
        vmax: 0.05,
        amax: 4.0,
        jmax: 1000.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("vmax", self.vmax),
            ("amax", self.amax),
            ("jmax", self.jmax),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(
                    format!("bounds.{name}"),
                    format!("must be > 0, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceProfile {
    pub r: Vec<f64>,
    pub ts: f64,
    pub bounds: MotionBounds,
}

impl ReferenceProfile {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.r.last().copied()
    }

    /// Appends `other`, which must share the sampling time.
    pub fn append(&mut self, other: &ReferenceProfile) -> Result<()> {
        if other.ts != self.ts {
            return Err(Error::config(
                "reference.ts",
                "cannot join profiles with different sampling times",
            ));
        }
        self.r.extend_from_slice(&other.r);
        Ok(())
    }
}

/// Phase durations of one double-S move.
#[derive(Debug, Clone, Copy)]
struct Phases {
    /// Duration of each constant-jerk segment.
    tj: f64,
    /// Duration of the acceleration (and of the deceleration) phase.
    ta: f64,
    /// Duration of the constant-velocity phase.
    tv: f64,
    jerk: f64,
    acc: f64,
    vel: f64,
}

impl Phases {
    fn plan(distance: f64, b: &MotionBounds) -> Self {
        let k = 1.0 - BOUND_DERATE;
        let (vmax, amax, jmax) = (b.vmax * k, b.amax * k, b.jmax * k);
        let (mut tj, mut ta) = if vmax * jmax >= amax * amax {
            let tj = amax / jmax;
            (tj, tj + vmax / amax)
        } else {
            let tj = (vmax / jmax).sqrt();
            (tj, 2.0 * tj)
        };
        let mut tv = distance / vmax - ta;
        if tv < 0.0 {
            // no cruise phase
            tv = 0.0;
            tj = amax / jmax;
            ta = 0.5 * (tj + (tj * tj + 4.0 * distance / amax).sqrt());
            if ta < 2.0 * tj {
                // acceleration limit not reached either
                tj = (distance / (2.0 * jmax)).cbrt();
                ta = 2.0 * tj;
            }
        }
        let acc = jmax * tj;
        let vel = acc * (ta - tj);
        Self {
            tj,
            ta,
            tv,
            jerk: jmax,
            acc,
            vel,
        }
    }

    fn duration(&self) -> f64 {
        2.0 * self.ta + self.tv
    }

    /// Distance travelled at time `t` during the first half of the move.
    fn first_half(&self, t: f64) -> f64 {
        let Phases {
            tj,
            ta,
            jerk,
            acc,
            vel,
            ..
        } = *self;
        if t < tj {
            jerk * t * t * t / 6.0
        } else if t < ta - tj {
            acc / 6.0 * (3.0 * t * t - 3.0 * tj * t + tj * tj)
        } else if t < ta {
            let rem = ta - t;
            0.5 * vel * ta - vel * rem + jerk * rem * rem * rem / 6.0
        } else {
            0.5 * vel * ta + vel * (t - ta)
        }
    }

    fn distance(&self, t: f64, total: f64) -> f64 {
        let dur = self.duration();
        if t <= 0.0 {
            0.0
        } else if t >= dur {
            total
        } else if t <= 0.5 * dur {
            self.first_half(t)
        } else {
            total - self.first_half(dur - t)
        }
    }
}

/// Moves from `start` to `end` and then holds `end` for `dwell` seconds
/// (at least one sample).
pub fn make_point_to_point(
    start: f64,
    end: f64,
    bounds: MotionBounds,
    ts: f64,
    dwell: f64,
) -> Result<ReferenceProfile> {
    bounds.validate()?;
    if !(ts > 0.0 && ts.is_finite()) {
        return Err(Error::config("ts", format!("must be > 0, got {ts}")));
    }
    if !(dwell >= 0.0 && dwell.is_finite()) {
        return Err(Error::config("dwell", format!("must be >= 0, got {dwell}")));
    }
    if !start.is_finite() || !end.is_finite() {
        return Err(Error::NonFinite("reference endpoints".into()));
    }
    let distance = (end - start).abs();
    let dir = if end >= start { 1.0 } else { -1.0 };
    let n_dwell = ((dwell / ts).round() as usize).max(1);
    let mut r = Vec::new();
    if distance > 0.0 {
        let phases = Phases::plan(distance, &bounds);
        let n_move = (phases.duration() / ts).ceil() as usize;
        r.reserve(n_move + n_dwell);
        for k in 0..n_move {
            r.push(start + dir * phases.distance(k as f64 * ts, distance));
        }
    }
    r.extend(std::iter::repeat_n(end, n_dwell));
    Ok(ReferenceProfile { r, ts, bounds })
}

/// Holds `a` for `dwell`, then runs `strokes` moves alternating between `b`
/// and `a`, each followed by a dwell.
pub fn back_and_forth(
    a: f64,
    b: f64,
    strokes: usize,
    bounds: MotionBounds,
    ts: f64,
    dwell: f64,
) -> Result<ReferenceProfile> {
    let mut out = make_point_to_point(a, a, bounds, ts, dwell)?;
    let (mut from, mut to) = (a, b);
    for _ in 0..strokes {
        out.append(&make_point_to_point(from, to, bounds, ts, dwell)?)?;
        std::mem::swap(&mut from, &mut to);
    }
    Ok(out)
}

/// Training reference: four strokes between -0.1 m and 0.1 m, 0.2 s dwells.
pub fn preset_r1(ts: f64) -> Result<ReferenceProfile> {
    back_and_forth(-0.1, 0.1, 4, MotionBounds::PRESET, ts, 0.2)
}

/// Extrapolation reference: four strokes between 0 and 0.17 m, same bounds.
pub fn preset_r2(ts: f64) -> Result<ReferenceProfile> {
    back_and_forth(0.0, 0.17, 4, MotionBounds::PRESET, ts, 0.2)
}

pub fn preset(name: &str, ts: f64) -> Result<ReferenceProfile> {
    match name {
        "r1" => preset_r1(ts),
        "r2" => preset_r2(ts),
        other => Err(Error::config(
            "reference",
            format!("unknown preset `{other}` (expected r1 or r2)"),
        )),
    }
}

/// Largest backward-difference velocity, acceleration and jerk magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub vmax_obs: f64,
    pub amax_obs: f64,
    pub jmax_obs: f64,
}

pub fn discrete_derivative_check(profile: &ReferenceProfile) -> Result<DerivativeReport> {
    let r = &profile.r;
    if r.len() < 4 {
        return Err(Error::DatasetTooShort {
            len: r.len(),
            needed: 4,
        });
    }
    let ts = profile.ts;
    let mut rep = DerivativeReport {
        vmax_obs: 0.0,
        amax_obs: 0.0,
        jmax_obs: 0.0,
    };
    // nested first differences keep constant stretches exactly zero
    let d1: Vec<f64> = r.windows(2).map(|w| w[1] - w[0]).collect();
    let d2: Vec<f64> = d1.windows(2).map(|w| w[1] - w[0]).collect();
    for (k, d) in d1.iter().enumerate() {
        rep.vmax_obs = rep.vmax_obs.max((d / ts).abs());
        if k >= 1 {
            rep.amax_obs = rep.amax_obs.max((d2[k - 1] / (ts * ts)).abs());
        }
        if k >= 2 {
            rep.jmax_obs = rep
                .jmax_obs
                .max(((d2[k - 1] - d2[k - 2]) / (ts * ts * ts)).abs());
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_when_not_moving() {
        let p = make_point_to_point(0.3, 0.3, MotionBounds::PRESET, 1e-3, 0.01).unwrap();
        assert_eq!(p.r, vec![0.3; 10]);
        let rep = discrete_derivative_check(&p).unwrap();
        assert_eq!((rep.vmax_obs, rep.amax_obs, rep.jmax_obs), (0.0, 0.0, 0.0));
    }

    #[test]
    fn ramp_report() {
        let p = ReferenceProfile {
            r: (0..10).map(|k| 0.5 * k as f64).collect(),
            ts: 1.0,
            bounds: MotionBounds::PRESET,
        };
        let rep = discrete_derivative_check(&p).unwrap();
        assert_eq!(rep.vmax_obs, 0.5);
        assert!(rep.amax_obs < 1e-15);
    }

    #[test]
    fn phase_cases_cover_distance() {
        let b = MotionBounds::PRESET;
        for d in [1e-6, 1e-4, 3e-3, 0.2, 1.0] {
            let p = Phases::plan(d, &b);
            let end = p.distance(p.duration(), d);
            let just_before = p.first_half(p.duration() * 0.5);
            assert!((2.0 * just_before - d).abs() < 1e-12 * d.max(1.0), "{d}");
            assert_eq!(end, d);
        }
    }

    #[test]
    fn too_short_for_report() {
        let p = ReferenceProfile {
            r: vec![0.0; 3],
            ts: 1.0,
            bounds: MotionBounds::PRESET,
        };
        assert!(discrete_derivative_check(&p).is_err());
    }
}

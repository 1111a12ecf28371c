//! Discrete-time coreless linear motor with unknown dynamics, PID feedback,
//! dither and encoder quantization.
//!
//! Each step solves `m d2y + fv dy + fc sign(dy) + fk y + g = u` for the new
//! position, with the same backward differences the motor basis uses. Recorded
//! data therefore satisfies the inverse model exactly (up to roundoff) wherever
//! the motor moves; at rest the Coulomb term sticks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::basis::{delta, sign};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::NnParams;
use crate::trajectory::ReferenceProfile;

/// Positions beyond this magnitude abort a simulation.
pub const DIVERGENCE_LIMIT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorParams {
    pub m: f64,
    pub fv: f64,
    pub fc: f64,
    pub fk: f64,
}

impl MotorParams {
    /// `[m, fv, fc, fk]`, the order of the motor basis.
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.m, self.fv, self.fc, self.fk]
    }
}

impl Default for MotorParams {
    fn default() -> Self {
        Self {
            m: 18.8,
            fv: 172.0,
            fc: 7.21,
            fk: 1.36e-8,
        }
    }
}

/// The force the physical model leaves out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GSpec {
    None,
    /// `a sin(2 pi y / period) + b tanh(v / v0)`.
    Ripple {
        a: f64,
        period: f64,
        b: f64,
        v0: f64,
    },
    /// A fixed network on scaled `[d2y, dy, sign(dy), y]`.
    Network {
        nn: NnParams,
        input_scaling: Vec<f64>,
    },
}

impl Default for GSpec {
    fn default() -> Self {
        GSpec::Ripple {
            a: 5.0,
            period: 0.025,
            b: 2.0,
            v0: 0.01,
        }
    }
}

impl GSpec {
    /// Force at acceleration `acc`, velocity `vel` and position `pos`.
    pub fn eval(&self, acc: f64, vel: f64, pos: f64) -> f64 {
        match self {
            GSpec::None => 0.0,
            GSpec::Ripple { a, period, b, v0 } => {
                a * (2.0 * std::f64::consts::PI * pos / period).sin() + b * (vel / v0).tanh()
            }
            GSpec::Network { nn, input_scaling } => {
                let x = [
                    acc * input_scaling[0],
                    vel * input_scaling[1],
                    sign(vel) * input_scaling[2],
                    pos * input_scaling[3],
                ];
                nn.forward(&x).unwrap_or(f64::NAN)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            GSpec::None => Ok(()),
            GSpec::Ripple { a, period, b, v0 } => {
                if !(*period > 0.0) || !(*v0 > 0.0) || !a.is_finite() || !b.is_finite() {
                    return Err(Error::config(
                        "plant.g",
                        "ripple needs finite a, b and positive period, v0",
                    ));
                }
                Ok(())
            }
            GSpec::Network { nn, input_scaling } => {
                if nn.input_dim() != 4 || input_scaling.len() != 4 {
                    return Err(Error::config(
                        "plant.g",
                        "network g takes the four motor features",
                    ));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Bound on the integral contribution to the force.
    pub integral_limit: f64,
}

impl PidGains {
    /// Gains for a given bandwidth (Hz), damping ratio and mass.
    pub fn for_mass(m: f64, bandwidth_hz: f64, damping: f64, integral_hz: f64) -> Self {
        let w = 2.0 * std::f64::consts::PI * bandwidth_hz;
        let kp = m * w * w;
        Self {
            kp,
            ki: kp * 2.0 * std::f64::consts::PI * integral_hz,
            kd: 2.0 * damping * m * w,
            integral_limit: 1000.0,
        }
    }
}

impl Default for PidGains {
    fn default() -> Self {
        Self::for_mass(MotorParams::default().m, 50.0, 0.7, 5.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantConfig {
    pub theta0: MotorParams,
    pub g: GSpec,
    pub ts: f64,
    /// Encoder step in meters; zero disables quantization.
    pub encoder_resolution: f64,
    /// Standard deviation of the dither force (N).
    pub dither_sigma: f64,
    pub controller: PidGains,
    pub seed: u64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            theta0: MotorParams::default(),
            g: GSpec::default(),
            ts: 1e-4,
            encoder_resolution: 0.5e-5,
            dither_sigma: 50.0,
            controller: PidGains::default(),
            seed: 0,
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        let p = &self.theta0;
        if !(p.m > 0.0 && p.m.is_finite()) {
            return Err(Error::config(
                "plant.theta0.m",
                format!("must be > 0, got {}", p.m),
            ));
        }
        if ![p.fv, p.fc, p.fk].iter().all(|v| v.is_finite()) {
            return Err(Error::config("plant.theta0", "coefficients must be finite"));
        }
        if p.fc < 0.0 {
            return Err(Error::config("plant.theta0.fc", "must be >= 0"));
        }
        if !(self.ts > 0.0 && self.ts.is_finite()) {
            return Err(Error::config(
                "plant.ts",
                format!("must be > 0, got {}", self.ts),
            ));
        }
        if !(self.encoder_resolution >= 0.0 && self.encoder_resolution.is_finite()) {
            return Err(Error::config("plant.encoder_resolution", "must be >= 0"));
        }
        if !(self.dither_sigma >= 0.0 && self.dither_sigma.is_finite()) {
            return Err(Error::config("plant.dither_sigma", "must be >= 0"));
        }
        let c = &self.controller;
        if ![c.kp, c.ki, c.kd].iter().all(|v| v.is_finite()) || !(c.integral_limit >= 0.0) {
            return Err(Error::config(
                "plant.controller",
                "gains must be finite, integral_limit >= 0",
            ));
        }
        self.g.validate()
    }
}

/// `g` at zero acceleration.
pub fn g_true(cfg: &PlantConfig, y: f64, v: f64) -> f64 {
    cfg.g.eval(0.0, v, y)
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub y_prev: f64,
    pub y_prev2: f64,
    pub integral: f64,
    pub e_prev: f64,
    /// Sample counter, used in diagnostics.
    pub t: usize,
}

impl SimState {
    /// Motor at rest at `y0` with an empty integrator.
    pub fn at_rest(y0: f64) -> Self {
        Self {
            y_prev: y0,
            y_prev2: y0,
            integral: 0.0,
            e_prev: 0.0,
            t: 0,
        }
    }
}

impl Default for SimState {
    fn default() -> Self {
        Self::at_rest(0.0)
    }
}

/// Residual force of the motor equation at candidate position `y`.
fn solve_branch(u: f64, s: f64, y1: f64, y2: f64, cfg: &PlantConfig) -> f64 {
    let MotorParams { m, fv, fc, fk } = cfg.theta0;
    let ts = cfg.ts;
    // fixed-point iteration on the acceleration; the contraction factor is
    // (fv Ts + fk Ts^2 + dg) / m, far below one for sane plants
    let y_of = |a: f64| 2.0 * y1 - y2 + a * ts * ts;
    let mut a = (u - fc * s - fk * y1 - fv * delta(y1, y2, ts)) / m;
    for _ in 0..100 {
        let y = y_of(a);
        let v = delta(y, y1, ts);
        let next = (u - fv * v - fc * s - fk * y - cfg.g.eval(a, v, y)) / m;
        let done = (next - a).abs() <= 1e-15 * next.abs().max(1e-300);
        a = next;
        if done {
            break;
        }
    }
    y_of(a)
}

/// Advances the motor by one sample under the total force `u_total`.
pub fn plant_step(state: &SimState, u_total: f64, cfg: &PlantConfig) -> Result<(f64, SimState)> {
    let (y1, y2) = (state.y_prev, state.y_prev2);
    if !y1.is_finite() || !y2.is_finite() || !u_total.is_finite() {
        return Err(Error::Divergence {
            sample: state.t,
            position: y1,
        });
    }
    let y_pos = solve_branch(u_total, 1.0, y1, y2, cfg);
    let y = if y_pos > y1 {
        y_pos
    } else {
        let y_neg = solve_branch(u_total, -1.0, y1, y2, cfg);
        if y_neg < y1 {
            y_neg
        } else {
            // friction holds the motor
            y1
        }
    };
    if !(y.abs() <= DIVERGENCE_LIMIT) {
        return Err(Error::Divergence {
            sample: state.t,
            position: y,
        });
    }
    let mut next = state.clone();
    next.y_prev2 = y1;
    next.y_prev = y;
    next.t += 1;
    Ok((y, next))
}

/// Discrete PID on `e = r - y_meas`; updates the integrator and stored error.
pub fn feedback_control(state: &mut SimState, r: f64, y_meas: f64, cfg: &PlantConfig) -> f64 {
    let c = &cfg.controller;
    let e = r - y_meas;
    let lim = c.integral_limit;
    state.integral = (state.integral + c.ki * cfg.ts * e).clamp(-lim, lim);
    let d = (e - state.e_prev) / cfg.ts;
    state.e_prev = e;
    c.kp * e + state.integral + c.kd * d
}

/// Rounds to the nearest encoder count; identity when `resolution` is zero.
pub fn quantize(y: f64, resolution: f64) -> f64 {
    if resolution > 0.0 {
        (y / resolution).round() * resolution
    } else {
        y
    }
}

/// Signals logged by a closed-loop run.
#[derive(Debug, Clone)]
pub struct ClosedLoopLog {
    /// Total applied force and measured position.
    pub dataset: Dataset,
    /// True position.
    pub y: Vec<f64>,
    /// `r - y` on the true position.
    pub e: Vec<f64>,
    pub u_fb: Vec<f64>,
}

/// Tracks `reference` from rest at its first sample.
///
/// The force at sample `t` uses the measurement of sample `t - 1`, so the
/// controller acts on `r(t-1) - y_meas(t-1)`. Dither is drawn from
/// `cfg.seed` when enabled.
pub fn run_closed_loop(
    reference: &ReferenceProfile,
    ff: Option<&[f64]>,
    cfg: &PlantConfig,
    dither: bool,
) -> Result<ClosedLoopLog> {
    cfg.validate()?;
    let r = &reference.r;
    if r.is_empty() {
        return Err(Error::Empty("reference"));
    }
    if reference.ts != cfg.ts {
        return Err(Error::config(
            "reference.ts",
            "reference and plant sampling times differ",
        ));
    }
    if let Some(ff) = ff {
        if ff.len() != r.len() {
            return Err(Error::dims("feedforward length", r.len(), ff.len()));
        }
    }
    let n = r.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.dither_sigma)
        .map_err(|e| Error::config("plant.dither_sigma", e.to_string()))?;
    let mut state = SimState::at_rest(r[0]);
    let mut y_meas_prev = quantize(r[0], cfg.encoder_resolution);
    let mut r_prev = r[0];
    let (mut u, mut y_meas, mut y, mut e, mut u_fb) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for t in 0..n {
        let fb = feedback_control(&mut state, r_prev, y_meas_prev, cfg);
        let mut total = fb + ff.map_or(0.0, |f| f[t]);
        if dither && cfg.dither_sigma > 0.0 {
            total += noise.sample(&mut rng);
        }
        let (yt, next) = plant_step(&state, total, cfg)?;
        state = next;
        let ym = quantize(yt, cfg.encoder_resolution);
        u.push(total);
        u_fb.push(fb);
        y.push(yt);
        y_meas.push(ym);
        e.push(r[t] - yt);
        y_meas_prev = ym;
        r_prev = r[t];
    }
    Ok(ClosedLoopLog {
        dataset: Dataset::new(u, y_meas, cfg.ts)?,
        y,
        e,
        u_fb,
    })
}

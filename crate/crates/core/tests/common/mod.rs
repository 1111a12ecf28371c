//! Independent reference implementations and data builders for tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pgnn::Dataset;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Motor features written out directly from the difference formulas.
pub fn naive_clm(y0: f64, y1: f64, y2: f64, ts: f64) -> [f64; 4] {
    let v = (y0 - y1) / ts;
    let s = if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    };
    [(y0 - 2.0 * y1 + y2) / (ts * ts), v, s, y0]
}

/// Smooth random position record: a few random sinusoids around a random offset.
pub fn random_positions(r: &mut ChaCha8Rng, n: usize, ts: f64) -> Vec<f64> {
    let comps: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                r.gen_range(0.005..0.05),
                r.gen_range(0.3..8.0),
                r.gen_range(0.0..6.28),
            )
        })
        .collect();
    let offset = r.gen_range(-0.05..0.05);
    (0..n)
        .map(|k| {
            let t = k as f64 * ts;
            offset
                + comps
                    .iter()
                    .map(|(a, f, p)| a * (6.283185307179586 * f * t + p).sin())
                    .sum::<f64>()
        })
        .collect()
}

/// Basis rows over the valid range of a motor dataset (first two samples dropped).
pub fn clm_rows(y: &[f64], ts: f64) -> Vec<[f64; 4]> {
    (2..y.len())
        .map(|t| naive_clm(y[t], y[t - 1], y[t - 2], ts))
        .collect()
}

/// Least squares through the normal equations, solved with LU.
pub fn naive_normal_solve(rows: &[[f64; 4]], u: &[f64]) -> Vec<f64> {
    let n = rows.len() as f64;
    let mut m = DMatrix::<f64>::zeros(4, 4);
    let mut b = DVector::<f64>::zeros(4);
    for (row, &uk) in rows.iter().zip(u) {
        for i in 0..4 {
            b[i] += row[i] * uk / n;
            for j in 0..4 {
                m[(i, j)] += row[i] * row[j] / n;
            }
        }
    }
    m.lu()
        .solve(&b)
        .expect("naive solve")
        .iter()
        .cloned()
        .collect()
}

/// Motor dataset with `u = theta^T T + extra(t)` on the valid range.
pub fn motor_dataset(y: Vec<f64>, theta: &[f64], extra: &[f64], ts: f64) -> Dataset {
    let rows = clm_rows(&y, ts);
    let mut u = vec![0.0; y.len()];
    for (k, row) in rows.iter().enumerate() {
        u[k + 2] = row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() + extra[k];
    }
    Dataset::new(u, y, ts).unwrap()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// Central differences of `f` at `x` with per-entry steps `h * max(1, |x_i|)`.
pub fn central_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let step = h * x[i].abs().max(1.0);
            p[i] = x[i] + step;
            let up = f(&p);
            p[i] = x[i] - step;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Largest componentwise error, relative to each component with a floor at
/// `floor` times the largest component.
pub fn max_component_rel(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(floor * scale).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

use pgnn::plant::{run_closed_loop, GSpec, PlantConfig};
use pgnn::trajectory::{back_and_forth, MotionBounds};

/// A few short strokes of closed-loop motor data with dither, no quantization.
pub fn short_plant_dataset(seed: u64, g: GSpec) -> Dataset {
    let r = back_and_forth(-0.01, 0.01, 2, MotionBounds::PRESET, 1e-4, 0.02).unwrap();
    let cfg = PlantConfig {
        g,
        encoder_resolution: 0.0,
        seed,
        ..Default::default()
    };
    run_closed_loop(&r, None, &cfg, true).unwrap().dataset
}

/// Per-column `1 / max |T_i|` over the dataset's valid samples.
pub fn unit_scaling(d: &Dataset) -> Vec<f64> {
    let rows = clm_rows(d.y(), d.ts());
    (0..4)
        .map(|i| {
            let m = rows.iter().fold(0.0f64, |m, r| m.max(r[i].abs()));
            if m > 0.0 {
                1.0 / m
            } else {
                1.0
            }
        })
        .collect()
}

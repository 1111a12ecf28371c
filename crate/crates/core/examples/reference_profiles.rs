//! Builds the preset references and a custom jerk-limited move, then checks
//! the discrete derivatives against the bounds.

use pgnn::trajectory::{discrete_derivative_check, make_point_to_point, preset, MotionBounds};

fn main() -> pgnn::Result<()> {
    let ts = 1e-4;
    let b = MotionBounds::PRESET;
    println!(
        "bounds: v {} m/s, a {} m/s^2, j {} m/s^3",
        b.vmax, b.amax, b.jmax
    );
    let custom = make_point_to_point(0.0, 0.003, b, ts, 0.01)?;
    for (name, r) in [
        ("r1", preset("r1", ts)?),
        ("r2", preset("r2", ts)?),
        ("3 mm", custom),
    ] {
        let rep = discrete_derivative_check(&r)?;
        println!(
            "{name:>5}: {:>7} samples, v {:.6}, a {:.6}, j {:.3}",
            r.len(),
            rep.vmax_obs,
            rep.amax_obs,
            rep.jmax_obs
        );
    }
    Ok(())
}

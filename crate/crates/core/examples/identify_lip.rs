//! Records closed-loop data on the default motor and fits the physical model.
//!
//! The fitted parameters differ from the true motor because the unmodelled
//! force leaks into them; the residual shows what is left for a network.

use pgnn::plant::{run_closed_loop, PlantConfig};
use pgnn::trajectory::preset_r1;
use pgnn::{fit_lip, unmodelled_residual, BasisMap};

fn main() -> pgnn::Result<()> {
    let plant = PlantConfig {
        encoder_resolution: 0.0,
        ..Default::default()
    };
    let reference = preset_r1(plant.ts)?;
    let log = run_closed_loop(&reference, None, &plant, true)?;
    let map = BasisMap::clm(plant.ts)?;
    let lip = fit_lip(&log.dataset, &map, map.spec())?;

    println!("samples: {}", log.dataset.len());
    println!("{:>10} {:>14} {:>14}", "", "true", "fitted");
    for (name, (t, f)) in ["mass", "viscous", "coulomb", "spring"]
        .iter()
        .zip(plant.theta0.to_vec().iter().zip(&lip.theta))
    {
        println!("{name:>10} {t:>14.6e} {f:>14.6e}");
    }
    let f = unmodelled_residual(&log.dataset, &lip, &map, map.spec())?;
    let rms = (f.iter().map(|v| v * v).sum::<f64>() / f.len() as f64).sqrt();
    println!("residual rms force: {rms:.4} N");
    Ok(())
}

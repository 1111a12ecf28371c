//! Drift of the physical parameters away from the identified values as the
//! regularization weight changes.

use pgnn::config::ExperimentConfig;
use pgnn::evaluation::lambda_sweep;
use pgnn::plant::run_closed_loop;
use pgnn::trajectory::preset;
use pgnn::{fit_lip, BasisMap};

fn main() -> pgnn::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.training.optimizer.max_iterations = 1000;
    let plant = cfg.data_plant();
    let log = run_closed_loop(&preset("r1", plant.ts)?, None, &plant, true)?;
    let map = BasisMap::clm(plant.ts)?;
    let lip = fit_lip(&log.dataset, &map, map.spec())?;
    let base = cfg.training.to_training_config(lip, 0);
    let table = lambda_sweep(
        &log.dataset,
        &map,
        &base,
        &cfg.evaluation.sweep_lambdas,
        &cfg.sweep_seeds(),
    )?;
    print!("{}", table.render_text());
    Ok(())
}

//! Trains a regularized physics-guided network on recorded motor data and
//! prints the cost trace.
//!
//! `cargo run --release --example train_pgnn -- 2000` sets the iteration count.

use pgnn::config::ExperimentConfig;
use pgnn::plant::run_closed_loop;
use pgnn::trajectory::preset;
use pgnn::{fit_lip, train, BasisMap};

fn main() -> pgnn::Result<()> {
    let iterations = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1000);
    let mut cfg = ExperimentConfig::default();
    cfg.training.optimizer.max_iterations = iterations;

    let plant = cfg.data_plant();
    let log = run_closed_loop(&preset("r1", plant.ts)?, None, &plant, true)?;
    let map = BasisMap::clm(plant.ts)?;
    let lip = fit_lip(&log.dataset, &map, map.spec())?;
    let tcfg = cfg
        .training
        .to_training_config(lip.clone(), cfg.train_seed());
    let (model, history) = train(&log.dataset, &map, map.spec(), &tcfg)?;

    let step = (iterations / 10).max(1);
    println!(
        "{:>6} {:>12} {:>12} {:>12}",
        "iter", "total", "data_fit", "reg"
    );
    for r in history.records.iter().step_by(step) {
        println!(
            "{:>6} {:>12.5e} {:>12.5e} {:>12.5e}",
            r.iteration, r.total, r.data_fit, r.reg
        );
    }
    let best = history.best();
    println!(
        "best iteration {} total {:.5e}",
        history.best_iteration, best.total
    );
    println!("lip anchor   {:?}", lip.theta);
    println!("theta_phy    {:?}", model.params.theta_phy);
    Ok(())
}

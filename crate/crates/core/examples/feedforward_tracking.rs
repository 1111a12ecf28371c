//! Compares tracking with no feedforward, the physical model, and a briefly
//! trained physics-guided network on both preset references.

use pgnn::config::ExperimentConfig;
use pgnn::evaluation::run_tracking_experiment;
use pgnn::plant::run_closed_loop;
use pgnn::trajectory::preset;
use pgnn::{fit_lip, train, BasisMap, InverseModel, LipModel};

fn main() -> pgnn::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.training.optimizer.max_iterations = 500;
    let plant = cfg.data_plant();
    let log = run_closed_loop(&preset("r1", plant.ts)?, None, &plant, true)?;
    let map = BasisMap::clm(plant.ts)?;
    let lip = fit_lip(&log.dataset, &map, map.spec())?;
    let tcfg = cfg
        .training
        .to_training_config(lip.clone(), cfg.train_seed());
    let (pgnn_model, _) = train(&log.dataset, &map, map.spec(), &tcfg)?;
    let lip_model = LipModel::new(lip, map)?;

    let eval = cfg.eval_plant();
    let models: [(&str, Option<&dyn InverseModel>); 3] = [
        ("no_ff", None),
        ("lip", Some(&lip_model)),
        ("pgnn", Some(&pgnn_model)),
    ];
    for id in ["r1", "r2"] {
        let r = preset(id, eval.ts)?;
        for (name, m) in models {
            let res = run_tracking_experiment(m, &r, &eval, id, name)?;
            println!("{id} {name:>6}: MAE {:.4e} m", res.mae);
        }
    }
    Ok(())
}

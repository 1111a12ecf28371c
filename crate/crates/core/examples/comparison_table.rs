//! A small tracking comparison grid: contenders by hidden width and seed on
//! both references, averaged over seeds.

use pgnn::config::ExperimentConfig;
use pgnn::evaluation::{comparison_table, ComparisonSetup};
use pgnn::plant::run_closed_loop;
use pgnn::trajectory::preset;
use pgnn::{fit_lip, BasisMap};

fn main() -> pgnn::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.training.optimizer.max_iterations = 300;
    cfg.evaluation.seed_count = 2;
    let plant = cfg.data_plant();
    let log = run_closed_loop(&preset("r1", plant.ts)?, None, &plant, true)?;
    let map = BasisMap::clm(plant.ts)?;
    let lip = fit_lip(&log.dataset, &map, map.spec())?;
    let base = cfg.training.to_training_config(lip.clone(), 0);
    let eval = cfg.eval_plant();
    let refs = ["r1", "r2"]
        .iter()
        .map(|id| Ok((id.to_string(), preset(id, eval.ts)?)))
        .collect::<pgnn::Result<Vec<_>>>()?;
    let setup = ComparisonSetup {
        dataset: &log.dataset,
        map: &map,
        lip: &lip,
        base: &base,
        plant: &eval,
    };
    let table = comparison_table(
        &setup,
        &cfg.evaluation.contenders,
        &refs,
        &cfg.evaluation.nl_values,
        &cfg.model_seeds(),
    )?;
    print!("{}", table.render_text());
    Ok(())
}

//! Command line front end: each subcommand is one pipeline stage, and
//! `reproduce` chains them all.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::basis::BasisMap;
use crate::config::ExperimentConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::{
    comparison_table, lambda_sweep, run_tracking_experiment, ComparisonSetup, TrackingResult,
};
use crate::feedforward::generate_ff;
use crate::io::{self, AnyModelFile, LipFile, ModelFile};
use crate::lip::{fit_lip, LipParams};
use crate::model::{InverseModel, LipModel};
use crate::plant::{run_closed_loop, PlantConfig};
use crate::training::{train, TrainingMode};
use crate::trajectory::{make_point_to_point, preset, MotionBounds, ReferenceProfile};

#[derive(Debug, Parser)]
#[command(
    name = "pgnn",
    version,
    about = "Physics-guided neural network feedforward toolkit"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "PGNN_FF_OUT", default_value = "runs")]
    pub out: PathBuf,
    /// Overrides the root seed of the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for independent training runs.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Record closed-loop identification data with dither.
    GenerateData,
    /// Identify the linear-in-the-parameters model.
    FitLip {
        #[arg(long)]
        data: PathBuf,
    },
    /// Train a physics-guided network.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// LIP file used as the regularization anchor.
        #[arg(long)]
        lip: PathBuf,
    },
    /// Write a reference trajectory.
    MakeReference {
        /// `r1` or `r2`; ignored when `--start` and `--end` are given.
        #[arg(long, default_value = "r1")]
        preset: String,
        #[arg(long, requires = "end")]
        start: Option<f64>,
        #[arg(long, requires = "start")]
        end: Option<f64>,
        #[arg(long, default_value_t = MotionBounds::PRESET.vmax)]
        vmax: f64,
        #[arg(long, default_value_t = MotionBounds::PRESET.amax)]
        amax: f64,
        #[arg(long, default_value_t = MotionBounds::PRESET.jmax)]
        jmax: f64,
        #[arg(long, default_value_t = 0.2)]
        dwell: f64,
    },
    /// Feedforward forces for a reference from a stored model.
    MakeFf {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
    /// Tracking experiments: one model on the configured references, or the
    /// full comparison table when `--data` and `--lip` are given instead.
    Evaluate {
        /// LIP or PGNN model file; feedback only when omitted.
        #[arg(long, conflicts_with_all = ["data", "lip"])]
        model: Option<PathBuf>,
        #[arg(long, requires = "lip")]
        data: Option<PathBuf>,
        #[arg(long, requires = "data")]
        lip: Option<PathBuf>,
    },
    /// Regularization sweep over `evaluation.sweep_lambdas`.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        lip: PathBuf,
    },
    /// Full pipeline from data generation to both tables.
    Reproduce,
}

/// Parses arguments, runs the command and maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    if cli.common.threads == 0 {
        return Err(Error::config("threads", "must be >= 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.threads)
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    let out = cli.common.out.clone();
    pool.install(|| dispatch(&cli.command, &cfg, &out))
}

fn dispatch(cmd: &Command, cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    match cmd {
        Command::GenerateData => {
            write_config(cfg, out)?;
            generate_data(cfg, out).map(|_| ())
        }
        Command::FitLip { data } => {
            let map = basis(cfg)?;
            let d = io::read_dataset(data, cfg.plant.ts)?;
            let lip = fit_lip(&d, &map, map.spec())?;
            io::write_json(&out.join("lip.json"), &LipFile::new(&lip, &map))?;
            println!("theta_lip = {:?}", lip.theta);
            Ok(())
        }
        Command::Train { data, lip } => {
            write_config(cfg, out)?;
            let d = io::read_dataset(data, cfg.plant.ts)?;
            let lip = read_lip(lip)?;
            train_one(cfg, &d, &lip, out)
        }
        Command::MakeReference {
            preset: name,
            start,
            end,
            vmax,
            amax,
            jmax,
            dwell,
        } => {
            let r = match (start, end) {
                (Some(a), Some(b)) => {
                    let bounds = MotionBounds {
                        vmax: *vmax,
                        amax: *amax,
                        jmax: *jmax,
                    };
                    make_point_to_point(*a, *b, bounds, cfg.plant.ts, *dwell)?
                }
                _ => preset(name, cfg.plant.ts)?,
            };
            let id = if start.is_some() {
                "custom"
            } else {
                name.as_str()
            };
            io::write_reference(&out.join(format!("reference_{id}.csv")), &r)
        }
        Command::MakeFf { model, reference } => {
            let r = io::read_reference(reference, cfg.plant.ts, MotionBounds::PRESET)?;
            let (_, m) = load_model(model)?;
            let u = generate_ff(m.as_ref(), &r)?;
            io::write_ff(&out.join("ff.csv"), &u)
        }
        Command::Evaluate { model, data, lip } => {
            write_config(cfg, out)?;
            match (model, data, lip) {
                (_, Some(data), Some(lip)) => {
                    let d = io::read_dataset(data, cfg.plant.ts)?;
                    table(cfg, &d, &read_lip(lip)?, out)
                }
                (Some(path), _, _) => {
                    let (id, m) = load_model(path)?;
                    evaluate_models(cfg, &[(id, Some(m))], out)
                }
                _ => evaluate_models(cfg, &[("no_ff".into(), None)], out),
            }
        }
        Command::Sweep { data, lip } => {
            write_config(cfg, out)?;
            let d = io::read_dataset(data, cfg.plant.ts)?;
            sweep(cfg, &d, &read_lip(lip)?, out)
        }
        Command::Reproduce => reproduce(cfg, out),
    }
}

fn basis(cfg: &ExperimentConfig) -> Result<BasisMap> {
    BasisMap::from_key(&cfg.basis, cfg.plant.ts)
}

fn write_config(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    io::write_text(&out.join("config.resolved.toml"), &cfg.to_toml())
}

fn read_lip(path: &Path) -> Result<LipParams> {
    io::read_json::<LipFile>(path)?.params()
}

fn load_model(path: &Path) -> Result<(String, Box<dyn InverseModel + Send + Sync>)> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("model")
        .to_string();
    Ok(match io::read_json::<AnyModelFile>(path)? {
        AnyModelFile::Pgnn(f) => (stem, Box::new(f.model()?)),
        AnyModelFile::Lip(f) => (stem, Box::new(LipModel::new(f.params()?, f.basis()?)?)),
    })
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    reference: &'a str,
    dither: bool,
    samples: usize,
    seed: u64,
    plant: &'a PlantConfig,
}

fn generate_data(cfg: &ExperimentConfig, out: &Path) -> Result<Dataset> {
    let plant = cfg.data_plant();
    let r = preset(&cfg.data.reference, plant.ts)?;
    let log = run_closed_loop(&r, None, &plant, cfg.data.dither)?;
    io::write_dataset(&out.join("dataset.csv"), &log.dataset)?;
    io::write_json(
        &out.join("run_metadata.json"),
        &RunMetadata {
            reference: &cfg.data.reference,
            dither: cfg.data.dither,
            samples: log.dataset.len(),
            seed: plant.seed,
            plant: &plant,
        },
    )?;
    Ok(log.dataset)
}

fn train_one(cfg: &ExperimentConfig, d: &Dataset, lip: &LipParams, out: &Path) -> Result<()> {
    let map = basis(cfg)?;
    let tcfg = cfg
        .training
        .to_training_config(lip.clone(), cfg.train_seed());
    let (model, history) = train(d, &map, map.spec(), &tcfg)?;
    io::write_json(
        &out.join("model.json"),
        &ModelFile::new(&model, Some(&tcfg)),
    )?;
    io::write_text(&out.join("history.csv"), &io::history_csv(&history))?;
    let best = history.best();
    println!(
        "best iteration {} of {}: total {:.6e}, data fit {:.6e}, theta_phy {:?}",
        history.best_iteration,
        history.records.len(),
        best.total,
        best.data_fit,
        best.theta_phy
    );
    Ok(())
}

fn references(cfg: &ExperimentConfig) -> Result<Vec<(String, ReferenceProfile)>> {
    cfg.evaluation
        .references
        .iter()
        .map(|id| Ok((id.clone(), preset(id, cfg.plant.ts)?)))
        .collect()
}

fn write_tracking(out: &Path, r: &ReferenceProfile, res: &TrackingResult) -> Result<()> {
    let name = format!("tracking_{}_{}.csv", res.model_id, res.reference_id);
    io::write_text(&out.join(name), &io::tracking_csv(r, res))
}

type NamedModel = (String, Option<Box<dyn InverseModel + Send + Sync>>);

fn evaluate_models(cfg: &ExperimentConfig, models: &[NamedModel], out: &Path) -> Result<()> {
    let plant = cfg.eval_plant();
    for (rid, r) in references(cfg)? {
        for (mid, m) in models {
            let m: Option<&dyn InverseModel> = m.as_ref().map(|b| b.as_ref() as &dyn InverseModel);
            let res = run_tracking_experiment(m, &r, &plant, &rid, mid)?;
            write_tracking(out, &r, &res)?;
            println!("{mid} on {rid}: MAE {:.6e} m", res.mae);
        }
    }
    Ok(())
}

fn table(cfg: &ExperimentConfig, d: &Dataset, lip: &LipParams, out: &Path) -> Result<()> {
    let map = basis(cfg)?;
    let base = cfg.training.to_training_config(lip.clone(), 0);
    let plant = cfg.eval_plant();
    let setup = ComparisonSetup {
        dataset: d,
        map: &map,
        lip,
        base: &base,
        plant: &plant,
    };
    let t = comparison_table(
        &setup,
        &cfg.evaluation.contenders,
        &references(cfg)?,
        &cfg.evaluation.nl_values,
        &cfg.model_seeds(),
    )?;
    io::write_text(&out.join("table1_analog.csv"), &t.to_csv())?;
    let text = t.render_text();
    io::write_text(&out.join("table1_analog.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, d: &Dataset, lip: &LipParams, out: &Path) -> Result<()> {
    let map = basis(cfg)?;
    let base = cfg.training.to_training_config(lip.clone(), 0);
    let t = lambda_sweep(
        d,
        &map,
        &base,
        &cfg.evaluation.sweep_lambdas,
        &cfg.sweep_seeds(),
    )?;
    io::write_text(&out.join("lambda_sweep.csv"), &t.to_csv())?;
    let text = t.render_text();
    io::write_text(&out.join("lambda_sweep.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn reproduce(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    write_config(cfg, out)?;
    for (id, r) in references(cfg)? {
        io::write_reference(&out.join(format!("reference_{id}.csv")), &r)?;
    }
    let d = generate_data(cfg, out)?;
    let map = basis(cfg)?;
    let lip = fit_lip(&d, &map, map.spec())?;
    io::write_json(&out.join("lip.json"), &LipFile::new(&lip, &map))?;
    train_one(cfg, &d, &lip, out)?;
    let (_, pgnn) = load_model(&out.join("model.json"))?;
    let models: Vec<NamedModel> = vec![
        ("no_ff".into(), None),
        (
            "lip".into(),
            Some(Box::new(LipModel::new(lip.clone(), map.clone())?)),
        ),
        (mode_name(cfg.training.mode).into(), Some(pgnn)),
    ];
    evaluate_models(cfg, &models, out)?;
    table(cfg, &d, &lip, out)?;
    sweep(cfg, &d, &lip, out)
}

fn mode_name(mode: TrainingMode) -> &'static str {
    match mode {
        TrainingMode::Regularized => "pgnn_regularized",
        TrainingMode::Unregularized => "pgnn_unregularized",
        TrainingMode::Sequential => "pgnn_sequential",
        TrainingMode::PinnBaseline => "pinn_baseline",
    }
}

//! Costs, gradients, output-layer initialization and the training loop.

mod common;

use common::*;
use pgnn::plant::GSpec;
use pgnn::training::{init_hidden, init_output_layer_detailed, train_from};
use pgnn::*;
use rand::Rng;

fn random_model(seed: u64, widths: &[usize], d: &Dataset) -> PgnnModel {
    let mut r = rng(seed);
    let mut nn = init_hidden_random(widths, seed, 1.5, Activation::Tanh).unwrap();
    for w in nn.output_layer_mut().weights_mut() {
        *w = r.gen_range(-2.0..2.0);
    }
    nn.output_layer_mut().biases_mut()[0] = r.gen_range(-1.0..1.0);
    let theta: Vec<f64> = (0..4).map(|_| r.gen_range(-30.0..30.0)).collect();
    let map = BasisMap::clm(d.ts()).unwrap();
    PgnnModel::new(
        PgnnParams::new(nn, theta).unwrap(),
        map,
        unit_scaling(d),
        NnInput::Basis,
    )
    .unwrap()
}

fn random_dataset(seed: u64, n: usize) -> Dataset {
    let mut r = rng(seed);
    let ts = 1e-3;
    let y = random_positions(&mut r, n, ts);
    let u: Vec<f64> = (0..n).map(|_| r.gen_range(-20.0..20.0)).collect();
    Dataset::new(u, y, ts).unwrap()
}

fn anchor() -> LipParams {
    LipParams::new(vec![18.8, 172.0, 7.21, 1.36e-8]).unwrap()
}

#[test]
fn prediction_is_sum_of_parts() {
    let d = random_dataset(1, 60);
    for seed in 0..20 {
        let m = random_model(seed, &[4, 7, 5], &d);
        let phi = build_regressor(&d, 30, m.map.spec()).unwrap();
        let t = naive_clm(phi.phi[0], phi.phi[1], phi.phi[2], d.ts());
        let x: Vec<f64> = t.iter().zip(&m.input_scaling).map(|(a, b)| a * b).collect();
        let nn = m.params.nn.forward(&x).unwrap();
        let phy: f64 = t.iter().zip(&m.params.theta_phy).map(|(a, b)| a * b).sum();
        let got = pgnn_predict(&m, &phi).unwrap();
        assert!((got - (nn + phy)).abs() <= 1e-12 * (nn.abs() + phy.abs()).max(1.0));
    }
}

#[test]
fn mse_matches_naive_loop() {
    let d = random_dataset(2, 200);
    let m = random_model(3, &[4, 6], &d);
    let mut sum = 0.0;
    for t in 2..200 {
        let e = d.u()[t]
            - m.predict(&d.y()[t - 2..=t].iter().rev().cloned().collect::<Vec<_>>())
                .unwrap();
        sum += e * e;
    }
    let naive = sum / 198.0;
    let got = mse_cost(&m, &d).unwrap();
    assert!((got - naive).abs() <= 1e-12 * naive);
}

#[test]
fn regularized_cost_terms() {
    let d = random_dataset(4, 100);
    let mut m = random_model(5, &[4, 6], &d);
    let mut cfg = TrainingConfig::new(anchor(), 1.0);
    m.params.theta_phy = anchor().theta;
    let c = regularized_cost(&m, &d, &cfg).unwrap();
    assert_eq!(c.reg, 0.0);
    assert!((c.total - mse_cost(&m, &d).unwrap()).abs() <= 1e-12 * c.total);

    m.params.theta_phy[0] += 1.0;
    assert!((regularized_cost(&m, &d, &cfg).unwrap().reg - 1.0).abs() < 1e-12);

    // zero network at the anchor reproduces the LIP cost
    let zero = PgnnModel::new(
        PgnnParams::new(m.params.nn.zeros_like(), anchor().theta).unwrap(),
        m.map.clone(),
        m.input_scaling.clone(),
        NnInput::Basis,
    )
    .unwrap();
    let lip = LipModel::new(anchor(), m.map.clone()).unwrap();
    assert_eq!(
        regularized_cost(&zero, &d, &cfg).unwrap().total,
        mse_cost(&lip, &d).unwrap()
    );

    cfg.lambda_diag = vec![1.0; 3];
    assert!(regularized_cost(&m, &d, &cfg).is_err());
}

#[test]
fn pinn_cost_matches_naive_loop() {
    let d = random_dataset(6, 120);
    let m = random_model(7, &[4, 5], &d);
    let mut cfg = TrainingConfig::new(anchor(), 0.0);
    cfg.pinn_lambda = 0.37;
    let (mut fit, mut pen) = (0.0, 0.0);
    for t in 2..120 {
        let phi: Vec<f64> = d.y()[t - 2..=t].iter().rev().cloned().collect();
        let u_hat = m.predict(&phi).unwrap();
        let tt = naive_clm(phi[0], phi[1], phi[2], d.ts());
        let phys: f64 = tt.iter().zip(&anchor().theta).map(|(a, b)| a * b).sum();
        fit += (d.u()[t] - u_hat).powi(2);
        pen += (u_hat - phys).powi(2);
    }
    let naive = (fit + 0.37 * pen) / 118.0;
    let got = pinn_cost(&m, &d, &cfg).unwrap();
    assert!((got.total - naive).abs() <= 1e-12 * naive);
    cfg.pinn_lambda = 0.0;
    assert!(
        (pinn_cost(&m, &d, &cfg).unwrap().total - mse_cost(&m, &d).unwrap()).abs() <= 1e-12 * naive
    );
}

fn cost_at(m: &PgnnModel, d: &Dataset, cfg: &TrainingConfig, flat: &[f64]) -> f64 {
    let mut m = m.clone();
    m.params.set_flat(flat).unwrap();
    regularized_cost(&m, d, cfg).unwrap().total
}

#[test]
fn cost_gradient_matches_central_differences() {
    for seed in 0..20 {
        let d = random_dataset(100 + seed, 40);
        let m = random_model(seed, &[4, 5, 3], &d);
        let mut cfg = TrainingConfig::new(anchor(), 0.0);
        cfg.lambda_diag = vec![0.3, 0.01, 2.0, 0.5];
        let g = cost_gradient(&m, &d, &cfg).unwrap().to_flat();
        let fd = central_diff(&m.params.to_flat(), 1e-6, |p| cost_at(&m, &d, &cfg, p));
        let err = max_component_rel(&g, &fd, 1e-3);
        assert!(err <= 1e-5, "seed {seed}: {err}");
    }
}

#[test]
fn doubling_lambda_doubles_regularization_gradient() {
    let d = random_dataset(9, 60);
    let m = random_model(10, &[4, 4], &d);
    let base = TrainingConfig::new(anchor(), 0.0);
    let c1 = TrainingConfig::new(anchor(), 0.25);
    let c2 = TrainingConfig::new(anchor(), 0.5);
    let g0 = cost_gradient(&m, &d, &base).unwrap().theta_phy;
    let g1 = cost_gradient(&m, &d, &c1).unwrap().theta_phy;
    let g2 = cost_gradient(&m, &d, &c2).unwrap().theta_phy;
    for i in 0..4 {
        // the data part cancels up to roundoff of its own magnitude
        assert!(((g2[i] - g0[i]) - 2.0 * (g1[i] - g0[i])).abs() <= 1e-13 * g0[i].abs().max(1.0));
    }
}

#[test]
fn exact_lip_data_is_stationary_in_physics() {
    let ts = 1e-3;
    let mut r = rng(12);
    let y = random_positions(&mut r, 300, ts);
    let d = motor_dataset(y, &anchor().theta, &[0.0; 298], ts);
    let m0 = random_model(13, &[4, 6], &d);
    let m = PgnnModel::new(
        PgnnParams::new(m0.params.nn.zeros_like(), anchor().theta).unwrap(),
        m0.map.clone(),
        m0.input_scaling.clone(),
        NnInput::Basis,
    )
    .unwrap();
    let g = cost_gradient(&m, &d, &TrainingConfig::new(anchor(), 1.0)).unwrap();
    let scale: f64 = d.u().iter().map(|u| u.abs()).fold(0.0, f64::max);
    for v in g.theta_phy {
        assert!(v.abs() <= 1e-9 * scale * scale, "{v}");
    }
}

fn plant_setup(seed: u64) -> (Dataset, BasisMap, LipParams) {
    let d = short_plant_dataset(seed, GSpec::default());
    let map = BasisMap::clm(d.ts()).unwrap();
    let lip = fit_lip(&d, &map, map.spec()).unwrap();
    (d, map, lip)
}

#[test]
fn initialization_improves_on_lip_and_is_restricted_optimum() {
    let (d, map, lip) = plant_setup(1);
    let lip_cost = mse_cost(&LipModel::new(lip.clone(), map.clone()).unwrap(), &d).unwrap();
    for seed in 0..10 {
        let mut cfg = TrainingConfig::new(lip.clone(), 0.01);
        cfg.seed = seed;
        let hidden = init_hidden(&map, &cfg).unwrap();
        let (model, init) = init_output_layer_detailed(&hidden, &d, &map, &cfg).unwrap();
        let v0 = regularized_cost(&model, &d, &cfg).unwrap().total;
        assert!(v0 <= lip_cost * (1.0 + 1e-12), "{v0} > {lip_cost}");
        let (strict, _) = strict_improvement_condition(&hidden, &d, &map, &cfg).unwrap();
        assert!(strict);
        assert!(v0 < lip_cost);

        let mut x = model.params.nn.output_layer().weights().to_vec();
        x.push(model.params.nn.output_layer().biases()[0]);
        x.extend_from_slice(&model.params.theta_phy);
        let x = nalgebra::DVector::from_vec(x);
        let grad = init.problem.residual(&x);
        let scale = (&init.problem.m_r * &x).norm().max(init.problem.rhs.norm());
        assert!(grad.norm() <= 1e-8 * scale, "{}", grad.norm() / scale);
        // hidden layers untouched
        assert_eq!(model.params.nn.hidden_layers(), hidden.hidden_layers());
    }
}

#[test]
fn huge_lambda_pins_physics_to_anchor() {
    let (d, map, lip) = plant_setup(2);
    let mut cfg = TrainingConfig::new(lip.clone(), 1e12);
    cfg.seed = 3;
    let hidden = init_hidden(&map, &cfg).unwrap();
    let joint = init_output_layer(&hidden, &d, &map, &cfg).unwrap();
    assert!(rel_err(&joint.params.theta_phy, &lip.theta) <= 1e-4);
    // the output layer then fits the LIP residual like the sequential scheme
    cfg.mode = TrainingMode::Sequential;
    let seq = init_output_layer(&hidden, &d, &map, &cfg).unwrap();
    let a = seq.params.nn.output_layer().weights();
    let b = joint.params.nn.output_layer().weights();
    assert!(rel_err(b, a) <= 1e-3, "{}", rel_err(b, a));
}

#[test]
fn zero_hidden_layer_is_singular_without_regularization() {
    let (d, map, lip) = plant_setup(3);
    let mut cfg = TrainingConfig::new(lip.clone(), 0.0);
    cfg.init_scale = 0.0;
    let hidden = init_hidden(&map, &cfg).unwrap();
    assert!(matches!(
        init_output_layer(&hidden, &d, &map, &cfg),
        Err(Error::Singular { .. })
    ));
}

#[test]
fn exact_lip_data_gives_no_strict_improvement() {
    let ts = 1e-3;
    let mut r = rng(21);
    let y = random_positions(&mut r, 600, ts);
    let d = motor_dataset(y, &anchor().theta, &[0.0; 598], ts);
    let map = BasisMap::clm(ts).unwrap();
    let lip = fit_lip(&d, &map, map.spec()).unwrap();
    let cfg = TrainingConfig::new(lip.clone(), 0.01);
    let hidden = init_hidden(&map, &cfg).unwrap();
    let (strict, norm) = strict_improvement_condition(&hidden, &d, &map, &cfg).unwrap();
    assert!(!strict, "residual norm {norm}");
    let m = init_output_layer(&hidden, &d, &map, &cfg).unwrap();
    let v0 = regularized_cost(&m, &d, &cfg).unwrap().total;
    let v_lip = mse_cost(&LipModel::new(lip, map).unwrap(), &d).unwrap();
    let scale = d.u().iter().map(|u| u * u).sum::<f64>() / d.len() as f64;
    assert!((v0 - v_lip).abs() <= 1e-10 * scale, "{v0} vs {v_lip}");
}

#[test]
fn iteration_limits() {
    let (d, map, lip) = plant_setup(4);
    let mut cfg = TrainingConfig::new(lip, 0.01);
    cfg.optimizer.max_iterations = 0;
    assert!(matches!(
        train(&d, &map, map.spec(), &cfg),
        Err(Error::Config { .. })
    ));

    cfg.optimizer.max_iterations = 1;
    let (m, h) = train(&d, &map, map.spec(), &cfg).unwrap();
    assert_eq!(h.records.len(), 1);
    let hidden = init_hidden(&map, &cfg).unwrap();
    let init = init_output_layer(&hidden, &d, &map, &cfg).unwrap();
    assert_eq!(m.params, init.params);
}

#[test]
fn best_iterate_and_determinism() {
    let (d, map, lip) = plant_setup(5);
    let mut cfg = TrainingConfig::new(lip, 0.01);
    cfg.optimizer.max_iterations = 60;
    cfg.optimizer.step_size = 0.05;
    cfg.stride = 3;
    let (m1, h1) = train(&d, &map, map.spec(), &cfg).unwrap();
    let (m2, h2) = train(&d, &map, map.spec(), &cfg).unwrap();
    assert_eq!(h1, h2);
    assert_eq!(m1.params, m2.params);
    let best = h1.best().total;
    assert!(h1.records.iter().all(|r| r.total >= best));
    assert!(best <= h1.initial().total);
    // the returned model has the recorded best cost
    let v = regularized_cost(&m1, &d, &cfg).unwrap().total;
    assert_eq!(v, best);
}

#[test]
fn frozen_modes_keep_physics() {
    let (d, map, lip) = plant_setup(6);
    for mode in [TrainingMode::Sequential, TrainingMode::PinnBaseline] {
        let mut cfg = TrainingConfig::new(lip.clone(), 0.01);
        cfg.mode = mode;
        cfg.pinn_lambda = 0.5;
        cfg.optimizer.max_iterations = 20;
        let (m, h) = train(&d, &map, map.spec(), &cfg).unwrap();
        let expect = if mode == TrainingMode::Sequential {
            lip.theta.clone()
        } else {
            vec![0.0; 4]
        };
        assert_eq!(m.params.theta_phy, expect);
        assert!(h.records.iter().all(|r| r.theta_phy == expect));
    }
}

#[test]
fn continued_training_never_worsens() {
    let (d, map, lip) = plant_setup(7);
    let mut cfg = TrainingConfig::new(lip, 0.01);
    cfg.optimizer.max_iterations = 10;
    let (m, h) = train(&d, &map, map.spec(), &cfg).unwrap();
    let (m2, h2) = train_from(&m, &d, &cfg).unwrap();
    assert_eq!(h2.initial().total, h.best().total);
    assert!(regularized_cost(&m2, &d, &cfg).unwrap().total <= h.best().total);
}

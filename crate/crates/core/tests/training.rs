//! End-to-end training behavior on small synthetic graphs.

use mmvgae::graph::{split_edges, Partition, SplitRatios};
use mmvgae::model::{TaskKind, TrainConfig};
use mmvgae::synth::{planted_dedicom_graph, random_fixture, response_fixture, PlantedSpec};
use mmvgae::train::{evaluate, train, EvalRows};

fn overfit_config(epochs: usize, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::for_task(TaskKind::Polypharmacy);
    for (k, v) in [
        ("d_hidden", "32"),
        ("d_encoder", "16"),
        ("d_latent", "16"),
        ("lr", "0.02"),
        ("lambda", "0.001"),
        ("eval_every", "50"),
    ] {
        cfg.apply(k, v).unwrap();
    }
    cfg.apply("epochs", &epochs.to_string()).unwrap();
    cfg.apply("seed", &seed.to_string()).unwrap();
    cfg
}

#[test]
fn small_graph_overfits_to_high_training_auroc() {
    let graph = random_fixture(20, 5, 2, 30, 42).unwrap();
    // Empty validation split: the overfit check scores the final
    // parameters, not a best-validation selection.
    let ratios = SplitRatios { train: 0.9, val: 0.0, test: 0.1, message_frac: 0.7 };
    let split = split_edges(&graph, &ratios, 42).unwrap();
    let cfg = overfit_config(800, 42);
    let outcome = train::<f64>(&graph, &split, &cfg, None).unwrap();

    let arch = mmvgae::model::Architecture::resolve(&graph, &cfg).unwrap();
    let adjacency = mmvgae::train::build_adjacency::<f64>(&graph, &split, &arch).unwrap();
    let report = evaluate(
        &graph,
        &split,
        &cfg,
        &arch,
        &outcome.params,
        &adjacency,
        None,
        Partition::TrainSupervision,
    )
    .unwrap();
    let auroc = report.macro_auroc().unwrap().mean;
    assert!(auroc >= 0.99, "training AUROC {auroc} < 0.99");
}

#[test]
fn same_seed_reproduces_loss_trajectory_and_parameters() {
    let graph = random_fixture(15, 4, 2, 20, 7).unwrap();
    let split = split_edges(&graph, &SplitRatios::default(), 7).unwrap();
    let cfg = overfit_config(20, 7);
    let a = train::<f64>(&graph, &split, &cfg, None).unwrap();
    let b = train::<f64>(&graph, &split, &cfg, None).unwrap();

    let losses =
        |o: &mmvgae::train::TrainOutcome<f64>| o.report.rows.iter().map(|r| r.loss_total).collect::<Vec<_>>();
    assert_eq!(losses(&a), losses(&b));
    for (name, m) in a.params.iter() {
        let other = b.params.get(name).unwrap();
        assert_eq!(m.data(), other.data(), "parameter {name} differs");
    }
    let mut cfg2 = cfg.clone();
    cfg2.apply("seed", "8").unwrap();
    let c = train::<f64>(&graph, &split, &cfg2, None).unwrap();
    assert_ne!(losses(&a), losses(&c));
}

#[test]
fn zero_learning_rate_freezes_parameters() {
    let graph = random_fixture(12, 3, 1, 15, 3).unwrap();
    let split = split_edges(&graph, &SplitRatios::default(), 3).unwrap();
    let mut cfg = overfit_config(5, 3);
    cfg.apply("lr", "0").unwrap();
    let arch = mmvgae::model::Architecture::resolve(&graph, &cfg).unwrap();
    let initial = arch.init_params::<f64>(&graph, cfg.seed).unwrap();
    let outcome = train::<f64>(&graph, &split, &cfg, None).unwrap();
    for (name, m) in initial.iter() {
        assert_eq!(m.data(), outcome.params.get(name).unwrap().data(), "{name} moved");
    }
}

#[test]
fn training_loss_decreases_on_planted_structure() {
    let spec = PlantedSpec {
        drugs: 40,
        relations: 3,
        d_z: 6,
        density: 0.12,
        noise_frac: 0.0,
        fingerprints: None,
        seed: 11,
    };
    let data = planted_dedicom_graph(&spec).unwrap();
    let split = split_edges(&data.graph, &SplitRatios::default(), 11).unwrap();
    let mut cfg = overfit_config(60, 11);
    cfg.apply("eval_every", "20").unwrap();
    let outcome = train::<f64>(&data.graph, &split, &cfg, None).unwrap();
    let rows = &outcome.report.rows;
    let early: f64 = rows[..10].iter().map(|r| r.loss_total).sum::<f64>() / 10.0;
    let late: f64 = rows[rows.len() - 10..].iter().map(|r| r.loss_total).sum::<f64>() / 10.0;
    assert!(late < early, "loss did not decrease: early {early}, late {late}");
}

#[test]
fn gae_mode_trains_without_kl() {
    let graph = random_fixture(15, 0, 2, 25, 5).unwrap();
    let split = split_edges(&graph, &SplitRatios::default(), 5).unwrap();
    let mut cfg = overfit_config(10, 5);
    cfg.apply("mode", "gae").unwrap();
    let outcome = train::<f64>(&graph, &split, &cfg, None).unwrap();
    assert!(outcome.report.rows.iter().all(|r| r.kl.is_empty()));
}

#[test]
fn mlp_decoder_trains_on_drug_only_graph() {
    let graph = random_fixture(18, 0, 3, 24, 9).unwrap();
    let ratios = SplitRatios { train: 0.9, val: 0.0, test: 0.1, message_frac: 0.7 };
    let split = split_edges(&graph, &ratios, 9).unwrap();
    let mut cfg = overfit_config(300, 9);
    cfg.apply("decoder", "mlp").unwrap();
    cfg.apply("mlp_hidden", "32").unwrap();
    let outcome = train::<f64>(&graph, &split, &cfg, None).unwrap();

    let arch = mmvgae::model::Architecture::resolve(&graph, &cfg).unwrap();
    let adjacency = mmvgae::train::build_adjacency::<f64>(&graph, &split, &arch).unwrap();
    let report = evaluate(
        &graph,
        &split,
        &cfg,
        &arch,
        &outcome.params,
        &adjacency,
        None,
        Partition::TrainSupervision,
    )
    .unwrap();
    assert!(report.macro_auroc().unwrap().mean > 0.9);
}

#[test]
fn regression_task_fits_response_weights() {
    let graph = response_fixture(40, 30, 3, 13).unwrap();
    let ratios = SplitRatios { train: 0.7, val: 0.1, test: 0.2, message_frac: 0.5 };
    let split = split_edges(&graph, &ratios, 13).unwrap();
    let mut cfg = TrainConfig::for_task(TaskKind::ResponseRegression);
    for (k, v) in [
        ("d_hidden", "16"),
        ("d_encoder", "8"),
        ("d_latent", "4"),
        ("lambda", "0.01"),
        ("lr", "0.02"),
        ("epochs", "400"),
        ("eval_every", "10"),
        ("noise_samples", "4"),
        ("seed", "13"),
    ] {
        cfg.apply(k, v).unwrap();
    }
    let outcome = train::<f64>(&graph, &split, &cfg, None).unwrap();

    let arch = mmvgae::model::Architecture::resolve(&graph, &cfg).unwrap();
    let adjacency = mmvgae::train::build_adjacency::<f64>(&graph, &split, &arch).unwrap();
    let suite = |part: Partition| {
        let report = evaluate(
            &graph,
            &split,
            &cfg,
            &arch,
            &outcome.params,
            &adjacency,
            None,
            part,
        )
        .unwrap();
        let EvalRows::Regression(rows) = &report.rows else {
            panic!("expected regression rows")
        };
        rows[0].metrics.clone().unwrap()
    };
    // Validation selection must return parameters that fit the
    // supervision edges and carry real signal (beyond the
    // predict-the-mean baseline) onto held-out pairs.
    let train_m = suite(Partition::TrainSupervision);
    assert!(train_m.r2 > 0.5, "train R^2 {}", train_m.r2);
    let test_m = suite(Partition::Test);
    assert!(test_m.pcc > 0.4, "test PCC {}", test_m.pcc);
    assert!(test_m.r2 > 0.1, "test R^2 {}", test_m.r2);
}

#[test]
fn f32_mode_runs_end_to_end() {
    let graph = random_fixture(12, 3, 1, 15, 21).unwrap();
    let split = split_edges(&graph, &SplitRatios::default(), 21).unwrap();
    let cfg = overfit_config(10, 21);
    let outcome = train::<f32>(&graph, &split, &cfg, None).unwrap();
    assert_eq!(outcome.report.rows.len(), 10);
    assert!(outcome.report.rows.iter().all(|r| r.loss_total.is_finite()));
}

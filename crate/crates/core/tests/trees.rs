use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use traffic_forecast::tree::{
    fit_adaboost_r2, fit_adaboost_r2_traced, fit_forest, fit_tree_seeded, BoostLoss, BoostParams, ForestParams,
    MaxFeatures, SplitMode, TreeParams,
};

fn dataset(seed: u64, n: usize, width: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..width).map(|_| rng.random_range(0.0..10.0)).collect()).collect();
    let y = rows
        .iter()
        .map(|r| r[0].sin() * 5.0 + r[width - 1] + rng.random_range(0.0..1.0))
        .collect();
    (rows, y)
}

/// Smallest value whose cumulative weight reaches half the total.
fn median_by_weight(values: &[f64], weights: &[f64]) -> f64 {
    let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (v, w) in &pairs {
        acc += w;
        if acc >= total / 2.0 {
            return *v;
        }
    }
    pairs.last().unwrap().0
}

#[test]
fn boosting_weights_follow_the_r2_recurrence() {
    for (seed, loss, lr) in [(1, BoostLoss::Linear, 1.0), (2, BoostLoss::Square, 0.5), (3, BoostLoss::Exponential, 1.0)] {
        let (rows, y) = dataset(seed, 60, 3);
        let params = BoostParams {
            n_estimators: 25,
            learning_rate: lr,
            loss,
            base: TreeParams { max_depth: Some(2), seed, ..TreeParams::default() },
        };
        let (model, trace) = fit_adaboost_r2_traced(&rows, &y, &params).unwrap();
        let mut kept = 0;
        for round in &trace.rounds {
            let total: f64 = round.weights_before.iter().sum();
            assert!((total - 1.0).abs() < 1e-12 && round.weights_before.iter().all(|&w| w >= 0.0));
            let errors: Vec<f64> = round.train_predictions.iter().zip(&y).map(|(p, t)| (p - t).abs()).collect();
            let max = errors.iter().cloned().fold(0.0, f64::max);
            let losses: Vec<f64> = errors
                .iter()
                .map(|e| {
                    let r = e / max;
                    match loss {
                        BoostLoss::Linear => r,
                        BoostLoss::Square => r * r,
                        BoostLoss::Exponential => 1.0 - (-r).exp(),
                    }
                })
                .collect();
            let avg: f64 = losses.iter().zip(&round.weights_before).map(|(l, w)| l * w).sum();
            assert!((avg - round.average_loss).abs() < 1e-12);
            if avg >= 0.5 {
                continue;
            }
            kept += 1;
            let beta = avg / (1.0 - avg);
            assert!((round.estimator_weight.unwrap() - lr * (1.0 / beta).ln()).abs() < 1e-12);
            let raw: Vec<f64> = round
                .weights_before
                .iter()
                .zip(&losses)
                .map(|(w, l)| w * beta.powf((1.0 - l) * lr))
                .collect();
            let z: f64 = raw.iter().sum();
            for (got, want) in round.weights_after.iter().zip(&raw) {
                assert!((got - want / z).abs() < 1e-12);
            }
            assert!((round.weights_after.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(kept >= 1);

        for r in rows.iter().take(20) {
            let per_tree: Vec<f64> = model.estimators().iter().map(|t| t.predict_row(r).unwrap()).collect();
            let want = median_by_weight(&per_tree, model.estimator_weights());
            assert_eq!(model.predict_row(r).unwrap(), want);
        }
    }
}

#[test]
fn forest_order_does_not_matter() {
    let (rows, y) = dataset(5, 80, 4);
    let forest = fit_forest(&rows, &y, &ForestParams::random_forest(12, TreeParams { seed: 9, ..TreeParams::default() })).unwrap();
    let reversed: Vec<usize> = (0..12).rev().collect();
    let other = forest.permuted(&reversed);
    for r in &rows {
        let (a, b) = (forest.predict_row(r).unwrap(), other.predict_row(r).unwrap());
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }
}

#[test]
fn same_seed_same_serialization() {
    let (rows, y) = dataset(6, 50, 3);
    let p = ForestParams::extra_trees(10, TreeParams { max_features: MaxFeatures::Sqrt, seed: 4, ..TreeParams::default() });
    let a = serde_json::to_string(&fit_forest(&rows, &y, &p).unwrap()).unwrap();
    let b = serde_json::to_string(&fit_forest(&rows, &y, &p).unwrap()).unwrap();
    assert_eq!(a, b);
    let q = ForestParams { tree: TreeParams { seed: 5, ..p.tree }, ..p };
    assert_ne!(a, serde_json::to_string(&fit_forest(&rows, &y, &q).unwrap()).unwrap());
}

#[test]
fn five_hundred_trees_are_close_to_a_thousand() {
    use traffic_forecast::features::{calendar_rows, WeekStart};
    let out = traffic_forecast::synth::generate(&traffic_forecast::synth::benchmark_config()).unwrap();
    let clean = traffic_forecast::preprocess::impute_missing(&out.noisy).unwrap();
    let dates: Vec<_> = clean.dates().collect();
    let rows = calendar_rows(&dates, WeekStart::Monday);
    let y = clean.dense().unwrap();
    let tree = TreeParams { max_features: MaxFeatures::Sqrt, seed: 1, ..TreeParams::default() };
    let small = fit_forest(&rows, &y, &ForestParams::random_forest(500, tree)).unwrap();
    let large = fit_forest(&rows, &y, &ForestParams::random_forest(1000, tree)).unwrap();
    let (a, b) = (small.predict(&rows).unwrap(), large.predict(&rows).unwrap());
    let mad = a.iter().zip(&b).map(|(x, z)| (x - z).abs()).sum::<f64>() / a.len() as f64;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    assert!(mad < 0.01 * mean, "mean absolute difference {mad} vs mean traffic {mean}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn predictions_stay_within_training_range(seed in 0u64..1000, n in 2usize..40, width in 1usize..4) {
        let (rows, y) = dataset(seed, n, width);
        let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let probes: Vec<Vec<f64>> = (0..10).map(|_| (0..width).map(|_| rng.random_range(-5.0..15.0)).collect()).collect();
        let tree = fit_tree_seeded(&rows, &y, &TreeParams { seed, ..TreeParams::default() }, SplitMode::Exhaustive).unwrap();
        let forest = fit_forest(&rows, &y, &ForestParams::extra_trees(5, TreeParams { seed, ..TreeParams::default() })).unwrap();
        let boost = fit_adaboost_r2(&rows, &y, &BoostParams { n_estimators: 10, ..BoostParams::default() }).unwrap();
        for p in tree.predict(&probes).unwrap().into_iter()
            .chain(forest.predict(&probes).unwrap())
            .chain(boost.predict(&probes).unwrap())
        {
            prop_assert!(p >= lo - 1e-9 && p <= hi + 1e-9);
        }
    }
}

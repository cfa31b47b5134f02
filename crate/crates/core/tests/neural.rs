use chrono::NaiveDate;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use traffic_forecast::lstm::{self, ForecastMode, LstmNetwork, LstmTrainParams, Normalizer, WindowSpec};
use traffic_forecast::mlp::{self, Activation, MlpParams};
use traffic_forecast::{DailySeries, VehicleClass};

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 3, 1).unwrap()
}

fn wave(n: usize) -> Vec<f64> {
    (0..n).map(|t| 50.0 + 20.0 * (t as f64 / 5.0).sin() + (t % 3) as f64).collect()
}

#[test]
fn first_element_of_a_long_window_matters() {
    let spec = WindowSpec::new(100, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for seed in 0..5 {
        let net = LstmNetwork::init(&[8], spec, seed).unwrap();
        let mut window: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
        let base = net.forward_sequence(&window).unwrap()[0];
        window[0] += 1.0;
        let moved = net.forward_sequence(&window).unwrap()[0];
        assert_ne!(base, moved, "seed {seed}");
    }
}

#[test]
fn output_width_is_lookforward() {
    for (lookback, lookforward) in [(1, 1), (5, 3), (12, 10)] {
        let spec = WindowSpec::new(lookback, lookforward).unwrap();
        let net = LstmNetwork::init(&[4, 3], spec, 2).unwrap();
        assert_eq!(net.forward_sequence(&vec![0.5; lookback]).unwrap().len(), lookforward);
        assert_eq!(net.forward_sequence(&vec![0.5; lookback + 7]).unwrap().len(), lookforward);
        assert!(net.forward_sequence(&[]).is_err());
    }
}

#[test]
fn lstm_training_is_bitwise_deterministic() {
    let spec = WindowSpec::new(10, 2).unwrap();
    let windows = lstm::make_windows_from_values(&wave(120), spec).unwrap();
    let params = LstmTrainParams { epochs: 5, seed: 3, ..LstmTrainParams::default() };
    let train = || lstm::train_lstm(&windows, LstmNetwork::init(&[6], spec, 3).unwrap(), &params).unwrap();
    let (a, b) = (train(), train());
    let bits = |n: &LstmNetwork| n.parameters().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.loss_trace, b.loss_trace);
}

#[test]
fn multi_step_recursion_counts_blocks() {
    let spec = WindowSpec::new(20, 10).unwrap();
    let net = LstmNetwork::init(&[4], spec, 0).unwrap();
    let series = DailySeries::from_values(1, VehicleClass::TC1, start(), wave(60)).unwrap();
    let f = lstm::forecast(&net, &series, 25, ForecastMode::MultiStep).unwrap();
    assert_eq!((f.values.len(), f.network_calls), (25, 3));
    assert_eq!(f.dates[0], series.end_date().succ_opt().unwrap());
    let f = lstm::forecast(&net, &series, 10, ForecastMode::MultiStep).unwrap();
    assert_eq!(f.network_calls, 1);
    assert!(lstm::forecast(&net, &series, 0, ForecastMode::OneStep).is_err());
}

#[test]
fn constant_series_is_forecast_as_constant() {
    let spec = WindowSpec::new(5, 1).unwrap();
    let values = vec![40.0; 50];
    let windows = lstm::make_windows_from_values(&values, spec).unwrap();
    let net = lstm::train_lstm(&windows, LstmNetwork::init(&[3], spec, 1).unwrap(), &LstmTrainParams { epochs: 3, ..Default::default() }).unwrap();
    let series = DailySeries::from_values(1, VehicleClass::TC1, start(), values).unwrap();
    let f = lstm::forecast(&net, &series, 10, ForecastMode::OneStep).unwrap();
    assert!(f.values.iter().all(|&v| v == 40.0));
}

proptest! {
    #[test]
    fn normalisation_round_trips(values in prop::collection::vec(0.0..1e6f64, 2..50), pick in 0usize..50) {
        let n = Normalizer::fit(&values).unwrap();
        prop_assume!(n.max > n.min);
        let v = values[pick % values.len()];
        let back = n.denormalize(n.normalize(v));
        prop_assert!((back - v).abs() <= 1e-12 * n.max.max(1.0));
        prop_assert!((0.0..=1.0).contains(&n.normalize(v)));
    }

    #[test]
    fn window_counts(len in 2usize..300, lookback in 1usize..50, lookforward in 1usize..20) {
        prop_assume!(len >= lookback + lookforward);
        let w = lstm::make_windows_from_values(&wave(len), WindowSpec::new(lookback, lookforward).unwrap()).unwrap();
        prop_assert_eq!(w.len(), len - lookback - lookforward + 1);
    }
}

fn linear_task() -> (Vec<Vec<f64>>, Vec<f64>) {
    let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 99.0]).collect();
    let y = rows.iter().map(|r| 3.0 * r[0]).collect();
    (rows, y)
}

#[test]
fn mlp_fits_a_line() {
    let (rows, y) = linear_task();
    // least-squares slope and intercept as the reference fit
    let n = rows.len() as f64;
    let (mx, my) = (rows.iter().map(|r| r[0]).sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = rows.iter().zip(&y).map(|(r, t)| (r[0] - mx) * (t - my)).sum();
    let sxx: f64 = rows.iter().map(|r| (r[0] - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let ls_rmse = (rows.iter().zip(&y).map(|(r, t)| (my + slope * (r[0] - mx) - t).powi(2)).sum::<f64>() / n).sqrt();
    assert!(ls_rmse < 1e-12);

    let params = MlpParams {
        hidden_layer_sizes: vec![8],
        alpha: 0.0,
        max_iter: 2000,
        batch_size: 10,
        learning_rate: 0.05,
        activation: Activation::Tanh,
        seed: 1,
        tol: 1e-9,
    };
    let model = mlp::train(&rows, &y, &params).unwrap();
    let pred = model.predict(&rows).unwrap();
    let rmse = (pred.iter().zip(&y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n).sqrt();
    assert!(rmse < 0.05 * 3.0, "RMSE {rmse}");
}

#[test]
fn running_best_loss_never_increases() {
    let (rows, y) = linear_task();
    let params = MlpParams { hidden_layer_sizes: vec![5], max_iter: 200, learning_rate: 0.2, seed: 2, ..MlpParams::default() };
    let model = mlp::train(&rows, &y, &params).unwrap();
    let mut best = f64::INFINITY;
    let mut bests = Vec::new();
    for &l in &model.loss_trace {
        best = best.min(l);
        bests.push(best);
    }
    assert!(bests.windows(2).all(|w| w[1] <= w[0]));
    let final_loss = model.loss(&rows, &y, params.alpha).unwrap();
    assert!((final_loss - best).abs() <= 1e-12 * best.max(1e-12));
}

#[test]
fn stronger_regularisation_shrinks_weights() {
    let (rows, y) = linear_task();
    let norms: Vec<f64> = [0.0, 0.01, 1.0]
        .iter()
        .map(|&alpha| {
            let p = MlpParams { hidden_layer_sizes: vec![6], alpha, max_iter: 300, learning_rate: 0.05, activation: Activation::Tanh, seed: 4, ..MlpParams::default() };
            mlp::train(&rows, &y, &p).unwrap().squared_weight_norm()
        })
        .collect();
    assert!(norms[0] >= norms[1] && norms[1] >= norms[2], "{norms:?}");
}

#[test]
fn mlp_training_is_deterministic() {
    let (rows, y) = linear_task();
    let p = MlpParams { hidden_layer_sizes: vec![4, 3], max_iter: 20, seed: 8, ..MlpParams::default() };
    assert_eq!(mlp::train(&rows, &y, &p).unwrap(), mlp::train(&rows, &y, &p).unwrap());
}

#[test]
fn relu_gradients_away_from_kinks() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let params = MlpParams { hidden_layer_sizes: vec![6, 4], activation: Activation::Relu, seed: 12, ..MlpParams::default() };
    let model = mlp::MlpModel::init(2, &params).unwrap();
    let rows: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let y: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    assert!(mlp::gradient_check(&model, &rows, &y, 0.1, 1e-5).unwrap() < 1e-6);
}

use chrono::NaiveDate;
use proptest::prelude::*;
use traffic_forecast::preprocess::{
    deseasonalize, exponential_moving_average, impute_missing, median_filter, moving_average, reseasonalize,
};
use traffic_forecast::{DailySeries, VehicleClass};

fn series(values: Vec<f64>) -> DailySeries {
    DailySeries::from_values(3, VehicleClass::TC2, NaiveDate::from_ymd_opt(2014, 1, 1).unwrap(), values).unwrap()
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1.0..1e4f64, 7..80)
}

proptest! {
    #[test]
    fn windowed_filters_keep_length_and_range(v in values(), half in 0usize..3) {
        let window = 2 * half + 1;
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        for out in [median_filter(&series(v.clone()), window).unwrap(), moving_average(&series(v.clone()), window).unwrap()] {
            let out = out.dense().unwrap();
            prop_assert_eq!(out.len(), v.len());
            prop_assert!(out.iter().all(|&x| x >= lo - 1e-9 && x <= hi + 1e-9));
        }
    }

    #[test]
    fn window_one_is_identity(v in values()) {
        prop_assert_eq!(median_filter(&series(v.clone()), 1).unwrap().dense().unwrap(), v.clone());
        prop_assert_eq!(moving_average(&series(v.clone()), 1).unwrap().dense().unwrap(), v);
    }

    #[test]
    fn ema_follows_its_recurrence(v in values(), alpha in 0.01..1.0f64) {
        let out = exponential_moving_average(&series(v.clone()), alpha).unwrap().dense().unwrap();
        prop_assert_eq!(out[0], v[0]);
        for t in 1..v.len() {
            let want = alpha * v[t] + (1.0 - alpha) * out[t - 1];
            prop_assert!((out[t] - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn seasonal_round_trip(v in prop::collection::vec(1.0..1e4f64, 16..80), period in 2usize..8) {
        let s = series(v.clone());
        let (flat, idx) = deseasonalize(&s, period).unwrap();
        let mean: f64 = idx.indices().iter().sum::<f64>() / period as f64;
        prop_assert!((mean - 1.0).abs() < 1e-9);
        let back = reseasonalize(&flat, &idx, 0).unwrap().dense().unwrap();
        for (a, b) in back.iter().zip(&v) {
            prop_assert!((a - b).abs() <= 1e-9 * b.abs());
        }
    }

    #[test]
    fn imputation_fills_every_gap(v in prop::collection::vec(prop::option::weighted(0.7, 0.0..1e3f64), 1..60)) {
        prop_assume!(v.iter().any(Option::is_some));
        let s = DailySeries::new(1, VehicleClass::TC1, NaiveDate::from_ymd_opt(2014, 1, 1).unwrap(), v.clone()).unwrap();
        let out = impute_missing(&s).unwrap();
        prop_assert!(out.is_complete());
        for (a, b) in out.values().iter().zip(&v) {
            if let Some(b) = b {
                prop_assert_eq!(a.unwrap(), *b);
            }
        }
    }
}

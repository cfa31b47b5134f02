use proptest::prelude::*;
use traffic_forecast::eval::smape;

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(prop_oneof![Just(0.0), 0.0..1e5f64], n),
            prop::collection::vec(prop_oneof![Just(0.0), 0.0..1e5f64], n),
        )
    })
}

proptest! {
    #[test]
    fn symmetric((a, f) in pair()) {
        let (x, y) = (smape(&a, &f).unwrap(), smape(&f, &a).unwrap());
        prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
    }

    #[test]
    fn scale_invariant((a, f) in pair(), c in 1e-3..1e3f64) {
        let ca: Vec<f64> = a.iter().map(|v| c * v).collect();
        let cf: Vec<f64> = f.iter().map(|v| c * v).collect();
        let (x, y) = (smape(&a, &f).unwrap(), smape(&ca, &cf).unwrap());
        prop_assert!((x - y).abs() <= 1e-9 * x.max(1.0));
    }

    #[test]
    fn bounded((a, f) in pair()) {
        let s = smape(&a, &f).unwrap();
        prop_assert!((0.0..=200.0).contains(&s));
    }
}

#[test]
fn bounds_are_attained() {
    assert_eq!(smape(&[5.0, 9.0], &[5.0, 9.0]).unwrap(), 0.0);
    assert_eq!(smape(&[0.0], &[3.0]).unwrap(), 200.0);
    assert_eq!(smape(&[0.0], &[0.0]).unwrap(), 0.0);
}

#[test]
fn shape_errors() {
    assert!(smape(&[], &[]).is_err());
    assert!(smape(&[1.0], &[1.0, 2.0]).is_err());
}
